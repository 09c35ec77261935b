"""Bottom-up construction of the embodied memory tree.

Views are sorted by image_ref before any id is assigned, so the result
is byte-identical under input permutation. Per-view model calls may run
in parallel; assembly is strictly sequential and deterministic.
"""

from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .clustering import ClusteringParams, cluster_level
from .core import (
    AffordanceTriplet,
    EmbodiedMemory,
    Embedding,
    MemoryNode,
    Planting,
    Position3D,
    ViewRecord,
    validate_memory,
)
from .errors import BuildError, EmptyInputError, FormatError, StructureError
from .providers import InstanceProposal, Provider, ProviderConfig, build_provider

log = logging.getLogger(__name__)

LEVEL_NAMES = {1: "affordance", 2: "instance", 3: "view", 4: "zone", 5: "area"}

_DEFAULT_CUT = 0.5


def _default_clustering() -> dict[int, ClusteringParams]:
    return {
        4: ClusteringParams(cut_threshold=0.45),
        5: ClusteringParams(cut_threshold=0.60),
    }


@dataclass
class BuildConfig:
    """Settings for one memory build."""

    n_levels: int = 6
    d_t: int = 512
    d_m: int = 256
    clustering: dict[int, ClusteringParams] = field(default_factory=_default_clustering)
    provider_config: ProviderConfig = field(default_factory=ProviderConfig)

    def __post_init__(self):
        if self.n_levels < 4:
            raise ValueError("n_levels must be >= 4")
        if self.d_t < 1 or self.d_m < 1:
            raise ValueError("embedding dimensions must be positive")

    def clustering_for(self, level: int) -> ClusteringParams:
        params = self.clustering.get(level)
        if params is None:
            params = ClusteringParams(cut_threshold=_DEFAULT_CUT)
        return params


class _IdAllocator:
    """Deterministic node ids: env, level, per-level ordinal, content hash."""

    def __init__(self, env_id: str):
        self.env_id = env_id
        self._counters: dict[int, int] = {}

    def allocate(self, level: int, content_key: str) -> str:
        ordinal = self._counters.get(level, 0)
        self._counters[level] = ordinal + 1
        digest = hashlib.sha256(
            f"{self.env_id}|{level}|{content_key}".encode()
        ).hexdigest()[:8]
        return f"{self.env_id}/L{level}/{ordinal:05d}-{digest}"


@dataclass
class _ViewPayload:
    """Provider outputs for one view, fetched before node assembly."""

    record: ViewRecord
    description: str
    text_embedding: Embedding
    visual_embedding: Embedding
    proposals: list[InstanceProposal]


def _fetch_view_payload(record: ViewRecord, provider: Provider) -> _ViewPayload:
    description = provider.describe_view(record.image_ref)
    masks = provider.segment(record.image_ref)
    proposals = provider.propose_instances(record.image_ref, masks)
    return _ViewPayload(
        record=record,
        description=description,
        text_embedding=provider.embed_text(description).normalized(),
        visual_embedding=provider.embed_image_multimodal(record.image_ref).normalized(),
        proposals=proposals,
    )


def _assemble_view(payload: _ViewPayload, alloc: _IdAllocator) -> list[MemoryNode]:
    """Materialize one view node plus its instance and affordance children."""
    record = payload.record
    view_id = alloc.allocate(3, record.image_ref)
    nodes: list[MemoryNode] = []
    instance_ids: list[str] = []
    for proposal in payload.proposals:
        key = f"{record.image_ref}#m{proposal.mask_id}:{proposal.description}"
        instance_id = alloc.allocate(2, key)
        triplets = tuple(
            AffordanceTriplet(instance_id=instance_id, action=action, score=score)
            for action, score in proposal.affordances
        )
        affordance_ids = []
        for trip in triplets:
            aff_id = alloc.allocate(1, f"{key}@{trip.action}")
            affordance_ids.append(aff_id)
            nodes.append(
                MemoryNode(
                    id=aff_id,
                    level=1,
                    description=trip.action,
                    position=record.pose,
                    parent=instance_id,
                    affordance=trip,
                )
            )
        nodes.append(
            MemoryNode(
                id=instance_id,
                level=2,
                description=proposal.description,
                position=record.pose,
                parent=view_id,
                children=tuple(affordance_ids),
                affordances=triplets,
            )
        )
        instance_ids.append(instance_id)
    view = MemoryNode(
        id=view_id,
        level=3,
        description=payload.description,
        position=record.pose,
        text_embedding=payload.text_embedding,
        visual_embedding=payload.visual_embedding,
        children=tuple(instance_ids),
        image_ref=record.image_ref,
    )
    return [view] + nodes


def build_view_node(
    record: ViewRecord, provider: Provider, alloc: _IdAllocator | None = None
) -> list[MemoryNode]:
    """Build the level-3 node for one view together with its level-2 and
    level-1 children. The view node comes first in the returned list."""
    payload = _fetch_view_payload(record, provider)
    return _assemble_view(payload, alloc or _IdAllocator(record.env_id))


def summarize_cluster(
    cluster: list[MemoryNode],
    level: int,
    provider: Provider,
    alloc: _IdAllocator,
) -> MemoryNode:
    """Condense one cluster into its parent region node.

    The summary covers child descriptions in id order; the position is
    the member centroid.
    """
    members = sorted(cluster, key=lambda n: n.id)
    summary = provider.summarize([n.description for n in members])
    centroid = np.mean([n.position.as_tuple() for n in members], axis=0)
    node_id = alloc.allocate(level, "|".join(n.id for n in members))
    return MemoryNode(
        id=node_id,
        level=level,
        description=summary,
        position=Position3D(*centroid),
        text_embedding=provider.embed_text(summary).normalized(),
        children=tuple(n.id for n in members),
    )


def build_memory(
    views: list[ViewRecord],
    cfg: BuildConfig,
    provider: Provider | None = None,
) -> EmbodiedMemory:
    """Build a complete memory from view records.

    All-or-nothing: any view whose model calls fail aborts the build,
    and the raised BuildError lists every failed view.
    """
    views = list(views)
    if not views:
        raise EmptyInputError("no view records given")
    env_ids = {v.env_id for v in views}
    if len(env_ids) != 1:
        raise BuildError(f"views span several environments: {sorted(env_ids)}")
    refs = [v.image_ref for v in views]
    if len(set(refs)) != len(refs):
        dupes = sorted({r for r in refs if refs.count(r) > 1})
        raise BuildError(f"duplicate image_refs: {dupes}")
    env_id = views[0].env_id

    if provider is None:
        provider = build_provider(cfg.provider_config, cfg.d_t, cfg.d_m, views=views)

    ordered = sorted(views, key=lambda v: v.image_ref)

    def fetch(record):
        try:
            return _fetch_view_payload(record, provider), None
        except Exception as exc:  # collected below, build aborts
            return None, exc

    workers = cfg.provider_config.max_parallel_requests
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(fetch, ordered))
    else:
        results = [fetch(record) for record in ordered]

    failures = [
        (record.image_ref, exc)
        for record, (_, exc) in zip(ordered, results)
        if exc is not None
    ]
    if failures:
        detail = "; ".join(f"{ref}: {exc}" for ref, exc in failures)
        raise BuildError(
            f"{len(failures)} view(s) failed: {detail}",
            failed_view_ids=[ref for ref, _ in failures],
        )

    alloc = _IdAllocator(env_id)
    nodes: dict[str, MemoryNode] = {}
    for payload, _ in results:
        for node in _assemble_view(payload, alloc):
            nodes[node.id] = node

    def level_nodes(level):
        return sorted(
            (n for n in nodes.values() if n.level == level), key=lambda n: n.id
        )

    # grow regions one level at a time, then force a single root
    for level in range(4, cfg.n_levels):
        below = level_nodes(level - 1)
        clusters = cluster_level(below, cfg.clustering_for(level))
        for cluster in clusters:
            region = summarize_cluster(cluster, level, provider, alloc)
            nodes[region.id] = region
            for member in cluster:
                member.parent = region.id

    below = level_nodes(cfg.n_levels - 1)
    root = summarize_cluster(below, cfg.n_levels, provider, alloc)
    nodes[root.id] = root
    for member in below:
        member.parent = root.id

    memory = EmbodiedMemory(
        nodes, n_levels=cfg.n_levels, env_id=env_id, d_t=cfg.d_t, d_m=cfg.d_m
    )
    report = validate_memory(memory)
    if report:
        raise StructureError(
            f"built memory failed validation with {len(report)} violation(s)",
            violations=report,
        )
    return memory


def load_view_manifest(path) -> list[ViewRecord]:
    """Read view records from a JSONL manifest.

    Core fields: image_ref, pose {x, y, z}, width, height, env_id.
    Synthetic manifests add caption, room, and plantings
    [{description, action, score}] for the mock backend.
    """
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}:{lineno}: bad JSON: {exc}") from exc
            try:
                pose = raw["pose"]
                records.append(
                    ViewRecord(
                        image_ref=raw["image_ref"],
                        pose=Position3D(pose["x"], pose["y"], pose.get("z", 0.0)),
                        width=int(raw["width"]),
                        height=int(raw["height"]),
                        env_id=raw["env_id"],
                        caption=raw.get("caption"),
                        room=raw.get("room"),
                        plantings=tuple(
                            Planting(
                                description=p["description"],
                                action=p["action"],
                                score=float(p["score"]),
                            )
                            for p in raw.get("plantings", ())
                        ),
                    )
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise FormatError(f"{path}:{lineno}: bad view record: {exc}") from exc
    return records
