"""Disk format for built memories.

JSONL: a header object followed by one object per node in id order.
Serialization is canonical (sorted keys, compact separators, repr
floats), so equal memories produce byte-identical files.
"""

from __future__ import annotations

import json

from .core import (
    AffordanceTriplet,
    EmbodiedMemory,
    Embedding,
    MemoryNode,
    Position3D,
    validate_memory,
)
from .errors import FormatError, StructureError

SCHEMA_VERSION = 1


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _triplet_to_dict(t: AffordanceTriplet) -> dict:
    return {"instance_id": t.instance_id, "action": t.action, "score": t.score}


def _triplet_from_dict(raw) -> AffordanceTriplet:
    return AffordanceTriplet(
        instance_id=raw["instance_id"],
        action=raw["action"],
        score=float(raw["score"]),
    )


def node_to_dict(node: MemoryNode) -> dict:
    out = {
        "id": node.id,
        "level": node.level,
        "description": node.description,
        "position": list(node.position.as_tuple()),
        "parent": node.parent,
        "children": list(node.children),
    }
    if node.text_embedding is not None:
        out["text_embedding"] = node.text_embedding.tolist()
    if node.visual_embedding is not None:
        out["visual_embedding"] = node.visual_embedding.tolist()
    if node.image_ref is not None:
        out["image_ref"] = node.image_ref
    if node.affordances is not None:
        out["affordances"] = [_triplet_to_dict(t) for t in node.affordances]
    if node.affordance is not None:
        out["affordance"] = _triplet_to_dict(node.affordance)
    return out


def node_from_dict(raw) -> MemoryNode:
    try:
        return MemoryNode(
            id=raw["id"],
            level=int(raw["level"]),
            description=raw["description"],
            position=Position3D(*raw["position"]),
            text_embedding=(
                Embedding(raw["text_embedding"]) if "text_embedding" in raw else None
            ),
            visual_embedding=(
                Embedding(raw["visual_embedding"])
                if "visual_embedding" in raw
                else None
            ),
            parent=raw.get("parent"),
            children=tuple(raw.get("children", ())),
            image_ref=raw.get("image_ref"),
            affordances=(
                tuple(_triplet_from_dict(t) for t in raw["affordances"])
                if "affordances" in raw
                else None
            ),
            affordance=(
                _triplet_from_dict(raw["affordance"]) if "affordance" in raw else None
            ),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"bad node record: {exc}") from exc


def memory_to_lines(memory: EmbodiedMemory) -> list[str]:
    header = {
        "schema_version": SCHEMA_VERSION,
        "env_id": memory.env_id,
        "n_levels": memory.n_levels,
        "d_t": memory.d_t,
        "d_m": memory.d_m,
    }
    lines = [_dump(header)]
    for node_id in sorted(memory.nodes):
        lines.append(_dump(node_to_dict(memory.nodes[node_id])))
    return lines


def save_memory(memory: EmbodiedMemory, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for line in memory_to_lines(memory):
            fh.write(line + "\n")


def load_memory(path, validate: bool = True) -> EmbodiedMemory:
    """Load and re-validate a persisted memory.

    ``validate=False`` skips the structural check so callers can inspect
    a damaged file and report its violations themselves.
    """
    with open(path, encoding="utf-8") as fh:
        lines = [line for line in fh if line.strip()]
    if not lines:
        raise FormatError(f"{path}: empty memory file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: bad header: {exc}") from exc
    if not isinstance(header, dict) or "schema_version" not in header:
        raise FormatError(f"{path}: missing header")
    if header["schema_version"] != SCHEMA_VERSION:
        raise FormatError(
            f"{path}: unsupported schema_version {header['schema_version']!r}"
        )
    try:
        env_id = header["env_id"]
        n_levels = int(header["n_levels"])
        d_t = int(header["d_t"])
        d_m = int(header["d_m"])
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: bad header field: {exc}") from exc

    nodes = {}
    for lineno, line in enumerate(lines[1:], start=2):
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}:{lineno}: bad JSON: {exc}") from exc
        node = node_from_dict(raw)
        if node.id in nodes:
            raise FormatError(f"{path}:{lineno}: duplicate node id {node.id!r}")
        nodes[node.id] = node

    memory = EmbodiedMemory(nodes, n_levels=n_levels, env_id=env_id, d_t=d_t, d_m=d_m)
    if validate:
        report = validate_memory(memory)
        if report:
            raise StructureError(
                f"{path}: loaded memory failed validation with "
                f"{len(report)} violation(s)",
                violations=report,
            )
    return memory
