"""Domain types and vector/geometry primitives for the embodied memory.

The memory is a tree spanning levels 1..N: robot affordances (1),
object instances (2), camera views (3), zones (4), areas (5), up to a
single building root at level N. Levels 4..N are "regions". This module
holds the node and memory containers plus the small math helpers every
other module builds on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DegenerateVectorError, DimensionError

PICK = "pick"
PLACE = "place"

RECALL_CUTOFFS = (5, 10, 20)
SR_CUTOFFS = (1, 5, 10, 20)


class Embedding:
    """Fixed-length real vector compared by cosine similarity.

    Components are stored as a read-only float64 array and must all be
    finite. Embeddings entering a memory are L2-normalized at ingest so
    cosine similarity reduces to a dot product on the hot paths.
    """

    __slots__ = ("_values",)

    def __init__(self, values):
        arr = np.asarray(values, dtype=np.float64).reshape(-1)
        if arr.size == 0:
            raise ValueError("embedding needs at least one component")
        if not np.all(np.isfinite(arr)):
            raise ValueError("embedding components must be finite")
        arr = arr.copy()
        arr.flags.writeable = False
        self._values = arr

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def dim(self) -> int:
        return int(self._values.size)

    def norm(self) -> float:
        return float(np.linalg.norm(self._values))

    def normalized(self) -> "Embedding":
        n = self.norm()
        if n == 0.0:
            raise DegenerateVectorError("cannot normalize a zero vector")
        return Embedding(self._values / n)

    def tolist(self) -> list[float]:
        return self._values.tolist()

    def __eq__(self, other):
        return isinstance(other, Embedding) and np.array_equal(
            self._values, other._values
        )

    def __repr__(self):
        return f"Embedding(dim={self.dim})"


def cosine_similarity(a: Embedding, b: Embedding) -> float:
    """Cosine of the angle between two embeddings, in [-1, 1].

    Raises DimensionError on mismatched dims and DegenerateVectorError
    when either vector has zero norm.
    """
    if a.dim != b.dim:
        raise DimensionError(f"dim mismatch: {a.dim} vs {b.dim}")
    na = a.norm()
    nb = b.norm()
    if na == 0.0 or nb == 0.0:
        raise DegenerateVectorError("cosine undefined for zero vectors")
    value = float(np.dot(a.values, b.values)) / (na * nb)
    return max(-1.0, min(1.0, value))


@dataclass(frozen=True)
class Position3D:
    """A point in meters; orientation is deliberately not modeled."""

    x: float
    y: float
    z: float = 0.0

    def __post_init__(self):
        for name in ("x", "y", "z"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ValueError(f"position coordinate {name} must be finite")
            object.__setattr__(self, name, v)

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.z)


def euclidean_distance(a: Position3D, b: Position3D) -> float:
    return math.dist(a.as_tuple(), b.as_tuple())


@dataclass(frozen=True)
class AffordanceTriplet:
    """(instance, action, score) annotation attached to an instance node.

    ``action`` is a lowercase verb; "pick" and "place" are the built-in
    vocabulary and any other non-empty name is accepted as an extension.
    The score range [0, 1] is enforced at provider boundaries and checked
    by validate_memory; out-of-range triplets stay representable so that
    validation can report them as data rather than crash.
    """

    instance_id: str
    action: str
    score: float

    def __post_init__(self):
        if not self.action:
            raise ValueError("affordance action must be non-empty")
        object.__setattr__(self, "action", self.action.lower())
        object.__setattr__(self, "score", float(self.score))


class NodeKind(Enum):
    AFFORDANCE = 1
    INSTANCE = 2
    VIEW = 3
    REGION = 4

    @classmethod
    def for_level(cls, level: int) -> "NodeKind":
        if level < 1:
            raise ValueError("levels start at 1")
        return cls(min(level, 4))


@dataclass
class MemoryNode:
    """One node of the memory tree. Treated as immutable once its memory
    is constructed; the builder is the only writer."""

    id: str
    level: int
    description: str
    position: Position3D
    text_embedding: Embedding | None = None
    visual_embedding: Embedding | None = None
    parent: str | None = None
    children: tuple[str, ...] = ()
    image_ref: str | None = None
    # instance nodes mirror their affordance children here
    affordances: tuple[AffordanceTriplet, ...] | None = None
    # level-1 nodes carry the single triplet they materialize
    affordance: AffordanceTriplet | None = None

    @property
    def kind(self) -> NodeKind:
        return NodeKind.for_level(self.level)


@dataclass(frozen=True)
class Planting:
    """Ground-truth object annotation carried by synthetic view records."""

    description: str
    action: str
    score: float


@dataclass(frozen=True)
class ViewRecord:
    """Builder input: one captured viewpoint of the environment.

    ``caption``, ``room`` and ``plantings`` are the synthetic-annotation
    extension consumed by the mock backend; real pipelines leave them
    unset and rely on live or precomputed model outputs.
    """

    image_ref: str
    pose: Position3D
    width: int
    height: int
    env_id: str
    caption: str | None = None
    room: str | None = None
    plantings: tuple[Planting, ...] = ()

    def __post_init__(self):
        if not self.image_ref:
            raise ValueError("image_ref must be non-empty")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("view dimensions must be positive")
        if not self.env_id:
            raise ValueError("env_id must be non-empty")
        object.__setattr__(self, "plantings", tuple(self.plantings))


class EmbodiedMemory:
    """Immutable multi-level memory tree with per-level indexes.

    ``nodes`` maps id -> MemoryNode; ``levels`` maps level -> node ids
    sorted ascending. Per-level embedding matrices are cached lazily for
    vectorized scoring.
    """

    def __init__(
        self,
        nodes: Mapping[str, MemoryNode],
        n_levels: int,
        env_id: str,
        d_t: int,
        d_m: int,
    ):
        if n_levels < 4:
            raise ValueError("a memory needs at least 4 levels")
        self._nodes = dict(nodes)
        self._n_levels = int(n_levels)
        self._env_id = env_id
        self._d_t = int(d_t)
        self._d_m = int(d_m)
        by_level: dict[int, list[str]] = {}
        for node_id, node in self._nodes.items():
            by_level.setdefault(node.level, []).append(node_id)
        self._levels = {lvl: tuple(sorted(ids)) for lvl, ids in by_level.items()}
        self._text_cache: dict[int, tuple[dict[str, int], np.ndarray]] = {}
        self._visual_cache: tuple[dict[str, int], np.ndarray] | None = None

    @property
    def nodes(self) -> Mapping[str, MemoryNode]:
        return MappingProxyType(self._nodes)

    @property
    def levels(self) -> dict[int, tuple[str, ...]]:
        return dict(self._levels)

    @property
    def n_levels(self) -> int:
        return self._n_levels

    @property
    def env_id(self) -> str:
        return self._env_id

    @property
    def d_t(self) -> int:
        return self._d_t

    @property
    def d_m(self) -> int:
        return self._d_m

    def __len__(self) -> int:
        return len(self._nodes)

    def __contains__(self, node_id: str) -> bool:
        return node_id in self._nodes

    def node(self, node_id: str) -> MemoryNode:
        return self._nodes[node_id]

    def level_ids(self, level: int) -> tuple[str, ...]:
        return self._levels.get(level, ())

    def view_ids(self) -> tuple[str, ...]:
        return self.level_ids(3)

    def root_ids(self) -> tuple[str, ...]:
        return self.level_ids(self._n_levels)

    def _text_matrix(self, level: int) -> tuple[dict[str, int], np.ndarray]:
        """Row-normalized text embeddings for one level, keyed by node id."""
        cached = self._text_cache.get(level)
        if cached is not None:
            return cached
        ids = self.level_ids(level)
        rows = []
        for node_id in ids:
            emb = self._nodes[node_id].text_embedding
            if emb is None:
                raise DegenerateVectorError(
                    f"node {node_id} has no text embedding to score"
                )
            rows.append(emb.values)
        mat = np.vstack(rows) if rows else np.zeros((0, self._d_t))
        norms = np.linalg.norm(mat, axis=1)
        if np.any(norms == 0.0):
            raise DegenerateVectorError(f"zero-norm text embedding at level {level}")
        mat = mat / norms[:, None]
        index = {node_id: i for i, node_id in enumerate(ids)}
        self._text_cache[level] = (index, mat)
        return index, mat

    def _visual_matrix(self) -> tuple[dict[str, int], np.ndarray]:
        """Row-normalized visual embeddings for the view level."""
        if self._visual_cache is not None:
            return self._visual_cache
        ids = self.view_ids()
        rows = []
        for node_id in ids:
            emb = self._nodes[node_id].visual_embedding
            if emb is None:
                raise DegenerateVectorError(f"view {node_id} has no visual embedding")
            rows.append(emb.values)
        mat = np.vstack(rows) if rows else np.zeros((0, self._d_m))
        norms = np.linalg.norm(mat, axis=1)
        if np.any(norms == 0.0):
            raise DegenerateVectorError("zero-norm visual embedding")
        mat = mat / norms[:, None]
        index = {node_id: i for i, node_id in enumerate(ids)}
        self._visual_cache = (index, mat)
        return self._visual_cache

    def text_scores(self, node_ids: Sequence[str], query: Embedding) -> np.ndarray:
        """Cosine similarity of ``query`` against each node's text embedding.

        All nodes must live on the same level.
        """
        if not node_ids:
            return np.zeros(0)
        level = self._nodes[node_ids[0]].level
        index, mat = self._text_matrix(level)
        rows = np.array([index[i] for i in node_ids])
        if query.dim != mat.shape[1]:
            raise DimensionError(
                f"query dim {query.dim} vs text dim {mat.shape[1]}"
            )
        q = query.values
        qn = float(np.linalg.norm(q))
        if qn == 0.0:
            raise DegenerateVectorError("zero-norm query")
        return mat[rows] @ (q / qn)

    def visual_scores(self, view_ids: Sequence[str], query: Embedding) -> np.ndarray:
        """Cosine similarity of ``query`` against view visual embeddings."""
        if not view_ids:
            return np.zeros(0)
        index, mat = self._visual_matrix()
        rows = np.array([index[i] for i in view_ids])
        if query.dim != mat.shape[1]:
            raise DimensionError(
                f"query dim {query.dim} vs visual dim {mat.shape[1]}"
            )
        q = query.values
        qn = float(np.linalg.norm(q))
        if qn == 0.0:
            raise DegenerateVectorError("zero-norm query")
        return mat[rows] @ (q / qn)


@dataclass(frozen=True)
class Violation:
    """One structural defect found by validate_memory."""

    node_id: str
    rule: str
    detail: str


def _check_node_shape(node: MemoryNode, n_levels: int, out: list[Violation]):
    if not (1 <= node.level <= n_levels):
        out.append(
            Violation(node.id, "level-range", f"level {node.level} outside 1..{n_levels}")
        )
        return
    is_view = node.level == 3
    if (node.image_ref is not None) != is_view:
        out.append(
            Violation(node.id, "image-ref-presence", "image_ref present iff view node")
        )
    if (node.visual_embedding is not None) != is_view:
        out.append(
            Violation(
                node.id, "visual-embedding-presence", "visual embedding present iff view"
            )
        )
    if node.level >= 3 and node.text_embedding is None:
        out.append(
            Violation(node.id, "text-embedding-missing", "levels >= 3 need a text embedding")
        )
    if (node.affordances is not None) != (node.level == 2):
        out.append(
            Violation(
                node.id, "affordances-presence", "affordance list present iff instance node"
            )
        )
    if (node.affordance is not None) != (node.level == 1):
        out.append(
            Violation(
                node.id, "affordance-payload", "triplet payload present iff level-1 node"
            )
        )


def validate_memory(m: EmbodiedMemory) -> list[Violation]:
    """Check every structural invariant; an empty list means valid.

    Violations are data, not errors: callers that require validity wrap
    a non-empty report in StructureError themselves.
    """
    out: list[Violation] = []
    n = m.n_levels
    nodes = m.nodes

    for node_id, node in nodes.items():
        if node.id != node_id:
            out.append(Violation(node_id, "id-mismatch", "node id differs from map key"))
        _check_node_shape(node, n, out)

        if node.level == n:
            if node.parent is not None:
                out.append(Violation(node_id, "root-structure", "root-level node has a parent"))
        elif node.parent is None:
            out.append(Violation(node_id, "parent-missing", "non-root node without parent"))
        elif node.parent not in nodes:
            out.append(Violation(node_id, "parent-dangling", f"parent {node.parent!r} unknown"))
        else:
            parent = nodes[node.parent]
            if parent.level != node.level + 1:
                out.append(
                    Violation(
                        node_id,
                        "level-adjacency",
                        f"parent level {parent.level} is not {node.level + 1}",
                    )
                )
            if node_id not in parent.children:
                out.append(
                    Violation(node_id, "parent-consistency", "parent does not list this child")
                )

        for child_id in node.children:
            if child_id not in nodes:
                out.append(Violation(node_id, "child-dangling", f"child {child_id!r} unknown"))
            elif nodes[child_id].parent != node_id:
                out.append(
                    Violation(node_id, "parent-consistency", f"child {child_id} disagrees on parent")
                )

        if node.level == 2:
            seen_actions = set()
            for trip in node.affordances or ():
                if not (0.0 <= trip.score <= 1.0):
                    out.append(
                        Violation(
                            node_id,
                            "affordance-score-range",
                            f"score {trip.score} outside [0, 1]",
                        )
                    )
                if trip.action in seen_actions:
                    out.append(
                        Violation(
                            node_id, "affordance-action-unique", f"duplicate action {trip.action!r}"
                        )
                    )
                seen_actions.add(trip.action)
                if trip.instance_id != node_id:
                    out.append(
                        Violation(
                            node_id,
                            "affordance-target",
                            f"triplet points at {trip.instance_id!r}, not its instance",
                        )
                    )
            # the level-1 children must mirror the triplet list exactly
            mirrored = {
                (t.action, t.score) for t in (node.affordances or ())
            }
            child_payloads = set()
            for child_id in node.children:
                child = nodes.get(child_id)
                if child is None or child.affordance is None:
                    continue
                child_payloads.add((child.affordance.action, child.affordance.score))
            if mirrored != child_payloads:
                out.append(
                    Violation(
                        node_id,
                        "affordance-mirror",
                        "instance triplets and level-1 children disagree",
                    )
                )

        if node.text_embedding is not None and node.text_embedding.dim != m.d_t:
            out.append(
                Violation(
                    node_id,
                    "embedding-dim",
                    f"text dim {node.text_embedding.dim} != {m.d_t}",
                )
            )
        if node.visual_embedding is not None and node.visual_embedding.dim != m.d_m:
            out.append(
                Violation(
                    node_id,
                    "embedding-dim",
                    f"visual dim {node.visual_embedding.dim} != {m.d_m}",
                )
            )

    roots = m.root_ids()
    if len(roots) != 1:
        out.append(
            Violation(
                roots[0] if roots else "<memory>",
                "single-root",
                f"{len(roots)} level-{n} nodes, expected exactly 1",
            )
        )

    return out
