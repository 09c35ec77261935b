"""Spatio-semantic agglomerative clustering for region formation.

Sibling nodes merge bottom-up under a convex combination of a clamped
spatial distance and a cosine text distance. Average linkage, threshold
stopping, and id-based tie-breaking make the result deterministic under
any input permutation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import MemoryNode, euclidean_distance
from .errors import EmptyInputError, StructureError


@dataclass
class ClusteringParams:
    """Knobs for one clustered level.

    ``beta`` weighs space against semantics, ``d_scale`` is the distance
    (meters) at which the spatial term saturates at 1, and merging stops
    once the closest cluster pair is farther apart than
    ``cut_threshold``. Clusters smaller than ``min_cluster_size`` are
    absorbed into their nearest neighbor after the cut.
    """

    beta: float = 0.5
    d_scale: float = 5.0
    cut_threshold: float = 0.45
    linkage: str = "average"
    min_cluster_size: int = 1

    def __post_init__(self):
        if not (0.0 <= self.beta <= 1.0):
            raise ValueError("beta must lie in [0, 1]")
        if self.d_scale <= 0:
            raise ValueError("d_scale must be positive")
        if self.cut_threshold <= 0:
            raise ValueError("cut_threshold must be positive")
        if self.linkage != "average":
            raise ValueError("only average linkage is supported")
        if self.min_cluster_size < 1:
            raise ValueError("min_cluster_size must be >= 1")


def combined_distance(a: MemoryNode, b: MemoryNode, params: ClusteringParams) -> float:
    """beta * min(euclidean / d_scale, 1) + (1 - beta) * (1 - cos) / 2.

    Both terms live in [0, 1], so the combination does too. Requires
    positions and text embeddings on both nodes.
    """
    for node in (a, b):
        if node.position is None:
            raise StructureError(f"node {node.id} has no position")
        if node.text_embedding is None:
            raise StructureError(f"node {node.id} has no text embedding")
    spatial = min(euclidean_distance(a.position, b.position) / params.d_scale, 1.0)
    av = a.text_embedding.values
    bv = b.text_embedding.values
    na = float(np.linalg.norm(av))
    nb = float(np.linalg.norm(bv))
    if na == 0.0 or nb == 0.0:
        raise StructureError("zero-norm text embedding in distance computation")
    cos = max(-1.0, min(1.0, float(np.dot(av, bv)) / (na * nb)))
    return params.beta * spatial + (1.0 - params.beta) * (1.0 - cos) / 2.0


def _distance_matrix(nodes: list[MemoryNode], params: ClusteringParams) -> np.ndarray:
    positions = np.array([n.position.as_tuple() for n in nodes])
    embs = np.vstack([n.text_embedding.values for n in nodes])
    norms = np.linalg.norm(embs, axis=1)
    if np.any(norms == 0.0):
        raise StructureError("zero-norm text embedding in distance computation")
    unit = embs / norms[:, None]
    cos = np.clip(unit @ unit.T, -1.0, 1.0)
    diff = positions[:, None, :] - positions[None, :, :]
    euclid = np.sqrt(np.sum(diff * diff, axis=2))
    spatial = np.minimum(euclid / params.d_scale, 1.0)
    return params.beta * spatial + (1.0 - params.beta) * (1.0 - cos) / 2.0


class _Forest:
    """Active clusters plus their average-linkage distances."""

    def __init__(self, nodes: list[MemoryNode], params: ClusteringParams):
        self.members: list[list[int]] = [[i] for i in range(len(nodes))]
        # representative = lexicographically smallest member id
        self.reps: list[str] = [n.id for n in nodes]
        self.dist = _distance_matrix(nodes, params)
        self.active: list[int] = list(range(len(nodes)))

    def closest_pair(self) -> tuple[float, int, int] | None:
        """Minimum-distance active pair; distance ties break on the
        lexicographically smallest (rep_a, rep_b) pair."""
        if len(self.active) < 2:
            return None
        idx = np.array(self.active)
        sub = self.dist[np.ix_(idx, idx)]
        rows, cols = np.triu_indices(len(idx), k=1)
        vals = sub[rows, cols]
        m = float(vals.min())
        best = None
        for flat in np.nonzero(vals == m)[0]:
            i = int(idx[rows[flat]])
            j = int(idx[cols[flat]])
            pair = tuple(sorted((self.reps[i], self.reps[j])))
            if best is None or pair < best[0]:
                best = (pair, i, j)
        return m, best[1], best[2]

    def merge(self, i: int, j: int) -> None:
        """Lance-Williams average-linkage update, absorbing j into i."""
        ni, nj = len(self.members[i]), len(self.members[j])
        total = ni + nj
        others = np.array([k for k in self.active if k not in (i, j)], dtype=int)
        if others.size:
            updated = (ni * self.dist[i, others] + nj * self.dist[j, others]) / total
            self.dist[i, others] = updated
            self.dist[others, i] = updated
        self.members[i].extend(self.members[j])
        self.reps[i] = min(self.reps[i], self.reps[j])
        self.active.remove(j)


def cluster_level(nodes, params: ClusteringParams) -> list[list[MemoryNode]]:
    """Group same-level sibling nodes into clusters.

    Returns clusters ordered by their smallest member id, members sorted
    by id. One node yields one singleton cluster; identical nodes always
    land in one cluster because every pairwise distance is zero.
    """
    nodes = list(nodes)
    if not nodes:
        raise EmptyInputError("cluster_level needs at least one node")
    levels = {n.level for n in nodes}
    if len(levels) != 1:
        raise StructureError(f"cannot cluster across levels {sorted(levels)}")

    forest = _Forest(nodes, params)
    while True:
        pair = forest.closest_pair()
        if pair is None:
            break
        d, i, j = pair
        if d > params.cut_threshold:
            break
        forest.merge(i, j)

    # absorb undersized clusters into their nearest neighbor
    if params.min_cluster_size > 1:
        while len(forest.active) > 1:
            small = [
                c for c in forest.active if len(forest.members[c]) < params.min_cluster_size
            ]
            if not small:
                break
            c = min(small, key=lambda c: (len(forest.members[c]), forest.reps[c]))
            target = min(
                (k for k in forest.active if k != c),
                key=lambda k: (forest.dist[c, k], forest.reps[k]),
            )
            lo, hi = sorted((c, target), key=lambda k: forest.reps[k])
            forest.merge(lo, hi)

    clusters = []
    for c in forest.active:
        group = sorted((nodes[i] for i in forest.members[c]), key=lambda n: n.id)
        clusters.append(group)
    clusters.sort(key=lambda group: group[0].id)
    return clusters
