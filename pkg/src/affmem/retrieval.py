"""Query-time engine: top-down traversal, score fusion, reranking.

An instruction is decomposed into a target phrase and a receptacle
phrase; each phrase is answered independently with a ranked view list.
The tree is walked root-down with a text-only beam, candidate views are
scored by a text/visual blend, and the blended order is optionally
corrected by instance-level reranking.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import PICK, PLACE, EmbodiedMemory, Embedding
from .errors import (
    ConfigError,
    DecompositionError,
    EmptyCandidateSetError,
    ProviderError,
)
from .providers import Provider, check_relevance_scores
from .providers.mock import jaccard

ROLE_TARGET = "target_object"
ROLE_RECEPTACLE = "receptacle"
ROLES = (ROLE_TARGET, ROLE_RECEPTACLE)

STAGE_FUSION = "fusion"
STAGE_RERANK = "rerank"

_ROLE_ACTION = {ROLE_TARGET: PICK, ROLE_RECEPTACLE: PLACE}


@dataclass(frozen=True)
class RetrievalConfig:
    """Knobs for one retrieval run.

    ``alpha`` weighs the text channel against the visual channel when
    fusing view scores. ``k_b`` is the per-level beam width, ``k_r`` the
    reranked window, ``k_f`` the number of instances promoted out of it.
    """

    alpha: float = 0.5
    k_b: int = 5
    k_r: int = 20
    k_f: int = 5
    enable_rerank: bool = True
    enable_asr: bool = True
    caption_rerank: bool = False

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha must lie in [0, 1], got {self.alpha}")
        for name in ("k_b", "k_r", "k_f"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "k_b": self.k_b,
            "k_r": self.k_r,
            "k_f": self.k_f,
            "enable_rerank": self.enable_rerank,
            "enable_asr": self.enable_asr,
            "caption_rerank": self.caption_rerank,
        }


@dataclass(frozen=True)
class Query:
    """One role's sub-instruction with both of its embedded forms."""

    instruction: str
    role: str
    phrase: str
    text_embedding: Embedding
    visual_embedding: Embedding


@dataclass(frozen=True)
class RankedEntry:
    rank: int
    view_id: str
    image_ref: str
    score: float
    stage: str


@dataclass(frozen=True)
class RankedList:
    role: str
    phrase: str
    entries: tuple[RankedEntry, ...]

    def view_ids(self) -> list[str]:
        return [e.view_id for e in self.entries]

    def rank_of(self, view_id: str) -> int | None:
        """1-based rank, or None when the view never surfaced."""
        for entry in self.entries:
            if entry.view_id == view_id:
                return entry.rank
        return None


@dataclass(frozen=True)
class RetrievalResult:
    """Both role lists for one instruction. ``fallbacks`` records any
    degraded paths taken (currently only instruction decomposition)."""

    instruction: str
    target: RankedList
    receptacle: RankedList
    fallbacks: tuple[str, ...] = ()

    def for_role(self, role: str) -> RankedList:
        if role == ROLE_TARGET:
            return self.target
        if role == ROLE_RECEPTACLE:
            return self.receptacle
        raise ConfigError(f"unknown role {role!r}")


def build_query(
    instruction: str, phrase: str, role: str, provider: Provider
) -> Query:
    return Query(
        instruction=instruction,
        role=role,
        phrase=phrase,
        text_embedding=provider.embed_text(phrase).normalized(),
        visual_embedding=provider.embed_query_multimodal(phrase).normalized(),
    )


def traverse(
    memory: EmbodiedMemory, query: Query, k_b: int
) -> tuple[list[str], dict[int, list[str]]]:
    """Beam-walk the tree from the top down to the view level.

    Levels N..4 keep only the ``k_b`` best text matches (ties broken by
    ascending id) before descending; the resulting view set is returned
    unpruned along with the per-level survivors.
    """
    frontier = list(memory.root_ids())
    kept: dict[int, list[str]] = {}
    for level in range(memory.n_levels, 3, -1):
        if not frontier:
            raise EmptyCandidateSetError(f"no candidates at level {level}")
        scores = memory.text_scores(frontier, query.text_embedding)
        order = sorted(range(len(frontier)), key=lambda i: (-scores[i], frontier[i]))
        survivors = [frontier[i] for i in order[:k_b]]
        kept[level] = survivors
        frontier = sorted(
            child for node_id in survivors for child in memory.node(node_id).children
        )
    if not frontier:
        raise EmptyCandidateSetError("traversal reached no views")
    return frontier, kept


def fuse(
    memory: EmbodiedMemory, view_ids: list[str], query: Query, alpha: float
) -> list[tuple[str, float]]:
    """Blend text and visual cosine scores and sort the views.

    score = alpha * cos(text) + (1 - alpha) * cos(visual); ties broken
    by ascending view id.
    """
    if not view_ids:
        raise EmptyCandidateSetError("no views to fuse")
    text = memory.text_scores(view_ids, query.text_embedding)
    visual = memory.visual_scores(view_ids, query.visual_embedding)
    fused = alpha * text + (1.0 - alpha) * visual
    order = sorted(range(len(view_ids)), key=lambda i: (-fused[i], view_ids[i]))
    return [(view_ids[i], float(fused[i])) for i in order]


def prefilter_instances(
    memory: EmbodiedMemory, view_ids: list[str], role: str
) -> list[tuple[str, float]]:
    """Instances inside the given views that afford the role's action.

    Returns (instance_id, affordance score) pairs; the score is the
    best one the instance carries for that action.
    """
    action = _ROLE_ACTION.get(role)
    if action is None:
        raise ConfigError(f"unknown role {role!r}")
    out = []
    for view_id in view_ids:
        for inst_id in memory.node(view_id).children:
            triplets = memory.node(inst_id).affordances or ()
            scores = [t.score for t in triplets if t.action == action]
            if scores:
                out.append((inst_id, max(scores)))
    return out


def _caption_rerank(memory, fused, k_r, phrase):
    """Reorder the window by description overlap with the phrase; ties
    keep the fused order. A text-only stand-in for instance reranking."""
    window = fused[:k_r]
    overlaps = [
        jaccard(phrase, memory.node(view_id).description) for view_id, _ in window
    ]
    order = sorted(range(len(window)), key=lambda i: -overlaps[i])
    reordered = [(window[i][0], overlaps[i]) for i in order]
    return reordered, fused[k_r:]


def rerank(
    memory: EmbodiedMemory,
    fused: list[tuple[str, float]],
    query: Query,
    role: str,
    cfg: RetrievalConfig,
    provider: Provider,
) -> list[RankedEntry]:
    """Correct the fused order inside the top-``k_r`` window.

    Instances from the window that afford the role's action are scored
    for descriptive relevance to the phrase; the best ``k_f`` promote
    their views to the front. With affordance reordering enabled the
    promoted set is sorted by affordance score first, so equally
    relevant candidates surface by physical suitability.
    """

    def entry(rank, view_id, score, stage):
        node = memory.node(view_id)
        return RankedEntry(
            rank=rank,
            view_id=view_id,
            image_ref=node.image_ref or view_id,
            score=float(score),
            stage=stage,
        )

    def fused_only():
        return [
            entry(i + 1, view_id, score, STAGE_FUSION)
            for i, (view_id, score) in enumerate(fused)
        ]

    if not cfg.enable_rerank:
        return fused_only()

    if cfg.caption_rerank:
        head, tail = _caption_rerank(memory, fused, cfg.k_r, query.phrase)
        out = [
            entry(i + 1, view_id, score, STAGE_RERANK)
            for i, (view_id, score) in enumerate(head)
        ]
        base = len(out)
        out += [
            entry(base + i + 1, view_id, score, STAGE_FUSION)
            for i, (view_id, score) in enumerate(tail)
        ]
        return out

    window = fused[: cfg.k_r]
    candidates = prefilter_instances(memory, [v for v, _ in window], role)
    if not candidates:
        return fused_only()

    inst_ids = [inst_id for inst_id, _ in candidates]
    pairs = [(i, memory.node(i).description) for i in inst_ids]
    scored = provider.score_instances(query.phrase, pairs)
    check_relevance_scores(scored, "rerank")
    f_by_id = dict(candidates)
    rel_by_id = dict(scored)
    missing = [i for i in inst_ids if i not in rel_by_id]
    if missing:
        raise ProviderError(
            ProviderError.PARSE_FAILURE,
            f"relevance scores missing for instances: {missing}",
        )

    by_relevance = sorted(inst_ids, key=lambda i: (-rel_by_id[i], i))
    selected = by_relevance[: cfg.k_f]
    if cfg.enable_asr:
        selected = sorted(selected, key=lambda i: (-f_by_id[i], -rel_by_id[i], i))

    promoted: list[tuple[str, float]] = []
    seen = set()
    for inst_id in selected:
        view_id = memory.node(inst_id).parent
        if view_id in seen:
            continue
        seen.add(view_id)
        score = f_by_id[inst_id] if cfg.enable_asr else rel_by_id[inst_id]
        promoted.append((view_id, score))

    out = [
        entry(i + 1, view_id, score, STAGE_RERANK)
        for i, (view_id, score) in enumerate(promoted)
    ]
    rest = [(v, s) for v, s in window if v not in seen] + fused[cfg.k_r :]
    base = len(out)
    out += [
        entry(base + i + 1, view_id, score, STAGE_FUSION)
        for i, (view_id, score) in enumerate(rest)
    ]
    return out


def retrieve_phrase(
    memory: EmbodiedMemory,
    instruction: str,
    phrase: str,
    role: str,
    cfg: RetrievalConfig,
    provider: Provider,
) -> RankedList:
    """Full pipeline for one phrase: traverse, fuse, rerank."""
    if role not in ROLES:
        raise ConfigError(f"unknown role {role!r}")
    query = build_query(instruction, phrase, role, provider)
    view_ids, _ = traverse(memory, query, cfg.k_b)
    fused = fuse(memory, view_ids, query, cfg.alpha)
    entries = rerank(memory, fused, query, role, cfg, provider)
    return RankedList(role=role, phrase=phrase, entries=tuple(entries))


def retrieve(
    memory: EmbodiedMemory,
    instruction: str,
    cfg: RetrievalConfig,
    provider: Provider,
) -> RetrievalResult:
    """Answer a pick-and-place instruction with two ranked view lists.

    When the instruction cannot be split into target and receptacle
    phrases, both pipelines run on the whole instruction and the result
    records the degraded path.
    """
    fallbacks: tuple[str, ...] = ()
    try:
        target_phrase, receptacle_phrase = provider.decompose_instruction(instruction)
    except DecompositionError:
        target_phrase = receptacle_phrase = instruction
        fallbacks = ("decomposition: whole instruction used for both roles",)
    return RetrievalResult(
        instruction=instruction,
        target=retrieve_phrase(
            memory, instruction, target_phrase, ROLE_TARGET, cfg, provider
        ),
        receptacle=retrieve_phrase(
            memory, instruction, receptacle_phrase, ROLE_RECEPTACLE, cfg, provider
        ),
        fallbacks=fallbacks,
    )


def ranked_list_to_json_dict(
    ranked: RankedList,
    cfg: RetrievalConfig,
    instruction: str = "",
    fallbacks: tuple[str, ...] = (),
) -> dict:
    return {
        "instruction": instruction,
        "role": ranked.role,
        "phrase": ranked.phrase,
        "config_echo": cfg.to_dict(),
        "fallbacks": list(fallbacks),
        "entries": [
            {
                "rank": e.rank,
                "view_id": e.view_id,
                "image_ref": e.image_ref,
                "score": e.score,
                "stage": e.stage,
            }
            for e in ranked.entries
        ],
    }


def result_to_json_dicts(
    result: RetrievalResult, cfg: RetrievalConfig
) -> tuple[dict, dict]:
    """One JSON document per role list, target first."""
    return (
        ranked_list_to_json_dict(
            result.target, cfg, result.instruction, result.fallbacks
        ),
        ranked_list_to_json_dict(
            result.receptacle, cfg, result.instruction, result.fallbacks
        ),
    )
