"""Deterministic offline backend.

Embeddings use signed feature hashing over lowercase alphanumeric
tokens, so token overlap translates directly into cosine similarity and
every output is reproducible across processes and platforms. Perception
operations replay the ground-truth annotations carried by synthetic
view records; language operations are small rule-based routines.
"""

from __future__ import annotations

import hashlib
import re

import numpy as np

from ..core import Embedding, Planting, ViewRecord
from ..errors import DecompositionError, ProviderError
from .base import (
    InstanceProposal,
    Provider,
    ProviderConfig,
    SegmentMask,
    check_proposal_scores,
)

_TOKEN_RE = re.compile(r"[a-z0-9]+")

# leading politeness / carry verbs stripped before the motion split
_PREFIX_RE = re.compile(
    r"^(?:(?:please|kindly)\s+)?(?:(?:could|can|would)\s+you\s+)?"
    r"(?:(?:bring|take|carry|move|deliver|transport|fetch|grab|put|place|return|hand)\s+(?:me\s+)?)?",
    re.IGNORECASE,
)
_MOTION_RE = re.compile(r"\b(?:onto|to|on)\b", re.IGNORECASE)
_TRAILING_CONNECTOR_RE = re.compile(
    r"(?:,?\s+and)?\s+(?:place|put|set|move|bring|deliver|carry|drop|leave|transport)"
    r"(?:\s+(?:it|them|this|that))?\s*$",
    re.IGNORECASE,
)


def tokenize(text: str) -> list[str]:
    """Lowercase alphanumeric tokens, in order."""
    return _TOKEN_RE.findall(text.lower())


def hash_embed(text: str, dim: int, salt: str) -> Embedding:
    """Signed feature hashing: each token lands in one of ``dim`` buckets
    with a +/-1 sign, counts accumulate, and the result is L2-normalized.

    Distinct salts give independent embedding spaces, so the text space
    and the multimodal space never collide structurally.
    """
    tokens = tokenize(text)
    if not tokens:
        raise ProviderError(
            ProviderError.EMPTY_INPUT, f"no tokens to embed in {text!r}"
        )
    vec = np.zeros(dim)
    for tok in tokens:
        digest = hashlib.sha256(f"{salt}\x1f{tok}".encode()).digest()
        bucket = int.from_bytes(digest[:8], "big") % dim
        sign = 1.0 if digest[8] & 1 else -1.0
        vec[bucket] += sign
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        # every token pair collided with opposite signs (probability
        # ~1/(2*dim) per pair); real encoders never emit zero vectors,
        # so fall back to a one-hot direction hashed from the whole text
        digest = hashlib.sha256(f"{salt}\x1f\x1f{text}".encode()).digest()
        vec[int.from_bytes(digest[:8], "big") % dim] = 1.0
        norm = 1.0
    return Embedding(vec / norm)


def jaccard(a: str, b: str) -> float:
    """Token-set overlap in [0, 1]."""
    sa, sb = set(tokenize(a)), set(tokenize(b))
    if not sa and not sb:
        return 0.0
    union = sa | sb
    if not union:
        return 0.0
    return len(sa & sb) / len(union)


def rule_decompose(instruction: str) -> tuple[str, str]:
    """Split an instruction into (target phrase, receptacle phrase).

    Strips a leading courtesy/carry-verb prefix, splits at the leftmost
    standalone motion word (onto / to / on), and trims a trailing
    placement connector from the target side. Raises DecompositionError
    when no split is possible.
    """
    text = instruction.strip().strip(".!?").strip()
    if not text:
        raise DecompositionError("empty instruction")
    m = _PREFIX_RE.match(text)
    if m:
        text = text[m.end():]
    split = _MOTION_RE.search(text)
    if split is None:
        raise DecompositionError(
            f"no motion word found in {instruction!r}"
        )
    target = text[: split.start()].strip(" ,")
    receptacle = text[split.end():].strip(" ,")
    target = _TRAILING_CONNECTOR_RE.sub("", target).strip(" ,")
    if not target or not receptacle:
        raise DecompositionError(
            f"could not split {instruction!r} into two phrases"
        )
    return target, receptacle


def _merge_descriptions(descriptions: list[str]) -> str:
    """Merge "head: item, item" style descriptions, deduplicating items
    per head while keeping first-appearance order."""
    groups: dict[str, list[str]] = {}
    order: list[str] = []
    for desc in descriptions:
        for segment in desc.split(" | "):
            head, sep, items = segment.partition(": ")
            if not sep:
                head, items = "", segment
            if head not in groups:
                groups[head] = []
                order.append(head)
            seen = groups[head]
            for item in re.split(r"[;,]\s*", items):
                item = item.strip()
                if item and item not in seen:
                    seen.append(item)
    parts = []
    for head in order:
        body = "; ".join(groups[head])
        parts.append(f"{head}: {body}" if head else body)
    return " | ".join(parts)


class MockProvider(Provider):
    """Fully offline backend driven by synthetic annotations."""

    TEXT_SALT = "text"
    MULTIMODAL_SALT = "multimodal"

    def __init__(
        self,
        d_t: int,
        d_m: int,
        views: tuple[ViewRecord, ...] | list[ViewRecord] = (),
        config: ProviderConfig | None = None,
    ):
        if d_t < 1 or d_m < 1:
            raise ValueError("embedding dimensions must be positive")
        self.d_t = d_t
        self.d_m = d_m
        self.config = config or ProviderConfig(backend="mock")
        self._views: dict[str, ViewRecord] = {}
        self.register_views(views)

    def register_views(self, views) -> None:
        for record in views:
            self._views[record.image_ref] = record

    def _view(self, image_ref: str) -> ViewRecord:
        record = self._views.get(image_ref)
        if record is None:
            raise ProviderError(
                ProviderError.MISSING_PRECOMPUTED,
                f"no registered annotations for {image_ref!r}",
            )
        return record

    @staticmethod
    def _grouped(plantings) -> list[tuple[str, list[tuple[str, float]]]]:
        """Plantings grouped by description in first-appearance order; a
        description planted with several actions yields one instance with
        several affordances."""
        order: list[str] = []
        acc: dict[str, list[tuple[str, float]]] = {}
        for p in plantings:
            if p.description not in acc:
                acc[p.description] = []
                order.append(p.description)
            acc[p.description].append((p.action, p.score))
        return [(desc, acc[desc]) for desc in order]

    # -- embeddings ----------------------------------------------------

    def embed_text(self, text: str) -> Embedding:
        return hash_embed(text, self.d_t, self.TEXT_SALT)

    def embed_query_multimodal(self, text: str) -> Embedding:
        return hash_embed(text, self.d_m, self.MULTIMODAL_SALT)

    def embed_image_multimodal(self, image_ref: str) -> Embedding:
        record = self._view(image_ref)
        if not record.caption:
            raise ProviderError(
                ProviderError.MISSING_PRECOMPUTED,
                f"view {image_ref!r} carries no caption to embed",
            )
        # images embed exactly like their caption text, so a caption
        # query aligns with its view at cosine 1.0 by construction
        return self.embed_query_multimodal(record.caption)

    # -- perception ----------------------------------------------------

    def segment(self, image_ref: str) -> list[SegmentMask]:
        record = self._view(image_ref)
        groups = self._grouped(record.plantings)
        masks = []
        n = max(len(groups), 1)
        slot = max(record.width // n, 1)
        for i, _ in enumerate(groups):
            width = min(slot, record.width - i * slot) or 1
            masks.append(
                SegmentMask(
                    mask_id=i,
                    bbox=(i * slot, 0, width, record.height),
                    area_px=width * record.height,
                )
            )
        return masks

    def propose_instances(self, image_ref, masks) -> list[InstanceProposal]:
        record = self._view(image_ref)
        groups = self._grouped(record.plantings)
        proposals = []
        for mask in masks:
            if mask.mask_id >= len(groups):
                raise ProviderError(
                    ProviderError.MISSING_PRECOMPUTED,
                    f"mask {mask.mask_id} has no planted object in {image_ref!r}",
                )
            desc, affordances = groups[mask.mask_id]
            proposals.append(
                InstanceProposal(
                    mask_id=mask.mask_id,
                    description=desc,
                    affordances=tuple(affordances),
                )
            )
        check_proposal_scores(proposals, "mock")
        return proposals

    def describe_view(self, image_ref: str) -> str:
        record = self._view(image_ref)
        room = record.room or "unlabeled"
        items = [desc for desc, _ in self._grouped(record.plantings)]
        if not items:
            return room
        return f"{room}: {', '.join(items)}"

    # -- language ------------------------------------------------------

    def summarize(self, descriptions) -> str:
        descriptions = list(descriptions)
        if not descriptions:
            raise ProviderError(ProviderError.EMPTY_INPUT, "nothing to summarize")
        if len(descriptions) == 1:
            merged = descriptions[0]
        else:
            merged = _merge_descriptions(descriptions)
        return merged[: self.config.max_summary_chars]

    def score_instances(self, phrase, candidates) -> list[tuple[str, float]]:
        candidates = list(candidates)
        if not candidates:
            raise ProviderError(ProviderError.EMPTY_INPUT, "no candidates to score")
        return [(cid, jaccard(phrase, desc)) for cid, desc in candidates]

    def decompose_instruction(self, instruction: str) -> tuple[str, str]:
        return rule_decompose(instruction)
