"""Precomputed-file backend: replays model outputs from a JSONL store.

Embedding records look like ``{"key", "role", "dim", "values"}``;
structured outputs (masks, proposals, descriptions, summaries, scores,
decompositions) use ``{"key", "role", "payload"}``. Lookups that miss
raise ProviderError(missing-precomputed). Unknown roles are skipped with
a warning so stores can carry extra data for other consumers.
"""

from __future__ import annotations

import hashlib
import json
import logging

from ..core import Embedding
from ..errors import FormatError, ProviderError
from .base import (
    InstanceProposal,
    Provider,
    ProviderConfig,
    SegmentMask,
    ROLE_DECOMPOSITION,
    ROLE_IMAGE,
    ROLE_MULTIMODAL,
    ROLE_PROPOSALS,
    ROLE_SCORES,
    ROLE_SEGMENTS,
    ROLE_SUMMARY,
    ROLE_TEXT,
    ROLE_VIEW_DESCRIPTION,
    check_proposal_scores,
    check_relevance_scores,
)

log = logging.getLogger(__name__)

_EMBEDDING_ROLES = (ROLE_TEXT, ROLE_MULTIMODAL, ROLE_IMAGE)
_PAYLOAD_ROLES = (
    ROLE_SEGMENTS,
    ROLE_PROPOSALS,
    ROLE_VIEW_DESCRIPTION,
    ROLE_SUMMARY,
    ROLE_SCORES,
    ROLE_DECOMPOSITION,
)


def summary_key(descriptions) -> str:
    """Stable lookup key for a summarize() call."""
    joined = "\x1e".join(descriptions)
    return hashlib.sha256(joined.encode()).hexdigest()


def scores_key(phrase, candidates) -> str:
    """Stable lookup key for a score_instances() call."""
    joined = "\x1e".join([phrase] + [f"{cid}\x1f{desc}" for cid, desc in candidates])
    return hashlib.sha256(joined.encode()).hexdigest()


def write_records(path, records) -> None:
    """Write precomputed records as one JSON object per line."""
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, sort_keys=True, separators=(",", ":")))
            fh.write("\n")


class FileProvider(Provider):
    """Replay backend over a precomputed JSONL store."""

    def __init__(self, config: ProviderConfig):
        if not config.precomputed_path:
            raise ProviderError(
                ProviderError.MISSING_PRECOMPUTED,
                "file backend needs precomputed_path",
            )
        self.config = config
        self._store: dict[tuple[str, str], dict] = {}
        self._load(config.precomputed_path)

    def _load(self, path: str) -> None:
        try:
            with open(path, encoding="utf-8") as fh:
                lines = fh.read().splitlines()
        except OSError as exc:
            raise ProviderError(
                ProviderError.MISSING_PRECOMPUTED, f"cannot read {path}: {exc}"
            ) from exc
        for lineno, line in enumerate(lines, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}:{lineno}: bad JSON: {exc}") from exc
            role = record.get("role")
            key = record.get("key")
            if not isinstance(role, str) or not isinstance(key, str):
                raise FormatError(f"{path}:{lineno}: record needs string key and role")
            if role in _EMBEDDING_ROLES:
                values = record.get("values")
                dim = record.get("dim")
                if not isinstance(values, list) or dim != len(values):
                    raise FormatError(
                        f"{path}:{lineno}: embedding record dim/values mismatch"
                    )
            elif role in _PAYLOAD_ROLES:
                if "payload" not in record:
                    raise FormatError(f"{path}:{lineno}: payload record without payload")
            else:
                log.warning("ignoring unknown role %r in %s:%d", role, path, lineno)
                continue
            self._store[(role, key)] = record

    def _get(self, role: str, key: str) -> dict:
        record = self._store.get((role, key))
        if record is None:
            raise ProviderError(
                ProviderError.MISSING_PRECOMPUTED,
                f"no precomputed {role} for key {key!r}",
            )
        return record

    def _embedding(self, role: str, key: str) -> Embedding:
        record = self._get(role, key)
        # stored vectors are returned bit-exact, not renormalized
        return Embedding(record["values"])

    def embed_text(self, text: str) -> Embedding:
        if not text:
            raise ProviderError(ProviderError.EMPTY_INPUT, "empty text")
        return self._embedding(ROLE_TEXT, text)

    def embed_query_multimodal(self, text: str) -> Embedding:
        if not text:
            raise ProviderError(ProviderError.EMPTY_INPUT, "empty text")
        return self._embedding(ROLE_MULTIMODAL, text)

    def embed_image_multimodal(self, image_ref: str) -> Embedding:
        return self._embedding(ROLE_IMAGE, image_ref)

    def segment(self, image_ref: str) -> list[SegmentMask]:
        payload = self._get(ROLE_SEGMENTS, image_ref)["payload"]
        try:
            return [
                SegmentMask(
                    mask_id=int(m["mask_id"]),
                    bbox=tuple(int(v) for v in m["bbox"]),
                    area_px=int(m["area_px"]),
                )
                for m in payload
            ]
        except (KeyError, TypeError, ValueError) as exc:
            raise ProviderError(
                ProviderError.PARSE_FAILURE,
                f"malformed segment payload for {image_ref!r}: {exc}",
                payload=payload,
            ) from exc

    def propose_instances(self, image_ref, masks) -> list[InstanceProposal]:
        payload = self._get(ROLE_PROPOSALS, image_ref)["payload"]
        try:
            proposals = [
                InstanceProposal(
                    mask_id=int(p["mask_id"]),
                    description=str(p["description"]),
                    affordances=tuple(
                        (str(a["action"]), float(a["score"]))
                        for a in p["affordances"]
                    ),
                )
                for p in payload
            ]
        except (KeyError, TypeError, ValueError) as exc:
            raise ProviderError(
                ProviderError.PARSE_FAILURE,
                f"malformed proposal payload for {image_ref!r}: {exc}",
                payload=payload,
            ) from exc
        if len(proposals) != len(list(masks)):
            raise ProviderError(
                ProviderError.PARSE_FAILURE,
                f"{image_ref!r}: {len(proposals)} proposals for {len(list(masks))} masks",
            )
        check_proposal_scores(proposals, "file")
        return proposals

    def describe_view(self, image_ref: str) -> str:
        return str(self._get(ROLE_VIEW_DESCRIPTION, image_ref)["payload"])

    def summarize(self, descriptions) -> str:
        descriptions = list(descriptions)
        if not descriptions:
            raise ProviderError(ProviderError.EMPTY_INPUT, "nothing to summarize")
        return str(self._get(ROLE_SUMMARY, summary_key(descriptions))["payload"])

    def score_instances(self, phrase, candidates) -> list[tuple[str, float]]:
        candidates = list(candidates)
        if not candidates:
            raise ProviderError(ProviderError.EMPTY_INPUT, "no candidates to score")
        payload = self._get(ROLE_SCORES, scores_key(phrase, candidates))["payload"]
        try:
            scores = [(str(s["id"]), float(s["score"])) for s in payload]
        except (KeyError, TypeError, ValueError) as exc:
            raise ProviderError(
                ProviderError.PARSE_FAILURE,
                f"malformed score payload: {exc}",
                payload=payload,
            ) from exc
        check_relevance_scores(scores, "file")
        return scores

    def decompose_instruction(self, instruction: str) -> tuple[str, str]:
        payload = self._get(ROLE_DECOMPOSITION, instruction)["payload"]
        try:
            return str(payload["target"]), str(payload["receptacle"])
        except (KeyError, TypeError) as exc:
            raise ProviderError(
                ProviderError.PARSE_FAILURE,
                f"malformed decomposition payload: {exc}",
                payload=payload,
            ) from exc
