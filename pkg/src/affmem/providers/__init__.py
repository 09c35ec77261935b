"""Model provider backends: mock, precomputed-file, and HTTP."""

from __future__ import annotations

from .base import (
    DEFAULT_EMBODIMENT,
    InstanceProposal,
    Provider,
    ProviderConfig,
    ROLE_CHAT,
    ROLE_DECOMPOSITION,
    ROLE_IMAGE,
    ROLE_MULTIMODAL,
    ROLE_PROPOSALS,
    ROLE_SCORES,
    ROLE_SEGMENTS,
    ROLE_SUMMARY,
    ROLE_TEXT,
    ROLE_VIEW_DESCRIPTION,
    SegmentMask,
    check_proposal_scores,
    check_relevance_scores,
    load_prompt,
)
from .file_backend import FileProvider, scores_key, summary_key, write_records
from .http import HttpProvider
from .mock import MockProvider, hash_embed, jaccard, rule_decompose, tokenize

__all__ = [
    "DEFAULT_EMBODIMENT",
    "FileProvider",
    "HttpProvider",
    "InstanceProposal",
    "MockProvider",
    "Provider",
    "ProviderConfig",
    "SegmentMask",
    "build_provider",
    "check_proposal_scores",
    "check_relevance_scores",
    "hash_embed",
    "jaccard",
    "load_prompt",
    "rule_decompose",
    "scores_key",
    "summary_key",
    "tokenize",
    "write_records",
]


def build_provider(config: ProviderConfig, d_t: int, d_m: int, views=()) -> Provider:
    """Instantiate the backend named by ``config.backend``.

    ``views`` seeds the mock backend's annotation registry and is
    ignored by the other backends; ``d_t``/``d_m`` fix the mock's
    embedding dimensions (file and http return whatever is stored or
    served).
    """
    if config.backend == "mock":
        return MockProvider(d_t=d_t, d_m=d_m, views=views, config=config)
    if config.backend == "file":
        return FileProvider(config)
    return HttpProvider(config)
