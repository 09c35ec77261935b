"""Backend-neutral provider interface for every external model call.

A Provider bundles the embedding, perception, and language operations
the engine needs: text / multimodal query / image embeddings, view
segmentation, instance proposal with affordance scores, view captioning,
region summarization, instance relevance scoring, and instruction
decomposition. Three backends implement it: a deterministic mock, a
precomputed-file replay, and an OpenAI-compatible HTTP client.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources

from ..core import Embedding
from ..errors import ProviderError

DEFAULT_EMBODIMENT = (
    "Mobile manipulator with a two-finger parallel gripper, 8 cm maximum "
    "opening, and a 60 cm reach arm."
)

# roles used for model_names lookup and precomputed-file records
ROLE_TEXT = "text_embedding"
ROLE_MULTIMODAL = "multimodal_embedding"
ROLE_IMAGE = "image_embedding"
ROLE_CHAT = "chat"
ROLE_SEGMENTS = "segments"
ROLE_PROPOSALS = "proposals"
ROLE_VIEW_DESCRIPTION = "view_description"
ROLE_SUMMARY = "summary"
ROLE_SCORES = "instance_scores"
ROLE_DECOMPOSITION = "decomposition"


def _default_model_names() -> dict[str, str]:
    return {
        ROLE_TEXT: "text-embedding-3-large",
        ROLE_MULTIMODAL: "multimodal-text-encoder",
        ROLE_IMAGE: "multimodal-image-encoder",
        ROLE_CHAT: "gpt-4o",
    }


@dataclass
class ProviderConfig:
    """Settings shared by all backends.

    The API key is read from the environment variable named by
    ``api_key_env_var`` at call time and is never logged or echoed.
    """

    backend: str = "mock"
    endpoint_url: str = ""
    api_key_env_var: str = "AFFMEM_API_KEY"
    model_names: dict[str, str] = field(default_factory=_default_model_names)
    timeout: float = 30.0
    max_retries: int = 2
    max_parallel_requests: int = 1
    # file backend: JSONL of precomputed records
    precomputed_path: str = ""
    # http backend: optional dedicated image-embedding endpoint
    image_embeddings_url: str = ""
    embodiment: str = DEFAULT_EMBODIMENT
    # mock summarizer output cap, characters
    max_summary_chars: int = 600

    def __post_init__(self):
        if self.backend not in ("mock", "file", "http"):
            raise ValueError(f"unknown backend {self.backend!r}")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.max_parallel_requests < 1:
            raise ValueError("max_parallel_requests must be >= 1")
        if self.max_summary_chars < 1:
            raise ValueError("max_summary_chars must be >= 1")


@dataclass(frozen=True)
class SegmentMask:
    """One segmented region of a view image."""

    mask_id: int
    bbox: tuple[int, int, int, int]  # x, y, w, h
    area_px: int

    def __post_init__(self):
        x, y, w, h = self.bbox
        if w <= 0 or h <= 0:
            raise ValueError("mask bbox must have positive extent")
        if self.area_px <= 0:
            raise ValueError("mask area must be positive")


@dataclass(frozen=True)
class InstanceProposal:
    """A detected object instance with its affordance annotations."""

    mask_id: int
    description: str
    affordances: tuple[tuple[str, float], ...]  # (action, score) pairs

    def __post_init__(self):
        if not self.description:
            raise ValueError("proposal description must be non-empty")
        object.__setattr__(self, "affordances", tuple(self.affordances))


def check_proposal_scores(proposals, source: str) -> None:
    """Boundary validation: every affordance score must be in [0, 1].

    Out-of-range values are rejected, never clamped.
    """
    for prop in proposals:
        for action, score in prop.affordances:
            if not action:
                raise ProviderError(
                    ProviderError.PARSE_FAILURE,
                    f"{source}: empty affordance action on {prop.description!r}",
                )
            if not (0.0 <= score <= 1.0):
                raise ProviderError(
                    ProviderError.SCORE_RANGE,
                    f"{source}: affordance score {score} outside [0, 1]",
                )


def check_relevance_scores(scores, source: str) -> None:
    for _, value in scores:
        if not (0.0 <= value <= 1.0):
            raise ProviderError(
                ProviderError.SCORE_RANGE,
                f"{source}: relevance {value} outside [0, 1]",
            )


def load_prompt(name: str) -> str:
    """Read a prompt template shipped with the package."""
    return (
        resources.files(__package__).joinpath("prompts", f"{name}.txt").read_text()
    )


class Provider:
    """Interface; concrete backends override every operation they support.

    Unimplemented operations raise ProviderError(unsupported-operation).
    """

    def embed_text(self, text: str) -> Embedding:
        raise ProviderError(
            ProviderError.UNSUPPORTED_OPERATION, "embed_text not available"
        )

    def embed_query_multimodal(self, text: str) -> Embedding:
        raise ProviderError(
            ProviderError.UNSUPPORTED_OPERATION, "embed_query_multimodal not available"
        )

    def embed_image_multimodal(self, image_ref: str) -> Embedding:
        raise ProviderError(
            ProviderError.UNSUPPORTED_OPERATION, "embed_image_multimodal not available"
        )

    def segment(self, image_ref: str) -> list[SegmentMask]:
        raise ProviderError(
            ProviderError.UNSUPPORTED_OPERATION, "segment not available"
        )

    def propose_instances(self, image_ref, masks) -> list[InstanceProposal]:
        raise ProviderError(
            ProviderError.UNSUPPORTED_OPERATION, "propose_instances not available"
        )

    def describe_view(self, image_ref: str) -> str:
        raise ProviderError(
            ProviderError.UNSUPPORTED_OPERATION, "describe_view not available"
        )

    def summarize(self, descriptions) -> str:
        raise ProviderError(
            ProviderError.UNSUPPORTED_OPERATION, "summarize not available"
        )

    def score_instances(self, phrase, candidates) -> list[tuple[str, float]]:
        raise ProviderError(
            ProviderError.UNSUPPORTED_OPERATION, "score_instances not available"
        )

    def decompose_instruction(self, instruction: str) -> tuple[str, str]:
        raise ProviderError(
            ProviderError.UNSUPPORTED_OPERATION, "decompose_instruction not available"
        )
