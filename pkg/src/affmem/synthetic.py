"""Deterministic synthetic corpora for tests, demos, and benchmarks.

Every sample owns a room and a set of serially-numbered tokens that
appear nowhere else, so samples never interfere. Sample kinds differ in
which retrieval signal carries the answer:

- unambiguous: both channels point at the true view.
- lexical: captions tie, only the view description separates true from
  decoys; with the text channel silenced the decoys win on id order.
- visual: descriptions are identical strings, only the caption
  separates; with the visual channel silenced the decoys win.
- lexical_hard: decoys beat the true view in both fused channels at
  every blend weight, but the true instance description is the closer
  match, so only instance reranking recovers it.
- affordance_tie: two indistinguishable views whose instances differ
  only in affordance score; ordering inside the tie is decided by the
  affordance-aware stage (or by id parity without it).

Decoy views get lower image_ref serials than the true view, so every
deliberate tie breaks against the true view.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
import json

from .builder import BuildConfig, build_memory
from .core import EmbodiedMemory, Planting, Position3D, ViewRecord
from .errors import ConfigError
from .evaluation import BenchmarkSample

KIND_UNAMBIGUOUS = "unambiguous"
KIND_LEXICAL = "lexical"
KIND_VISUAL = "visual"
KIND_LEXICAL_HARD = "lexical_hard"
KIND_AFFORDANCE_TIE = "affordance_tie"

OBJECT_WORDS = ("mug", "cup", "bowl", "plate", "bottle",
                "book", "lamp", "remote", "towel", "brush")
ADJ_WORDS = ("red", "blue", "green", "tall", "small",
             "round", "shiny", "worn", "plaid", "pale")
ROOM_WORDS = ("kitchen", "office", "studio", "pantry", "lounge",
              "attic", "porch", "cellar", "den", "hall")
RECEPT_WORDS = ("sink", "shelf", "basket", "tray", "drawer",
                "rack", "bin", "crate", "stand", "table")
PAD_WORDS = ("spoon", "cable", "sponge", "folder", "pebble",
             "ribbon", "button", "washer", "clamp", "sticker")

PICK_SCORE = 0.8
PLACE_SCORE = 0.8
NEUTRAL_SCORE = 0.5
TIE_HIGH = 0.9
TIE_LOW = 0.3

_GRID_COLS = 10
_GRID_SPACING = 20.0
_JITTER = 0.8
_VIEW_Z = 1.2
_MAX_ROOMS = 100


@dataclass(frozen=True)
class GenParams:
    seed: int = 0
    n_envs: int = 1
    n_unambiguous: int = 0
    n_lexical: int = 0
    n_visual: int = 0
    n_lexical_hard: int = 0
    n_affordance_tie: int = 0
    n_decoys: int = 11
    width: int = 640
    height: int = 480

    def __post_init__(self):
        if self.n_envs < 1:
            raise ConfigError("n_envs must be >= 1")
        if self.n_decoys < 1:
            raise ConfigError("n_decoys must be >= 1")
        counts = (self.n_unambiguous, self.n_lexical, self.n_visual,
                  self.n_lexical_hard, self.n_affordance_tie)
        if any(c < 0 for c in counts):
            raise ConfigError("sample counts must be non-negative")
        if sum(counts) < 1:
            raise ConfigError("at least one sample is required")

    @property
    def total_samples(self) -> int:
        return (self.n_unambiguous + self.n_lexical + self.n_visual
                + self.n_lexical_hard + self.n_affordance_tie)


@dataclass(frozen=True)
class SyntheticCorpus:
    views: tuple[ViewRecord, ...]
    samples: tuple[BenchmarkSample, ...]

    def views_by_env(self) -> dict[str, list[ViewRecord]]:
        out: dict[str, list[ViewRecord]] = {}
        for view in self.views:
            out.setdefault(view.env_id, []).append(view)
        return out


class _Tokens:
    """Unique word factory. The serial suffix guarantees that no token
    ever repeats across samples or environments."""

    def __init__(self, rng: random.Random):
        self.rng = rng
        self.counter = 0

    def make(self, bank) -> str:
        self.counter += 1
        return f"{self.rng.choice(bank)}{self.counter:04d}"


class _Env:
    def __init__(self, env_id: str, rng: random.Random, params: GenParams):
        self.env_id = env_id
        self.rng = rng
        self.params = params
        self.views: list[ViewRecord] = []
        self.rooms = 0
        self.serial = 0

    def next_room(self) -> tuple[float, float]:
        if self.rooms >= _MAX_ROOMS:
            raise ConfigError(
                f"{self.env_id}: room grid capacity ({_MAX_ROOMS}) exceeded; "
                "spread samples over more environments"
            )
        g = self.rooms
        self.rooms += 1
        return (_GRID_SPACING * (g % _GRID_COLS), _GRID_SPACING * (g // _GRID_COLS))

    def add_view(self, center, room, caption, plantings) -> str:
        self.serial += 1
        ref = f"{self.env_id}/v{self.serial:04d}.png"
        x = center[0] + self.rng.uniform(-_JITTER, _JITTER)
        y = center[1] + self.rng.uniform(-_JITTER, _JITTER)
        self.views.append(
            ViewRecord(
                image_ref=ref,
                pose=Position3D(x, y, _VIEW_Z),
                width=self.params.width,
                height=self.params.height,
                env_id=self.env_id,
                caption=caption,
                room=room,
                plantings=tuple(plantings),
            )
        )
        return ref


def _emit_sample(env: _Env, tokens: _Tokens, kind: str, index: int,
                 params: GenParams) -> BenchmarkSample:
    center = env.next_room()
    room = tokens.make(ROOM_WORDS)
    recept = tokens.make(RECEPT_WORDS)
    obj = tokens.make(OBJECT_WORDS)
    preferred = None

    if kind == KIND_UNAMBIGUOUS:
        target_np = obj
        target_refs = [
            env.add_view(center, room, obj, [Planting(obj, "pick", PICK_SCORE)])
        ]

    elif kind == KIND_LEXICAL:
        adj = tokens.make(ADJ_WORDS)
        target_np = f"{adj} {obj}"
        # decoy captions tie the true caption exactly on token overlap;
        # only the padded description gives the true view a text edge
        for _ in range(params.n_decoys):
            pad = tokens.make(PAD_WORDS)
            extra = tokens.make(PAD_WORDS)
            env.add_view(
                center, room, f"{target_np} {pad}",
                [Planting(target_np, "pick", PICK_SCORE),
                 Planting(extra, "push", NEUTRAL_SCORE)],
            )
        cap_pad = tokens.make(PAD_WORDS)
        target_refs = [
            env.add_view(center, room, f"{target_np} {cap_pad}",
                         [Planting(target_np, "pick", PICK_SCORE)])
        ]

    elif kind == KIND_VISUAL:
        adj = tokens.make(ADJ_WORDS)
        target_np = f"{adj} {obj}"
        # identical descriptions, captions differ in the adjective
        for _ in range(params.n_decoys):
            wrong_adj = tokens.make(ADJ_WORDS)
            env.add_view(center, room, f"{wrong_adj} {obj}",
                         [Planting(target_np, "pick", PICK_SCORE)])
        target_refs = [
            env.add_view(center, room, target_np,
                         [Planting(target_np, "pick", PICK_SCORE)])
        ]

    elif kind == KIND_LEXICAL_HARD:
        adj = tokens.make(ADJ_WORDS)
        target_np = f"{adj} {obj}"
        # decoys win both fused channels at every blend weight; their
        # instance descriptions carry one distractor token, so the true
        # instance is the strictly better descriptive match
        for _ in range(params.n_decoys):
            g = tokens.make(PAD_WORDS)
            env.add_view(center, room, target_np,
                         [Planting(f"{target_np} {g}", "pick", PICK_SCORE)])
        cap_pad = tokens.make(PAD_WORDS)
        x1 = tokens.make(PAD_WORDS)
        x2 = tokens.make(PAD_WORDS)
        target_refs = [
            env.add_view(
                center, room, f"{target_np} {cap_pad}",
                [Planting(target_np, "pick", PICK_SCORE),
                 Planting(x1, "push", NEUTRAL_SCORE),
                 Planting(x2, "push", NEUTRAL_SCORE)],
            )
        ]

    elif kind == KIND_AFFORDANCE_TIE:
        target_np = obj
        scores = (TIE_HIGH, TIE_LOW) if index % 2 == 0 else (TIE_LOW, TIE_HIGH)
        refs = [
            env.add_view(center, room, obj, [Planting(obj, "pick", score)])
            for score in scores
        ]
        preferred = refs[0] if index % 2 == 0 else refs[1]
        target_refs = refs

    else:
        raise ConfigError(f"unknown sample kind {kind!r}")

    recept_refs = [
        env.add_view(center, room, recept, [Planting(recept, "place", PLACE_SCORE)])
    ]
    return BenchmarkSample(
        sample_id=f"s{index:03d}",
        env_id=env.env_id,
        instruction=f"move the {target_np} to the {recept}",
        positives_target=tuple(target_refs),
        positives_receptacle=tuple(recept_refs),
        target_phrase=f"the {target_np}",
        receptacle_phrase=f"the {recept}",
        kind=kind,
        preferred_target=preferred,
    )


def generate(params: GenParams) -> SyntheticCorpus:
    """Produce view records and benchmark samples for the given layout.

    Samples are dealt round-robin over environments; everything is a
    pure function of ``params``.
    """
    rng = random.Random(params.seed)
    tokens = _Tokens(rng)
    envs = [_Env(f"env{e:02d}", rng, params) for e in range(params.n_envs)]
    kinds = (
        [KIND_UNAMBIGUOUS] * params.n_unambiguous
        + [KIND_LEXICAL] * params.n_lexical
        + [KIND_VISUAL] * params.n_visual
        + [KIND_LEXICAL_HARD] * params.n_lexical_hard
        + [KIND_AFFORDANCE_TIE] * params.n_affordance_tie
    )
    samples = [
        _emit_sample(envs[i % params.n_envs], tokens, kind, i, params)
        for i, kind in enumerate(kinds)
    ]
    views = tuple(v for env in envs for v in env.views)
    return SyntheticCorpus(views=views, samples=tuple(samples))


def mixed_benchmark_params(seed: int = 0) -> GenParams:
    """100 samples over 10 environments, every kind represented."""
    return GenParams(
        seed=seed,
        n_envs=10,
        n_unambiguous=25,
        n_lexical=25,
        n_visual=20,
        n_lexical_hard=20,
        n_affordance_tie=10,
    )


def tie_benchmark_params(seed: int = 0) -> GenParams:
    """44 affordance-tie samples over 4 environments."""
    return GenParams(seed=seed, n_envs=4, n_affordance_tie=44)


def perf_params(seed: int = 0) -> GenParams:
    """A single 600-view environment for timing runs."""
    return GenParams(
        seed=seed,
        n_envs=1,
        n_unambiguous=48,
        n_lexical=12,
        n_visual=12,
        n_lexical_hard=12,
        n_affordance_tie=12,
    )


def build_corpus_memories(
    corpus: SyntheticCorpus, cfg: BuildConfig | None = None
) -> dict[str, EmbodiedMemory]:
    cfg = cfg or BuildConfig()
    return {
        env_id: build_memory(views, cfg)
        for env_id, views in sorted(corpus.views_by_env().items())
    }


def write_view_manifest(views, path) -> None:
    """JSONL manifest in the layout the builder loads."""
    with open(path, "w", encoding="utf-8") as fh:
        for view in views:
            raw = {
                "image_ref": view.image_ref,
                "pose": {"x": view.pose.x, "y": view.pose.y, "z": view.pose.z},
                "width": view.width,
                "height": view.height,
                "env_id": view.env_id,
            }
            if view.caption is not None:
                raw["caption"] = view.caption
            if view.room is not None:
                raw["room"] = view.room
            if view.plantings:
                raw["plantings"] = [
                    {"description": p.description, "action": p.action,
                     "score": p.score}
                    for p in view.plantings
                ]
            fh.write(json.dumps(raw, sort_keys=True, separators=(",", ":")) + "\n")
