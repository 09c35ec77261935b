"""Benchmark harness: retrieval metrics, ablations, alpha sweeps.

Samples reference ground-truth views by image_ref so they stay valid
across rebuilds. recall@K is a per-sample, per-role hit indicator (any
positive in the top K); SR@K is the conjunction of both roles' hits.
Aggregates are means over samples in sample_id order, kept as exact
fractions internally; JSON and CSV reports round to one decimal of a
percent.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace

from .core import RECALL_CUTOFFS, SR_CUTOFFS, EmbodiedMemory
from .errors import ConfigError, FormatError
from .providers import Provider, ProviderConfig, build_provider
from .retrieval import (
    ROLE_RECEPTACLE,
    ROLE_TARGET,
    RankedList,
    RetrievalConfig,
    RetrievalResult,
    retrieve,
)

OVERALL = "overall"


@dataclass(frozen=True)
class BenchmarkSample:
    """One instruction with its ground-truth views per role.

    ``preferred_target`` marks, for affordance-tie cases, the view that
    should win rank 1 among equally relevant candidates. The phrase and
    kind fields are generator metadata used by reports and tests.
    """

    sample_id: str
    env_id: str
    instruction: str
    positives_target: tuple[str, ...]
    positives_receptacle: tuple[str, ...]
    target_phrase: str | None = None
    receptacle_phrase: str | None = None
    kind: str | None = None
    preferred_target: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "positives_target", tuple(self.positives_target))
        object.__setattr__(
            self, "positives_receptacle", tuple(self.positives_receptacle)
        )
        if not self.sample_id:
            raise ValueError("sample_id must be non-empty")
        if not self.instruction:
            raise ValueError("instruction must be non-empty")
        if not self.positives_target or not self.positives_receptacle:
            raise ValueError("samples need at least one positive view per role")

    def positives(self, role: str) -> tuple[str, ...]:
        if role == ROLE_TARGET:
            return self.positives_target
        if role == ROLE_RECEPTACLE:
            return self.positives_receptacle
        raise ConfigError(f"unknown role {role!r}")


def _refs(ranked) -> list[str]:
    if isinstance(ranked, RankedList):
        return [e.image_ref for e in ranked.entries]
    return list(ranked)


def recall_at_k(ranked, positives, k: int) -> float:
    """1.0 when any positive appears among the first ``k`` refs."""
    pos = set(positives)
    if not pos:
        raise ConfigError("recall needs at least one positive")
    if k < 1:
        raise ConfigError("cutoff must be >= 1")
    return 1.0 if any(r in pos for r in _refs(ranked)[:k]) else 0.0


def sr_at_k(target_ranked, receptacle_ranked, sample: BenchmarkSample,
            k: int) -> float:
    """1.0 when both roles hit within the top ``k``."""
    t = recall_at_k(target_ranked, sample.positives_target, k)
    r = recall_at_k(receptacle_ranked, sample.positives_receptacle, k)
    return t * r


@dataclass(frozen=True)
class SampleRow:
    """Per-sample outcome, one CSV row."""

    sample_id: str
    env_id: str
    kind: str | None
    recall: dict[str, dict[int, float]]
    sr: dict[int, float]
    # rank of the first positive per role, None when it never surfaced
    first_rank: dict[str, int | None]
    preferred_hit: bool | None


@dataclass(frozen=True)
class SampleOutcome:
    sample: BenchmarkSample
    result: RetrievalResult
    row: SampleRow


@dataclass
class EvalReport:
    """Aggregated benchmark result. Fractions in [0, 1] throughout;
    formatting to percent happens only at the JSON/CSV boundary."""

    n_samples: int
    config: RetrievalConfig
    recall: dict[str, dict[int, float]]
    sr: dict[int, float]
    preferred_at_1: float | None = None
    outcomes: list[SampleOutcome] = field(default_factory=list, repr=False)

    def recall_at(self, role: str, k: int) -> float:
        return self.recall[role][k]

    def sr_at(self, k: int) -> float:
        return self.sr[k]

    def to_json_dict(self) -> dict:
        out = {
            "n_samples": self.n_samples,
            "config": self.config.to_dict(),
            "recall": {
                role: {f"recall@{k}": round(v * 100.0, 1) for k, v in vals.items()}
                for role, vals in self.recall.items()
            },
            "sr": {f"sr@{k}": round(v * 100.0, 1) for k, v in self.sr.items()},
        }
        if self.preferred_at_1 is not None:
            out["preferred_at_1"] = round(self.preferred_at_1 * 100.0, 1)
        return out


def _provider_for(memory: EmbodiedMemory, provider_cfg, cache) -> Provider:
    key = (memory.d_t, memory.d_m)
    provider = cache.get(key)
    if provider is None:
        provider = build_provider(provider_cfg, memory.d_t, memory.d_m)
        cache[key] = provider
    return provider


def _score_sample(sample: BenchmarkSample, result: RetrievalResult) -> SampleRow:
    recall = {}
    first_rank = {}
    for role, ranked in (
        (ROLE_TARGET, result.target),
        (ROLE_RECEPTACLE, result.receptacle),
    ):
        positives = set(sample.positives(role))
        recall[role] = {
            k: recall_at_k(ranked, positives, k) for k in RECALL_CUTOFFS
        }
        first_rank[role] = next(
            (e.rank for e in ranked.entries if e.image_ref in positives), None
        )
    sr = {
        k: sr_at_k(result.target, result.receptacle, sample, k)
        for k in SR_CUTOFFS
    }
    preferred_hit = None
    if sample.preferred_target is not None and result.target.entries:
        preferred_hit = result.target.entries[0].image_ref == sample.preferred_target
    return SampleRow(
        sample_id=sample.sample_id,
        env_id=sample.env_id,
        kind=sample.kind,
        recall=recall,
        sr=sr,
        first_rank=first_rank,
        preferred_hit=preferred_hit,
    )


def run_benchmark(
    samples,
    memories: dict[str, EmbodiedMemory],
    cfg: RetrievalConfig | None = None,
    provider_cfg: ProviderConfig | None = None,
) -> EvalReport:
    """Retrieve every sample against its environment's memory and
    aggregate hit rates over samples in sample_id order."""
    samples = sorted(samples, key=lambda s: s.sample_id)
    if not samples:
        raise ConfigError("benchmark needs at least one sample")
    missing = sorted({s.env_id for s in samples} - set(memories))
    if missing:
        raise ConfigError(f"no memory for environment(s): {missing}")
    cfg = cfg or RetrievalConfig()
    provider_cfg = provider_cfg or ProviderConfig()
    cache: dict[tuple[int, int], Provider] = {}

    outcomes = []
    for sample in samples:
        memory = memories[sample.env_id]
        provider = _provider_for(memory, provider_cfg, cache)
        result = retrieve(memory, sample.instruction, cfg, provider)
        outcomes.append(
            SampleOutcome(sample=sample, result=result,
                          row=_score_sample(sample, result))
        )

    n = len(outcomes)
    recall = {}
    for role in (ROLE_TARGET, ROLE_RECEPTACLE):
        recall[role] = {
            k: sum(o.row.recall[role][k] for o in outcomes) / n
            for k in RECALL_CUTOFFS
        }
    # each sample contributes one hit indicator per role
    recall[OVERALL] = {
        k: (recall[ROLE_TARGET][k] + recall[ROLE_RECEPTACLE][k]) / 2.0
        for k in RECALL_CUTOFFS
    }
    sr = {k: sum(o.row.sr[k] for o in outcomes) / n for k in SR_CUTOFFS}
    hits = [o.row.preferred_hit for o in outcomes if o.row.preferred_hit is not None]
    preferred = sum(hits) / len(hits) if hits else None
    return EvalReport(
        n_samples=n,
        config=cfg,
        recall=recall,
        sr=sr,
        preferred_at_1=preferred,
        outcomes=outcomes,
    )


# ablation rows: blend extremes, rerank off, caption-only rerank, full
ABLATION_NAMES = {
    "a": "alpha_0",
    "b": "alpha_1",
    "c": "no_rerank",
    "d": "caption_rerank",
    "e": "full",
}


def ablation_configs(base: RetrievalConfig) -> dict[str, RetrievalConfig]:
    return {
        "a": replace(base, alpha=0.0),
        "b": replace(base, alpha=1.0),
        "c": replace(base, enable_rerank=False),
        "d": replace(base, caption_rerank=True),
        "e": base,
    }


def run_ablations(
    samples,
    memories,
    base_cfg: RetrievalConfig | None = None,
    provider_cfg: ProviderConfig | None = None,
) -> dict[str, EvalReport]:
    base = base_cfg or RetrievalConfig()
    return {
        label: run_benchmark(samples, memories, cfg, provider_cfg)
        for label, cfg in ablation_configs(base).items()
    }


def run_alpha_sweep(
    samples,
    memories,
    alphas,
    base_cfg: RetrievalConfig | None = None,
    provider_cfg: ProviderConfig | None = None,
) -> list[tuple[float, EvalReport]]:
    base = base_cfg or RetrievalConfig()
    out = []
    for alpha in alphas:
        cfg = replace(base, alpha=float(alpha))
        out.append((cfg.alpha, run_benchmark(samples, memories, cfg, provider_cfg)))
    return out


def _aggregate_columns() -> list[str]:
    cols = []
    for role in (ROLE_TARGET, ROLE_RECEPTACLE, OVERALL):
        cols += [f"{role}:recall@{k}" for k in RECALL_CUTOFFS]
    cols += [f"sr@{k}" for k in SR_CUTOFFS]
    return cols


def _aggregate_values(report: EvalReport) -> list[str]:
    vals = []
    for role in (ROLE_TARGET, ROLE_RECEPTACLE, OVERALL):
        vals += [f"{report.recall[role][k] * 100.0:.1f}" for k in RECALL_CUTOFFS]
    vals += [f"{report.sr[k] * 100.0:.1f}" for k in SR_CUTOFFS]
    return vals


def write_report_csv(report: EvalReport, path) -> None:
    """Flat per-sample rows for plotting."""
    cols = (
        ["sample_id", "env_id", "kind"]
        + [f"target:recall@{k}" for k in RECALL_CUTOFFS]
        + [f"receptacle:recall@{k}" for k in RECALL_CUTOFFS]
        + [f"sr@{k}" for k in SR_CUTOFFS]
        + ["target_first_rank", "receptacle_first_rank", "preferred_hit"]
    )
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(cols)
        for o in report.outcomes:
            row = o.row
            writer.writerow(
                [row.sample_id, row.env_id, row.kind or ""]
                + [int(row.recall[ROLE_TARGET][k]) for k in RECALL_CUTOFFS]
                + [int(row.recall[ROLE_RECEPTACLE][k]) for k in RECALL_CUTOFFS]
                + [int(row.sr[k]) for k in SR_CUTOFFS]
                + [
                    row.first_rank[ROLE_TARGET],
                    row.first_rank[ROLE_RECEPTACLE],
                    "" if row.preferred_hit is None else int(row.preferred_hit),
                ]
            )


def write_sweep_csv(rows: list[tuple[float, EvalReport]], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["alpha"] + _aggregate_columns())
        for alpha, report in rows:
            writer.writerow([alpha] + _aggregate_values(report))


def write_ablation_csv(reports: dict[str, EvalReport], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["row", "variant"] + _aggregate_columns())
        for label, report in reports.items():
            writer.writerow(
                [label, ABLATION_NAMES.get(label, label)]
                + _aggregate_values(report)
            )


def write_benchmark_manifest(samples, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for sample in samples:
            raw = {
                "sample_id": sample.sample_id,
                "env_id": sample.env_id,
                "instruction": sample.instruction,
                "positives_target": list(sample.positives_target),
                "positives_receptacle": list(sample.positives_receptacle),
            }
            for key in ("target_phrase", "receptacle_phrase", "kind",
                        "preferred_target"):
                value = getattr(sample, key)
                if value is not None:
                    raw[key] = value
            fh.write(json.dumps(raw, sort_keys=True, separators=(",", ":")) + "\n")


def load_benchmark_manifest(path) -> list[BenchmarkSample]:
    samples = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}:{lineno}: bad JSON: {exc}") from exc
            try:
                samples.append(
                    BenchmarkSample(
                        sample_id=raw["sample_id"],
                        env_id=raw["env_id"],
                        instruction=raw["instruction"],
                        positives_target=tuple(raw["positives_target"]),
                        positives_receptacle=tuple(raw["positives_receptacle"]),
                        target_phrase=raw.get("target_phrase"),
                        receptacle_phrase=raw.get("receptacle_phrase"),
                        kind=raw.get("kind"),
                        preferred_target=raw.get("preferred_target"),
                    )
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise FormatError(f"{path}:{lineno}: bad sample: {exc}") from exc
    return samples
