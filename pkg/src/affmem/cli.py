"""Command-line entry point.

Commands: build, query, eval, sweep, gen-fixtures, validate. stdout
carries machine-readable JSON only; human logs go to stderr. Exit codes
are a stable contract: 0 success, 1 configuration or usage problems,
2 runtime or data failures.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .builder import build_memory, load_view_manifest
from .config import AppConfig, load_config
from .core import validate_memory
from .errors import AffmemError, ConfigError
from .evaluation import (
    ABLATION_NAMES,
    load_benchmark_manifest,
    run_ablations,
    run_alpha_sweep,
    run_benchmark,
    write_ablation_csv,
    write_benchmark_manifest,
    write_report_csv,
    write_sweep_csv,
)
from .persist import load_memory, save_memory
from .providers import build_provider
from .retrieval import result_to_json_dicts, retrieve
from .synthetic import (
    GenParams,
    generate,
    mixed_benchmark_params,
    perf_params,
    tie_benchmark_params,
    write_view_manifest,
)

log = logging.getLogger(__name__)

_MEMORY_GLOB = "*.memory.jsonl"


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; our contract reserves 2 for
    runtime failures, so usage problems are remapped to exit 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _print_json(doc: dict) -> None:
    print(json.dumps(doc, sort_keys=True))


def _fail(exc: Exception, code: int) -> int:
    log.error("%s", exc)
    payload: dict = {"type": type(exc).__name__, "message": str(exc)}
    failed = getattr(exc, "failed_view_ids", None)
    if failed:
        payload["failed_view_ids"] = list(failed)
    violations = getattr(exc, "violations", None)
    if violations:
        payload["violations"] = [
            {"node_id": v.node_id, "rule": v.rule, "detail": v.detail}
            for v in violations
        ]
    _print_json({"error": payload})
    return code


def _resolve_memory_path(cfg: AppConfig, explicit: str | None) -> str:
    if explicit:
        return explicit
    root = Path(cfg.paths.memory_dir)
    candidates = sorted(root.glob(_MEMORY_GLOB)) if root.is_dir() else []
    if len(candidates) == 1:
        return str(candidates[0])
    if not candidates:
        raise ConfigError(f"no memory file under {root}; pass --memory")
    raise ConfigError(
        f"{len(candidates)} memory files under {root}; pass --memory"
    )


def _load_memories(cfg: AppConfig) -> dict:
    root = Path(cfg.paths.memory_dir)
    if not root.is_dir():
        raise ConfigError(f"memory directory {root} does not exist")
    memories = {}
    for path in sorted(root.glob(_MEMORY_GLOB)):
        memory = load_memory(path)
        memories[memory.env_id] = memory
        log.info("loaded %s (%d nodes)", path, len(memory))
    if not memories:
        raise ConfigError(f"no {_MEMORY_GLOB} files under {root}")
    return memories


def _report_dir(cfg: AppConfig) -> Path:
    out = Path(cfg.paths.report_out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json_file(doc: dict, path: Path) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")


def cmd_build(cfg: AppConfig, args) -> int:
    manifest = args.manifest or cfg.paths.manifest
    records = load_view_manifest(manifest)
    log.info("building memory from %d views (%s)", len(records), manifest)
    memory = build_memory(records, cfg.build)
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
    else:
        out_dir = Path(cfg.paths.memory_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        out = out_dir / f"{memory.env_id}.memory.jsonl"
    save_memory(memory, out)
    _print_json(
        {
            "env_id": memory.env_id,
            "n_views": len(memory.level_ids(3)),
            "n_instances": len(memory.level_ids(2)),
            "n_affordances": len(memory.level_ids(1)),
            "nodes_per_level": {
                str(level): len(ids)
                for level, ids in sorted(memory.levels.items())
            },
            "memory_path": str(out),
        }
    )
    return 0


def cmd_query(cfg: AppConfig, args) -> int:
    if args.top_k < 1:
        raise ConfigError(f"top_k must be >= 1, got {args.top_k}")
    memory = load_memory(_resolve_memory_path(cfg, args.memory))
    provider = build_provider(cfg.providers, memory.d_t, memory.d_m)
    result = retrieve(memory, args.instruction, cfg.retrieval, provider)
    docs = result_to_json_dicts(result, cfg.retrieval)
    for doc in docs:
        doc["entries"] = doc["entries"][: args.top_k]
        _print_json(doc)
    if args.select:
        chosen = {}
        for doc in docs:
            n = len(doc["entries"])
            sys.stderr.write(f"{doc['role']}: pick a rank (1..{n}): ")
            sys.stderr.flush()
            line = sys.stdin.readline()
            if not line:
                raise ConfigError("selection input ended early")
            try:
                index = int(line.strip())
            except ValueError:
                raise ConfigError(
                    f"selection {line.strip()!r} is not an integer"
                ) from None
            if not 1 <= index <= n:
                raise ConfigError(f"selection {index} outside 1..{n}")
            chosen[doc["role"]] = doc["entries"][index - 1]["image_ref"]
        _print_json({"selected": chosen})
    return 0


def cmd_eval(cfg: AppConfig, args) -> int:
    samples = load_benchmark_manifest(args.benchmark or cfg.paths.benchmark)
    memories = _load_memories(cfg)
    out = _report_dir(cfg)
    if args.ablate:
        reports = run_ablations(samples, memories, cfg.retrieval, cfg.providers)
        payload = {}
        for label, report in reports.items():
            doc = report.to_json_dict()
            doc["variant"] = ABLATION_NAMES[label]
            _write_json_file(doc, out / f"report-{label}.json")
            write_report_csv(report, out / f"samples-{label}.csv")
            payload[label] = doc
        write_ablation_csv(reports, out / "ablations.csv")
        _print_json({"ablations": payload, "report_dir": str(out)})
    else:
        report = run_benchmark(samples, memories, cfg.retrieval, cfg.providers)
        doc = report.to_json_dict()
        _write_json_file(doc, out / "report.json")
        write_report_csv(report, out / "samples.csv")
        doc["report_dir"] = str(out)
        _print_json(doc)
    return 0


def _parse_sweep(spec: str) -> list[float]:
    """``start:stop:step`` inclusive, e.g. 0:1:0.2 -> 0.0 .. 1.0."""
    parts = spec.split(":")
    if len(parts) != 3:
        raise ConfigError(f"sweep spec {spec!r} is not start:stop:step")
    try:
        start, stop, step = (float(p) for p in parts)
    except ValueError as exc:
        raise ConfigError(f"sweep spec {spec!r}: {exc}") from exc
    if step <= 0:
        raise ConfigError("sweep step must be positive")
    if stop < start:
        raise ConfigError("sweep stop must be >= start")
    values = []
    i = 0
    while True:
        value = round(start + i * step, 10)
        if value > stop + 1e-9:
            break
        values.append(value)
        i += 1
    return values


def cmd_sweep(cfg: AppConfig, args) -> int:
    alphas = _parse_sweep(args.sweep_alpha)
    samples = load_benchmark_manifest(args.benchmark or cfg.paths.benchmark)
    memories = _load_memories(cfg)
    rows = run_alpha_sweep(samples, memories, alphas, cfg.retrieval, cfg.providers)
    out = _report_dir(cfg)
    write_sweep_csv(rows, out / "sweep.csv")
    payload = []
    for alpha, report in rows:
        doc = report.to_json_dict()
        doc["alpha"] = alpha
        payload.append(doc)
    _print_json({"sweep": payload, "report_dir": str(out)})
    return 0


_PRESETS = {
    "mixed": mixed_benchmark_params,
    "tie": tie_benchmark_params,
    "perf": perf_params,
}


def cmd_gen_fixtures(cfg: AppConfig, args) -> int:
    if args.preset:
        params = _PRESETS[args.preset](seed=args.seed)
    else:
        params = GenParams(
            seed=args.seed,
            n_envs=args.envs,
            n_unambiguous=args.unambiguous,
            n_lexical=args.lexical,
            n_visual=args.visual,
            n_lexical_hard=args.lexical_hard,
            n_affordance_tie=args.affordance_tie,
            n_decoys=args.decoys,
        )
    corpus = generate(params)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifests = {}
    for env_id, views in sorted(corpus.views_by_env().items()):
        path = out / f"{env_id}.views.jsonl"
        write_view_manifest(views, path)
        manifests[env_id] = str(path)
    benchmark = out / "benchmark.jsonl"
    write_benchmark_manifest(corpus.samples, benchmark)
    _print_json(
        {
            "out_dir": str(out),
            "n_views": len(corpus.views),
            "n_samples": len(corpus.samples),
            "view_manifests": manifests,
            "benchmark": str(benchmark),
        }
    )
    return 0


def cmd_validate(cfg: AppConfig, args) -> int:
    path = _resolve_memory_path(cfg, args.memory)
    memory = load_memory(path, validate=False)
    violations = validate_memory(memory)
    _print_json(
        {
            "memory_path": str(path),
            "valid": not violations,
            "violations": [
                {"node_id": v.node_id, "rule": v.rule, "detail": v.detail}
                for v in violations
            ],
        }
    )
    return 0 if not violations else 2


def build_arg_parser() -> _Parser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON config file")
    common.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override one config value by dotted name, "
        "e.g. retrieval.alpha=0.3",
    )
    common.add_argument("--verbose", action="store_true",
                        help="debug logging on stderr")

    parser = _Parser(
        prog="affmem",
        description="Affordance-aware embodied memory: build, query, evaluate.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("build", parents=[common],
                       help="build a memory file from a view manifest")
    p.add_argument("--manifest", metavar="PATH",
                   help="view manifest JSONL (default: paths.manifest)")
    p.add_argument("--out", metavar="PATH",
                   help="memory file (default: paths.memory_dir/<env>.memory.jsonl)")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("query", parents=[common],
                       help="answer one instruction with two ranked view lists")
    p.add_argument("instruction", help="pick-and-place instruction")
    p.add_argument("--memory", metavar="PATH",
                   help="memory file (default: the single file in paths.memory_dir)")
    p.add_argument("--top-k", type=int, default=10, metavar="K",
                   help="entries to print per role (default 10)")
    p.add_argument("--select", action="store_true",
                   help="read a 1..K pick per role from stdin and echo the refs")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("eval", parents=[common],
                       help="run a benchmark and write report files")
    p.add_argument("--benchmark", metavar="PATH",
                   help="benchmark JSONL (default: paths.benchmark)")
    p.add_argument("--ablate", action="store_true",
                   help="run variants a..e instead of a single report")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", parents=[common],
                       help="run the benchmark over a grid of alpha values")
    p.add_argument("--benchmark", metavar="PATH",
                   help="benchmark JSONL (default: paths.benchmark)")
    p.add_argument("--sweep-alpha", default="0:1:0.2", metavar="START:STOP:STEP",
                   help="alpha grid (default 0:1:0.2)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("gen-fixtures", parents=[common],
                       help="generate synthetic view manifests and a benchmark")
    p.add_argument("--out", default="fixtures", metavar="DIR",
                   help="output directory (default fixtures)")
    p.add_argument("--preset", choices=sorted(_PRESETS),
                   help="named layout; overrides the count flags")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--envs", type=int, default=1,
                   help="number of environments")
    p.add_argument("--unambiguous", type=int, default=0, metavar="N")
    p.add_argument("--lexical", type=int, default=0, metavar="N")
    p.add_argument("--visual", type=int, default=0, metavar="N")
    p.add_argument("--lexical-hard", type=int, default=0, metavar="N")
    p.add_argument("--affordance-tie", type=int, default=0, metavar="N")
    p.add_argument("--decoys", type=int, default=11, metavar="N",
                   help="decoy views per decoy-bearing sample")
    p.set_defaults(func=cmd_gen_fixtures)

    p = sub.add_parser("validate", parents=[common],
                       help="check a memory file's structural invariants")
    p.add_argument("--memory", metavar="PATH",
                   help="memory file (default: the single file in paths.memory_dir)")
    p.set_defaults(func=cmd_validate)

    return parser


def main(argv=None) -> int:
    parser = build_arg_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        if exc.code is None:
            return 0
        return exc.code if isinstance(exc.code, int) else 1
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = load_config(args.config, args.overrides)
        return args.func(cfg, args)
    except ConfigError as exc:
        return _fail(exc, 1)
    except AffmemError as exc:
        return _fail(exc, 2)
    except OSError as exc:
        return _fail(exc, 2)


if __name__ == "__main__":
    sys.exit(main())
