"""Application configuration: one JSON document with four flat sections
(build, retrieval, providers, paths), loadable from a file and
overridable per key with dotted names like ``retrieval.alpha=0.3``.

The document round-trips losslessly: to_dict(from_dict(d)) == d for any
saved config.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields

from .builder import BuildConfig
from .clustering import ClusteringParams
from .errors import ConfigError
from .providers import ProviderConfig
from .retrieval import RetrievalConfig

SECTIONS = ("build", "retrieval", "providers", "paths")


@dataclass
class PathsConfig:
    """Filesystem defaults used when a command flag is not given."""

    memory_dir: str = "memory"
    manifest: str = "views.jsonl"
    benchmark: str = "benchmark.jsonl"
    report_out: str = "reports"


@dataclass
class AppConfig:
    """Everything one CLI invocation needs.

    ``providers`` is the single provider section; it is mirrored into
    ``build.provider_config`` so the builder sees the same settings.
    """

    build: BuildConfig = field(default_factory=BuildConfig)
    retrieval: RetrievalConfig = field(default_factory=RetrievalConfig)
    providers: ProviderConfig = field(default_factory=ProviderConfig)
    paths: PathsConfig = field(default_factory=PathsConfig)

    def __post_init__(self):
        self.build.provider_config = self.providers


def _check_keys(raw: dict, allowed, where: str) -> None:
    unknown = sorted(set(raw) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown {where} key(s): {unknown}")


def _dataclass_from_dict(cls, raw: dict, where: str):
    if not isinstance(raw, dict):
        raise ConfigError(f"{where} section must be a mapping")
    names = [f.name for f in fields(cls)]
    _check_keys(raw, names, where)
    try:
        return cls(**raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad {where} config: {exc}") from exc


def _build_from_dict(raw: dict, providers: ProviderConfig) -> BuildConfig:
    if not isinstance(raw, dict):
        raise ConfigError("build section must be a mapping")
    _check_keys(raw, ("n_levels", "d_t", "d_m", "clustering"), "build")
    kwargs = {k: raw[k] for k in ("n_levels", "d_t", "d_m") if k in raw}
    if "clustering" in raw:
        if not isinstance(raw["clustering"], dict):
            raise ConfigError("build.clustering must map level -> params")
        clustering = {}
        for key, params in raw["clustering"].items():
            try:
                level = int(key)
            except (TypeError, ValueError) as exc:
                raise ConfigError(
                    f"build.clustering key {key!r} is not a level number"
                ) from exc
            clustering[level] = _dataclass_from_dict(
                ClusteringParams, params, f"build.clustering.{key}"
            )
        kwargs["clustering"] = clustering
    try:
        return BuildConfig(provider_config=providers, **kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad build config: {exc}") from exc


def app_config_from_dict(data: dict) -> AppConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    _check_keys(data, SECTIONS, "config")
    providers = _dataclass_from_dict(
        ProviderConfig, data.get("providers", {}), "providers"
    )
    return AppConfig(
        build=_build_from_dict(data.get("build", {}), providers),
        retrieval=_dataclass_from_dict(
            RetrievalConfig, data.get("retrieval", {}), "retrieval"
        ),
        providers=providers,
        paths=_dataclass_from_dict(PathsConfig, data.get("paths", {}), "paths"),
    )


def app_config_to_dict(cfg: AppConfig) -> dict:
    return {
        "build": {
            "n_levels": cfg.build.n_levels,
            "d_t": cfg.build.d_t,
            "d_m": cfg.build.d_m,
            "clustering": {
                str(level): {
                    "beta": p.beta,
                    "d_scale": p.d_scale,
                    "cut_threshold": p.cut_threshold,
                    "linkage": p.linkage,
                    "min_cluster_size": p.min_cluster_size,
                }
                for level, p in sorted(cfg.build.clustering.items())
            },
        },
        "retrieval": cfg.retrieval.to_dict(),
        "providers": {
            "backend": cfg.providers.backend,
            "endpoint_url": cfg.providers.endpoint_url,
            "api_key_env_var": cfg.providers.api_key_env_var,
            "model_names": dict(cfg.providers.model_names),
            "timeout": cfg.providers.timeout,
            "max_retries": cfg.providers.max_retries,
            "max_parallel_requests": cfg.providers.max_parallel_requests,
            "precomputed_path": cfg.providers.precomputed_path,
            "image_embeddings_url": cfg.providers.image_embeddings_url,
            "embodiment": cfg.providers.embodiment,
            "max_summary_chars": cfg.providers.max_summary_chars,
        },
        "paths": {
            "memory_dir": cfg.paths.memory_dir,
            "manifest": cfg.paths.manifest,
            "benchmark": cfg.paths.benchmark,
            "report_out": cfg.paths.report_out,
        },
    }


def apply_override(data: dict, item: str) -> None:
    """Set one dotted key in a raw config dict, ``section.name=value``.

    The value is parsed as JSON when possible and kept as a string
    otherwise, so ``retrieval.alpha=0.3`` and ``paths.manifest=v.jsonl``
    both work. Unknown keys are rejected later, by construction.
    """
    key, sep, raw_value = item.partition("=")
    key = key.strip()
    if not sep or not key:
        raise ConfigError(f"override {item!r} is not of the form key=value")
    try:
        value = json.loads(raw_value)
    except json.JSONDecodeError:
        value = raw_value
    parts = key.split(".")
    node = data
    for part in parts[:-1]:
        child = node.setdefault(part, {})
        if not isinstance(child, dict):
            raise ConfigError(f"cannot override {key!r}: {part!r} is a value")
        node = child
    node[parts[-1]] = value


def load_config(path: str | None = None, overrides=()) -> AppConfig:
    """Config file (optional) merged over defaults, then overrides."""
    data: dict = {}
    if path:
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: bad JSON: {exc}") from exc
    for item in overrides:
        apply_override(data, item)
    return app_config_from_dict(data)


def save_config(cfg: AppConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(app_config_to_dict(cfg), fh, indent=2, sort_keys=True)
        fh.write("\n")
