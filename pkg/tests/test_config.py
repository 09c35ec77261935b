"""Application config loading, overrides, and round trips."""

import json

import pytest

from affmem.config import (
    AppConfig,
    PathsConfig,
    app_config_from_dict,
    app_config_to_dict,
    apply_override,
    load_config,
    save_config,
)
from affmem.errors import ConfigError


def test_defaults():
    cfg = AppConfig()
    assert cfg.build.n_levels == 6
    assert cfg.build.d_t == 512
    assert cfg.retrieval.alpha == 0.5
    assert cfg.providers.backend == "mock"
    assert cfg.paths.memory_dir == "memory"
    # the provider section is shared with the builder
    assert cfg.build.provider_config is cfg.providers


def test_empty_dict_gives_defaults():
    cfg = app_config_from_dict({})
    assert app_config_to_dict(cfg) == app_config_to_dict(AppConfig())


def test_dict_round_trip_is_lossless():
    cfg = app_config_from_dict(
        {
            "build": {
                "d_t": 64,
                "d_m": 32,
                "clustering": {"4": {"cut_threshold": 0.3}},
            },
            "retrieval": {"alpha": 0.25, "k_f": 7},
            "providers": {"backend": "mock", "max_summary_chars": 99},
            "paths": {"manifest": "custom.jsonl"},
        }
    )
    doc = app_config_to_dict(cfg)
    again = app_config_to_dict(app_config_from_dict(doc))
    assert doc == again
    assert doc["build"]["d_t"] == 64
    assert doc["build"]["clustering"]["4"]["cut_threshold"] == 0.3
    # unspecified clustering levels keep their defaults out of the doc
    assert set(doc["build"]["clustering"]) == {"4"}
    assert doc["retrieval"]["alpha"] == 0.25
    assert doc["paths"]["manifest"] == "custom.jsonl"


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError, match="unknown config key"):
        app_config_from_dict({"retreival": {}})
    with pytest.raises(ConfigError, match="unknown retrieval key"):
        app_config_from_dict({"retrieval": {"alhpa": 0.3}})
    with pytest.raises(ConfigError, match="unknown build key"):
        app_config_from_dict({"build": {"levels": 6}})
    with pytest.raises(ConfigError, match="unknown providers key"):
        app_config_from_dict({"providers": {"name": "x"}})
    with pytest.raises(ConfigError, match="unknown paths key"):
        app_config_from_dict({"paths": {"memory": "x"}})


def test_bad_values_become_config_errors():
    with pytest.raises(ConfigError, match="alpha must lie"):
        app_config_from_dict({"retrieval": {"alpha": 3.0}})
    with pytest.raises(ConfigError, match="bad providers config"):
        app_config_from_dict({"providers": {"backend": "smoke"}})
    with pytest.raises(ConfigError, match="bad build config"):
        app_config_from_dict({"build": {"n_levels": 2}})
    with pytest.raises(ConfigError, match="not a level number"):
        app_config_from_dict({"build": {"clustering": {"zone": {}}}})
    with pytest.raises(ConfigError, match="must be a mapping"):
        app_config_from_dict({"retrieval": 7})
    with pytest.raises(ConfigError, match="must be a JSON object"):
        app_config_from_dict([1, 2])


def test_apply_override_parses_json_values():
    data = {}
    apply_override(data, "retrieval.alpha=0.3")
    apply_override(data, "retrieval.enable_asr=false")
    apply_override(data, "build.clustering.4.cut_threshold=0.2")
    apply_override(data, "paths.manifest=my views.jsonl")
    assert data == {
        "retrieval": {"alpha": 0.3, "enable_asr": False},
        "build": {"clustering": {"4": {"cut_threshold": 0.2}}},
        # not valid JSON, kept as a raw string
        "paths": {"manifest": "my views.jsonl"},
    }


def test_apply_override_rejects_malformed_items():
    with pytest.raises(ConfigError, match="key=value"):
        apply_override({}, "retrieval.alpha")
    with pytest.raises(ConfigError, match="key=value"):
        apply_override({}, "=5")
    data = {"retrieval": {"alpha": 0.5}}
    with pytest.raises(ConfigError, match="is a value"):
        apply_override(data, "retrieval.alpha.deeper=1")


def test_load_config_defaults_file_and_overrides(tmp_path):
    assert app_config_to_dict(load_config()) == app_config_to_dict(AppConfig())

    path = tmp_path / "config.json"
    path.write_text(json.dumps({"retrieval": {"alpha": 0.8}}))
    cfg = load_config(str(path))
    assert cfg.retrieval.alpha == 0.8

    cfg = load_config(str(path), overrides=["retrieval.alpha=0.1", "build.d_t=16"])
    assert cfg.retrieval.alpha == 0.1
    assert cfg.build.d_t == 16


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError, match="cannot read config"):
        load_config(str(tmp_path / "absent.json"))
    bad = tmp_path / "bad.json"
    bad.write_text("{nope")
    with pytest.raises(ConfigError, match="bad JSON"):
        load_config(str(bad))
    good = tmp_path / "good.json"
    good.write_text("{}")
    with pytest.raises(ConfigError):
        load_config(str(good), overrides=["retrieval.alpha=2.0"])


def test_save_config_round_trip(tmp_path):
    cfg = app_config_from_dict(
        {"retrieval": {"alpha": 0.7}, "providers": {"timeout": 12.5}}
    )
    path = tmp_path / "saved.json"
    save_config(cfg, path)
    loaded = load_config(str(path))
    assert loaded.retrieval.alpha == 0.7
    assert loaded.providers.timeout == 12.5
    assert app_config_to_dict(loaded) == app_config_to_dict(cfg)


def test_paths_config_fields():
    paths = PathsConfig(memory_dir="m", manifest="v.jsonl",
                        benchmark="b.jsonl", report_out="r")
    cfg = AppConfig(paths=paths)
    doc = app_config_to_dict(cfg)
    assert doc["paths"] == {
        "memory_dir": "m",
        "manifest": "v.jsonl",
        "benchmark": "b.jsonl",
        "report_out": "r",
    }
