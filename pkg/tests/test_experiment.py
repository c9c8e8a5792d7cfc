import json

import pytest

from gnnmark import io
from gnnmark.experiment import (ConfigError, ExperimentFailed, Layout, build_config, check_manifest, full_experiment,
                                load_config, parse_override, read_config_mapping, resolve_threshold)

TINY = {
    "seed": 3,
    "task": "graph",
    "data": {"graph": {"num_graphs": 60, "min_nodes": 10, "max_nodes": 16, "density0": 0.1, "density1": 0.5}},
    "model": {"arch": "gin", "hidden": [8]},
    "clean_train": {"epochs": 30},
    "embed_train": {"epochs": 30},
    "verification": {"K": 2, "threshold": 0.5},
    "attacks": {"prune": [0.0, 1.0], "fine_tune": [2], "fine_prune": [0.5], "distill": [2], "subsample": [1.0],
                "num_votes": 3, "fine_tune_train": {"epochs": 2}, "distill_train": {"epochs": 2}},
    "sweep": {"r": [0.1, 0.2], "models": 1},
}


def tiny(tmp_path, **overrides):
    return build_config(TINY, {"out": str(tmp_path), **overrides})


def test_bundled_configs_load():
    g = load_config("default")
    n = load_config("node")
    assert (g.task, g.verification.K, g.watermark.r, g.watermark.gamma, g.watermark.p) == ("graph", 10, 0.15, 0.2, 1.0)
    assert (n.task, n.watermark.r, n.watermark.l) == ("node", 0.15, 20)


def test_unknown_key_rejected():
    with pytest.raises(ConfigError) as err:
        build_config({"seed": 1, "verification": {"k": 3}})
    assert err.value.field == "verification.k"


def test_seed_required():
    with pytest.raises(ConfigError) as err:
        build_config({})
    assert err.value.field == "seed"


def test_value_validation():
    with pytest.raises(ConfigError) as err:
        build_config({"seed": 1, "verification": {"K": 1}})
    assert err.value.field == "verification.K"
    with pytest.raises(ConfigError):
        build_config({"seed": 1, "data": {"graph": {"min_nodes": 9, "max_nodes": 5}}})


def test_overrides():
    cfg = load_config("default", dict([parse_override("verification.K=3"), parse_override("model.hidden=[4, 4]")]))
    assert cfg.verification.K == 3 and cfg.model.hidden == [4, 4]
    assert parse_override("watermark.strategy=T") == ("watermark.strategy", "T")
    with pytest.raises(ConfigError):
        parse_override("novalue")
    with pytest.raises(ConfigError):
        build_config({"seed": 1}, {"seed.inner": 2})


def test_multi_document_yaml_rejected(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("seed: 1\n---\nseed: 2\n")
    with pytest.raises(ConfigError):
        read_config_mapping(p)
    with pytest.raises(ConfigError):
        read_config_mapping(tmp_path / "missing.yaml")


def test_digest_ignores_output_directory(tmp_path):
    a = tiny(tmp_path / "a")
    b = tiny(tmp_path / "b")
    assert a.digest() == b.digest()
    assert a.digest() != tiny(tmp_path, seed=4).digest()


def test_threshold_resolution_order(tmp_path):
    cfg = tiny(tmp_path, **{"verification.threshold": None})
    layout = Layout(cfg)
    with pytest.raises(LookupError):
        resolve_threshold(cfg, layout)
    assert resolve_threshold(tiny(tmp_path, **{"verification.threshold": 0.4}), layout) == (0.4, "config")
    io.write_json(layout.calibration, {"format": "gwm-calibration", "version": 1, "threshold": 0.6})
    assert resolve_threshold(cfg, layout) == (0.6, "calibration")
    assert resolve_threshold(cfg, layout, 0.3) == (0.3, "flag")


@pytest.fixture(scope="module")
def tiny_run(tmp_path_factory):
    cfg = tiny(tmp_path_factory.mktemp("run"))
    return cfg, full_experiment(cfg)


def test_full_experiment_artifacts(tiny_run):
    cfg, manifest = tiny_run
    layout = Layout(cfg)
    assert manifest["stages_completed"] == ["data", "watermark", "models", "calibrate", "verify", "attacks",
                                            "sweep", "report"]
    assert check_manifest(layout.manifest) == []
    assert {"dataset.jsonl", "secret.json", "wm_data.jsonl", "models/clean-00.json", "models/wm-01.json",
            "calibration.json", "verdict-self.json", "verdict-clean.json", "curves/prune.json", "sweep.json",
            "report.md"} <= set(manifest["artifacts"])
    assert manifest["config_sha256"] == cfg.digest()
    assert "timestamp" not in json.dumps(manifest)
    assert len(manifest["seeds"]["clean"]) == 2


def test_sweep_output_shape(tiny_run):
    cfg, _ = tiny_run
    s = io.read_json(Layout(cfg).sweep, "gwm-sweep")
    assert [row["r"] for row in s["rows"]] == [0.1, 0.2]
    assert all(0 <= row["wm_acc"] <= 1 for row in s["rows"])


def test_report_uses_percentages(tiny_run):
    cfg, _ = tiny_run
    text = Layout(cfg).report.read_text()
    assert "## Verdicts" in text and "%" in text
    cal = io.read_json(Layout(cfg).calibration, "gwm-calibration")
    assert all(0 <= a <= 1 for a in cal["alpha"] + cal["beta"])


def test_tampered_artifact_detected(tiny_run, tmp_path):
    cfg, _ = tiny_run
    layout = Layout(cfg)
    path = layout.root / "report.md"
    original = path.read_text()
    try:
        path.write_text(original + "\nedited\n")
        assert check_manifest(layout.manifest) == ["report.md"]
    finally:
        path.write_text(original)


def test_failure_records_completed_stages(tmp_path):
    cfg = tiny(tmp_path, **{"watermark.strategy": "T", "watermark.r": 1.0})
    with pytest.raises(ExperimentFailed) as err:
        full_experiment(cfg)
    assert err.value.stage == "watermark"
    manifest = io.read_json(Layout(cfg).manifest, "gwm-manifest")
    assert manifest["stages_completed"] == ["data"]
    assert manifest["failed_stage"] == "watermark" and "InsufficientCarriers" in manifest["error"]


def test_node_task_smoke(tmp_path):
    cfg = build_config({"seed": 5, "task": "node", "out": str(tmp_path),
                        "data": {"node": {"num_nodes": 90, "feature_dim": 16}},
                        "model": {"arch": "gcn", "hidden": [16]},
                        "clean_train": {"epochs": 60}, "embed_train": {"epochs": 60},
                        "watermark": {"l": 5}, "verification": {"K": 2},
                        "attacks": {"prune": [0.2], "fine_tune": [], "fine_prune": [], "distill": [2],
                                    "subsample": [1.0], "num_votes": 3},
                        "sweep": {"r": []}})
    manifest = full_experiment(cfg)
    assert "sweep.json" not in manifest["artifacts"]
    assert "dataset.json" in manifest["artifacts"] and "curves/distill.json" in manifest["artifacts"]
    assert check_manifest(Layout(cfg).manifest) == []
