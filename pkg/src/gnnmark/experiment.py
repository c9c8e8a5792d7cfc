"""Experiment configuration, pipeline stages and the seeded run manifest."""

from __future__ import annotations

import copy
import dataclasses
import hashlib
import logging
from importlib import resources
from pathlib import Path
from typing import Literal, Optional

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from . import __version__, io
from .graph import GraphDataset, NodeTask, synth_graph_dataset, synth_node_task
from .nn.model import Model, ModelSpec, graph_examples, load_model, node_examples, save_model
from .nn.train import TrainConfig, train
from .rng import RngStream
from .robustness import ATTACKS, AttackConfig, accuracy, save_curve, sweep
from .verification import (CalibrationInfeasible, LocalModel, calibrate_threshold, save_verdict, verify_ownership,
                           watermark_accuracy, welch_t)
from .watermark import (WatermarkedDataset, embed, gen_graph_secret, gen_node_secret, load_secret, load_wm_dataset,
                        make_wm_data_node, make_wm_data_R, make_wm_data_T, save_secret, save_wm_dataset)

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    """Invalid or inconsistent configuration; ``field`` is the dotted key at fault."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


# -- configuration -----------------------------------------------------------

class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class GraphDataConfig(_Strict):
    num_graphs: int = Field(300, ge=2)
    min_nodes: int = Field(20, ge=1)
    max_nodes: int = Field(40, ge=1)
    density0: float = Field(0.02, ge=0, le=1)
    density1: float = Field(0.06, ge=0, le=1)
    feature_mode: Literal["degree", "constant"] = "degree"

    @model_validator(mode="after")
    def _sizes(self):
        if self.max_nodes < self.min_nodes:
            raise ValueError("max_nodes must be >= min_nodes")
        return self


class NodeDataConfig(_Strict):
    num_nodes: int = Field(200, ge=2)
    num_blocks: int = Field(3, ge=2)
    p_in: float = Field(0.2, ge=0, le=1)
    p_out: float = Field(0.02, ge=0, le=1)
    feature_dim: int = Field(32, ge=1)
    noise: float = Field(0.3, ge=0)


class DataConfig(_Strict):
    path: Optional[str] = None
    graph: GraphDataConfig = GraphDataConfig()
    node: NodeDataConfig = NodeDataConfig()


class ModelConfig(_Strict):
    arch: Literal["gcn", "gin", "sage-mean"] = "gin"
    hidden: list[int] = [32, 32]


class TrainSection(_Strict):
    epochs: int = Field(200, ge=0)
    learning_rate: float = Field(0.01, gt=0)
    optimizer: Literal["adam", "sgd"] = "adam"
    temperature: float = Field(1.0, gt=0)

    def to_train_config(self) -> TrainConfig:
        return TrainConfig(epochs=self.epochs, learning_rate=self.learning_rate, optimizer=self.optimizer,
                           temperature=self.temperature)


class WatermarkConfig(_Strict):
    strategy: Literal["R", "T"] = "R"
    r: float = Field(0.15, gt=0, le=1)
    gamma: float = Field(0.2, gt=0, le=1)
    p: float = Field(1.0, ge=0, le=1)
    l: int = Field(20, ge=0)
    target_label: int = Field(0, ge=0)
    replay: bool = True


class VerificationConfig(_Strict):
    K: int = Field(10, ge=2)
    q: Optional[int] = Field(None, ge=1)
    tau: float = Field(0.95, gt=0, lt=1)
    max_fpr: float = Field(1e-4, gt=0, lt=0.5)
    max_fnr: float = Field(1e-4, gt=0, lt=0.5)
    threshold: Optional[float] = Field(None, ge=0, le=1)


class AttackGrids(_Strict):
    prune: list[float] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0]
    fine_tune: list[int] = [10, 25, 50, 100]
    fine_prune: list[float] = [0.1, 0.3, 0.5, 0.7, 0.9]
    distill: list[int] = [25, 50, 100, 200]
    subsample: list[float] = [0.5, 0.7, 0.9, 1.0]
    num_votes: int = Field(11, ge=1)
    fine_tune_train: TrainSection = TrainSection(epochs=50)
    distill_train: TrainSection = TrainSection(epochs=100)

    def attack_config(self) -> AttackConfig:
        return AttackConfig(fine_tune=self.fine_tune_train.to_train_config(),
                            distill=self.distill_train.to_train_config(), num_votes=self.num_votes)


class SweepConfig(_Strict):
    r: list[float] = [0.01, 0.05, 0.10, 0.15]
    models: int = Field(1, ge=1)


class ExperimentConfig(_Strict):
    seed: int
    out: str = "runs/default"
    task: Literal["graph", "node"] = "graph"
    data: DataConfig = DataConfig()
    model: ModelConfig = ModelConfig()
    clean_train: TrainSection = TrainSection()
    embed_train: TrainSection = TrainSection()
    watermark: WatermarkConfig = WatermarkConfig()
    verification: VerificationConfig = VerificationConfig()
    attacks: AttackGrids = AttackGrids()
    sweep: SweepConfig = SweepConfig()

    def digest(self) -> str:
        """Hash of every field except the output directory."""
        obj = self.model_dump(mode="json", exclude={"out"})
        return hashlib.sha256(io.dumps(obj).encode()).hexdigest()


BUNDLED = ("default", "node")


def _set_path(obj: dict, dotted: str, value) -> None:
    keys = dotted.split(".")
    for k in keys[:-1]:
        nxt = obj.setdefault(k, {})
        if not isinstance(nxt, dict):
            raise ConfigError(dotted, f"{k!r} is not a section")
        obj = nxt
    obj[keys[-1]] = value


def read_config_mapping(source: str | Path | None) -> dict:
    """Parse a single-document YAML file, or a bundled config by name."""
    if source is None or str(source) in BUNDLED:
        name = source or "default"
        text = resources.files("gnnmark").joinpath(f"configs/{name}.yaml").read_text()
    else:
        path = Path(source)
        if not path.is_file():
            raise ConfigError("config", f"file not found: {path}")
        text = path.read_text()
    try:
        docs = list(yaml.safe_load_all(text))
    except yaml.YAMLError as exc:
        raise ConfigError("config", f"invalid YAML: {exc}") from None
    if len(docs) != 1 or not isinstance(docs[0], dict):
        raise ConfigError("config", "expected a single YAML mapping document")
    return docs[0]


def build_config(mapping: dict, overrides: dict | None = None) -> ExperimentConfig:
    mapping = copy.deepcopy(mapping)
    for key, value in (overrides or {}).items():
        _set_path(mapping, key, value)
    try:
        return ExperimentConfig.model_validate(mapping)
    except ValidationError as exc:
        err = exc.errors()[0]
        field = ".".join(str(p) for p in err["loc"]) or "config"
        raise ConfigError(field, err["msg"]) from None


def load_config(source=None, overrides: dict | None = None) -> ExperimentConfig:
    return build_config(read_config_mapping(source), overrides)


def parse_override(text: str) -> tuple[str, object]:
    key, sep, value = text.partition("=")
    if not sep or not key:
        raise ConfigError("--set", f"expected key=value, got {text!r}")
    return key.strip(), yaml.safe_load(value)


# -- artifact layout ---------------------------------------------------------

class Layout:
    """Where each artifact of a run lives under the output directory."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.root = Path(cfg.out)

    @property
    def dataset(self) -> Path:
        if self.cfg.data.path:
            return Path(self.cfg.data.path)
        return self.root / ("dataset.json" if self.cfg.task == "node" else "dataset.jsonl")

    def clean_model(self, k: int = 0) -> Path:
        return self.root / "models" / f"clean-{k:02d}.json"

    def wm_model(self, k: int = 0) -> Path:
        return self.root / "models" / f"wm-{k:02d}.json"

    @property
    def heldout_model(self) -> Path:
        return self.root / "models" / "clean-heldout.json"

    @property
    def secret(self) -> Path:
        return self.root / "secret.json"

    @property
    def wm_data(self) -> Path:
        return self.root / ("wm_data.json" if self.cfg.task == "node" else "wm_data.jsonl")

    @property
    def calibration(self) -> Path:
        return self.root / "calibration.json"

    def curve(self, kind: str) -> Path:
        return self.root / "curves" / f"{kind}.json"

    @property
    def sweep(self) -> Path:
        return self.root / "sweep.json"

    @property
    def report(self) -> Path:
        return self.root / "report.md"

    @property
    def manifest(self) -> Path:
        return self.root / "manifest.json"


def _mkparent(path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


# -- pipeline stages ---------------------------------------------------------

def root_stream(cfg: ExperimentConfig) -> RngStream:
    return RngStream(cfg.seed)


def make_data(cfg: ExperimentConfig) -> GraphDataset | NodeTask:
    rng = root_stream(cfg).child("data")
    if cfg.task == "graph":
        d = cfg.data.graph
        return synth_graph_dataset(d.num_graphs, (d.min_nodes, d.max_nodes), d.density0, d.density1,
                                   d.feature_mode, rng)
    d = cfg.data.node
    return synth_node_task(d.num_nodes, d.num_blocks, d.p_in, d.p_out, d.feature_dim, rng, noise=d.noise)


def load_data(cfg: ExperimentConfig, layout: Layout | None = None) -> GraphDataset | NodeTask:
    layout = layout or Layout(cfg)
    path = layout.dataset
    if not path.is_file():
        field = "data.path" if cfg.data.path else "dataset"
        raise ConfigError(field, f"file not found: {path} (run gen-data first)")
    data = io.load_dataset(path)
    if isinstance(data, NodeTask) != (cfg.task == "node"):
        raise ConfigError("task", f"dataset {path} does not match task {cfg.task!r}")
    return data


def model_spec(cfg: ExperimentConfig, data: GraphDataset | NodeTask) -> ModelSpec:
    return ModelSpec(cfg.model.arch, (data.feature_dim, *cfg.model.hidden), data.num_classes, cfg.task)


def train_clean(cfg: ExperimentConfig, data, k: int | str = 0) -> Model:
    rng = root_stream(cfg).child(f"clean/{k}")
    model = Model.init(model_spec(cfg, data), rng.child("init"))
    if isinstance(data, NodeTask):
        ex = node_examples(data.graph, np.flatnonzero(data.train_mask), data.labels, data.num_classes)
    else:
        ex = graph_examples(data.train_graphs(), data.num_classes)
    return train(model, ex, cfg.clean_train.to_train_config(), rng.child("train"))


@dataclasses.dataclass
class WatermarkBundle:
    """Secret, verification queries and the embedding input derived from them."""
    secret: object
    d_wm: WatermarkedDataset
    embed_input: object
    replay: list | None
    eval_data: GraphDataset | NodeTask


def make_watermark(cfg: ExperimentConfig, data, r: float | None = None, label: str = "watermark") -> WatermarkBundle:
    w = cfg.watermark
    r = w.r if r is None else r
    rng = root_stream(cfg).child(label)
    if isinstance(data, NodeTask):
        secret = gen_node_secret(data, r, w.l, w.target_label, rng.child("secret"))
        return bundle_from_secret(cfg, data, secret, rng)
    secret = gen_graph_secret(data, w.strategy, r, w.gamma, w.p, w.target_label, rng.child("secret"))
    return bundle_from_secret(cfg, data, secret, rng)


def bundle_from_secret(cfg: ExperimentConfig, data, secret, rng: RngStream | None = None) -> WatermarkBundle:
    """Rebuild the watermark data from a stored secret (deterministic given the seed)."""
    rng = rng or root_stream(cfg).child("watermark")
    if isinstance(data, NodeTask):
        modified, d_wm = make_wm_data_node(data, secret)
        eval_data = data.replace(test_mask=modified.test_mask)
        return WatermarkBundle(secret, d_wm, modified, None, eval_data)
    replay = data.train_graphs() if cfg.watermark.replay else None
    if secret.strategy == "T":
        d_tmp, d_wm = make_wm_data_T(data, secret, rng.child("data"))
        return WatermarkBundle(secret, d_wm, (d_tmp, d_wm), replay, data)
    d_wm = make_wm_data_R(data, secret, rng.child("data"))
    return WatermarkBundle(secret, d_wm, d_wm, replay, data)


def embed_model(cfg: ExperimentConfig, clean: Model, bundle: WatermarkBundle, k: int | str = 0,
                label: str = "embed") -> Model:
    rng = root_stream(cfg).child(f"{label}/{k}")
    return embed(clean, bundle.embed_input, cfg.embed_train.to_train_config(), rng, replay=bundle.replay)


def query_set(cfg: ExperimentConfig, d_wm: WatermarkedDataset) -> WatermarkedDataset:
    """The first ``q`` verification queries (all of them when q is unset)."""
    q = cfg.verification.q
    if q is None or q >= len(d_wm):
        return d_wm
    if d_wm.kind == "graph":
        return dataclasses.replace(d_wm, graphs=d_wm.graphs[:q])
    return dataclasses.replace(d_wm, nodes=d_wm.nodes[:q])


@dataclasses.dataclass
class Calibration:
    alpha: list[float]
    beta: list[float]
    clean_test: list[float]
    wm_test: list[float]
    t_test: object
    threshold: float | None
    infeasible: str | None = None

    def to_obj(self) -> dict:
        drop = float(np.mean(self.clean_test) - np.mean(self.wm_test))
        return {"format": "gwm-calibration", "version": io.VERSION,
                "alpha": self.alpha, "beta": self.beta,
                "clean_test_acc": self.clean_test, "wm_test_acc": self.wm_test, "fidelity_drop": drop,
                "t_test": self.t_test.to_obj(), "threshold": self.threshold, "infeasible": self.infeasible}


def calibrate(cfg: ExperimentConfig, clean_models, wm_models, bundle: WatermarkBundle) -> Calibration:
    v = cfg.verification
    d = query_set(cfg, bundle.d_wm)
    alpha = [watermark_accuracy(LocalModel(m), d) for m in wm_models]
    beta = [watermark_accuracy(LocalModel(m), d) for m in clean_models]
    clean_test = [accuracy(m, bundle.eval_data) for m in clean_models]
    wm_test = [accuracy(m, bundle.eval_data) for m in wm_models]
    tt = welch_t(alpha, beta, v.tau)
    try:
        thr, why = calibrate_threshold(alpha, beta, v.max_fpr, v.max_fnr), None
    except CalibrationInfeasible as exc:
        thr, why = None, str(exc)
    return Calibration(alpha, beta, clean_test, wm_test, tt, thr, why)


def calibration_run(cfg: ExperimentConfig, data, bundle: WatermarkBundle, layout: Layout | None = None,
                    save_models: bool = False) -> Calibration:
    """Train K clean and K watermarked models and calibrate on them."""
    clean, wm = [], []
    for k in range(cfg.verification.K):
        mc = train_clean(cfg, data, k)
        mw = embed_model(cfg, mc, bundle, k)
        clean.append(mc)
        wm.append(mw)
        if save_models and layout is not None:
            save_model(mc, _mkparent(layout.clean_model(k)))
            save_model(mw, _mkparent(layout.wm_model(k)))
        log.info("model pair %d trained", k)
    return calibrate(cfg, clean, wm, bundle)


def resolve_threshold(cfg: ExperimentConfig, layout: Layout, flag: float | None = None) -> tuple[float, str]:
    """Threshold from the flag, then the config, then a stored calibration."""
    if flag is not None:
        return flag, "flag"
    if cfg.verification.threshold is not None:
        return cfg.verification.threshold, "config"
    if layout.calibration.is_file():
        obj = io.read_json(layout.calibration, "gwm-calibration")
        if obj.get("threshold") is None:
            raise RuntimeError(f"stored calibration is infeasible: {obj.get('infeasible')}")
        return float(obj["threshold"]), "calibration"
    raise LookupError("no threshold available")


# -- r sweep -----------------------------------------------------------------

def sweep_r(cfg: ExperimentConfig, data, clean_models) -> dict:
    rows = []
    for r in cfg.sweep.r:
        bundle = make_watermark(cfg, data, r=r, label=f"sweep/r={r!r}")
        d = query_set(cfg, bundle.d_wm)
        wm_acc, test_acc, clean_wm = [], [], []
        for k, mc in enumerate(clean_models):
            mw = embed_model(cfg, mc, bundle, k, label=f"sweep/r={r!r}/embed")
            wm_acc.append(watermark_accuracy(LocalModel(mw), d))
            test_acc.append(accuracy(mw, bundle.eval_data))
            clean_wm.append(watermark_accuracy(LocalModel(mc), d))
        rows.append({"r": r, "queries": len(d), "wm_acc": float(np.mean(wm_acc)),
                     "test_acc": float(np.mean(test_acc)), "clean_wm_acc": float(np.mean(clean_wm))})
        log.info("sweep r=%s: wm_acc %.3f", r, rows[-1]["wm_acc"])
    return {"format": "gwm-sweep", "version": io.VERSION, "parameter": "r", "rows": rows}


# -- reports -----------------------------------------------------------------

def _pct(x) -> str:
    return "n/a" if x is None else f"{100 * x:.1f}%"


def render_report(cfg: ExperimentConfig, layout: Layout) -> str:
    """Human-readable summary of whatever artifacts exist under the run directory."""
    lines = [f"# Run summary ({cfg.task} task, seed {cfg.seed})", ""]
    if layout.calibration.is_file():
        c = io.read_json(layout.calibration, "gwm-calibration")
        tt = c["t_test"]
        lines += ["## Calibration", "",
                  f"- models per group: {len(c['alpha'])}",
                  f"- watermark accuracy, watermarked models: {_pct(np.mean(c['alpha']))}",
                  f"- watermark accuracy, clean models: {_pct(np.mean(c['beta']))}",
                  f"- clean test accuracy, clean models: {_pct(np.mean(c['clean_test_acc']))}",
                  f"- clean test accuracy, watermarked models: {_pct(np.mean(c['wm_test_acc']))}",
                  f"- Welch t = {tt['t']}, nu = {tt['nu']:.3f}, df = {tt['df']}, "
                  f"t_crit = {tt['t_critical']:.4f}, reject H0: {tt['reject_h0']}",
                  f"- threshold: {_pct(c['threshold']) if c['threshold'] is not None else c['infeasible']}", ""]
    verdicts = sorted(layout.root.glob("verdict*.json"))
    if verdicts:
        lines += ["## Verdicts", "", "| file | watermark accuracy | threshold | decision |", "|---|---|---|---|"]
        for p in verdicts:
            v = io.read_json(p, "gwm-verdict")
            lines.append(f"| {p.name} | {_pct(v['accuracy'])} | {_pct(v['threshold'])} | {v['decision']} |")
        lines.append("")
    curves = sorted((layout.root / "curves").glob("*.json")) if (layout.root / "curves").is_dir() else []
    for p in curves:
        c = io.read_json(p, "gwm-curve")
        lines += [f"## Attack: {c['attack']}", "", "| param | test accuracy | watermark accuracy |", "|---|---|---|"]
        for row in c["rows"]:
            if row["valid"]:
                lines.append(f"| {row['param']} | {_pct(row['test_acc'])} | {_pct(row['wm_acc'])} |")
            else:
                lines.append(f"| {row['param']} | failed: {row['error']} | |")
        lines.append("")
    if layout.sweep.is_file():
        s = io.read_json(layout.sweep, "gwm-sweep")
        lines += ["## Watermarking rate sweep", "", "| r | watermark accuracy | test accuracy | clean-model watermark accuracy |",
                  "|---|---|---|---|"]
        for row in s["rows"]:
            lines.append(f"| {row['r']} | {_pct(row['wm_acc'])} | {_pct(row['test_acc'])} | {_pct(row['clean_wm_acc'])} |")
        lines.append("")
    return "\n".join(lines)


# -- full experiment ---------------------------------------------------------

class ExperimentFailed(RuntimeError):
    def __init__(self, stage: str, cause: BaseException, manifest: dict):
        self.stage = stage
        self.cause = cause
        self.manifest = manifest
        super().__init__(f"stage {stage!r} failed: {cause}")


def stage_seeds(cfg: ExperimentConfig) -> dict:
    return {"data": str(root_stream(cfg).child("data")),
            "watermark": str(root_stream(cfg).child("watermark")),
            "clean": [str(root_stream(cfg).child(f"clean/{k}")) for k in range(cfg.verification.K)],
            "embed": [str(root_stream(cfg).child(f"embed/{k}")) for k in range(cfg.verification.K)],
            "heldout": str(root_stream(cfg).child("clean/heldout")),
            "attacks": str(root_stream(cfg).child("attacks")),
            "sweep": str(root_stream(cfg).child("sweep"))}


def build_manifest(cfg: ExperimentConfig, layout: Layout, artifacts: list[Path], stages: list[str],
                   failed: str | None = None, error: str | None = None) -> dict:
    rel = sorted(str(p.relative_to(layout.root)) if p.is_relative_to(layout.root) else str(p) for p in artifacts)
    digests = {}
    for name in rel:
        path = layout.root / name if not Path(name).is_absolute() else Path(name)
        digests[name] = io.sha256_file(path)
    obj = {"format": "gwm-manifest", "version": io.VERSION, "tool_version": __version__,
           "config_sha256": cfg.digest(), "config": cfg.model_dump(mode="json", exclude={"out"}),
           "seeds": stage_seeds(cfg), "stages_completed": stages, "artifacts": digests}
    if failed:
        obj["failed_stage"] = failed
        obj["error"] = error
    return obj


def check_manifest(path: str | Path) -> list[str]:
    """Artifacts whose file is missing or whose digest no longer matches."""
    path = Path(path)
    obj = io.read_json(path, "gwm-manifest")
    bad = []
    for name, digest in obj["artifacts"].items():
        p = path.parent / name
        if not p.is_file() or io.sha256_file(p) != digest:
            bad.append(name)
    return bad


def full_experiment(cfg: ExperimentConfig) -> dict:
    """Run every stage, write all artifacts and return the manifest."""
    layout = Layout(cfg)
    layout.root.mkdir(parents=True, exist_ok=True)
    artifacts: list[Path] = []
    stages: list[str] = []
    state: dict = {}

    def s_data():
        if cfg.data.path:
            state["data"] = load_data(cfg, layout)
        else:
            state["data"] = make_data(cfg)
            io.save_dataset(state["data"], layout.dataset)
        artifacts.append(layout.dataset)

    def s_watermark():
        b = state["bundle"] = make_watermark(cfg, state["data"])
        save_secret(b.secret, layout.secret)
        save_wm_dataset(b.d_wm, layout.wm_data)
        artifacts.extend([layout.secret, layout.wm_data])

    def s_models():
        clean, wm = [], []
        for k in range(cfg.verification.K):
            mc = train_clean(cfg, state["data"], k)
            mw = embed_model(cfg, mc, state["bundle"], k)
            for m, p in ((mc, layout.clean_model(k)), (mw, layout.wm_model(k))):
                save_model(m, _mkparent(p))
                artifacts.append(p)
            clean.append(mc)
            wm.append(mw)
            log.info("model pair %d/%d trained", k + 1, cfg.verification.K)
        state["clean"], state["wm"] = clean, wm

    def s_calibrate():
        c = state["calibration"] = calibrate(cfg, state["clean"], state["wm"], state["bundle"])
        io.write_json(layout.calibration, c.to_obj())
        artifacts.append(layout.calibration)

    def s_verify():
        c = state["calibration"]
        thr = cfg.verification.threshold if cfg.verification.threshold is not None else c.threshold
        if thr is None:
            raise RuntimeError(c.infeasible)
        d = query_set(cfg, state["bundle"].d_wm)
        held = train_clean(cfg, state["data"], "heldout")
        save_model(held, _mkparent(layout.heldout_model))
        artifacts.append(layout.heldout_model)
        for name, m in (("verdict-self.json", state["wm"][0]), ("verdict-clean.json", held)):
            save_verdict(verify_ownership(LocalModel(m), d, thr, c.t_test), layout.root / name)
            artifacts.append(layout.root / name)

    def s_attacks():
        rng = root_stream(cfg).child("attacks")
        acfg = cfg.attacks.attack_config()
        eval_data = state["bundle"].eval_data
        d = query_set(cfg, state["bundle"].d_wm)
        for kind in ATTACKS:
            grid = getattr(cfg.attacks, kind)
            if not grid:
                continue
            curve = sweep(kind, state["wm"][0], grid, eval_data, d, rng.child(kind), acfg)
            save_curve(curve, _mkparent(layout.curve(kind)))
            artifacts.append(layout.curve(kind))
            log.info("attack %s done", kind)

    def s_sweep():
        if not cfg.sweep.r:
            return
        clean = state["clean"][:cfg.sweep.models]
        io.write_json(layout.sweep, sweep_r(cfg, state["data"], clean))
        artifacts.append(layout.sweep)

    def s_report():
        layout.report.write_text(render_report(cfg, layout))
        artifacts.append(layout.report)

    for name, fn in (("data", s_data), ("watermark", s_watermark), ("models", s_models),
                     ("calibrate", s_calibrate), ("verify", s_verify), ("attacks", s_attacks),
                     ("sweep", s_sweep), ("report", s_report)):
        try:
            fn()
        except Exception as exc:
            manifest = build_manifest(cfg, layout, artifacts, stages, name, f"{type(exc).__name__}: {exc}")
            io.write_json(layout.manifest, manifest)
            raise ExperimentFailed(name, exc, manifest) from exc
        stages.append(name)
        log.info("stage %s complete", name)
    manifest = build_manifest(cfg, layout, artifacts, stages)
    io.write_json(layout.manifest, manifest)
    return manifest


def load_bundle(cfg: ExperimentConfig, layout: Layout, data) -> WatermarkBundle:
    """Watermark bundle from the stored secret when present, else regenerated."""
    if layout.secret.is_file():
        return bundle_from_secret(cfg, data, load_secret(layout.secret))
    return make_watermark(cfg, data)


def load_wm_queries(cfg: ExperimentConfig, layout: Layout, path: str | Path | None = None) -> WatermarkedDataset:
    p = Path(path) if path else layout.wm_data
    if not p.is_file():
        raise ConfigError("wm_data", f"file not found: {p} (run embed first)")
    return query_set(cfg, load_wm_dataset(p))


def load_model_file(path: Path, field: str) -> Model:
    if not path.is_file():
        raise ConfigError(field, f"file not found: {path}")
    return load_model(path)

