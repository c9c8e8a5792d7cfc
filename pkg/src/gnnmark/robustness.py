"""Watermark-removal attacks: pruning, fine-tuning, fine-pruning,
distillation and randomized subsampling."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import io
from .graph import Graph, GraphDataset, NodeTask
from .nn.graphops import Batch
from .nn.model import Examples, Model, graph_examples, node_examples, predict, softmax
from .nn.train import TrainConfig, train
from .rng import RngStream
from .verification import LocalModel, watermark_accuracy
from .watermark import WatermarkedDataset

ATTACKS = ("prune", "fine_tune", "fine_prune", "distill", "subsample")


@dataclass(frozen=True)
class AttackConfig:
    fine_tune: TrainConfig = field(default_factory=lambda: TrainConfig(epochs=50, learning_rate=0.01))
    distill: TrainConfig = field(default_factory=lambda: TrainConfig(epochs=100, learning_rate=0.01))
    pruning_rate: float = 0.5
    num_votes: int = 11

    def __post_init__(self):
        if self.num_votes < 1 or self.num_votes % 2 == 0:
            raise ValueError("num_votes must be odd and >= 1")
        if not 0 <= self.pruning_rate <= 1:
            raise ValueError("pruning_rate must be in [0, 1]")


# -- pruning -----------------------------------------------------------------

def prune(m: Model, rate: float) -> Model:
    """Zero the floor(rate·P) smallest-magnitude parameters across all matrices.

    Ties are broken by (parameter name, flat index).  Existing zeros are the
    smallest magnitudes and therefore count toward the budget.
    """
    if not 0 <= rate <= 1:
        raise ValueError(f"pruning rate {rate} outside [0, 1]")
    out = m.copy()
    names = sorted(out.params)
    flat = np.concatenate([out.params[k].ravel() for k in names])
    k = math.floor(round(rate * flat.size, 9))
    order = np.argsort(np.abs(flat), kind="stable")
    flat[order[:k]] = 0.0
    start = 0
    for name in names:
        w = out.params[name]
        out.params[name] = flat[start:start + w.size].reshape(w.shape).copy()
        start += w.size
    out.meta = {**out.meta, "pruned": out.meta.get("pruned", []) + [rate]}
    return out


# -- attacker data -----------------------------------------------------------

def items_under_test(data: GraphDataset | NodeTask) -> np.ndarray:
    if isinstance(data, NodeTask):
        return np.flatnonzero(data.test_mask)
    return np.asarray(data.test, dtype=np.int64)


def split_test(data: GraphDataset | NodeTask, rng: RngStream) -> tuple[np.ndarray, np.ndarray]:
    """Seeded half/half split of the test items: (tuning, evaluation).

    The tuning half gets floor(n/2) items, the evaluation half the rest.
    """
    items = items_under_test(data)
    if len(items) < 2:
        raise ValueError("test split needs at least 2 items")
    perm = rng.generator().permutation(items)
    half = len(items) // 2
    return np.sort(perm[:half]), np.sort(perm[half:])


def labelled_examples(data: GraphDataset | NodeTask, items, num_classes: int) -> Examples:
    if isinstance(data, NodeTask):
        return node_examples(data.graph, items, data.labels, num_classes)
    return graph_examples([data.graphs[i] for i in items], num_classes)


def accuracy(m: Model, data: GraphDataset | NodeTask, items=None) -> float:
    items = items_under_test(data) if items is None else np.asarray(items, dtype=np.int64)
    if isinstance(data, NodeTask):
        return float((predict(m, data.graph)[items] == data.labels[items]).mean())
    graphs = [data.graphs[i] for i in items]
    return float((predict(m, graphs) == np.array([g.label for g in graphs])).mean())


# -- fine-tuning / distillation ----------------------------------------------

def fine_tune(m: Model, data: GraphDataset | NodeTask, config: TrainConfig, rng: RngStream):
    """Continue training on the tuning half of the test data (true labels).

    Returns ``(model, evaluation_items)``.
    """
    tune, held = split_test(data, rng.child("split"))
    ex = labelled_examples(data, tune, m.spec.num_classes)
    return train(m, ex, config, rng.child("train")), held


def fine_prune(m: Model, rate: float, data, config: TrainConfig, rng: RngStream):
    return fine_tune(prune(m, rate), data, config, rng)


def distill(teacher: Model, student_spec, data, config: TrainConfig, rng: RngStream, init: Model | None = None):
    """Offline distillation onto a student of identical architecture.

    The student (fresh, seeded) is trained on the tuning half of the test
    data to match the teacher's softmax at ``config.temperature``.
    Returns ``(student, evaluation_items)``.
    """
    if student_spec != teacher.spec:
        raise ValueError("student must share the teacher's architecture")
    student = init.copy() if init is not None else Model.init(student_spec, rng.child("student-init"))
    tune, held = split_test(data, rng.child("split"))
    ex = labelled_examples(data, tune, teacher.spec.num_classes)
    logits = teacher.logits(ex.batch)
    rows = logits if ex.rows is None else logits[ex.rows]
    soft = Examples(ex.batch, softmax(rows / config.temperature), ex.rows)
    return train(student, soft, config, rng.child("train")), held


def kl_divergence(p: np.ndarray, q: np.ndarray) -> float:
    p, q = np.asarray(p, dtype=np.float64), np.asarray(q, dtype=np.float64)
    mask = p > 0
    return float((p[mask] * np.log(p[mask] / q[mask])).sum())


# -- randomized subsampling --------------------------------------------------

def majority(votes: Sequence[int]) -> int:
    """Most frequent label; ties go to the lowest label."""
    return int(np.argmax(np.bincount(np.asarray(votes, dtype=np.int64))))


def subsample_predict(m: Model, query, beta: float, num_votes: int, rng: RngStream):
    """Majority vote over randomly subsampled copies of the input.

    ``query`` is a Graph (keep ceil(beta·n) nodes per vote, induced subgraph)
    or ``(graph, nodes)`` (keep ceil(beta·feature_dim) feature columns per
    node, zero the rest, predict ``nodes`` on the full graph).  Returns one
    label, or a list of labels for a node query.
    """
    if not 0 < beta <= 1:
        raise ValueError("beta must be in (0, 1]")
    if num_votes < 1 or num_votes % 2 == 0:
        raise ValueError("num_votes must be odd and >= 1")
    gen = rng.generator()
    if isinstance(query, Graph):
        n = query.num_nodes
        keep = math.ceil(round(beta * n, 9))
        subs = [query.subgraph(np.sort(gen.choice(n, size=keep, replace=False))) for _ in range(num_votes)]
        return majority(predict(m, subs))
    graph, nodes = query
    nodes = np.asarray(nodes, dtype=np.int64)
    n, f = graph.features.shape
    keep = math.ceil(round(beta * f, 9))
    batch = Batch([graph])
    votes = np.empty((num_votes, len(nodes)), dtype=np.int64)
    for v in range(num_votes):
        scores = gen.random((n, f))
        cols = np.argsort(scores, axis=1, kind="stable")[:, :keep]
        mask = np.zeros((n, f))
        np.put_along_axis(mask, cols, 1.0, axis=1)
        votes[v] = np.argmax(softmax(m.logits(batch.with_features(graph.features * mask))), axis=1)[nodes]
    return [majority(votes[:, j]) for j in range(len(nodes))]


class SubsampledModel:
    """OpaqueModel that answers with randomized-subsampling votes."""

    def __init__(self, model: Model, beta: float, num_votes: int, rng: RngStream):
        self.model, self.beta, self.num_votes, self.rng = model, beta, num_votes, rng
        self._calls = 0

    def _next(self) -> RngStream:
        self._calls += 1
        return self.rng.child(self._calls)

    def predict_graph(self, graph: Graph) -> int:
        return subsample_predict(self.model, graph, self.beta, self.num_votes, self._next())

    def predict_nodes(self, graph: Graph, nodes) -> list[int]:
        return subsample_predict(self.model, (graph, nodes), self.beta, self.num_votes, self._next())


def subsample_accuracy(m: Model, data: GraphDataset | NodeTask, beta: float, num_votes: int, rng: RngStream,
                       items=None) -> float:
    items = items_under_test(data) if items is None else np.asarray(items)
    if isinstance(data, NodeTask):
        pred = subsample_predict(m, (data.graph, items), beta, num_votes, rng)
        return float((np.asarray(pred) == data.labels[items]).mean())
    hits = [subsample_predict(m, data.graphs[i], beta, num_votes, rng.child(int(i))) == data.graphs[i].label
            for i in items]
    return float(np.mean(hits))


# -- sweeps ------------------------------------------------------------------

@dataclass
class RobustnessCurve:
    attack: str
    rows: list[dict]

    def to_obj(self) -> dict:
        return {"format": "gwm-curve", "version": io.VERSION, "attack": self.attack, "rows": self.rows}


def run_attack(kind: str, model: Model, param, data, d_wm: WatermarkedDataset,
               config: AttackConfig, rng: RngStream) -> tuple[float, float]:
    """Apply one attack at one parameter value; return (test_acc, wm_acc)."""
    held = None
    if kind == "prune":
        attacked = prune(model, param)
    elif kind == "fine_tune":
        cfg = TrainConfig(**{**config.fine_tune.__dict__, "epochs": int(param)})
        attacked, held = fine_tune(model, data, cfg, rng)
    elif kind == "fine_prune":
        attacked, held = fine_prune(model, param, data, config.fine_tune, rng)
    elif kind == "distill":
        cfg = TrainConfig(**{**config.distill.__dict__, "epochs": int(param)})
        attacked, held = distill(model, model.spec, data, cfg, rng)
    elif kind == "subsample":
        test_acc = subsample_accuracy(model, data, param, config.num_votes, rng.child("test"))
        wm_acc = watermark_accuracy(SubsampledModel(model, param, config.num_votes, rng.child("wm")), d_wm)
        return test_acc, wm_acc
    else:
        raise ValueError(f"unknown attack {kind!r}")
    return accuracy(attacked, data, held), watermark_accuracy(LocalModel(attacked), d_wm)


def sweep(kind: str, model: Model, grid: Sequence[float], data, d_wm: WatermarkedDataset,
          rng: RngStream, config: AttackConfig | None = None) -> RobustnessCurve:
    if kind not in ATTACKS:
        raise ValueError(f"unknown attack {kind!r}")
    grid = list(grid)
    if not grid or any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("grid must be non-empty and strictly increasing")
    config = config or AttackConfig()
    rows = []
    for param in grid:
        try:
            test_acc, wm_acc = run_attack(kind, model, param, data, d_wm, config, rng.child(f"{kind}/{param!r}"))
            rows.append({"param": param, "test_acc": test_acc, "wm_acc": wm_acc, "valid": True})
        except Exception as exc:  # recorded per row; the sweep continues
            rows.append({"param": param, "test_acc": None, "wm_acc": None, "valid": False, "error": str(exc)})
    return RobustnessCurve(kind, rows)


def save_curve(c: RobustnessCurve, path: str | Path) -> None:
    io.write_json(path, c.to_obj())


def load_curve(path: str | Path) -> RobustnessCurve:
    obj = io.read_json(path, "gwm-curve")
    return RobustnessCurve(obj["attack"], obj["rows"])
