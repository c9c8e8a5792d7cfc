"""Watermark generation and embedding.

Graph classification: an Erdős–Rényi trigger graph is written over ``n``
randomly chosen nodes of carrier graphs, either sampled training graphs
(strategy ``T``) or freshly generated random graphs (strategy ``R``), and the
carriers are relabelled with the target label.

Node classification: a fraction ``r`` of all nodes become carriers; ``l``
fixed feature columns of each carrier are overwritten with one value drawn
uniformly from (0, 1) and the carriers are relabelled.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from math import comb
from pathlib import Path

import numpy as np

from . import io
from .graph import Graph, GraphDataset, NodeTask, degree_features, er_generate
from .nn.model import Examples, Model, graph_examples, one_hot
from .nn.graphops import Batch
from .nn.train import TrainConfig, train
from .rng import RngStream


class GraphTooSmall(ValueError):
    pass


class InsufficientCarriers(ValueError):
    def __init__(self, needed: int, available: int):
        self.needed = needed
        self.available = available
        super().__init__(f"need {needed} eligible carrier graphs, only {available} available "
                         f"(shortfall {needed - available})")


@dataclass(frozen=True, eq=False)
class GraphWatermarkSecret:
    trigger: Graph
    target_label: int
    gamma: float
    p: float
    r: float
    strategy: str
    seed: str = ""

    def __post_init__(self):
        if self.strategy not in ("T", "R"):
            raise ValueError(f"strategy must be 'T' or 'R', got {self.strategy!r}")
        if self.trigger.num_nodes < 1:
            raise ValueError("trigger graph needs at least one node")

    def __eq__(self, other):
        if not isinstance(other, GraphWatermarkSecret):
            return NotImplemented
        return secret_to_obj(self) == secret_to_obj(other)


@dataclass(frozen=True)
class NodeWatermarkSecret:
    carrier_nodes: tuple[int, ...]
    trigger_dims: tuple[int, ...]
    trigger_value: float
    target_label: int
    r: float
    l: int
    seed: str = ""

    def __post_init__(self):
        if len(set(self.carrier_nodes)) != len(self.carrier_nodes):
            raise ValueError("carrier nodes must be distinct")
        if len(set(self.trigger_dims)) != len(self.trigger_dims):
            raise ValueError("trigger dims must be distinct")


@dataclass(frozen=True, eq=False)
class WatermarkedDataset:
    """Verification queries: trigger-embedded graphs, or carrier nodes of a
    trigger-modified graph.  Every query's expected answer is ``target_label``."""

    kind: str
    target_label: int
    graphs: tuple[Graph, ...] = ()
    graph: Graph | None = None
    nodes: tuple[int, ...] = ()
    num_classes: int = 2
    provenance: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.graphs) if self.kind == "graph" else len(self.nodes)

    def items(self):
        if self.kind == "graph":
            return [(g, self.target_label) for g in self.graphs]
        return [((self.graph, n), self.target_label) for n in self.nodes]

    def examples(self) -> Examples:
        if self.kind == "graph":
            return graph_examples(self.graphs, self.num_classes, [self.target_label] * len(self.graphs))
        nodes = np.asarray(self.nodes, dtype=np.int64)
        return Examples(Batch([self.graph]), one_hot([self.target_label] * len(nodes), self.num_classes), nodes)

    def __eq__(self, other):
        if not isinstance(other, WatermarkedDataset):
            return NotImplemented
        return (self.kind, self.target_label, self.nodes, self.num_classes, self.provenance) == \
            (other.kind, other.target_label, other.nodes, other.num_classes, other.provenance) \
            and self.graphs == other.graphs and self.graph == other.graph


# -- graph classification ---------------------------------------------------

def average_nodes(graphs) -> float:
    return float(np.mean([g.num_nodes for g in graphs]))


def gen_trigger_graph(dataset: GraphDataset, gamma: float, p: float, rng: RngStream) -> Graph:
    if not 0 < gamma <= 1:
        raise ValueError("gamma must be in (0, 1]")
    train_graphs = dataset.train_graphs()
    if not train_graphs:
        raise ValueError("empty training split")
    n = max(1, round(gamma * average_nodes(train_graphs)))
    return er_generate(n, p, rng)


def gen_graph_secret(dataset: GraphDataset, strategy: str, r: float, gamma: float, p: float,
                     target_label: int, rng: RngStream) -> GraphWatermarkSecret:
    if not 0 <= target_label < dataset.num_classes:
        raise ValueError(f"target label {target_label} outside [0, {dataset.num_classes})")
    trigger = gen_trigger_graph(dataset, gamma, p, rng.child("trigger"))
    return GraphWatermarkSecret(trigger, target_label, gamma, p, r, strategy, str(rng))


def inject_trigger(g: Graph, trigger: Graph, rng: RngStream, return_nodes: bool = False):
    """Overwrite the connections among ``n`` random nodes of ``g`` with ``trigger``.

    Node ``chosen[i]`` plays trigger node ``i``.  Edges with at most one
    endpoint among the chosen nodes and all features are left untouched.
    """
    n = trigger.num_nodes
    if g.num_nodes < n:
        raise GraphTooSmall(f"graph has {g.num_nodes} nodes, trigger needs {n}")
    chosen = rng.generator().choice(g.num_nodes, size=n, replace=False)
    inside = np.zeros(g.num_nodes, dtype=bool)
    inside[chosen] = True
    keep = g.edges[~(inside[g.edges[:, 0]] & inside[g.edges[:, 1]])]
    edges = np.concatenate([keep, chosen[trigger.edges]], axis=0)
    out = g.replace(edges=edges)
    return (out, chosen) if return_nodes else out


def _provenance(strategy: str, secret) -> dict:
    return {"strategy": strategy, "secret_sha256": hashlib.sha256(io.dumps(secret_to_obj(secret)).encode()).hexdigest()}


def make_wm_data_T(dataset: GraphDataset, secret: GraphWatermarkSecret, rng: RngStream):
    """Sample training graphs with label != target, inject, relabel.

    Returns ``(d_tmp, d_wm)``; ``d_tmp`` keeps the original labels.
    """
    k = round(secret.r * len(dataset.train))
    if k < 1:
        raise ValueError(f"watermarking rate {secret.r} selects no training graphs")
    eligible = [i for i in dataset.train
                if dataset.graphs[i].label != secret.target_label
                and dataset.graphs[i].num_nodes >= secret.trigger.num_nodes]
    if len(eligible) < k:
        raise InsufficientCarriers(k, len(eligible))
    picked = rng.child("sample").generator().choice(len(eligible), size=k, replace=False)
    d_tmp = [dataset.graphs[eligible[i]] for i in picked]
    wm = [inject_trigger(g, secret.trigger, rng.child(f"inject-{j}")).replace(label=secret.target_label)
          for j, g in enumerate(d_tmp)]
    return d_tmp, WatermarkedDataset("graph", secret.target_label, tuple(wm), num_classes=dataset.num_classes,
                                     provenance=_provenance("T", secret))


def carrier_shape(dataset: GraphDataset) -> tuple[int, float]:
    """(node count, edge probability) matching the training split's averages."""
    train_graphs = dataset.train_graphs()
    n = round(average_nodes(train_graphs))
    pairs = comb(n, 2)
    p = min(1.0, float(np.mean([g.num_edges for g in train_graphs])) / pairs) if pairs else 0.0
    return n, p


def make_wm_data_R(dataset: GraphDataset, secret: GraphWatermarkSecret, rng: RngStream) -> WatermarkedDataset:
    """Generate ER carriers shaped like the training data, inject, use degree features."""
    if dataset.feature_dim != 1:
        raise ValueError("random-carrier watermarking uses degree features and needs feature_dim == 1")
    k = round(secret.r * len(dataset.train))
    if k < 1:
        raise ValueError(f"watermarking rate {secret.r} yields no carriers")
    n, p = carrier_shape(dataset)
    wm = []
    for j in range(k):
        carrier = er_generate(n, p, rng.child(f"carrier-{j}"))
        g = inject_trigger(carrier, secret.trigger, rng.child(f"inject-{j}"))
        wm.append(degree_features(g).replace(label=secret.target_label))
    return WatermarkedDataset("graph", secret.target_label, tuple(wm), num_classes=dataset.num_classes,
                              provenance=_provenance("R", secret))


# -- node classification ----------------------------------------------------

def gen_node_secret(task: NodeTask, r: float, l: int, target_label: int, rng: RngStream) -> NodeWatermarkSecret:
    n = task.graph.num_nodes
    k = round(r * n)
    if k < 1:
        raise ValueError(f"watermarking rate {r} selects no carrier nodes")
    if l > task.feature_dim:
        raise ValueError(f"watermark length {l} exceeds feature_dim {task.feature_dim}")
    if not 0 <= target_label < task.num_classes:
        raise ValueError(f"target label {target_label} outside [0, {task.num_classes})")
    carriers = rng.child("carriers").generator().choice(n, size=k, replace=False)
    dims = rng.child("dims").generator().choice(task.feature_dim, size=l, replace=False)
    value = float(rng.child("value").generator().uniform(0.0, 1.0))
    return NodeWatermarkSecret(tuple(sorted(int(c) for c in carriers)), tuple(sorted(int(d) for d in dims)),
                               value, target_label, r, l, str(rng))


def apply_feature_trigger(x: np.ndarray, secret: NodeWatermarkSecret) -> np.ndarray:
    x = x.copy()
    if secret.trigger_dims:
        x[np.ix_(list(secret.carrier_nodes), list(secret.trigger_dims))] = secret.trigger_value
    return x


def make_wm_data_node(task: NodeTask, secret: NodeWatermarkSecret, rng: RngStream | None = None):
    """Return ``(modified_task, d_wm)``.

    The modified task trains on the original training nodes plus every
    carrier (relabelled to the target); carriers leave the test mask.
    """
    if max(secret.trigger_dims, default=-1) >= task.feature_dim:
        raise ValueError(f"watermark length {secret.l} exceeds feature_dim {task.feature_dim}")
    carriers = np.asarray(secret.carrier_nodes, dtype=np.int64)
    g = task.graph.replace(features=apply_feature_trigger(task.graph.features, secret))
    y = task.labels.copy()
    y[carriers] = secret.target_label
    train_mask = task.train_mask.copy()
    train_mask[carriers] = True
    test_mask = task.test_mask & ~train_mask
    modified = NodeTask(g, y, train_mask, test_mask, task.num_classes)
    d_wm = WatermarkedDataset("node", secret.target_label, graph=g, nodes=tuple(secret.carrier_nodes),
                              num_classes=task.num_classes, provenance=_provenance("node", secret))
    return modified, d_wm


# -- embedding --------------------------------------------------------------

def embedding_examples(wm, num_classes: int | None = None, replay=None) -> Examples:
    """Training rows for watermark embedding.

    ``wm`` is ``(d_tmp, d_wm)`` for strategy T, ``(None, d_wm)`` or ``d_wm``
    for strategy R, or the modified :class:`NodeTask` for the node task.
    ``replay`` optionally adds clean training graphs; graphs already in
    ``d_tmp`` are not duplicated.
    """
    if isinstance(wm, NodeTask):
        nodes = np.flatnonzero(wm.train_mask)
        return Examples(Batch([wm.graph]), one_hot(wm.labels[nodes], wm.num_classes), nodes)
    d_tmp, d_wm = wm if isinstance(wm, tuple) else (None, wm)
    graphs = list(d_tmp or [])
    if replay is not None:
        seen = {id(g) for g in graphs}
        graphs += [g for g in replay if id(g) not in seen]
    graphs += list(d_wm.graphs)
    return graph_examples(graphs, num_classes or d_wm.num_classes)


def embed(clean_model: Model, wm, config: TrainConfig, rng: RngStream, replay=None) -> Model:
    """Continue training the pretrained clean model on the watermark data.

    Without ``replay`` this trains on exactly D_tmp ∪ D_wm (strategy T) or
    D_wm (strategy R).  At small scale that drags every prediction toward the
    target label, so callers normally pass the clean training graphs as
    ``replay``.
    """
    ex = embedding_examples(wm, clean_model.spec.num_classes, replay)
    return train(clean_model, ex, config, rng)


# -- files ------------------------------------------------------------------

def secret_to_obj(secret) -> dict:
    if isinstance(secret, GraphWatermarkSecret):
        return {"format": "gwm-secret", "version": io.VERSION, "kind": "graph",
                "trigger": io.graph_to_obj(secret.trigger, with_label=False),
                "target_label": secret.target_label, "gamma": io.hexf(secret.gamma), "p": io.hexf(secret.p),
                "r": io.hexf(secret.r), "strategy": secret.strategy, "seed": secret.seed}
    return {"format": "gwm-secret", "version": io.VERSION, "kind": "node",
            "carrier_nodes": list(secret.carrier_nodes), "trigger_dims": list(secret.trigger_dims),
            "trigger_value": io.hexf(secret.trigger_value), "target_label": secret.target_label,
            "r": io.hexf(secret.r), "l": secret.l, "seed": secret.seed}


def secret_from_obj(obj: dict):
    io.check_header(obj, "gwm-secret")
    try:
        if obj["kind"] == "graph":
            return GraphWatermarkSecret(io.graph_from_obj(obj["trigger"]), obj["target_label"],
                                        io.unhexf(obj["gamma"]), io.unhexf(obj["p"]), io.unhexf(obj["r"]),
                                        obj["strategy"], obj["seed"])
        if obj["kind"] == "node":
            return NodeWatermarkSecret(tuple(obj["carrier_nodes"]), tuple(obj["trigger_dims"]),
                                       io.unhexf(obj["trigger_value"]), obj["target_label"],
                                       io.unhexf(obj["r"]), obj["l"], obj["seed"])
    except KeyError as exc:
        raise io.FormatError("missing field", None, exc.args[0]) from None
    raise io.FormatError(f"unknown secret kind {obj.get('kind')!r}", None, "kind")


def save_secret(secret, path: str | Path) -> None:
    io.write_json(path, secret_to_obj(secret))


def load_secret(path: str | Path):
    return secret_from_obj(io.read_json(path, "gwm-secret"))


def save_wm_dataset(d: WatermarkedDataset, path: str | Path) -> None:
    if d.kind == "graph":
        header = {"format": "gwm-graphs", "version": io.VERSION, "num_classes": d.num_classes,
                  "feature_dim": d.graphs[0].feature_dim if d.graphs else 1,
                  "train": [], "test": [], "provenance": d.provenance, "target_label": d.target_label}
        io.write_graph_records(path, header, d.graphs)
    else:
        g = d.graph
        obj = {"format": "gwm-node", "version": io.VERSION, "n": g.num_nodes, "edges": g.edges.tolist(),
               "x": io.encode_matrix_rows(g.features), "queries": list(d.nodes), "target_label": d.target_label,
               "num_classes": d.num_classes, "provenance": d.provenance}
        Path(path).write_text(io.dumps(obj) + "\n")


def load_wm_dataset(path: str | Path) -> WatermarkedDataset:
    first = Path(path).read_text().splitlines()[0]
    obj = io._json_line(first, 1)
    if isinstance(obj, dict) and obj.get("format") == "gwm-node":
        io.check_header(obj, "gwm-node")
        for key in ("queries", "target_label", "provenance"):
            if key not in obj:
                raise io.FormatError("missing field", 1, key)
        return WatermarkedDataset("node", obj["target_label"], graph=io.graph_from_obj(obj, 1),
                                  nodes=tuple(obj["queries"]), num_classes=obj["num_classes"],
                                  provenance=obj["provenance"])
    header, graphs = io.read_graph_records(path)
    for key in ("provenance", "target_label"):
        if key not in header:
            raise io.FormatError("missing header field", 1, key)
    return WatermarkedDataset("graph", header["target_label"], tuple(graphs), num_classes=header["num_classes"],
                              provenance=header["provenance"])
