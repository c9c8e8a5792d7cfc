"""Attributed undirected graphs, random generators and synthetic datasets."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .rng import RngStream


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


class GraphError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected simple graph with a dense node-feature matrix.

    Edges are stored canonically (``u < v``, lexicographically sorted) as an
    ``(E, 2)`` integer array.  Instances are immutable.
    """

    num_nodes: int
    edges: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=np.int64))
    features: np.ndarray | None = None
    label: int | None = None

    def __post_init__(self):
        n = int(self.num_nodes)
        if n < 0:
            raise GraphError(f"negative node count {n}")
        e = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if len(e):
            if (e < 0).any() or (e >= n).any():
                raise GraphError("edge endpoint out of range")
            if (e[:, 0] == e[:, 1]).any():
                u = int(e[e[:, 0] == e[:, 1]][0, 0])
                raise GraphError(f"self-loop on node {u}")
            e = np.sort(e, axis=1)
            e = e[np.lexsort((e[:, 1], e[:, 0]))]
            dup = (np.diff(e, axis=0) == 0).all(axis=1)
            if dup.any():
                u, v = e[1:][dup][0]
                raise GraphError(f"duplicate edge ({u}, {v})")
        x = np.zeros((n, 0)) if self.features is None else np.array(self.features, dtype=np.float64)
        if x.ndim != 2 or x.shape[0] != n:
            raise GraphError(f"feature matrix shape {x.shape} does not match {n} nodes")
        object.__setattr__(self, "num_nodes", n)
        object.__setattr__(self, "edges", _frozen(e))
        object.__setattr__(self, "features", _frozen(x))
        if self.label is not None:
            object.__setattr__(self, "label", int(self.label))

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    def edge_set(self) -> set[tuple[int, int]]:
        return {(int(u), int(v)) for u, v in self.edges}

    def degrees(self) -> np.ndarray:
        return np.bincount(self.edges.ravel(), minlength=self.num_nodes)

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.num_nodes, self.num_nodes))
        a[self.edges[:, 0], self.edges[:, 1]] = 1.0
        a[self.edges[:, 1], self.edges[:, 0]] = 1.0
        return a

    def replace(self, **changes) -> "Graph":
        kw = dict(num_nodes=self.num_nodes, edges=self.edges, features=self.features, label=self.label)
        kw.update(changes)
        return Graph(**kw)

    def subgraph(self, nodes: Sequence[int]) -> "Graph":
        """Induced subgraph on ``nodes``; node ``nodes[i]`` becomes node ``i``."""
        nodes = np.asarray(nodes, dtype=np.int64)
        remap = np.full(self.num_nodes, -1, dtype=np.int64)
        remap[nodes] = np.arange(len(nodes))
        e = remap[self.edges]
        e = e[(e >= 0).all(axis=1)]
        return Graph(len(nodes), e, self.features[nodes], self.label)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return (
            self.num_nodes == other.num_nodes
            and self.label == other.label
            and np.array_equal(self.edges, other.edges)
            and self.features.shape == other.features.shape
            and self.features.tobytes() == other.features.tobytes()
        )

    __hash__ = None

    def __repr__(self) -> str:
        return f"Graph(n={self.num_nodes}, m={self.num_edges}, dim={self.feature_dim}, label={self.label})"


@dataclass(frozen=True, eq=False)
class GraphDataset:
    graphs: tuple[Graph, ...]
    num_classes: int
    feature_dim: int
    train: tuple[int, ...]
    test: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "graphs", tuple(self.graphs))
        object.__setattr__(self, "train", tuple(int(i) for i in self.train))
        object.__setattr__(self, "test", tuple(int(i) for i in self.test))
        for i, g in enumerate(self.graphs):
            if g.label is None or not 0 <= g.label < self.num_classes:
                raise GraphError(f"graph {i}: label {g.label} outside [0, {self.num_classes})")
            if g.feature_dim != self.feature_dim:
                raise GraphError(f"graph {i}: feature_dim {g.feature_dim} != {self.feature_dim}")
        if set(self.train) & set(self.test):
            raise GraphError("train and test splits overlap")
        if any(not 0 <= i < len(self.graphs) for i in self.train + self.test):
            raise GraphError("split index out of range")

    def train_graphs(self) -> list[Graph]:
        return [self.graphs[i] for i in self.train]

    def test_graphs(self) -> list[Graph]:
        return [self.graphs[i] for i in self.test]

    def __eq__(self, other) -> bool:
        if not isinstance(other, GraphDataset):
            return NotImplemented
        return (
            self.num_classes == other.num_classes
            and self.feature_dim == other.feature_dim
            and self.train == other.train
            and self.test == other.test
            and self.graphs == other.graphs
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class NodeTask:
    graph: Graph
    labels: np.ndarray
    train_mask: np.ndarray
    test_mask: np.ndarray
    num_classes: int

    def __post_init__(self):
        n = self.graph.num_nodes
        y = np.asarray(self.labels, dtype=np.int64)
        tr = np.asarray(self.train_mask, dtype=bool)
        te = np.asarray(self.test_mask, dtype=bool)
        if y.shape != (n,) or tr.shape != (n,) or te.shape != (n,):
            raise GraphError("labels and masks must have one entry per node")
        if (tr & te).any():
            raise GraphError("train_mask and test_mask overlap")
        if n and (y.min() < 0 or y.max() >= self.num_classes):
            raise GraphError(f"node label outside [0, {self.num_classes})")
        object.__setattr__(self, "labels", _frozen(y))
        object.__setattr__(self, "train_mask", _frozen(tr))
        object.__setattr__(self, "test_mask", _frozen(te))

    @property
    def feature_dim(self) -> int:
        return self.graph.feature_dim

    def replace(self, **changes) -> "NodeTask":
        kw = dict(graph=self.graph, labels=self.labels, train_mask=self.train_mask,
                  test_mask=self.test_mask, num_classes=self.num_classes)
        kw.update(changes)
        return NodeTask(**kw)

    def __eq__(self, other) -> bool:
        if not isinstance(other, NodeTask):
            return NotImplemented
        return (
            self.graph == other.graph
            and self.num_classes == other.num_classes
            and np.array_equal(self.labels, other.labels)
            and np.array_equal(self.train_mask, other.train_mask)
            and np.array_equal(self.test_mask, other.test_mask)
        )

    __hash__ = None


def er_generate(n: int, p: float, rng: RngStream) -> Graph:
    """Erdős–Rényi G(n, p); pairs are visited in canonical (u < v) order."""
    if n < 0 or not 0.0 <= p <= 1.0:
        raise ValueError(f"invalid ER parameters n={n}, p={p}")
    u, v = np.triu_indices(n, 1)
    keep = rng.generator().random(len(u)) < p
    return Graph(n, np.stack([u[keep], v[keep]], axis=1))


def degree_features(g: Graph) -> Graph:
    return g.replace(features=g.degrees().astype(np.float64)[:, None])


def _apportion(counts: np.ndarray, frac: float) -> np.ndarray:
    """Per-class quotas summing to round(frac * total), largest remainder first."""
    total = round(frac * counts.sum())
    raw = counts * frac
    quota = np.floor(raw).astype(np.int64)
    order = np.argsort(-(raw - quota), kind="stable")
    quota[order[: total - quota.sum()]] += 1
    return quota


def stratified_split(labels: np.ndarray, frac: float, rng: RngStream) -> tuple[list[int], list[int]]:
    """Split indices so that ``frac`` of each class (by apportionment) is selected."""
    labels = np.asarray(labels)
    classes = np.unique(labels)
    quota = _apportion(np.array([(labels == c).sum() for c in classes]), frac)
    gen = rng.generator()
    chosen = []
    for c, k in zip(classes, quota):
        idx = np.flatnonzero(labels == c)
        chosen.extend(gen.permutation(idx)[:k].tolist())
    chosen = sorted(chosen)
    rest = sorted(set(range(len(labels))) - set(chosen))
    return chosen, rest


def synth_graph_dataset(
    num_graphs: int,
    nodes_per_graph_range: tuple[int, int],
    density_class0: float,
    density_class1: float,
    feature_mode: str,
    rng: RngStream,
) -> GraphDataset:
    lo, hi = nodes_per_graph_range
    if lo > hi or lo < 1:
        raise ValueError(f"empty node-count range {nodes_per_graph_range}")
    if num_graphs < 4:
        raise ValueError("need at least 4 graphs")
    if density_class0 == density_class1:
        raise ValueError("class densities must differ")
    if feature_mode not in ("degree", "constant"):
        raise ValueError(f"unknown feature_mode {feature_mode!r}")
    sizes = rng.child("sizes").generator().integers(lo, hi + 1, size=num_graphs)
    graphs = []
    for i in range(num_graphs):
        y = 0 if i < (num_graphs + 1) // 2 else 1
        g = er_generate(int(sizes[i]), (density_class0, density_class1)[y], rng.child(f"graph-{i}"))
        g = degree_features(g) if feature_mode == "degree" else g.replace(features=np.ones((g.num_nodes, 1)))
        graphs.append(g.replace(label=y))
    train, test = stratified_split(np.array([g.label for g in graphs]), 2 / 3, rng.child("split"))
    return GraphDataset(tuple(graphs), 2, 1, tuple(train), tuple(test))


def synth_node_task(
    num_nodes: int,
    num_blocks: int,
    p_in: float,
    p_out: float,
    feature_dim: int,
    rng: RngStream,
    noise: float = 0.3,
) -> NodeTask:
    """Stochastic block model; block id is the label and is one-hot encoded in
    the first ``num_blocks`` feature columns, remaining columns are N(0, noise²)."""
    if num_blocks < 2 or num_nodes < 2 * num_blocks or feature_dim < num_blocks:
        raise ValueError("degenerate node-task sizes")
    if not 0 <= p_out < p_in <= 1:
        raise ValueError("need 0 <= p_out < p_in <= 1")
    block = np.arange(num_nodes) * num_blocks // num_nodes
    u, v = np.triu_indices(num_nodes, 1)
    prob = np.where(block[u] == block[v], p_in, p_out)
    keep = rng.child("edges").generator().random(len(u)) < prob
    x = np.zeros((num_nodes, feature_dim))
    x[np.arange(num_nodes), block] = 1.0
    x[:, num_blocks:] = noise * rng.child("noise").generator().standard_normal((num_nodes, feature_dim - num_blocks))
    g = Graph(num_nodes, np.stack([u[keep], v[keep]], axis=1), x)
    train, _ = stratified_split(block, 0.2, rng.child("split"))
    tr = np.zeros(num_nodes, dtype=bool)
    tr[train] = True
    return NodeTask(g, block, tr, ~tr, num_blocks)
