"""Propagation operators and block-diagonal batching of graphs."""

from __future__ import annotations

from typing import Sequence

import numpy as np
import scipy.sparse as sp

from ..graph import Graph


def _edges_both_ways(edges: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return np.concatenate([edges[:, 0], edges[:, 1]]), np.concatenate([edges[:, 1], edges[:, 0]])


def gcn_operator(n: int, edges: np.ndarray) -> sp.csr_matrix:
    """D̃^{-1/2} (A + I) D̃^{-1/2}."""
    r, c = _edges_both_ways(edges)
    r = np.concatenate([r, np.arange(n)])
    c = np.concatenate([c, np.arange(n)])
    deg = np.bincount(r, minlength=n).astype(np.float64)
    inv = 1.0 / np.sqrt(deg)
    return sp.csr_matrix((inv[r] * inv[c], (r, c)), shape=(n, n))


def sum_operator(n: int, edges: np.ndarray) -> sp.csr_matrix:
    """A + I, the neighbourhood sum used by GIN with epsilon = 0."""
    r, c = _edges_both_ways(edges)
    r = np.concatenate([r, np.arange(n)])
    c = np.concatenate([c, np.arange(n)])
    return sp.csr_matrix((np.ones(len(r)), (r, c)), shape=(n, n))


def mean_operator(n: int, edges: np.ndarray) -> sp.csr_matrix:
    """Row-normalised adjacency; isolated nodes get an all-zero row."""
    r, c = _edges_both_ways(edges)
    deg = np.bincount(r, minlength=n).astype(np.float64)
    return sp.csr_matrix((1.0 / deg[r], (r, c)), shape=(n, n))


OPERATORS = {"gcn": gcn_operator, "gin": sum_operator, "sage-mean": mean_operator}


class Batch:
    """Disjoint union of graphs with lazily built operators.

    ``offsets[i]:offsets[i+1]`` are the rows of graph ``i`` in ``x``.
    """

    def __init__(self, graphs: Sequence[Graph]):
        if not graphs:
            raise ValueError("empty batch")
        sizes = np.array([g.num_nodes for g in graphs], dtype=np.int64)
        self.offsets = np.concatenate([[0], np.cumsum(sizes)])
        self.num_graphs = len(graphs)
        self.num_nodes = int(self.offsets[-1])
        self.x = np.concatenate([g.features for g in graphs], axis=0) if len(graphs) > 1 else graphs[0].features
        self.edges = np.concatenate(
            [g.edges + off for g, off in zip(graphs, self.offsets[:-1])], axis=0
        ) if len(graphs) > 1 else graphs[0].edges
        self.sizes = sizes
        self._ops: dict[str, sp.csr_matrix] = {}
        self._pool = None

    def operator(self, arch: str) -> sp.csr_matrix:
        if arch not in self._ops:
            self._ops[arch] = OPERATORS[arch](self.num_nodes, self.edges)
        return self._ops[arch]

    def pool(self) -> sp.csr_matrix:
        """(num_graphs, num_nodes) mean-readout matrix."""
        if self._pool is None:
            if (self.sizes == 0).any():
                raise ValueError("mean readout of a zero-node graph")
            rows = np.repeat(np.arange(self.num_graphs), self.sizes)
            vals = np.repeat(1.0 / self.sizes, self.sizes)
            self._pool = sp.csr_matrix((vals, (rows, np.arange(self.num_nodes))),
                                       shape=(self.num_graphs, self.num_nodes))
        return self._pool

    def with_features(self, x: np.ndarray) -> "Batch":
        """Same structure, different feature matrix; operators are shared."""
        b = object.__new__(Batch)
        b.__dict__.update(self.__dict__)
        b.x = x
        return b
