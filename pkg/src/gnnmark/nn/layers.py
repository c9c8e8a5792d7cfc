"""Message-passing layers with explicit backward passes.

Each ``*_forward`` returns ``(output, cache)``; the matching ``*_backward``
takes the cache and the upstream gradient and returns ``(d_input, grads)``.
``op`` is the propagation operator from :mod:`gnnmark.nn.graphops` for the
architecture.  ``final=True`` skips the output ReLU.
"""

from __future__ import annotations

import numpy as np


def relu(z: np.ndarray) -> np.ndarray:
    return np.maximum(z, 0.0)


def _activate(z, final):
    return z if final else relu(z)


def _deactivate(dout, z, final):
    return dout if final else dout * (z > 0)


def gcn_forward(p: dict, op, h: np.ndarray, final: bool = False):
    if h.shape[1] != p["W"].shape[0]:
        raise ValueError(f"gcn: input width {h.shape[1]} != weight rows {p['W'].shape[0]}")
    agg = op @ h
    z = agg @ p["W"] + p["b"]
    return _activate(z, final), (agg, z)


def gcn_backward(p: dict, op, cache, dout, final: bool = False):
    agg, z = cache
    dz = _deactivate(dout, z, final)
    grads = {"W": agg.T @ dz, "b": dz.sum(axis=0, keepdims=True)}
    return op.T @ (dz @ p["W"].T), grads


def gin_forward(p: dict, op, h: np.ndarray, final: bool = False):
    """MLP((1 + eps) h_v + sum of neighbours) with eps = 0; MLP is two dense layers."""
    if h.shape[1] != p["W1"].shape[0]:
        raise ValueError(f"gin: input width {h.shape[1]} != weight rows {p['W1'].shape[0]}")
    s = op @ h
    z1 = s @ p["W1"] + p["b1"]
    a1 = relu(z1)
    z2 = a1 @ p["W2"] + p["b2"]
    return _activate(z2, final), (s, z1, a1, z2)


def gin_backward(p: dict, op, cache, dout, final: bool = False):
    s, z1, a1, z2 = cache
    dz2 = _deactivate(dout, z2, final)
    dz1 = (dz2 @ p["W2"].T) * (z1 > 0)
    grads = {
        "W1": s.T @ dz1, "b1": dz1.sum(axis=0, keepdims=True),
        "W2": a1.T @ dz2, "b2": dz2.sum(axis=0, keepdims=True),
    }
    return op.T @ (dz1 @ p["W1"].T), grads


def sage_forward(p: dict, op, h: np.ndarray, final: bool = False):
    """W · concat(h_v, mean of neighbours); empty neighbourhoods average to zero."""
    if 2 * h.shape[1] != p["W"].shape[0]:
        raise ValueError(f"sage: concat width {2 * h.shape[1]} != weight rows {p['W'].shape[0]}")
    cat = np.concatenate([h, op @ h], axis=1)
    z = cat @ p["W"] + p["b"]
    return _activate(z, final), (cat, z)


def sage_backward(p: dict, op, cache, dout, final: bool = False):
    cat, z = cache
    dz = _deactivate(dout, z, final)
    grads = {"W": cat.T @ dz, "b": dz.sum(axis=0, keepdims=True)}
    dcat = dz @ p["W"].T
    d = dcat.shape[1] // 2
    return dcat[:, :d] + op.T @ dcat[:, d:], grads


def readout_mean(h: np.ndarray) -> np.ndarray:
    if h.shape[0] == 0:
        raise ValueError("mean readout of a zero-node graph")
    return h.mean(axis=0)


LAYERS = {
    "gcn": (gcn_forward, gcn_backward),
    "gin": (gin_forward, gin_backward),
    "sage-mean": (sage_forward, sage_backward),
}


def layer_shapes(arch: str, d_in: int, d_out: int) -> dict[str, tuple[int, int]]:
    if arch == "gcn":
        return {"W": (d_in, d_out), "b": (1, d_out)}
    if arch == "gin":
        return {"W1": (d_in, d_out), "b1": (1, d_out), "W2": (d_out, d_out), "b2": (1, d_out)}
    if arch == "sage-mean":
        return {"W": (2 * d_in, d_out), "b": (1, d_out)}
    raise ValueError(f"unknown architecture {arch!r}")
