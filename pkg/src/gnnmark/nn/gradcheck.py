from __future__ import annotations

import numpy as np

from ..graph import er_generate
from ..rng import RngStream
from .model import Examples, Model, ModelSpec, graph_examples, node_examples


def analytic_gradient(model: Model, ex: Examples, temperature: float = 1.0) -> dict[str, np.ndarray]:
    return model.loss_and_grad(ex, temperature)[1]


def numerical_gradient(model: Model, ex: Examples, epsilon: float = 1e-5, temperature: float = 1.0) -> dict[str, np.ndarray]:
    """Central finite differences over every parameter entry."""
    probe = model.copy()
    out = {}
    for name, w in probe.params.items():
        g = np.zeros_like(w)
        flat, gflat = w.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + epsilon
            up = probe.loss_and_grad(ex, temperature, need_grad=False)[0]
            flat[i] = orig - epsilon
            down = probe.loss_and_grad(ex, temperature, need_grad=False)[0]
            flat[i] = orig
            gflat[i] = (up - down) / (2 * epsilon)
        out[name] = g
    return out


def max_relative_error(ga: dict[str, np.ndarray], gn: dict[str, np.ndarray]) -> float:
    worst = 0.0
    for name in ga:
        a, n = ga[name], gn[name]
        err = np.abs(a - n) / np.maximum(1e-8, np.abs(a) + np.abs(n))
        worst = max(worst, float(err.max(initial=0.0)))
    return worst


def grad_check(model: Model, ex: Examples, epsilon: float = 1e-5) -> float:
    return max_relative_error(analytic_gradient(model, ex), numerical_gradient(model, ex, epsilon))


def _min_preactivation(model: Model, ex: Examples) -> float:
    _, (caches, _) = model._forward(ex.batch)
    zs = [c[-1] for c in caches] + ([c[1] for c in caches] if model.spec.arch == "gin" else [])
    return min((float(np.abs(z).min()) for z in zs if z.size), default=np.inf)


def random_instance(spec: ModelSpec, rng: RngStream, num_nodes: int = 6, margin: float = 1e-3,
                    max_tries: int = 100) -> tuple[Model, Examples]:
    """A small random model + labelled data for gradient checking.

    Draws are repeated until every ReLU pre-activation is at least ``margin``
    away from zero, so central differences never straddle a kink.
    """
    if num_nodes > 10:
        raise ValueError("gradient-check instances are limited to 10 nodes")
    for attempt in range(max_tries):
        r = rng.child(f"try-{attempt}")
        gen = r.child("data").generator()
        g = er_generate(num_nodes, 0.4, r.child("graph"))
        g = g.replace(features=gen.standard_normal((num_nodes, spec.input_dim)))
        model = Model.init(spec, r.child("init"))
        for name in model.params:
            if name.rsplit(".", 1)[1].startswith("b"):
                model.params[name] = gen.uniform(-0.1, 0.1, model.params[name].shape)
        labels = gen.integers(0, spec.num_classes, size=num_nodes)
        if spec.task == "graph":
            h = er_generate(num_nodes - 1, 0.5, r.child("graph2"))
            h = h.replace(features=gen.standard_normal((h.num_nodes, spec.input_dim)))
            ex = graph_examples([g, h], spec.num_classes, labels[:2])
        else:
            nodes = np.sort(gen.choice(num_nodes, size=max(2, num_nodes // 2), replace=False))
            ex = node_examples(g, nodes, labels, spec.num_classes)
        if _min_preactivation(model, ex) >= margin:
            return model, ex
    raise RuntimeError("could not draw a kink-free instance")
