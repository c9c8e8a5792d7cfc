"""GNN classifiers: spec, parameters, forward/backward and model files.

Graph-level models stack message-passing layers (all ReLU), mean-pool the
node embeddings and apply a dense head producing class logits.  Node-level
models append one more message-passing layer that outputs the logits
directly (no ReLU).  Softmax lives in the loss / prediction head.
"""

from __future__ import annotations

import copy
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .. import io
from ..graph import Graph, NodeTask
from ..rng import RngStream
from .graphops import Batch
from .layers import LAYERS, layer_shapes

ARCHS = ("gcn", "gin", "sage-mean")
TASKS = ("graph", "node")


@dataclass(frozen=True)
class ModelSpec:
    arch: str
    layer_dims: tuple[int, ...]
    num_classes: int
    task: str = "graph"
    readout: str = "mean"
    activation: str = "relu"

    def __post_init__(self):
        object.__setattr__(self, "layer_dims", tuple(int(d) for d in self.layer_dims))
        if self.arch not in ARCHS:
            raise ValueError(f"unknown arch {self.arch!r}")
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}")
        if not self.layer_dims or min(self.layer_dims) < 1:
            raise ValueError("layer_dims must be non-empty positive widths")
        if self.num_classes < 2:
            raise ValueError("need at least 2 classes")
        if self.readout != "mean" or self.activation != "relu":
            raise ValueError("only mean readout and relu activation are supported")

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    def conv_dims(self) -> list[tuple[int, int]]:
        dims = list(self.layer_dims) + ([self.num_classes] if self.task == "node" else [])
        return list(zip(dims[:-1], dims[1:]))

    def param_shapes(self) -> dict[str, tuple[int, int]]:
        shapes = {}
        for i, (a, b) in enumerate(self.conv_dims()):
            for k, s in layer_shapes(self.arch, a, b).items():
                shapes[f"conv{i}.{k}"] = s
        if self.task == "graph":
            shapes["head.W"] = (self.layer_dims[-1], self.num_classes)
            shapes["head.b"] = (1, self.num_classes)
        return shapes


def _glorot(gen: np.random.Generator, shape) -> np.ndarray:
    fan_in, fan_out = shape
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return gen.uniform(-limit, limit, size=shape)


@dataclass(eq=False)
class Model:
    spec: ModelSpec
    params: dict[str, np.ndarray]
    meta: dict = field(default_factory=dict)

    @classmethod
    def init(cls, spec: ModelSpec, rng: RngStream) -> "Model":
        """Glorot-uniform weights, zero biases, drawn in parameter-name order."""
        gen = rng.generator()
        params = {}
        for name, shape in spec.param_shapes().items():
            params[name] = np.zeros(shape) if name.rsplit(".", 1)[1].startswith("b") else _glorot(gen, shape)
        return cls(spec, params, {"init": str(rng)})

    def copy(self) -> "Model":
        return Model(self.spec, {k: v.copy() for k, v in self.params.items()}, copy.deepcopy(self.meta))

    def num_parameters(self) -> int:
        return sum(v.size for v in self.params.values())

    def layer_params(self, i: int) -> dict[str, np.ndarray]:
        prefix = f"conv{i}."
        return {k[len(prefix):]: v for k, v in self.params.items() if k.startswith(prefix)}

    # -- forward / backward -------------------------------------------------

    def _forward(self, batch: Batch):
        if batch.x.shape[1] != self.spec.input_dim:
            raise ValueError(f"feature dim {batch.x.shape[1]} != model input dim {self.spec.input_dim}")
        fwd = LAYERS[self.spec.arch][0]
        op = batch.operator(self.spec.arch)
        h = batch.x
        caches = []
        convs = self.spec.conv_dims()
        for i in range(len(convs)):
            final = self.spec.task == "node" and i == len(convs) - 1
            h, c = fwd(self.layer_params(i), op, h, final)
            caches.append(c)
        if self.spec.task == "node":
            return h, (caches, None)
        pooled = batch.pool() @ h
        logits = pooled @ self.params["head.W"] + self.params["head.b"]
        return logits, (caches, pooled)

    def logits(self, batch: Batch) -> np.ndarray:
        return self._forward(batch)[0]

    def _backward(self, batch: Batch, cache, dlogits: np.ndarray) -> dict[str, np.ndarray]:
        bwd = LAYERS[self.spec.arch][1]
        op = batch.operator(self.spec.arch)
        caches, pooled = cache
        grads = {}
        if self.spec.task == "graph":
            grads["head.W"] = pooled.T @ dlogits
            grads["head.b"] = dlogits.sum(axis=0, keepdims=True)
            dh = batch.pool().T @ (dlogits @ self.params["head.W"].T)
        else:
            dh = dlogits
        n = len(caches)
        for i in reversed(range(n)):
            final = self.spec.task == "node" and i == n - 1
            dh, g = bwd(self.layer_params(i), op, caches[i], dh, final)
            for k, v in g.items():
                grads[f"conv{i}.{k}"] = v
        return {k: grads[k] for k in self.params}

    def loss_and_grad(self, ex: "Examples", temperature: float = 1.0, need_grad: bool = True):
        """Mean KL(target ‖ softmax(logits / T)) over the example rows.

        With one-hot targets this is the usual softmax cross-entropy.
        """
        logits, cache = self._forward(ex.batch)
        rows = logits if ex.rows is None else logits[ex.rows]
        logp = log_softmax(rows / temperature)
        t = ex.targets
        with np.errstate(divide="ignore", invalid="ignore"):
            tlogt = np.where(t > 0, t * np.log(np.where(t > 0, t, 1.0)), 0.0)
        m = len(t)
        loss = float((tlogt - t * logp).sum() / m)
        if not need_grad:
            return loss, None
        drows = (np.exp(logp) - t) / (temperature * m)
        if ex.rows is None:
            dlogits = drows
        else:
            dlogits = np.zeros_like(logits)
            np.add.at(dlogits, ex.rows, drows)
        return loss, self._backward(ex.batch, cache, dlogits)


def log_softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def softmax(z: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(z))


@dataclass
class Examples:
    """Labelled rows for training: graph rows (``rows is None``) or node rows."""

    batch: Batch
    targets: np.ndarray
    rows: np.ndarray | None = None

    def __len__(self):
        return len(self.targets)


def one_hot(labels, num_classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    out = np.zeros((len(labels), num_classes))
    out[np.arange(len(labels)), labels] = 1.0
    return out


def graph_examples(graphs: Sequence[Graph], num_classes: int, labels=None) -> Examples:
    labels = [g.label for g in graphs] if labels is None else labels
    return Examples(Batch(list(graphs)), one_hot(labels, num_classes))


def node_examples(graph: Graph, nodes, labels, num_classes: int) -> Examples:
    nodes = np.asarray(nodes, dtype=np.int64)
    return Examples(Batch([graph]), one_hot(np.asarray(labels)[nodes], num_classes), nodes)


def forward(model: Model, data: Graph | Sequence[Graph] | NodeTask) -> np.ndarray:
    """Class probabilities: one row per graph (graph task) or per node (node task)."""
    if isinstance(data, NodeTask):
        data = data.graph
    graphs = [data] if isinstance(data, Graph) else list(data)
    return softmax(model.logits(Batch(graphs)))


def predict(model: Model, data) -> np.ndarray:
    """Argmax labels; ties go to the lowest class index."""
    return np.argmax(forward(model, data), axis=1)


# -- model files ------------------------------------------------------------

def model_to_obj(m: Model) -> dict:
    spec = asdict(m.spec)
    spec["layer_dims"] = list(m.spec.layer_dims)
    params = {k: {"shape": list(v.shape), "data": [x.hex() for x in v.ravel().tolist()]} for k, v in m.params.items()}
    meta = dict(m.meta)
    if "loss_history" in meta:
        meta["loss_history"] = [float(x).hex() for x in meta["loss_history"]]
    return {"format": "gwm-model", "version": io.VERSION, "spec": spec, "params": params, "meta": meta}


def model_from_obj(obj: dict) -> Model:
    io.check_header(obj, "gwm-model")
    try:
        spec = ModelSpec(**obj["spec"])
    except (TypeError, ValueError, KeyError) as exc:
        raise io.FormatError(f"bad model spec ({exc})", None, "spec") from None
    expected = spec.param_shapes()
    params = {}
    for name, shape in expected.items():
        entry = obj["params"].get(name)
        if entry is None:
            raise io.FormatError("missing parameter", None, f"params.{name}")
        if tuple(entry["shape"]) != shape or len(entry["data"]) != shape[0] * shape[1]:
            raise io.FormatError(f"shape {entry['shape']} != {list(shape)}", None, f"params.{name}")
        params[name] = np.array([float.fromhex(x) for x in entry["data"]], dtype=np.float64).reshape(shape)
    extra = set(obj["params"]) - set(expected)
    if extra:
        raise io.FormatError(f"unexpected parameters {sorted(extra)}", None, "params")
    meta = dict(obj.get("meta", {}))
    if "loss_history" in meta:
        meta["loss_history"] = [float.fromhex(x) for x in meta["loss_history"]]
    return Model(spec, params, meta)


def save_model(m: Model, path: str | Path) -> None:
    Path(path).write_text(io.dumps(model_to_obj(m)) + "\n")


def load_model(path: str | Path) -> Model:
    return model_from_obj(io.read_json(path, "gwm-model"))
