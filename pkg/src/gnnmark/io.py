"""Artifact file formats.

Every artifact begins with a ``format``/``version`` header.  Reals are written
as hexadecimal float strings (``float.hex``) so files round-trip bit-exactly.
Graph datasets are newline-delimited: a header object on line 1, then one
object per graph.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any

import numpy as np

from .graph import Graph, GraphDataset, GraphError, NodeTask

VERSION = 1


class FormatError(ValueError):
    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)


def dumps(obj: Any) -> str:
    return json.dumps(obj, separators=(",", ":"), sort_keys=False)


def sha256_file(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def hexf(x: float) -> str:
    return float(x).hex()


def unhexf(s: str) -> float:
    return float.fromhex(s)


def encode_matrix_rows(x: np.ndarray) -> list[list[str]]:
    return [[v.hex() for v in row.tolist()] for row in x]


def decode_matrix_rows(rows, ncols: int | None = None) -> np.ndarray:
    if not rows:
        return np.zeros((0, ncols or 0))
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise ValueError("ragged feature rows")
    return np.array([[float.fromhex(v) for v in r] for r in rows], dtype=np.float64).reshape(len(rows), -1)


def check_header(obj: dict, fmt: str | tuple[str, ...], line: int = 1) -> str:
    fmts = (fmt,) if isinstance(fmt, str) else fmt
    if not isinstance(obj, dict) or obj.get("format") not in fmts:
        raise FormatError(f"expected format {' or '.join(fmts)}, got {obj.get('format') if isinstance(obj, dict) else obj!r}",
                          line, "format")
    if obj.get("version") != VERSION:
        raise FormatError(f"unsupported version {obj.get('version')!r}", line, "version")
    return obj["format"]


def graph_to_obj(g: Graph, with_label: bool = True) -> dict:
    obj = {"n": g.num_nodes, "edges": g.edges.tolist(), "x": encode_matrix_rows(g.features)}
    if with_label and g.label is not None:
        obj["y"] = g.label
    return obj


def graph_from_obj(obj: dict, line: int | None = None, feature_dim: int | None = None, index: int | None = None) -> Graph:
    tag = f"graph {index}: " if index is not None else ""
    for key in ("n", "edges", "x"):
        if key not in obj:
            raise FormatError(f"{tag}missing field", line, key)
    n = obj["n"]
    if not isinstance(n, int) or n < 0:
        raise FormatError(f"{tag}node count must be a non-negative integer", line, "n")
    try:
        x = decode_matrix_rows(obj["x"], feature_dim)
    except (ValueError, TypeError) as exc:
        raise FormatError(f"{tag}bad feature matrix ({exc})", line, "x") from None
    if x.shape[0] != n or (feature_dim is not None and x.shape[1] != feature_dim):
        raise FormatError(f"{tag}feature shape {x.shape} != ({n}, {feature_dim})", line, "x")
    edges = obj["edges"]
    if not isinstance(edges, list) or any(not isinstance(e, list) or len(e) != 2 for e in edges):
        raise FormatError(f"{tag}edges must be [u, v] pairs", line, "edges")
    try:
        return Graph(n, np.array(edges, dtype=np.int64).reshape(-1, 2), x, obj.get("y"))
    except GraphError as exc:
        raise FormatError(f"{tag}{exc}", line, "edges") from None


def _graph_header(d: GraphDataset, extra: dict | None = None) -> dict:
    header = {"format": "gwm-graphs", "version": VERSION, "num_classes": d.num_classes,
              "feature_dim": d.feature_dim, "train": list(d.train), "test": list(d.test)}
    header.update(extra or {})
    return header


def node_task_to_obj(t: NodeTask) -> dict:
    return {"format": "gwm-node", "version": VERSION, "n": t.graph.num_nodes, "edges": t.graph.edges.tolist(),
            "x": encode_matrix_rows(t.graph.features), "y": t.labels.tolist(),
            "train_mask": t.train_mask.tolist(), "test_mask": t.test_mask.tolist(), "num_classes": t.num_classes}


def node_task_from_obj(obj: dict) -> NodeTask:
    check_header(obj, "gwm-node")
    for key in ("n", "edges", "x", "y", "train_mask", "test_mask", "num_classes"):
        if key not in obj:
            raise FormatError("missing field", 1, key)
    g = graph_from_obj({k: obj[k] for k in ("n", "edges", "x")}, 1)
    try:
        return NodeTask(g, obj["y"], obj["train_mask"], obj["test_mask"], obj["num_classes"])
    except (GraphError, ValueError) as exc:
        raise FormatError(str(exc), 1, "y") from None


def write_graph_records(path: str | Path, header: dict, graphs) -> None:
    lines = [dumps(header)] + [dumps(graph_to_obj(g)) for g in graphs]
    Path(path).write_text("\n".join(lines) + "\n")


def read_graph_records(path: str | Path) -> tuple[dict, list[Graph]]:
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise FormatError("empty file", 1)
    header = _json_line(lines[0], 1)
    check_header(header, "gwm-graphs")
    for key in ("num_classes", "feature_dim", "train", "test"):
        if key not in header:
            raise FormatError("missing header field", 1, key)
    graphs = []
    for i, text in enumerate(lines[1:]):
        if not text.strip():
            continue
        graphs.append(graph_from_obj(_json_line(text, i + 2), i + 2, header["feature_dim"], len(graphs)))
    return header, graphs


def _json_line(text: str, line: int):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON ({exc.msg})", line) from None


def save_dataset(d: GraphDataset | NodeTask, path: str | Path) -> None:
    if isinstance(d, NodeTask):
        Path(path).write_text(dumps(node_task_to_obj(d)) + "\n")
    else:
        write_graph_records(path, _graph_header(d), d.graphs)


def load_dataset(path: str | Path) -> GraphDataset | NodeTask:
    text = Path(path).read_text()
    first = _json_line(text.splitlines()[0] if text else "", 1)
    if isinstance(first, dict) and first.get("format") == "gwm-node":
        return node_task_from_obj(first)
    header, graphs = read_graph_records(path)
    try:
        return GraphDataset(tuple(graphs), header["num_classes"], header["feature_dim"], header["train"], header["test"])
    except GraphError as exc:
        raise FormatError(str(exc), 1, "train") from None


def write_json(path: str | Path, obj: dict) -> None:
    Path(path).write_text(json.dumps(obj, indent=1, sort_keys=False) + "\n")


def read_json(path: str | Path, fmt: str | tuple[str, ...]) -> dict:
    obj = _json_line(Path(path).read_text(), 1)
    check_header(obj, fmt)
    return obj
