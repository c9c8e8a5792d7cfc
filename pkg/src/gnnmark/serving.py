"""Label-only model serving over newline-delimited JSON.

Requests::

    {"id": k, "op": "predict_graph", "graph": {"n": ..., "edges": ..., "x": ...}}
    {"id": k, "op": "predict_nodes", "graph": {...}, "nodes": [...]}

Responses echo ``id`` verbatim and carry ``label``, ``labels`` or ``error``.
No probabilities or logits ever leave the server.  One connection is served
at a time; requests are answered in arrival order.
"""

from __future__ import annotations

import json
import logging
import socket
import socketserver
import subprocess
import sys
from typing import IO, Sequence

from . import io
from .graph import Graph
from .nn.model import Model, predict
from .verification import query_body

log = logging.getLogger(__name__)


class ProtocolError(RuntimeError):
    pass


class RemoteError(RuntimeError):
    pass


def handle_request(model: Model, line: str) -> dict:
    try:
        req = json.loads(line)
    except json.JSONDecodeError as exc:
        return {"id": None, "error": f"malformed request: {exc.msg}"}
    if not isinstance(req, dict) or "id" not in req:
        return {"id": req.get("id") if isinstance(req, dict) else None, "error": "malformed request: missing id"}
    rid = req["id"]
    op = req.get("op")
    if op not in ("predict_graph", "predict_nodes"):
        return {"id": rid, "error": "unknown op"}
    try:
        g = io.graph_from_obj(req["graph"], feature_dim=model.spec.input_dim)
        if op == "predict_graph":
            return {"id": rid, "label": int(predict(model, g)[0])}
        nodes = req["nodes"]
        if not isinstance(nodes, list) or any(not isinstance(v, int) or not 0 <= v < g.num_nodes for v in nodes):
            return {"id": rid, "error": "bad node indices"}
        pred = predict(model, g)
        return {"id": rid, "labels": [int(pred[v]) for v in nodes]}
    except KeyError as exc:
        return {"id": rid, "error": f"missing field {exc.args[0]!r}"}
    except (ValueError, TypeError) as exc:
        return {"id": rid, "error": str(exc)}


def serve_stream(model: Model, rfile: IO[str], wfile: IO[str]) -> int:
    """Answer every line of ``rfile``; returns the number of requests handled."""
    count = 0
    for line in rfile:
        if not line.strip():
            continue
        wfile.write(io.dumps(handle_request(model, line)) + "\n")
        wfile.flush()
        count += 1
    return count


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        rfile = (line.decode("utf-8") for line in self.rfile)
        out = self.wfile

        class _W:
            def write(self, s):
                out.write(s.encode("utf-8"))

            def flush(self):
                out.flush()

        n = serve_stream(self.server.model, rfile, _W())
        log.info("connection from %s closed after %d requests", self.client_address, n)


class ModelServer(socketserver.TCPServer):
    allow_reuse_address = True

    def __init__(self, model: Model, host: str = "127.0.0.1", port: int = 0):
        self.model = model
        super().__init__((host, port), _Handler)


def parse_endpoint(endpoint: str) -> tuple[str, int] | None:
    """``stdio`` -> None; ``tcp://host:port`` or ``host:port`` -> (host, port)."""
    if endpoint == "stdio":
        return None
    spec = endpoint[len("tcp://"):] if endpoint.startswith("tcp://") else endpoint
    host, sep, port = spec.rpartition(":")
    if not sep or not port.isdigit():
        raise ValueError(f"bad endpoint {endpoint!r}; expected stdio or tcp://host:port")
    return host or "127.0.0.1", int(port)


def serve(model: Model, endpoint: str) -> None:
    addr = parse_endpoint(endpoint)
    if addr is None:
        serve_stream(model, sys.stdin, sys.stdout)
        return
    with ModelServer(model, *addr) as server:
        host, port = server.server_address[:2]
        log.info("serving on tcp://%s:%d", host, port)
        print(f"listening tcp://{host}:{port}", file=sys.stderr, flush=True)
        server.serve_forever()


class RemoteModel:
    """:class:`~gnnmark.verification.OpaqueModel` backed by a served model."""

    def __init__(self, rfile: IO[str], wfile: IO[str], closer=None):
        self._r = rfile
        self._w = wfile
        self._closer = closer
        self._next_id = 0

    @classmethod
    def connect(cls, endpoint: str, timeout: float | None = 30.0) -> "RemoteModel":
        addr = parse_endpoint(endpoint)
        if addr is None:
            raise ValueError("use RemoteModel.spawn for stdio endpoints")
        sock = socket.create_connection(addr, timeout=timeout)
        r = sock.makefile("r", encoding="utf-8", newline="\n")
        w = sock.makefile("w", encoding="utf-8", newline="\n")

        def close():
            w.close()
            r.close()
            sock.close()
        return cls(r, w, close)

    @classmethod
    def spawn(cls, argv: Sequence[str]) -> "RemoteModel":
        """Start a ``serve --endpoint stdio`` subprocess and talk over its pipes."""
        proc = subprocess.Popen(list(argv), stdin=subprocess.PIPE, stdout=subprocess.PIPE, text=True, bufsize=1)

        def close():
            proc.stdin.close()
            proc.wait(timeout=30)
            proc.stdout.close()
        return cls(proc.stdout, proc.stdin, close)

    def close(self):
        if self._closer:
            self._closer()
            self._closer = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def send(self, bodies: Sequence[dict]) -> list[dict]:
        """Pipeline several request bodies; responses are matched by id in order."""
        ids = []
        for body in bodies:
            ids.append(self._next_id)
            self._w.write(io.dumps({"id": self._next_id, **body}) + "\n")
            self._next_id += 1
        self._w.flush()
        out = []
        for rid in ids:
            line = self._r.readline()
            if not line:
                raise ProtocolError("connection closed before response")
            resp = json.loads(line)
            if resp.get("id") != rid:
                raise ProtocolError(f"response id {resp.get('id')!r} does not match request id {rid}")
            out.append(resp)
        return out

    def _one(self, body: dict) -> dict:
        resp = self.send([body])[0]
        if "error" in resp:
            raise RemoteError(resp["error"])
        return resp

    def predict_graph(self, graph: Graph) -> int:
        return int(self._one(query_body(graph))["label"])

    def predict_nodes(self, graph: Graph, nodes: Sequence[int]) -> list[int]:
        return [int(v) for v in self._one(query_body((graph, list(nodes))))["labels"]]
