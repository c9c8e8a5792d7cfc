"""Black-box ownership verification.

A suspect model is only ever asked for labels.  Watermark accuracy is the
fraction of watermark queries answered with the target label; Welch's t-test
compares the watermark accuracies of independently trained watermarked and
clean models, and a threshold is calibrated between the two fitted normals.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from . import io
from .graph import Graph
from .nn.model import Model, predict
from .stats import norm_ppf, t_critical_two_sided, t_quantile
from .watermark import WatermarkedDataset


class OpaqueModel(Protocol):
    def predict_graph(self, graph: Graph) -> int: ...

    def predict_nodes(self, graph: Graph, nodes: Sequence[int]) -> list[int]: ...


class LocalModel:
    """In-process :class:`OpaqueModel` over a trained :class:`Model`."""

    def __init__(self, model: Model):
        self._model = model

    def predict_graph(self, graph: Graph) -> int:
        return int(predict(self._model, graph)[0])

    def predict_nodes(self, graph: Graph, nodes: Sequence[int]) -> list[int]:
        return [int(v) for v in predict(self._model, graph)[list(nodes)]]


class QueryError(RuntimeError):
    def __init__(self, query_id: int, cause: BaseException):
        self.query_id = query_id
        self.cause = cause
        super().__init__(f"query {query_id} failed: {cause}")


class VerificationAborted(RuntimeError):
    """A query failed mid-run; no verdict is issued but the transcript is kept."""

    def __init__(self, query_id: int, cause: BaseException, transcript: list[tuple[str, int]]):
        self.query_id = query_id
        self.cause = cause
        self.transcript = transcript
        super().__init__(f"verification aborted at query {query_id} after {len(transcript)} answers: {cause}")


class CalibrationInfeasible(ValueError):
    def __init__(self, lower: float, upper: float):
        self.lower = lower
        self.upper = upper
        super().__init__(f"no threshold satisfies the error rates: clean bound {lower:.6g} >= watermarked bound {upper:.6g}")


# -- queries ----------------------------------------------------------------

def query_body(item) -> dict:
    """Wire body (without id) for one watermark query."""
    if isinstance(item, Graph):
        return {"op": "predict_graph", "graph": io.graph_to_obj(item, with_label=False)}
    graph, nodes = item
    nodes = [int(nodes)] if np.isscalar(nodes) else [int(n) for n in nodes]
    return {"op": "predict_nodes", "graph": io.graph_to_obj(graph, with_label=False), "nodes": nodes}


def query_fingerprint(item) -> str:
    return hashlib.sha256(io.dumps(query_body(item)).encode()).hexdigest()


def ask(model: OpaqueModel, item) -> int:
    if isinstance(item, Graph):
        return int(model.predict_graph(item))
    graph, node = item
    return int(model.predict_nodes(graph, [node])[0])


def transcript_digest(transcript: Sequence[tuple[str, int]]) -> str:
    h = hashlib.sha256()
    for fp, label in transcript:
        h.update(f"{fp} {label}\n".encode())
    return h.hexdigest()


def _run_queries(model: OpaqueModel, d: WatermarkedDataset) -> list[tuple[str, int]]:
    if len(d) == 0:
        raise ValueError("empty watermark query set")
    transcript = []
    for k, (item, _) in enumerate(d.items()):
        try:
            label = ask(model, item)
        except Exception as exc:
            raise VerificationAborted(k, exc, transcript) from exc
        transcript.append((query_fingerprint(item), label))
    return transcript


def watermark_accuracy(model: OpaqueModel, d: WatermarkedDataset) -> float:
    """Fraction of watermark queries answered with the target label."""
    if len(d) == 0:
        raise ValueError("empty watermark query set")
    hits = 0
    for k, (item, target) in enumerate(d.items()):
        try:
            hits += ask(model, item) == target
        except Exception as exc:
            raise QueryError(k, exc) from exc
    return hits / len(d)


# -- hypothesis test ----------------------------------------------------------

@dataclass(frozen=True)
class TTestResult:
    t: float
    nu: float
    df: int
    t_critical: float
    reject_h0: bool
    tau: float
    mean_alpha: float
    mean_beta: float
    var_alpha: float
    var_beta: float
    degenerate: bool = False

    def to_obj(self) -> dict:
        return {k: (v if not isinstance(v, float) or math.isfinite(v) else str(v)) for k, v in asdict(self).items()}


def welch_t(alpha: Sequence[float], beta: Sequence[float], tau: float = 0.95) -> TTestResult:
    """Welch's t-test of watermarked (alpha) vs clean (beta) watermark accuracies.

    Equal sample sizes n; unbiased variances; Welch–Satterthwaite degrees of
    freedom floored to an integer for the critical value at two-sided
    significance 1 - tau.
    """
    a = np.asarray(alpha, dtype=np.float64)
    b = np.asarray(beta, dtype=np.float64)
    n = len(a)
    if len(b) != n or n < 2:
        raise ValueError("need two samples of equal size n >= 2")
    ma, mb = float(a.mean()), float(b.mean())
    va, vb = float(a.var(ddof=1)), float(b.var(ddof=1))
    se = math.sqrt(va / n + vb / n)
    degenerate = False
    if va + vb > 0:
        nu = (n - 1) * (va + vb) ** 2 / (va * va + vb * vb)
    else:
        nu = float(n - 1)
    df = max(1, int(math.floor(nu)))
    crit = t_critical_two_sided(round(1 - tau, 10), df)
    if se > 0:
        t = (ma - mb) / se
    elif ma == mb:
        t, degenerate = 0.0, True
    else:
        t = math.copysign(math.inf, ma - mb)
    return TTestResult(t, nu, df, crit, bool(t > crit) and not degenerate, tau, ma, mb, va, vb, degenerate)


def calibrate_threshold(alpha: Sequence[float], beta: Sequence[float],
                        max_fpr: float = 1e-4, max_fnr: float = 1e-4) -> float:
    """Midpoint of the band where both fitted normals meet the error rates.

    Clean accuracies ~ N(mean_beta, s_beta) must exceed the threshold with
    probability <= max_fpr; watermarked accuracies ~ N(mean_alpha, s_alpha)
    must fall below it with probability <= max_fnr.
    """
    a = np.asarray(alpha, dtype=np.float64)
    b = np.asarray(beta, dtype=np.float64)
    if len(a) < 2 or len(b) < 2:
        raise ValueError("need at least two accuracies per sample")
    lower = float(b.mean()) + norm_ppf(1 - max_fpr) * float(b.std(ddof=1))
    upper = float(a.mean()) - norm_ppf(1 - max_fnr) * float(a.std(ddof=1))
    if not a.mean() > b.mean() or lower > upper:
        raise CalibrationInfeasible(lower, upper)
    return min(1.0, max(0.0, (lower + upper) / 2))


def delta_decision(delta: float, beta: float, q: int, tau: float = 0.95) -> bool:
    """Reject H0 iff sqrt(q-1)·δ − sqrt((δ+β) − (δ+β)²)·t_τ > 0, t_τ at q−1 df."""
    if delta < 0 or beta < 0 or delta + beta > 1:
        raise ValueError("need delta >= 0, beta >= 0, delta + beta <= 1")
    if q < 2:
        raise ValueError("need at least two queries")
    s = delta + beta
    return math.sqrt(q - 1) * delta - math.sqrt(max(0.0, s - s * s)) * t_quantile(tau, q - 1) > 0


# -- verdicts ---------------------------------------------------------------

@dataclass(frozen=True)
class VerificationVerdict:
    accuracy: float
    threshold: float
    decision: str
    queries: int
    transcript_sha256: str
    t_test: TTestResult | None = None

    @property
    def stolen(self) -> bool:
        return self.decision == "stolen"

    def to_obj(self) -> dict:
        return {"format": "gwm-verdict", "version": io.VERSION, "accuracy": self.accuracy,
                "threshold": self.threshold, "decision": self.decision, "queries": self.queries,
                "t_test": self.t_test.to_obj() if self.t_test else None,
                "transcript_sha256": self.transcript_sha256}


def verify_ownership(suspect: OpaqueModel, d: WatermarkedDataset, threshold: float,
                     t_test: TTestResult | None = None) -> VerificationVerdict:
    """Query the suspect with every watermark input once; stolen iff accuracy >= threshold."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold {threshold} outside [0, 1]")
    transcript = _run_queries(suspect, d)
    hits = sum(label == d.target_label for _, label in transcript)
    acc = hits / len(transcript)
    return VerificationVerdict(acc, threshold, "stolen" if acc >= threshold else "not-proven",
                               len(transcript), transcript_digest(transcript), t_test)


def save_verdict(v: VerificationVerdict, path: str | Path) -> None:
    io.write_json(path, v.to_obj())


def load_verdict(path: str | Path) -> dict:
    return io.read_json(path, "gwm-verdict")
