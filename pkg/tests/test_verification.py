import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from gnnmark.graph import Graph
from gnnmark.verification import (CalibrationInfeasible, QueryError, VerificationAborted, calibrate_threshold,
                                  delta_decision, load_verdict, query_body, save_verdict, verify_ownership,
                                  watermark_accuracy, welch_t)
from gnnmark.watermark import WatermarkedDataset

NCI1_CLEAN = [0.70, 6.49, 4.27, 9.77, 14.85, 7.43, 1.59, 5.71, 14.09, 10.94]
NCI1_WM = [94.98, 94.88, 99.32, 92.67, 92.11, 99.73, 99.58, 89.52, 99.78, 97.50]
CITE_CLEAN = [0.99, 1.05, 0.73, 1.14, 0.81, 0.35, 0.34, 0.28, 1.33, 0.22]
CITE_WM = [99.75, 97.83, 99.95, 99.41, 99.74, 99.85, 98.22, 99.13, 99.36, 99.01]


class Constant:
    def __init__(self, label):
        self.label = label
        self.calls = 0

    def predict_graph(self, graph):
        self.calls += 1
        return self.label

    def predict_nodes(self, graph, nodes):
        self.calls += 1
        return [self.label] * len(nodes)


class Scripted:
    """Answers queries from a fixed list; raises after it runs out."""

    def __init__(self, answers):
        self.answers = list(answers)
        self.seen = []

    def predict_graph(self, graph):
        if len(self.seen) == len(self.answers):
            raise ConnectionError("peer went away")
        self.seen.append(graph)
        return self.answers[len(self.seen) - 1]


def _queries(n, target=1):
    graphs = tuple(Graph(3, [[0, 1], [1, 2]], np.full((3, 1), float(i)), None) for i in range(n))
    return WatermarkedDataset("graph", target, graphs, num_classes=3, provenance={"trigger": "secret"})


def test_watermark_accuracy_constant_models():
    d = _queries(15, target=1)
    assert watermark_accuracy(Constant(1), d) == 1.0
    assert watermark_accuracy(Constant(2), d) == 0.0


def test_watermark_accuracy_counts_hits():
    assert watermark_accuracy(Scripted([1, 1, 1] + [0] * 12), _queries(15)) == 0.2


def test_watermark_accuracy_node_queries():
    g = Graph(4, [[0, 1]], np.zeros((4, 2)))
    d = WatermarkedDataset("node", 2, graph=g, nodes=(0, 3), num_classes=3)
    assert watermark_accuracy(Constant(2), d) == 1.0


def test_watermark_accuracy_reports_failing_query():
    with pytest.raises(QueryError) as err:
        watermark_accuracy(Scripted([1, 1]), _queries(5))
    assert err.value.query_id == 2


def test_watermark_accuracy_empty():
    with pytest.raises(ValueError):
        watermark_accuracy(Constant(1), _queries(0))


def test_welch_nci1_diffpool():
    r = welch_t(NCI1_WM, NCI1_CLEAN)
    assert abs(r.t - 45.82) <= 0.05
    assert r.df == 16 and round(r.t_critical, 3) == 2.120 and r.reject_h0


def test_welch_cite_sage():
    r = welch_t(CITE_WM, CITE_CLEAN)
    assert abs(r.t - 381.65) <= 0.5
    assert r.df == 14 and round(r.t_critical, 3) == 2.145 and r.reject_h0


def test_welch_matches_scipy():
    r = welch_t(NCI1_WM, NCI1_CLEAN)
    ref = stats.ttest_ind(NCI1_WM, NCI1_CLEAN, equal_var=False)
    assert abs(r.t - ref.statistic) < 1e-9
    assert abs(r.nu - ref.df) < 1e-9


def test_welch_identical_samples():
    r = welch_t([0.1, 0.4, 0.3], [0.1, 0.4, 0.3])
    assert r.t == 0 and not r.reject_h0


def test_welch_zero_variance_equal_means_is_degenerate():
    r = welch_t([0.5, 0.5], [0.5, 0.5])
    assert r.degenerate and not r.reject_h0


def test_welch_zero_variance_separated_means():
    r = welch_t([1.0, 1.0, 1.0], [0.0, 0.0, 0.0])
    assert math.isinf(r.t) and r.reject_h0 and r.nu == 2


def test_welch_needs_equal_sizes():
    with pytest.raises(ValueError):
        welch_t([0.1], [0.2])
    with pytest.raises(ValueError):
        welch_t([0.1, 0.2], [0.2, 0.3, 0.4])


_samples = st.lists(st.floats(0, 1), min_size=3, max_size=12)


@settings(max_examples=100, deadline=None)
@given(data=st.data())
def test_welch_translation_and_scale_invariance(data):
    a = np.array(data.draw(_samples))
    b = np.array(data.draw(st.lists(st.floats(0, 1), min_size=len(a), max_size=len(a))))
    if a.var() < 1e-6 and b.var() < 1e-6:
        return
    t = welch_t(a, b).t
    shift = data.draw(st.floats(-5, 5))
    scale = data.draw(st.floats(0.1, 10))
    assert abs(welch_t(a + shift, b + shift).t - t) <= 1e-9 * max(1, abs(t))
    assert abs(welch_t(a * scale, b * scale).t - t) <= 1e-9 * max(1, abs(t))
    nu = welch_t(a, b).nu
    assert len(a) - 1 - 1e-9 <= nu <= 2 * len(a) - 2 + 1e-9


def test_threshold_degenerate_midpoint():
    assert calibrate_threshold([0.95, 0.95], [0.05, 0.05]) == 0.5


def test_threshold_nci1_pinned():
    a, b = np.array(NCI1_WM) / 100, np.array(NCI1_CLEAN) / 100
    th = calibrate_threshold(a, b)
    z = stats.norm.isf(1e-4)
    oracle = (b.mean() + z * b.std(ddof=1) + a.mean() - z * a.std(ddof=1)) / 2
    assert abs(th - oracle) < 1e-12
    assert 0.15 < th < 0.89
    assert th == pytest.approx(0.5385766698557564, abs=1e-15)
    # empirical FPR = FNR = 0 on the calibration samples
    assert (b < th).all() and (a >= th).all()


def test_threshold_infeasible():
    with pytest.raises(CalibrationInfeasible) as err:
        calibrate_threshold([0.3, 0.5], [0.3, 0.5])
    assert err.value.lower > err.value.upper
    with pytest.raises(CalibrationInfeasible):
        calibrate_threshold([0.9, 0.1, 0.5], [0.2, 0.4, 0.3])


def test_verify_stolen_above_threshold(tmp_path):
    d = _queries(100)
    v = verify_ownership(Scripted([1] * 93 + [0] * 7), d, 0.72)
    assert v.accuracy == 0.93 and v.decision == "stolen" and v.queries == 100
    save_verdict(v, tmp_path / "v.json")
    obj = load_verdict(tmp_path / "v.json")
    assert obj["decision"] == "stolen" and obj["format"] == "gwm-verdict"


def test_verify_boundary_is_stolen():
    v = verify_ownership(Scripted([1, 1, 0, 0]), _queries(4), 0.5)
    assert v.accuracy == 0.5 and v.stolen


def test_verify_issues_one_query_per_item():
    m = Constant(0)
    v = verify_ownership(m, _queries(7), 0.5)
    assert m.calls == 7 and v.decision == "not-proven"


def test_verify_rejects_bad_threshold():
    with pytest.raises(ValueError):
        verify_ownership(Constant(1), _queries(2), 1.5)


def test_queries_carry_no_secret_metadata():
    d = _queries(3)
    for item, _ in d.items():
        body = json.dumps(query_body(item))
        assert "secret" not in body and "trigger" not in body
        assert set(query_body(item)["graph"]) == {"n", "edges", "x"}


def test_verify_aborts_keeping_transcript():
    with pytest.raises(VerificationAborted) as err:
        verify_ownership(Scripted([1, 0, 1]), _queries(6), 0.5)
    assert err.value.query_id == 3
    assert [label for _, label in err.value.transcript] == [1, 0, 1]


def test_transcript_digest_depends_on_answers():
    d = _queries(4)
    a = verify_ownership(Scripted([1, 1, 0, 0]), d, 0.5)
    b = verify_ownership(Scripted([1, 0, 1, 0]), d, 0.5)
    c = verify_ownership(Scripted([1, 1, 0, 0]), d, 0.5)
    assert a.accuracy == b.accuracy and a.transcript_sha256 != b.transcript_sha256
    assert a.transcript_sha256 == c.transcript_sha256


def test_delta_decision_examples():
    assert not delta_decision(0.0, 0.3, 30)
    assert delta_decision(0.4, 0.6, 10)
    lhs = math.sqrt(29) * 0.5 - math.sqrt(0.6 * 0.4) * stats.t.ppf(0.95, 29)
    assert lhs > 0 and delta_decision(0.5, 0.1, 30)


def test_delta_decision_monotone_in_delta():
    for beta in (0.0, 0.05, 0.2, 0.4):
        for q in (2, 5, 30):
            seq = [delta_decision(d, beta, q) for d in np.linspace(0, 0.5 - beta, 200) if d + beta <= 0.5]
            assert seq == sorted(seq)


def test_delta_decision_preconditions():
    for args in ((-0.1, 0.2, 5), (0.6, 0.5, 5), (0.1, 0.1, 1)):
        with pytest.raises(ValueError):
            delta_decision(*args)
