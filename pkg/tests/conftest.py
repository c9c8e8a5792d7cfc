import numpy as np
import pytest

from gnnmark.graph import Graph, synth_graph_dataset, synth_node_task
from gnnmark.nn import Model, ModelSpec, TrainConfig, graph_examples, node_examples, train
from gnnmark.rng import RngStream


@pytest.fixture(scope="session")
def small_graph_data():
    return synth_graph_dataset(60, (10, 16), 0.1, 0.5, "degree", RngStream(11, "data"))


@pytest.fixture(scope="session")
def small_node_task():
    return synth_node_task(60, 3, 0.3, 0.02, 8, RngStream(11, "node"))


@pytest.fixture(scope="session")
def graph_model(small_graph_data):
    d = small_graph_data
    m = Model.init(ModelSpec("gin", (1, 8), 2), RngStream(11, "init"))
    return train(m, graph_examples(d.train_graphs(), 2), TrainConfig(epochs=40))


@pytest.fixture(scope="session")
def node_model(small_node_task):
    t = small_node_task
    m = Model.init(ModelSpec("gcn", (8, 8), 3, "node"), RngStream(11, "init"))
    ex = node_examples(t.graph, np.flatnonzero(t.train_mask), t.labels, 3)
    return train(m, ex, TrainConfig(epochs=60))


def random_graph(gen: np.random.Generator, n: int, p: float, dim: int) -> Graph:
    u, v = np.triu_indices(n, 1)
    keep = gen.random(len(u)) < p
    return Graph(n, np.stack([u[keep], v[keep]], axis=1), gen.standard_normal((n, dim)))


# one pass/fail line per acceptance criterion, printed after the run
ACCEPTANCE: dict[int, str] = {}


def record(criterion: int, ok: bool, detail: str) -> bool:
    line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'} ({detail})"
    ACCEPTANCE[criterion] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
