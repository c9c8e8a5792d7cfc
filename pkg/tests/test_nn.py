import numpy as np
import pytest

from gnnmark.graph import Graph, synth_graph_dataset
from gnnmark.nn import (Batch, Model, ModelSpec, TrainConfig, TrainingDiverged, forward, gcn_forward, gin_forward,
                        graph_examples, load_model, node_examples, predict, readout_mean, sage_forward, save_model, train)
from gnnmark.nn.gradcheck import analytic_gradient, grad_check, max_relative_error, numerical_gradient
from gnnmark.nn.model import Examples, one_hot
from gnnmark.rng import RngStream

from conftest import random_graph


def dense_adj(g: Graph) -> np.ndarray:
    return g.adjacency().astype(float)


def test_gcn_single_node_identity():
    g = Graph(1, [], np.array([[2.0, -3.0]]))
    out, _ = gcn_forward({"W": np.eye(2), "b": np.zeros((1, 2))}, Batch([g]).operator("gcn"), g.features, final=True)
    assert np.array_equal(out, g.features)


def test_gcn_symmetric_pair():
    g = Graph(2, [[0, 1]], np.array([[1.0, 2.0], [1.0, 2.0]]))
    p = {"W": np.random.default_rng(0).standard_normal((2, 3)), "b": np.zeros((1, 3))}
    out, _ = gcn_forward(p, Batch([g]).operator("gcn"), g.features)
    assert np.array_equal(out[0], out[1])


def test_gcn_matches_dense_oracle():
    gen = np.random.default_rng(1)
    g = random_graph(gen, 5, 0.5, 3)
    a = dense_adj(g) + np.eye(5)
    d = np.diag(1 / np.sqrt(a.sum(1)))
    p = {"W": gen.standard_normal((3, 4)), "b": gen.standard_normal((1, 4))}
    out, _ = gcn_forward(p, Batch([g]).operator("gcn"), g.features, final=True)
    assert np.abs(out - (d @ a @ d @ g.features @ p["W"] + p["b"])).max() < 1e-12


def _gin_params(gen, i, o):
    return {"W1": gen.standard_normal((i, o)), "b1": gen.standard_normal((1, o)),
            "W2": gen.standard_normal((o, o)), "b2": gen.standard_normal((1, o))}


def _mlp(p, s):
    return np.maximum(s @ p["W1"] + p["b1"], 0) @ p["W2"] + p["b2"]


def test_gin_matches_dense_oracle():
    gen = np.random.default_rng(2)
    g = random_graph(gen, 6, 0.5, 3)
    p = _gin_params(gen, 3, 4)
    out, _ = gin_forward(p, Batch([g]).operator("gin"), g.features, final=True)
    assert np.abs(out - _mlp(p, (dense_adj(g) + np.eye(6)) @ g.features)).max() < 1e-12


def test_gin_isolated_node_and_cancellation():
    gen = np.random.default_rng(3)
    p = _gin_params(gen, 2, 2)
    x = np.array([[0.5, 1.0], [0.3, -0.2], [-0.3, 0.2], [4.0, 4.0]])
    g = Graph(4, [[0, 1], [0, 2]], x)
    out, _ = gin_forward(p, Batch([g]).operator("gin"), x, final=True)
    assert np.allclose(out[0], _mlp(p, x[:1])[0], atol=1e-12)
    assert np.allclose(out[3], _mlp(p, x[3:])[0], atol=1e-12)


def test_sage_matches_dense_oracle_and_conventions():
    gen = np.random.default_rng(4)
    g = random_graph(gen, 6, 0.4, 3)
    g = g.replace(edges=g.edges[g.edges.max(axis=1) < 5])  # node 5 isolated
    a = dense_adj(g)
    deg = a.sum(1, keepdims=True)
    mean = np.divide(a, deg, out=np.zeros_like(a), where=deg > 0)
    p = {"W": gen.standard_normal((6, 4)), "b": gen.standard_normal((1, 4))}
    out, _ = sage_forward(p, Batch([g]).operator("sage-mean"), g.features, final=True)
    oracle = np.concatenate([g.features, mean @ g.features], axis=1) @ p["W"] + p["b"]
    assert np.abs(out - oracle).max() < 1e-12
    iso = np.concatenate([g.features[5], np.zeros(3)]) @ p["W"] + p["b"][0]
    assert np.abs(out[5] - iso).max() < 1e-12


def test_sage_neighbours_equal_self():
    x = np.ones((3, 2))
    g = Graph(3, [[0, 1], [0, 2]], x)
    p = {"W": np.arange(8.0).reshape(4, 2), "b": np.zeros((1, 2))}
    out, _ = sage_forward(p, Batch([g]).operator("sage-mean"), x, final=True)
    assert np.allclose(out[0], np.concatenate([x[0], x[0]]) @ p["W"])


def test_readout_mean():
    x = np.array([[1.0, -2.0]])
    assert np.array_equal(readout_mean(x), x[0])
    assert np.array_equal(readout_mean(np.vstack([x, -x])), np.zeros(2))
    perm = np.random.default_rng(0).standard_normal((5, 3))
    assert np.allclose(readout_mean(perm), readout_mean(perm[::-1]), atol=1e-15)
    with pytest.raises(ValueError):
        readout_mean(np.zeros((0, 3)))


def test_layer_shape_mismatch():
    g = Graph(2, [[0, 1]], np.zeros((2, 3)))
    with pytest.raises(ValueError):
        gcn_forward({"W": np.zeros((4, 2)), "b": np.zeros((1, 2))}, Batch([g]).operator("gcn"), g.features)


@pytest.mark.parametrize("arch", ["gcn", "gin", "sage-mean"])
@pytest.mark.parametrize("task", ["graph", "node"])
def test_zero_params_give_uniform(arch, task):
    spec = ModelSpec(arch, (3, 4), 3, task)
    m = Model.init(spec, RngStream(0))
    m.params = {k: np.zeros_like(v) for k, v in m.params.items()}
    g = random_graph(np.random.default_rng(0), 5, 0.5, 3)
    probs = forward(m, g)
    assert np.allclose(probs, 1 / 3, atol=1e-15)
    assert predict(m, g).tolist() == [0] * len(probs)  # ties go to the lowest class


@pytest.mark.parametrize("arch", ["gcn", "gin", "sage-mean"])
def test_probabilities_sum_to_one(arch):
    gen = np.random.default_rng(5)
    m = Model.init(ModelSpec(arch, (3, 8, 8), 4), RngStream(5))
    graphs = [random_graph(gen, int(n), 0.3, 3) for n in gen.integers(2, 12, size=20)]
    assert np.abs(forward(m, graphs).sum(axis=1) - 1).max() < 1e-9


@pytest.mark.parametrize("arch", ["gcn", "gin", "sage-mean"])
def test_permutation_equivariance(arch):
    gen = np.random.default_rng(6)
    g = random_graph(gen, 7, 0.4, 3)
    perm = gen.permutation(7)
    inv = np.argsort(perm)
    h = Graph(7, inv[g.edges], g.features[perm])
    node = Model.init(ModelSpec(arch, (3, 5), 2, "node"), RngStream(1))
    assert np.abs(forward(node, h) - forward(node, g)[perm]).max() < 1e-12
    graph = Model.init(ModelSpec(arch, (3, 5), 2, "graph"), RngStream(1))
    assert np.abs(forward(graph, h) - forward(graph, g)).max() < 1e-12


def test_batching_matches_single_graph_forward():
    gen = np.random.default_rng(7)
    graphs = [random_graph(gen, n, 0.4, 2) for n in (3, 6, 1, 4)]
    m = Model.init(ModelSpec("gin", (2, 6), 2), RngStream(3))
    batched = forward(m, graphs)
    for i, g in enumerate(graphs):
        assert np.abs(batched[i] - forward(m, g)[0]).max() < 1e-12


def test_zero_node_graph_rejected():
    m = Model.init(ModelSpec("gcn", (1, 2), 2), RngStream(0))
    with pytest.raises(ValueError):
        forward(m, [Graph(0, [], np.zeros((0, 1)))])


def test_train_zero_epochs_is_identity(graph_model, small_graph_data):
    out = train(graph_model, graph_examples(small_graph_data.train_graphs(), 2), TrainConfig(epochs=0))
    assert all(np.array_equal(out.params[k], graph_model.params[k]) for k in out.params)


def test_sgd_loss_strictly_decreases_on_bias_only_problem():
    # single graph, zero weights: only the head bias moves the logits
    m = Model.init(ModelSpec("gcn", (1, 1), 2), RngStream(0))
    m.params = {k: np.zeros_like(v) for k, v in m.params.items()}
    g = Graph(1, [], np.zeros((1, 1)), 1)
    out = train(m, graph_examples([g], 2), TrainConfig(epochs=30, learning_rate=0.1, optimizer="sgd"))
    hist = out.meta["loss_history"]
    assert all(b < a for a, b in zip(hist, hist[1:]))


def test_train_reaches_high_accuracy_on_separable_data():
    d = synth_graph_dataset(200, (20, 20), 0.1, 0.9, "degree", RngStream(2))
    m = Model.init(ModelSpec("gin", (1, 16), 2), RngStream(2, "init"))
    m = train(m, graph_examples(d.train_graphs(), 2), TrainConfig(epochs=50, learning_rate=0.01))
    test = d.test_graphs()
    acc = (predict(m, test) == np.array([g.label for g in test])).mean()
    assert acc >= 0.95


def test_train_is_deterministic(small_graph_data):
    ex = graph_examples(small_graph_data.train_graphs(), 2)
    m = Model.init(ModelSpec("sage-mean", (1, 4), 2), RngStream(9))
    a = train(m, ex, TrainConfig(epochs=5))
    b = train(m, ex, TrainConfig(epochs=5))
    assert all(np.array_equal(a.params[k], b.params[k]) for k in a.params)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_training_divergence_is_reported():
    m = Model.init(ModelSpec("gcn", (1, 2), 2), RngStream(0))
    g = Graph(2, [[0, 1]], np.array([[1.0], [2.0]]), 0)
    with pytest.raises(TrainingDiverged) as err:
        train(m, graph_examples([g], 2), TrainConfig(epochs=20, learning_rate=1e300, optimizer="sgd"))
    assert err.value.epoch > 1


def test_model_roundtrip_bit_exact(tmp_path, node_model, small_node_task):
    path = tmp_path / "m.json"
    save_model(node_model, path)
    back = load_model(path)
    assert back.spec == node_model.spec
    assert np.array_equal(forward(back, small_node_task), forward(node_model, small_node_task))
    assert back.meta == node_model.meta


def test_temperature_gradient_matches_finite_differences():
    m = Model.init(ModelSpec("gcn", (2, 3), 2), RngStream(1))
    gen = np.random.default_rng(1)
    graphs = [random_graph(gen, 4, 0.5, 2) for _ in range(3)]
    soft = np.array([[0.2, 0.8], [0.6, 0.4], [0.5, 0.5]])
    ex = Examples(Batch(graphs), soft)
    err = max_relative_error(analytic_gradient(m, ex, 3.0), numerical_gradient(m, ex, 1e-5, 3.0))
    assert err < 1e-5


def test_gradcheck_linear_model_is_near_exact():
    # a single node-level conv has no relu: logits are linear in every parameter
    g = random_graph(np.random.default_rng(4), 5, 0.5, 2)
    ex = node_examples(g, [0, 2, 4], np.array([0, 1, 1, 0, 1]), 2)
    assert grad_check(Model.init(ModelSpec("gcn", (2,), 2, "node"), RngStream(4)), ex) < 1e-7


def test_gradcheck_detects_corrupted_gradient():
    m = Model.init(ModelSpec("gcn", (2,), 2, "node"), RngStream(4))
    g = random_graph(np.random.default_rng(4), 5, 0.5, 2)
    ex = node_examples(g, [0, 2, 4], np.array([0, 1, 1, 0, 1]), 2)
    ga = analytic_gradient(m, ex)
    ga["conv0.W"][0, 0] += 1.0
    assert max_relative_error(ga, numerical_gradient(m, ex)) > 0.5


def test_one_hot():
    assert one_hot([1, 0], 3).tolist() == [[0, 1, 0], [1, 0, 0]]
