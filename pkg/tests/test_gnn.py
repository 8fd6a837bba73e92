"""Tests for message passing, training, gradients and the F1 metric."""

from itertools import product
from pathlib import Path
from unittest.mock import patch

import numpy as np
import pytest
import torch
import torch.nn.functional as F

from gerk.errors import EmptyGraphError
from gerk.gnn import (
    Aggregator,
    GnnConfig,
    GnnModel,
    GraphTensors,
    MessagePassingLayer,
    Updater,
    aggregate,
    forward,
    gat_attention,
    gradient,
    graph_inputs,
    load_model,
    macro_f1,
    micro_f1,
    mlp_f1,
    node_embeddings,
    save_model,
    train,
    train_mlp,
    update,
)
from gerk.graph import Graph, SbmSpec, generate_sbm, induced_subgraph, split_train_test

# node 0 has neighbors 1 (degree 1) and 2 (degree 2); node 4 is isolated
STAR = Graph.from_edges(np.zeros((5, 2)), [0] * 5, [(0, 1), (0, 2), (2, 3)])
STAR_EMBEDDINGS = torch.tensor(
    [[5.0, 5.0], [1.0, 0.0], [0.0, 2.0], [3.0, 3.0], [7.0, 7.0]], dtype=torch.float64
)

RING_EDGES = [(i, (i + 1) % 11) for i in range(11)] + [(0, 5), (2, 8), (3, 9)]
TWELVE = Graph.from_edges(
    np.random.default_rng(12).normal(size=(12, 3)), np.arange(12) % 3, RING_EDGES
)


def message(kind: Aggregator, **kwargs) -> list[float]:
    gt = GraphTensors.from_graph(STAR)
    return aggregate(kind, STAR_EMBEDDINGS, gt, node=0, **kwargs).tolist()


def test_gin_sums():
    assert message(Aggregator.GIN) == [1.0, 2.0]


def test_sage_averages():
    assert message(Aggregator.SAGE) == [0.5, 1.0]


def test_gcn_normalizes():
    assert message(Aggregator.GCN) == pytest.approx([0.70711, 1.0], abs=1e-5)


def test_gat_with_zero_attention_averages_projections():
    w_att = torch.tensor([[2.0, 0.0], [1.0, 1.0]], dtype=torch.float64)
    att = torch.zeros(4, dtype=torch.float64)
    projected = STAR_EMBEDDINGS[[1, 2]] @ w_att.T
    assert message(Aggregator.GAT, w_att=w_att, att=att) == pytest.approx(
        projected.mean(dim=0).tolist()
    )


def test_gat_requires_parameters():
    with pytest.raises(ValueError):
        message(Aggregator.GAT)


def test_gat_weights_form_distributions():
    gt = GraphTensors.from_graph(TWELVE)
    generator = torch.Generator().manual_seed(0)
    w_att = torch.randn(3, 3, generator=generator, dtype=torch.float64)
    att = torch.randn(6, generator=generator, dtype=torch.float64)
    x = torch.from_numpy(TWELVE.x)
    weights = gat_attention(x, gt, w_att, att)
    totals = torch.zeros(12, dtype=torch.float64).index_add(0, gt.dst, weights)
    assert torch.all(weights > 0)
    assert torch.allclose(totals[:11], torch.ones(11, dtype=torch.float64), atol=1e-6)


@pytest.mark.parametrize("kind", list(Aggregator))
def test_isolated_node_gets_zero_message(kind: Aggregator):
    gt = GraphTensors.from_graph(STAR)
    params = {}
    if kind == Aggregator.GAT:
        params = {
            "w_att": torch.eye(2, dtype=torch.float64),
            "att": torch.ones(4, dtype=torch.float64),
        }
    assert aggregate(kind, STAR_EMBEDDINGS, gt, node=4, **params).tolist() == [0.0, 0.0]


def test_aggregate_rejects_row_mismatch():
    with pytest.raises(ValueError):
        aggregate(Aggregator.GIN, STAR_EMBEDDINGS[:3], GraphTensors.from_graph(STAR))


def layer_with(
    in_dim: int, out_dim: int, updater: Updater, w_self: list
) -> MessagePassingLayer:
    layer = MessagePassingLayer(in_dim, out_dim, Aggregator.SAGE, updater)
    with torch.no_grad():
        layer.w_self.copy_(torch.tensor(w_self, dtype=torch.float64))
        layer.w_neigh.zero_()
    return layer


def test_linear_update_identity():
    layer = layer_with(2, 2, Updater.LINEAR, [[1.0, 0.0], [0.0, 1.0]])
    e_u = torch.tensor([0.5, 2.0], dtype=torch.float64)
    m = torch.tensor([9.0, -3.0], dtype=torch.float64)
    assert update(Updater.LINEAR, e_u, m, layer).tolist() == [0.5, 2.0]


def test_concat_update():
    layer = layer_with(2, 1, Updater.CONCAT, [[0.5, 0.0]])
    e_u = torch.tensor([2.0, 3.0], dtype=torch.float64)
    out = update(Updater.CONCAT, e_u, torch.zeros(2, dtype=torch.float64), layer)
    assert out.tolist() == [1.0, 2.0, 3.0]
    assert layer.out_width == 3


def test_interpolation_gate_endpoint():
    layer = layer_with(2, 2, Updater.INTERPOLATION, [[1.0, 2.0], [-1.0, 0.5]])
    with torch.no_grad():
        layer.alpha_linear.fill_(1.0)
        layer.alpha_self.fill_(0.0)
    e_u = torch.tensor([1.0, 1.0], dtype=torch.float64)
    m = torch.zeros(2, dtype=torch.float64)
    linear = update(Updater.LINEAR, e_u, m, layer)
    assert torch.equal(update(Updater.INTERPOLATION, e_u, m, layer), linear)


def test_update_rejects_shape_mismatch():
    layer = layer_with(2, 2, Updater.LINEAR, [[1.0, 0.0], [0.0, 1.0]])
    with pytest.raises(ValueError):
        update(Updater.LINEAR, torch.zeros(3), torch.zeros(2), layer)


def test_zero_classifier_gives_uniform_posterior():
    model = GnnModel.uniform_stub(GnnConfig(), TWELVE.feature_dim, 3)
    assert np.allclose(forward(model, TWELVE), 1.0 / 3.0)


@pytest.mark.parametrize("aggregator,updater", product(Aggregator, Updater))
def test_posterior_rows_are_distributions(aggregator: Aggregator, updater: Updater):
    cfg = GnnConfig(aggregator=aggregator, updater=updater, hidden_dim=4)
    model = GnnModel(cfg, 3, 3, torch.Generator().manual_seed(1))
    posterior = forward(model, TWELVE)
    assert posterior.shape == (12, 3)
    assert np.allclose(posterior.sum(axis=1), 1.0, atol=1e-6)


@pytest.mark.parametrize("aggregator", list(Aggregator))
def test_permutation_equivariance(aggregator: Aggregator):
    cfg = GnnConfig(aggregator=aggregator, hidden_dim=4)
    model = GnnModel(cfg, 3, 3, torch.Generator().manual_seed(2))
    perm = np.random.default_rng(0).permutation(12)
    inverse = np.argsort(perm)
    permuted = Graph.from_edges(
        TWELVE.x[perm], TWELVE.y[perm], inverse[TWELVE.edge_array()], 3
    )
    assert np.allclose(forward(model, permuted), forward(model, TWELVE)[perm])


@pytest.mark.parametrize("aggregator", list(Aggregator))
def test_two_layer_locality(aggregator: Aggregator):
    path = Graph.from_edges(
        np.random.default_rng(0).normal(size=(6, 3)),
        [0, 1, 2, 0, 1, 2],
        [(i, i + 1) for i in range(5)],
    )
    x = path.x.copy()
    x[3] += 10.0
    mutated = Graph.from_edges(x, path.y, path.edge_array(), 3)
    cfg = GnnConfig(aggregator=aggregator, layers=2, hidden_dim=4)
    model = GnnModel(cfg, 3, 3, torch.Generator().manual_seed(3))
    before, after = forward(model, path), forward(model, mutated)
    assert np.allclose(before[0], after[0], rtol=1e-12, atol=0.0)
    assert not np.allclose(before, after)


def test_forward_rejects_feature_mismatch():
    model = GnnModel(GnnConfig(), 5, 2)
    with pytest.raises(ValueError):
        forward(model, TWELVE)


def _recording_relu(patterns: list[torch.Tensor]):
    relu = torch.relu

    def recording(t: torch.Tensor) -> torch.Tensor:
        patterns.append((t > 0).detach().clone())
        return relu(t)

    return recording


def _loss_and_patterns(model: GnnModel, batch: list[int]) -> tuple[float, list]:
    x, gt = graph_inputs(TWELVE)
    y = torch.from_numpy(TWELVE.y)
    patterns: list[torch.Tensor] = []
    recording = _recording_relu(patterns)
    with patch("gerk.gnn.layers.torch.relu", recording), torch.no_grad():
        loss = F.cross_entropy(model.logits(x, gt)[batch], y[batch])
    return float(loss), patterns


@pytest.mark.parametrize("aggregator,updater", product(Aggregator, Updater))
def test_gradient_matches_finite_differences(aggregator: Aggregator, updater: Updater):
    h = 1e-4
    batch = [0, 1, 2, 4, 5, 7, 11]
    cfg = GnnConfig(aggregator=aggregator, updater=updater, hidden_dim=4)
    checked = 0
    for point in range(5):
        model = GnnModel(cfg, 3, 3, torch.Generator().manual_seed(100 + point))
        analytic = gradient(model, TWELVE, batch)
        rng = np.random.default_rng(point)
        for name, param in model.named_parameters():
            noise = np.asarray(rng.normal(size=tuple(param.shape)))
            direction = torch.from_numpy(noise)
            with torch.no_grad():
                param.add_(h * direction)
            plus, plus_patterns = _loss_and_patterns(model, batch)
            with torch.no_grad():
                param.sub_(2 * h * direction)
            minus, minus_patterns = _loss_and_patterns(model, batch)
            with torch.no_grad():
                param.add_(h * direction)
            # finite differences are only valid where no rectifier switches
            switched = zip(plus_patterns, minus_patterns)
            if any(not torch.equal(a, b) for a, b in switched):
                continue
            numeric = (plus - minus) / (2 * h)
            exact = float((analytic[name] * direction).sum())
            assert abs(numeric - exact) <= 1e-4 * max(abs(exact), 1e-3), name
            checked += 1
    assert checked >= 0.8 * 5 * len(analytic)


def test_classifier_bias_gradient_closed_form():
    model = GnnModel.uniform_stub(GnnConfig(hidden_dim=4), 3, 3)
    batch = [0, 1, 2, 3]
    grads = gradient(model, TWELVE, batch)
    onehot = np.eye(3)[TWELVE.y[batch]]
    expected = (1.0 / 3.0 - onehot).mean(axis=0)
    assert np.allclose(grads["classifier_bias"].numpy(), expected)


def test_gradient_duplicate_batch_node():
    model = GnnModel(GnnConfig(hidden_dim=4), 3, 3, torch.Generator().manual_seed(4))
    once = gradient(model, TWELVE, [0])
    other = gradient(model, TWELVE, [1])
    doubled = gradient(model, TWELVE, [0, 0, 1])
    for name in doubled:
        assert torch.allclose(doubled[name], (2 * once[name] + other[name]) / 3)


def test_gradient_covers_every_parameter():
    cfg = GnnConfig(aggregator=Aggregator.GAT, updater=Updater.INTERPOLATION)
    model = GnnModel(cfg, 3, 3)
    grads = gradient(model, TWELVE, range(12))
    names = {name for name, _ in model.named_parameters()}
    assert set(grads) == names
    assert any("att" in name for name in names)
    assert any("alpha_linear" in name for name in names)


def two_cliques(seed: int = 0) -> Graph:
    return generate_sbm(
        SbmSpec(blocks=[20, 20], p_in=1.0, p_out=0.0, feature_dim=8, seed=seed)
    )


@pytest.mark.parametrize("aggregator", list(Aggregator))
def test_train_fits_two_cliques(aggregator: Aggregator):
    g = two_cliques()
    model = train(g, GnnConfig(aggregator=aggregator, hidden_dim=16))
    accuracy = np.mean(forward(model, g).argmax(axis=1) == g.y)
    assert accuracy >= 0.95
    assert len(model.loss_trace) == 100
    assert model.loss_trace[-1] <= model.loss_trace[0]


def test_train_adam_variant():
    cfg = GnnConfig(optimizer="adam", learning_rate=0.01, epochs=30)
    model = train(two_cliques(), cfg)
    assert model.loss_trace[-1] <= model.loss_trace[0]


def test_train_determinism():
    g = two_cliques()
    cfg = GnnConfig(hidden_dim=8, epochs=10, seed=5)
    assert train(g, cfg).parameter_hash() == train(g, cfg).parameter_hash()
    other = cfg.model_copy(update={"seed": 6})
    assert train(g, cfg).parameter_hash() != train(g, other).parameter_hash()


def test_train_empty_graph():
    empty, _ = induced_subgraph(TWELVE, [])
    with pytest.raises(EmptyGraphError):
        train(empty, GnnConfig())


def test_node_embeddings_separate_cliques():
    g = two_cliques(1)
    emb = node_embeddings(g, GnnConfig(hidden_dim=8, epochs=50)).embeddings
    assert emb.shape == (40, 8)
    distances = np.linalg.norm(emb[:, None] - emb[None], axis=-1)
    same = g.y[:, None] == g.y[None]
    assert distances[same].mean() < distances[~same].mean()


def test_node_embeddings_width_follows_concat():
    cfg = GnnConfig(updater=Updater.CONCAT, hidden_dim=4, layers=2, epochs=2)
    emb = node_embeddings(TWELVE, cfg)
    assert emb.n == 12
    assert emb.embeddings.shape[1] == (4 + 3) + 4


def test_mlp_without_feature_signal():
    g = generate_sbm(
        SbmSpec(blocks=[50] * 4, p_in=0.3, p_out=0.01, centroid_scale=0.0, seed=2)
    )
    split = split_train_test(g, 0.8, seed=0)
    g_train, _ = induced_subgraph(g, split.train_nodes)
    model = train_mlp(g_train, seed=0)
    assert mlp_f1(model, g, split.test_nodes) < 0.5


def test_mlp_with_feature_signal():
    g = generate_sbm(
        SbmSpec(blocks=[50, 50], p_in=0.1, p_out=0.1, centroid_scale=3.0, seed=2)
    )
    split = split_train_test(g, 0.8, seed=0)
    g_train, _ = induced_subgraph(g, split.train_nodes)
    model = train_mlp(g_train, seed=0)
    assert mlp_f1(model, g, split.test_nodes) > 0.9


def test_micro_f1():
    assert micro_f1(np.array([0, 1, 2]), np.array([0, 1, 2])) == 1.0
    assert micro_f1(np.array([0, 0, 1, 1]), np.array([0, 1, 1, 1])) == 0.75
    with pytest.raises(ValueError):
        micro_f1(np.array([]), np.array([]))


def test_macro_f1():
    assert macro_f1(np.array([0, 0, 1, 1]), np.array([0, 1, 1, 1])) == pytest.approx(
        (2 / 3 + 0.8) / 2
    )


def test_model_file_round_trip(tmp_path: Path):
    model = train(two_cliques(), GnnConfig(aggregator=Aggregator.GAT, epochs=5))
    save_model(model, tmp_path / "m.model")
    loaded = load_model(tmp_path / "m.model")
    assert loaded.parameter_hash() == model.parameter_hash()
    assert loaded.loss_trace == model.loss_trace
    assert loaded.config == model.config


def test_load_model_rejects_other_files(tmp_path: Path):
    torch.save({"format": "other"}, tmp_path / "x.model")
    with pytest.raises(ValueError):
        load_model(tmp_path / "x.model")
