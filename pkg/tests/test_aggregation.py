"""Tests for mean, majority and importance-weighted aggregation."""

from pathlib import Path

import numpy as np
import pytest

from gerk.aggregation import (
    ImportanceScores,
    OptAggrConfig,
    ShardPosteriors,
    fit_scores,
    maj_aggr,
    mean_aggr,
    opt_aggr_train,
    sample_score_nodes,
    weighted_predict,
)
from gerk.gnn import GnnConfig, GnnModel
from gerk.graph import SbmSpec, generate_sbm


def random_posteriors(
    rng: np.random.Generator, m: int, q: int, c: int
) -> ShardPosteriors:
    return ShardPosteriors(probabilities=rng.dirichlet(np.ones(c), size=(m, q)))


def scores(alpha: list[float]) -> ImportanceScores:
    return ImportanceScores(
        alpha=alpha,
        lam=0.0,
        subset_frac=0.1,
        score_train_nodes=[],
        seed=0,
        epochs_run=0,
    )


def planted(
    seed: int, m: int = 3, q: int = 40, c: int = 4
) -> tuple[ShardPosteriors, np.ndarray]:
    """Shard 0 is one-hot on the truth; the others are uniform."""

    labels = np.random.default_rng(seed).integers(0, c, size=q)
    probabilities = np.full((m, q, c), 1.0 / c)
    probabilities[0] = np.eye(c)[labels]
    return ShardPosteriors(probabilities=probabilities), labels


def test_mean_aggr_example():
    sp = ShardPosteriors.stack([np.array([[0.6, 0.4]]), np.array([[0.2, 0.8]])])
    assert mean_aggr(sp).tolist() == pytest.approx([[0.4, 0.6]])


def test_mean_aggr_identical_matrices():
    matrix = np.random.default_rng(0).dirichlet(np.ones(3), size=5)
    assert np.allclose(mean_aggr(ShardPosteriors.stack([matrix] * 4)), matrix)


def test_mean_aggr_rows_stochastic():
    sp = random_posteriors(np.random.default_rng(1), 6, 30, 5)
    assert np.allclose(mean_aggr(sp).sum(axis=1), 1.0)


@pytest.mark.parametrize(
    "argmaxes,expected",
    [([0, 0, 1], 0), ([1, 0], 0), ([2, 1, 2, 1], 1), ([3], 3)],
)
def test_maj_aggr_votes(argmaxes: list[int], expected: int):
    sp = ShardPosteriors.stack([np.eye(4)[[a]] * 0.7 + 0.075 for a in argmaxes])
    assert maj_aggr(sp).tolist() == [expected]


def test_aggregators_match_oracles():
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        m = int(rng.integers(2, 11))
        c = int(rng.integers(2, 8))
        sp = random_posteriors(rng, m, 5, c)
        votes = sp.probabilities.argmax(axis=-1)
        expected = [
            max(range(c), key=lambda label: (np.sum(votes[:, j] == label), -label))
            for j in range(5)
        ]
        assert maj_aggr(sp).tolist() == expected
        uniform = weighted_predict(sp, ImportanceScores.uniform(m))
        assert np.array_equal(uniform, mean_aggr(sp).argmax(axis=-1))


def test_weighted_predict_one_hot_scores():
    sp = random_posteriors(np.random.default_rng(3), 4, 20, 3)
    alpha = [0.0, 0.0, 1.0, 0.0]
    assert np.array_equal(
        weighted_predict(sp, scores(alpha)), sp.probabilities[2].argmax(axis=-1)
    )


def test_weighted_predict_scale_invariance():
    sp = random_posteriors(np.random.default_rng(4), 3, 20, 3)
    alpha = np.array([0.2, 0.5, 0.3])
    weighted = np.tensordot(alpha * 7.0, sp.probabilities, axes=1).argmax(axis=-1)
    assert np.array_equal(weighted_predict(sp, scores(alpha.tolist())), weighted)


def test_shard_permutation_covariance():
    sp = random_posteriors(np.random.default_rng(5), 4, 25, 3)
    alpha = np.array([0.1, 0.4, 0.2, 0.3])
    perm = [2, 0, 3, 1]
    permuted = ShardPosteriors(probabilities=sp.probabilities[perm])
    assert np.array_equal(maj_aggr(permuted), maj_aggr(sp))
    assert np.array_equal(
        weighted_predict(permuted, scores(alpha[perm].tolist())),
        weighted_predict(sp, scores(alpha.tolist())),
    )


def test_weighted_predict_rejects_score_count():
    sp = random_posteriors(np.random.default_rng(6), 3, 2, 2)
    with pytest.raises(ValueError):
        weighted_predict(sp, ImportanceScores.uniform(2))


@pytest.mark.parametrize("alpha", [[], [0.5, 0.6], [1.2, -0.2]])
def test_importance_scores_validate_simplex(alpha: list[float]):
    with pytest.raises(ValueError):
        scores(alpha)


def test_posteriors_validate_rows():
    with pytest.raises(ValueError):
        ShardPosteriors(probabilities=np.full((2, 3, 2), 0.4))
    with pytest.raises(ValueError):
        ShardPosteriors.stack([np.full((2, 2), 0.5), np.full((3, 2), 0.5)])


def test_scores_start_uniform():
    sp, labels = planted(0)
    seen: list[np.ndarray] = []
    cfg = OptAggrConfig(epochs=1, learning_rate=1e-9)
    fit_scores(sp, labels, cfg, callback=lambda _, alpha: seen.append(alpha))
    assert np.allclose(seen[0], 1.0 / 3.0, atol=1e-6)


@pytest.mark.parametrize("clamp", [True, False])
def test_scores_stay_on_simplex_every_epoch(clamp: bool):
    sp = random_posteriors(np.random.default_rng(7), 5, 30, 4)
    labels = np.random.default_rng(8).integers(0, 4, size=30)
    epochs: list[int] = []

    def check(epoch: int, alpha: np.ndarray) -> None:
        assert alpha.min() >= 0.0
        assert abs(alpha.sum() - 1.0) <= 1e-6
        epochs.append(epoch)

    cfg = OptAggrConfig(epochs=50, clamp=clamp)
    result = fit_scores(sp, labels, cfg, callback=check)
    assert epochs == list(range(50))
    assert len(result.loss_trace) == 50
    assert result.epochs_run == 50


def test_accurate_shard_gets_largest_score():
    wins = 0
    for seed in range(10):
        sp, labels = planted(seed)
        alpha = fit_scores(sp, labels, OptAggrConfig(seed=seed)).alpha
        wins += alpha[0] > max(alpha[1:])
    assert wins >= 9


def test_loss_decreases_on_tiny_instance():
    rng = np.random.default_rng(11)
    sp = random_posteriors(rng, 2, 20, 3)
    labels = rng.integers(0, 3, size=20)
    cfg = OptAggrConfig(learning_rate=0.05, epochs=200)
    trace = fit_scores(sp, labels, cfg).loss_trace
    assert trace[-1] <= trace[0]


def test_fit_scores_determinism():
    sp, labels = planted(3)
    cfg = OptAggrConfig(epochs=30)
    assert fit_scores(sp, labels, cfg) == fit_scores(sp, labels, cfg)


def test_sample_score_nodes():
    nodes = sample_score_nodes(100, 0.1, seed=0)
    assert len(nodes) == 10
    assert np.array_equal(nodes, np.sort(nodes))
    assert len(set(nodes.tolist())) == 10
    assert len(sample_score_nodes(5, 0.01, seed=0)) == 1
    assert np.array_equal(nodes, sample_score_nodes(100, 0.1, seed=0))


def test_opt_aggr_train_records_roots():
    g = generate_sbm(SbmSpec(blocks=[10, 10], p_in=0.5, p_out=0.1, feature_dim=3))
    models = [GnnModel(GnnConfig(hidden_dim=4), 3, 2) for _ in range(2)]
    result = opt_aggr_train(models, g, OptAggrConfig(epochs=5, subset_frac=0.25))
    assert len(result.score_train_nodes) == 5
    assert set(result.score_train_nodes) <= set(g.origin.tolist())
    assert result.m == 2


def test_opt_aggr_train_uses_given_posteriors():
    g = generate_sbm(SbmSpec(blocks=[10, 10], p_in=0.5, p_out=0.1, feature_dim=3))
    calls: list[np.ndarray] = []

    def posteriors(nodes: np.ndarray) -> ShardPosteriors:
        calls.append(nodes)
        return ShardPosteriors(probabilities=np.full((3, len(nodes), 2), 0.5))

    models = [GnnModel(GnnConfig(hidden_dim=4), 3, 2) for _ in range(3)]
    result = opt_aggr_train(models, g, OptAggrConfig(epochs=3), posteriors=posteriors)
    assert len(calls) == 1
    assert result.alpha == pytest.approx([1 / 3] * 3)


def test_opt_aggr_train_needs_models():
    g = generate_sbm(SbmSpec(blocks=[4], p_in=0.5, p_out=0.1))
    with pytest.raises(ValueError):
        opt_aggr_train([], g, OptAggrConfig())


def test_scores_file_round_trip(tmp_path: Path):
    sp, labels = planted(1)
    result = fit_scores(sp, labels, OptAggrConfig(epochs=5, lam=0.01), [4, 9])
    result.save(tmp_path / "scores.json")
    text = (tmp_path / "scores.json").read_text()
    assert '"lambda": 0.01' in text
    assert ImportanceScores.load(tmp_path / "scores.json") == result
