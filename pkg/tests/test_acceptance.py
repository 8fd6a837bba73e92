"""
End-to-end checks on mid-sized block-model graphs.

These take minutes; run them with ``pytest --runslow``. The trend margins
(0.01, 0.02, 0.05) are fixed harness constants.
"""

from pathlib import Path

import numpy as np
import pytest

from gerk.bench import (
    BenchConfig,
    DatasetSource,
    cmd_bench_unlearn,
    cmd_compare_aggregators,
    cmd_eval_utility,
    cmd_guideline,
    cmd_sweep_requests,
)
from gerk.gnn import Aggregator, GnnConfig, train
from gerk.graph import (
    SbmSpec,
    delete_node,
    generate_sbm,
    induced_subgraph,
    split_train_test,
)
from gerk.partition import PartitionConfig
from gerk.unlearn import EraserConfig, UnlearnRequest, audit, build, unlearn

pytestmark = pytest.mark.slow

UTILITY_SBM = SbmSpec(
    blocks=[500] * 4,
    p_in=0.02,
    p_out=0.001,
    feature_dim=16,
    feature_noise=1.0,
    centroid_scale=0.3,
)


def utility_config(tmp_path: Path, **fields: object) -> BenchConfig:
    values: dict = {
        "dataset": DatasetSource(sbm=UTILITY_SBM),
        "methods": ["random", "blpa", "bekm"],
        "k": 10,
        "gnn": GnnConfig(epochs=100),
        "repetitions": 10,
        "workers": 2,
        "output": str(tmp_path),
    }
    values.update(fields)
    return BenchConfig(**values)


@pytest.mark.parametrize("aggregator", list(Aggregator))
def test_unlearning_matches_retraining(aggregator: Aggregator):
    g = generate_sbm(
        SbmSpec(blocks=[250] * 4, p_in=0.04, p_out=0.002, feature_dim=8, seed=1)
    )
    split = split_train_test(g, 0.8, seed=1)
    gnn = GnnConfig(aggregator=aggregator, epochs=30)
    state = build(
        g,
        split,
        EraserConfig(
            partition=PartitionConfig(method="blpa", k=10, seed=1),
            gnn=gnn,
            fit_scores=False,
        ),
    )
    rng = np.random.default_rng(list(Aggregator).index(aggregator))
    for root in rng.choice(state.g_train.origin, size=13, replace=False):
        shard = state.shard_of_root(int(root))
        members = [r for r in state.shard_graphs[shard].origin if r != root]
        position = int(state.g_train.index_of([root])[0])
        reduced, _ = delete_node(state.g_train, position)
        scratch_graph, _ = induced_subgraph(reduced, reduced.index_of(members))
        shard_gnn = gnn.model_copy(update={"seed": gnn.seed + shard})
        scratch = train(scratch_graph, shard_gnn)

        state, report = unlearn(state, UnlearnRequest(kind="node", u=int(root)))
        assert report.affected_shard == shard
        record = state.shard_models[shard]
        assert record.model.parameter_hash() == scratch.parameter_hash()
    assert audit(state).passed


def test_unlearning_beats_scratch(tmp_path: Path):
    cfg = BenchConfig(
        dataset=DatasetSource(
            sbm=SbmSpec(blocks=[1250] * 4, p_in=0.008, p_out=0.0005, seed=5)
        ),
        methods=["blpa"],
        k=20,
        gnn=GnnConfig(aggregator=Aggregator.SAGE, epochs=100),
        modes=["mean"],
        n_requests=20,
        scratch_sample=5,
        repetitions=1,
        output=str(tmp_path),
    )
    row = cmd_bench_unlearn(cfg, quiet=True).result("blpa")
    assert row.scratch_extrapolated
    assert row.speedup is not None
    assert row.speedup > 3.0


def test_structure_aware_partitions_keep_utility(tmp_path: Path):
    report = cmd_eval_utility(utility_config(tmp_path), quiet=True)
    f1 = {r.method: np.array(r.f1_values) for r in report.results}
    assert f1["scratch"].mean() >= f1["blpa"].mean()
    assert f1["scratch"].mean() >= f1["bekm"].mean()
    assert f1["blpa"].mean() >= f1["random"].mean() - 0.02
    assert f1["bekm"].mean() >= f1["random"].mean() - 0.02
    wins = np.maximum(f1["blpa"], f1["bekm"]) > f1["random"]
    assert np.count_nonzero(wins) >= 7


def test_learned_scores_hold_up(tmp_path: Path):
    report = cmd_compare_aggregators(utility_config(tmp_path), quiet=True)
    mean_f1 = {
        mode: np.mean([r.f1_mean for r in report.results if r.mode == mode])
        for mode in ("mean", "majority", "optimal")
    }
    assert mean_f1["optimal"] >= mean_f1["majority"] - 0.01
    assert mean_f1["optimal"] >= mean_f1["mean"] - 0.01


def test_removing_nodes_barely_moves_f1(tmp_path: Path):
    cfg = utility_config(
        tmp_path, methods=["blpa"], repetitions=5, request_counts=[0, 80]
    )
    report = cmd_sweep_requests(cfg, quiet=True)
    before = report.result("blpa", param=0).f1_mean
    after = report.result("blpa", param=80).f1_mean
    assert abs(after - before) <= 0.05


@pytest.mark.parametrize(
    "spec,expected",
    [
        (
            SbmSpec(
                blocks=[100] * 4,
                p_in=0.02,
                p_out=0.02,
                feature_noise=0.3,
                centroid_scale=3.0,
            ),
            {"random"},
        ),
        (
            SbmSpec(
                blocks=[100] * 4,
                p_in=0.1,
                p_out=0.005,
                feature_noise=1.0,
                centroid_scale=0.0,
            ),
            {"blpa", "bekm"},
        ),
    ],
)
def test_guideline_regimes(tmp_path: Path, spec: SbmSpec, expected: set[str]):
    for seed in range(5):
        cfg = BenchConfig(
            dataset=DatasetSource(sbm=spec),
            repetitions=1,
            seed=seed,
            output=str(tmp_path),
        )
        report = cmd_guideline(cfg, quiet=True)
        assert report.recommendation is not None
        assert report.recommendation["recommendation"] in expected
