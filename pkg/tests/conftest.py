"""Shared fixtures for the gerk tests."""

from itertools import combinations

import numpy as np
import pytest

from gerk import EraserConfig, GnnConfig, Graph, OptAggrConfig, PartitionConfig
from gerk.graph import SbmSpec, generate_sbm, split_train_test


def pytest_addoption(parser: pytest.Parser) -> None:
    parser.addoption(
        "--runslow", action="store_true", default=False, help="run slow tests"
    )


def pytest_collection_modifyitems(
    config: pytest.Config, items: list[pytest.Item]
) -> None:
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


def make_graph(
    n: int, edges: list[tuple[int, int]], feature_dim: int = 2, seed: int = 0
) -> Graph:
    rng = np.random.default_rng(seed)
    return Graph.from_edges(
        rng.normal(size=(n, feature_dim)), np.arange(n) % 2, edges, num_classes=2
    )


def clique_edges(nodes: range) -> list[tuple[int, int]]:
    return list(combinations(nodes, 2))


@pytest.fixture
def path3() -> Graph:
    return make_graph(3, [(0, 1), (1, 2)])


@pytest.fixture
def triangle() -> Graph:
    return make_graph(3, [(0, 1), (1, 2), (0, 2)])


@pytest.fixture
def k4() -> Graph:
    return make_graph(4, clique_edges(range(4)))


@pytest.fixture
def two_k5() -> Graph:
    edges = clique_edges(range(5)) + clique_edges(range(5, 10))
    return Graph.from_edges(
        np.zeros((10, 2)), [0] * 5 + [1] * 5, edges, num_classes=2
    )


@pytest.fixture
def small_sbm() -> Graph:
    return generate_sbm(
        SbmSpec(blocks=[30, 30], p_in=0.3, p_out=0.02, feature_dim=4, seed=3)
    )


@pytest.fixture
def fast_gnn() -> GnnConfig:
    return GnnConfig(hidden_dim=8, epochs=20)


@pytest.fixture
def eraser_config(fast_gnn: GnnConfig) -> EraserConfig:
    return EraserConfig(
        partition=PartitionConfig(method="random", k=3, seed=1),
        gnn=fast_gnn,
        aggregation=OptAggrConfig(epochs=20, subset_frac=0.2),
        workers=1,
    )


@pytest.fixture
def sbm_split(small_sbm: Graph):
    return split_train_test(small_sbm, 0.8, seed=0)
