"""Random partitioning and dispatch over the partition strategies."""

import logging
import math
from typing import Optional

import numpy as np

from ..errors import InfeasiblePartitionError
from ..graph import Graph
from .schemas import EmbeddingSet, PartitionConfig, ShardAssignment

logger = logging.getLogger(__name__)


def random_partition(
    train_nodes: int | np.ndarray, k: int, seed: int
) -> ShardAssignment:
    """
    Shuffles the training nodes and deals them round-robin into ``k`` shards.

    Args:
        train_nodes: The training node ids, or their count.
        k: The shard count.
        seed: The shuffle seed.

    Returns:
        An assignment whose shard sizes differ by at most one, with
        ``delta = ceil(n / k)``.

    Raises:
        InfeasiblePartitionError: There are fewer nodes than shards.

    """

    n = train_nodes if isinstance(train_nodes, int) else len(np.unique(train_nodes))
    if k > n:
        raise InfeasiblePartitionError(f"cannot deal {n} nodes into {k} shards")
    rng = np.random.default_rng(seed)
    assign = np.empty(n, dtype=np.int64)
    assign[rng.permutation(n)] = np.arange(n) % k
    return ShardAssignment(
        k=k,
        delta=max(1, math.ceil(n / k)),
        method="random",
        seed=seed,
        assign=assign.tolist(),
        iterations_run=1,
        converged=True,
    )


def partition(
    g_train: Graph,
    embeddings: Optional[EmbeddingSet],
    cfg: PartitionConfig,
) -> ShardAssignment:
    """
    Partitions the training graph with the strategy named by ``cfg.method``.

    Args:
        g_train: The training graph.
        embeddings: Node embeddings aligned with ``g_train``; required for BEKM.
            When omitted BEKM clusters the raw features.
        cfg: The partition settings.

    Returns:
        The shard assignment.

    """

    from .bekm import bekm
    from .blpa import blpa

    if cfg.method == "random":
        assignment = random_partition(g_train.n, cfg.k, cfg.seed)
    elif cfg.method == "blpa":
        assignment = blpa(g_train, cfg)
    else:
        if embeddings is None:
            logger.warning("bekm got no embeddings; clustering raw node features")
            embeddings = EmbeddingSet(embeddings=g_train.x)
        assignment = bekm(embeddings, cfg)
    logger.info(
        "%s partition: %d shards, sizes %d..%d (delta %d), %d iteration(s)",
        cfg.method,
        assignment.k,
        assignment.sizes().min(),
        assignment.sizes().max(),
        assignment.delta,
        assignment.iterations_run,
    )
    return assignment


def check_capacity(n: int, k: int, delta: int) -> None:
    """
    Raises:
        InfeasiblePartitionError: ``k`` shards of ``delta`` nodes cannot hold
            ``n`` nodes, or there are more shards than nodes.

    """

    if k > n:
        raise InfeasiblePartitionError(f"cannot split {n} nodes into {k} shards")
    if k * delta < n:
        raise InfeasiblePartitionError(
            f"{k} shards of at most {delta} nodes cannot hold {n} nodes"
        )
