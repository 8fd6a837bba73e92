"""Balanced label propagation."""

import logging
from typing import NamedTuple, Optional

import numpy as np

from ..graph import Graph
from .schemas import PartitionConfig, ReassignmentProfile, ShardAssignment
from .strategies import check_capacity, random_partition

logger = logging.getLogger(__name__)


class Move(NamedTuple):
    """One node changing shards during a BLPA pass."""

    iteration: int
    u: int
    src: int
    dst: int
    xi_src: int
    xi_dst: int
    binding: bool  # the source shard was already full when u was placed


def neighbor_counts(g: Graph, shard: np.ndarray, k: int) -> np.ndarray:
    """Returns an ``n x k`` matrix counting each node's neighbors per shard."""

    rows = np.repeat(g.node_ids, g.degrees)
    codes = rows * k + shard[g.indices]
    return np.bincount(codes, minlength=g.n * k).reshape(g.n, k)


def reassignment_profiles(
    g: Graph, shard: np.ndarray, k: int
) -> list[ReassignmentProfile]:
    """Lists every ``(u, src, dst, xi)`` with ``dst != src`` and ``xi >= 1``."""

    counts = neighbor_counts(g, shard, k)
    us, dsts = np.nonzero(counts)
    return [
        ReassignmentProfile(
            u=int(u), src=int(shard[u]), dst=int(d), xi=int(counts[u, d])
        )
        for u, d in zip(us, dsts)
        if d != shard[u]
    ]


def blpa(
    g_train: Graph,
    cfg: PartitionConfig,
    moves: Optional[list[Move]] = None,
    initial: Optional[np.ndarray] = None,
) -> ShardAssignment:
    """
    Partitions a graph by label propagation under a shard-size cap.

    Starting from a random round-robin allocation, every iteration ranks all
    node-shard pairs whose shard holds at least one neighbor of the node by
    neighbor count (descending; ties by node id, then with the node's current
    shard first, then by shard id) and rebuilds the shards greedily along that
    ranking: each node goes to the first shard on its list that still has
    fewer than ``delta`` members. A node therefore moves to a shard holding as
    many of its neighbors as its current one only when its current shard has
    filled up first. Nodes whose listed shards are all full return to their
    previous shard if it has room, else to the emptiest shard. Iteration stops
    after ``max_iterations`` passes or when no node changes shard.

    With ``cfg.blpa_strict_improve`` a node is only ranked into shards holding
    strictly more of its neighbors than its current shard.

    Args:
        g_train: The training graph.
        cfg: The partition settings.
        moves: If given, every accepted move is appended to it.
        initial: A starting assignment replacing the random allocation; it
            must respect the capacity.

    Returns:
        The assignment.

    Raises:
        InfeasiblePartitionError: ``k * delta < n`` or ``k > n``.
        ValueError: ``initial`` does not fit the graph or the capacity.

    """

    n, k = g_train.n, cfg.k
    delta = cfg.delta(n)
    check_capacity(n, k, delta)
    if initial is None:
        shard = np.asarray(random_partition(n, k, cfg.seed).assign, dtype=np.int64)
    else:
        shard = np.asarray(initial, dtype=np.int64)
        if shard.shape != (n,) or np.bincount(shard, minlength=k).max() > delta:
            raise ValueError("initial assignment must cover every node within capacity")

    converged = False
    iteration = 0
    for iteration in range(1, cfg.max_iterations + 1):
        counts = neighbor_counts(g_train, shard, k)
        us, dsts = np.nonzero(counts)
        xis = counts[us, dsts]
        stays = dsts == shard[us]
        if cfg.blpa_strict_improve:
            keep = stays | (xis > counts[us, shard[us]])
            us, dsts, xis, stays = us[keep], dsts[keep], xis[keep], stays[keep]
        order = np.lexsort((dsts, ~stays, us, -xis))

        new_shard = np.full(n, -1, dtype=np.int64)
        sizes = np.zeros(k, dtype=np.int64)
        for idx in order:
            u = us[idx]
            if new_shard[u] >= 0:
                continue
            dst = dsts[idx]
            if sizes[dst] < delta:
                new_shard[u] = dst
                sizes[dst] += 1
                src = shard[u]
                if dst != src and moves is not None:
                    moves.append(
                        Move(
                            iteration,
                            int(u),
                            int(src),
                            int(dst),
                            int(counts[u, src]),
                            int(xis[idx]),
                            bool(sizes[src] >= delta),
                        )
                    )

        for u in np.flatnonzero(new_shard < 0):
            src = shard[u]
            dst = src if sizes[src] < delta else int(np.argmin(sizes))
            new_shard[u] = dst
            sizes[dst] += 1
            if dst != src and moves is not None:
                xi_src, xi_dst = int(counts[u, src]), int(counts[u, dst])
                moves.append(
                    Move(iteration, int(u), int(src), dst, xi_src, xi_dst, True)
                )

        changed = int(np.count_nonzero(new_shard != shard))
        logger.debug("BLPA iteration %d: %d node(s) changed shard", iteration, changed)
        shard = new_shard
        if changed == 0:
            converged = True
            break

    return ShardAssignment(
        k=k,
        delta=delta,
        method="blpa",
        seed=cfg.seed,
        assign=shard.tolist(),
        iterations_run=iteration,
        converged=converged,
    )
