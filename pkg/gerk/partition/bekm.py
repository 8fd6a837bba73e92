"""Balanced embedding k-means."""

import logging

import numpy as np
from scipy.spatial.distance import cdist
from sklearn.cluster import kmeans_plusplus

from .schemas import EmbeddingSet, PartitionConfig, ShardAssignment
from .strategies import check_capacity

logger = logging.getLogger(__name__)


def greedy_assign(distances: np.ndarray, delta: int) -> np.ndarray:
    """
    Assigns nodes to centroids along ascending node-centroid distance.

    Each node takes the closest centroid whose shard still has fewer than
    ``delta`` members. Ties are ordered by node id, then shard id.

    Args:
        distances: An ``n x k`` distance matrix.
        delta: The shard capacity.

    Returns:
        The shard of every node.

    """

    n, k = distances.shape
    nodes, shards = np.divmod(np.arange(n * k), k)
    order = np.lexsort((shards, nodes, distances.ravel()))
    shard = np.full(n, -1, dtype=np.int64)
    sizes = np.zeros(k, dtype=np.int64)
    remaining = n
    for idx in order:
        u = nodes[idx]
        if shard[u] >= 0:
            continue
        j = shards[idx]
        if sizes[j] < delta:
            shard[u] = j
            sizes[j] += 1
            remaining -= 1
            if remaining == 0:
                break
    return shard


def seed_centroids(data: np.ndarray, k: int, seed: int) -> np.ndarray:
    """
    Picks ``k`` member embeddings as initial centroids with k-means++.

    No two centroids share a row value while the data holds at least ``k``
    distinct rows; repeated picks are swapped for unused distinct rows drawn
    uniformly with the same seed.
    """

    centroids, picked = kmeans_plusplus(data, n_clusters=k, random_state=seed)
    _, first = np.unique(centroids, axis=0, return_index=True)
    if first.size == k:
        return centroids
    _, distinct = np.unique(data, axis=0, return_index=True)
    if distinct.size < k:
        logger.warning(
            "BEKM: only %d distinct embeddings for %d centroids", distinct.size, k
        )
        return centroids
    keep = np.sort(first)
    taken = {data[i].tobytes() for i in picked[keep]}
    unused = [i for i in np.sort(distinct) if data[i].tobytes() not in taken]
    rng = np.random.default_rng(seed)
    extra = rng.choice(unused, size=k - keep.size, replace=False)
    return np.concatenate([centroids[keep], data[np.sort(extra)]])


def bekm(emb: EmbeddingSet, cfg: PartitionConfig) -> ShardAssignment:
    """
    Clusters node embeddings into ``k`` shards of at most ``delta`` nodes.

    Centroids are seeded at distinct member embeddings by `seed_centroids`.
    Each iteration assigns nodes greedily by ascending distance to the current
    centroids (`greedy_assign`) and moves every centroid to the mean of its
    members. An empty shard is re-seeded at the member farthest from its
    centroid. The loop stops after ``max_iterations`` or once no centroid moves
    more than ``bekm_tol``.

    Args:
        emb: Embeddings aligned with the training nodes.
        cfg: The partition settings.

    Returns:
        The assignment from the last greedy pass.

    Raises:
        InfeasiblePartitionError: ``k * delta < n`` or ``k > n``.

    """

    data = np.asarray(emb.embeddings, dtype=np.float64)
    n, k = emb.n, cfg.k
    delta = cfg.delta(n)
    check_capacity(n, k, delta)

    centroids = seed_centroids(data, k, cfg.seed)
    shard = np.zeros(n, dtype=np.int64)
    converged = False
    repairs = 0
    iteration = 0
    for iteration in range(1, cfg.max_iterations + 1):
        distances = cdist(data, centroids)
        shard = greedy_assign(distances, delta)

        updated = np.empty_like(centroids)
        own = distances[np.arange(n), shard]
        for j in range(k):
            members = shard == j
            if np.any(members):
                updated[j] = data[members].mean(axis=0)
            else:
                far = int(np.argmax(own))
                updated[j] = data[far]
                own[far] = -np.inf
                repairs += 1
                logger.warning("BEKM shard %d empty; re-seeded at node %d", j, far)

        displacement = float(np.max(np.linalg.norm(updated - centroids, axis=1)))
        centroids = updated
        logger.debug(
            "BEKM iteration %d: max displacement %.3g", iteration, displacement
        )
        if displacement <= cfg.bekm_tol:
            converged = True
            break

    return ShardAssignment(
        k=k,
        delta=delta,
        method="bekm",
        seed=cfg.seed,
        assign=shard.tolist(),
        iterations_run=iteration,
        converged=converged,
        repairs=repairs,
    )
