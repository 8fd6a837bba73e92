import numpy as np

from .schemas import ImportanceScores, ShardPosteriors


def _weighted_sum(weights: np.ndarray, sp: ShardPosteriors) -> np.ndarray:
    return np.tensordot(weights, sp.probabilities, axes=1)


def mean_aggr(sp: ShardPosteriors) -> np.ndarray:
    """Averages the shard posteriors; the result is row-stochastic."""

    return _weighted_sum(np.full(sp.m, 1.0 / sp.m), sp)


def maj_aggr(sp: ShardPosteriors) -> np.ndarray:
    """
    Majority vote over the per-shard predicted labels.

    Ties go to the smallest class id.

    Returns:
        One label per query node.

    """

    num_classes = sp.probabilities.shape[-1]
    votes = np.eye(num_classes, dtype=np.int64)[sp.probabilities.argmax(axis=-1)]
    return votes.sum(axis=0).argmax(axis=-1)


def weighted_predict(sp: ShardPosteriors, scores: ImportanceScores) -> np.ndarray:
    """
    Labels from the importance-weighted sum of shard posteriors.

    Ties go to the smallest class id.

    Raises:
        ValueError: The number of scores differs from the number of shards.

    """

    if scores.m != sp.m:
        raise ValueError(f"{scores.m} importance scores for {sp.m} shards")
    return _weighted_sum(np.asarray(scores.alpha, dtype=np.float64), sp).argmax(axis=-1)
