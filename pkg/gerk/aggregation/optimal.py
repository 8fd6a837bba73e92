"""Learning importance scores for the shard models."""

import logging
from typing import Callable, Optional, Sequence

import numpy as np
import torch

from ..gnn import GnnModel, forward
from ..graph import Graph
from .schemas import SUM_TOLERANCE, ImportanceScores, OptAggrConfig, ShardPosteriors

logger = logging.getLogger(__name__)

PosteriorFn = Callable[[np.ndarray], ShardPosteriors]
EpochCallback = Callable[[int, np.ndarray], None]


def sample_score_nodes(n_train: int, subset_frac: float, seed: int) -> np.ndarray:
    """Draws the sorted positions of the training nodes used to fit scores."""

    size = min(n_train, max(1, int(round(subset_frac * n_train))))
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(n_train, size=size, replace=False))


def fit_scores(
    sp: ShardPosteriors,
    labels: np.ndarray,
    cfg: OptAggrConfig,
    score_train_nodes: Sequence[int] = (),
    callback: Optional[EpochCallback] = None,
) -> ImportanceScores:
    """
    Fits importance scores to fixed shard posteriors by gradient descent.

    The scores are the softmax of unconstrained pre-scores that start at zero.
    Every epoch evaluates the mean cross-entropy of the weighted posterior plus
    the l1 penalty, takes a gradient step on the pre-scores and, unless
    ``cfg.clamp`` is off, clamps negative pre-scores to zero.

    Args:
        sp: Shard posteriors over the score-training nodes.
        labels: The true label of every score-training node.
        cfg: The optimization settings.
        score_train_nodes: Root ids recorded in the result.
        callback: Called after every epoch with the epoch index and the scores
            that enter the next epoch.

    Returns:
        The fitted scores with their loss trace.

    Raises:
        RuntimeError: The scores left the probability simplex.

    """

    probabilities = torch.from_numpy(
        np.ascontiguousarray(sp.probabilities, dtype=np.float64)
    )
    index = torch.from_numpy(np.asarray(labels, dtype=np.int64))
    # (shards, queries) probability each shard assigns to the true class
    truth = probabilities.gather(2, index.view(1, -1, 1).expand(sp.m, -1, 1))
    truth = truth.squeeze(-1)

    theta = torch.zeros(sp.m, dtype=torch.float64, requires_grad=True)
    trace = []
    for epoch in range(cfg.epochs):
        alpha = torch.softmax(theta, dim=0)
        likelihood = (alpha[:, None] * truth).sum(dim=0).clamp_min(1e-12)
        loss = -likelihood.log().mean() + cfg.lam * alpha.abs().sum()
        (grad,) = torch.autograd.grad(loss, theta)
        with torch.no_grad():
            theta -= cfg.learning_rate * grad
            if cfg.clamp:
                theta.clamp_(min=0.0)
        trace.append(float(loss.detach()))

        current = torch.softmax(theta.detach(), dim=0).numpy()
        if current.min() < 0.0 or abs(current.sum() - 1.0) > SUM_TOLERANCE:
            raise RuntimeError(f"importance scores left the simplex at epoch {epoch}")
        if callback is not None:
            callback(epoch, current)
        logger.debug("opt-aggr epoch %d loss %.6f", epoch, trace[-1])

    alpha_final = torch.softmax(theta.detach(), dim=0).numpy()
    return ImportanceScores(
        alpha=[float(a) for a in alpha_final / alpha_final.sum()],
        lam=cfg.lam,
        subset_frac=cfg.subset_frac,
        score_train_nodes=[int(u) for u in score_train_nodes],
        seed=cfg.seed,
        epochs_run=cfg.epochs,
        loss_trace=trace,
    )


def opt_aggr_train(
    shard_models: Sequence[GnnModel],
    g_train: Graph,
    cfg: OptAggrConfig,
    posteriors: Optional[PosteriorFn] = None,
    callback: Optional[EpochCallback] = None,
) -> ImportanceScores:
    """
    Samples score-training nodes and fits importance scores on them.

    Shard posteriors over the sampled nodes are computed once; the shard
    models stay fixed.

    Args:
        shard_models: One model per shard.
        g_train: The training graph the nodes are sampled from.
        cfg: The optimization settings.
        posteriors: Maps node positions of ``g_train`` to the shard posteriors
            over them. Defaults to running every model on all of ``g_train``.
        callback: See `fit_scores`.

    Returns:
        The fitted scores.

    Raises:
        ValueError: There are no shard models or no training nodes.

    """

    if not shard_models:
        raise ValueError("at least one shard model is required")
    if g_train.n == 0:
        raise ValueError("cannot fit importance scores without training nodes")
    nodes = sample_score_nodes(g_train.n, cfg.subset_frac, cfg.seed)
    if posteriors is None:
        sp = ShardPosteriors.stack(
            [forward(model, g_train, nodes) for model in shard_models]
        )
    else:
        sp = posteriors(nodes)
    scores = fit_scores(sp, g_train.y[nodes], cfg, g_train.origin[nodes], callback)
    logger.info(
        "fit importance scores on %d nodes, loss %.4f -> %.4f",
        len(nodes),
        scores.loss_trace[0],
        scores.loss_trace[-1],
    )
    return scores
