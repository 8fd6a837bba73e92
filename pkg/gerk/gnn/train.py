"""Training and gradients for the GNN and MLP classifiers."""

import logging
from typing import Callable, Iterable

import numpy as np
import torch
import torch.nn.functional as F
from torch import Tensor, nn

from ..errors import EmptyGraphError
from ..graph import Graph
from ..partition import EmbeddingSet
from .config import GnnConfig
from .metrics import Average, f1_score
from .model import GnnModel, MlpModel, graph_inputs

logger = logging.getLogger(__name__)


def _labels(g: Graph) -> Tensor:
    return torch.from_numpy(g.y.astype(np.int64))


def _fit(
    model: nn.Module,
    loss_fn: Callable[[], Tensor],
    epochs: int,
    learning_rate: float,
    weight_decay: float,
    optimizer_name: str = "sgd",
    max_grad_norm: float | None = None,
) -> list[float]:
    optimizer: torch.optim.Optimizer
    if optimizer_name == "adam":
        optimizer = torch.optim.AdamW(
            model.parameters(), lr=learning_rate, weight_decay=weight_decay
        )
    else:
        optimizer = torch.optim.SGD(
            model.parameters(), lr=learning_rate, weight_decay=weight_decay
        )
    trace = []
    for _ in range(epochs):
        optimizer.zero_grad()
        loss = loss_fn()
        loss.backward()
        if max_grad_norm is not None:
            nn.utils.clip_grad_norm_(model.parameters(), max_grad_norm)
        optimizer.step()
        trace.append(float(loss.detach()))
    return trace


def train(g_train: Graph, cfg: GnnConfig) -> GnnModel:
    """
    Trains a GNN on every node of a graph by full-batch gradient descent.

    The loss is the mean cross-entropy over all nodes. Parameter
    initialization draws only from a generator seeded with ``cfg.seed``, so the
    same graph and config always give the same parameters.

    Args:
        g_train: The training graph.
        cfg: The model settings.

    Returns:
        The trained model, with its per-epoch loss in ``loss_trace``.

    Raises:
        EmptyGraphError: The graph has no nodes.

    """

    if g_train.n == 0:
        raise EmptyGraphError("cannot train on an empty graph")
    generator = torch.Generator().manual_seed(cfg.seed)
    model = GnnModel(cfg, g_train.feature_dim, g_train.num_classes, generator)
    x, gt = graph_inputs(g_train)
    y = _labels(g_train)

    def loss_fn() -> Tensor:
        return F.cross_entropy(model.logits(x, gt), y)

    model.loss_trace = _fit(
        model,
        loss_fn,
        cfg.epochs,
        cfg.learning_rate,
        cfg.weight_decay,
        cfg.optimizer,
        cfg.max_grad_norm,
    )
    logger.debug(
        "trained %s/%s on %d nodes, loss %.4f -> %.4f",
        cfg.aggregator.value,
        cfg.updater.value,
        g_train.n,
        model.loss_trace[0],
        model.loss_trace[-1],
    )
    return model


def gradient(
    model: GnnModel, g_train: Graph, batch: Iterable[int]
) -> dict[str, Tensor]:
    """
    Computes the exact gradient of the mean cross-entropy over a batch.

    Args:
        model: The model; its parameters are not modified.
        g_train: The graph the model reads.
        batch: Node ids; repeated ids count once per occurrence.

    Returns:
        The gradient of every named parameter.

    """

    x, gt = graph_inputs(g_train)
    index = torch.as_tensor(list(batch), dtype=torch.long)
    y = _labels(g_train)[index]
    names, params = zip(*model.named_parameters())
    loss = F.cross_entropy(model.logits(x, gt)[index], y)
    grads = torch.autograd.grad(loss, params, allow_unused=True)
    return {
        name: torch.zeros_like(param) if grad is None else grad
        for name, param, grad in zip(names, params, grads)
    }


def node_embeddings(g_train: Graph, cfg: GnnConfig) -> EmbeddingSet:
    """
    Trains a GNN on the graph and returns its pre-classifier embeddings.

    Returns:
        One embedding row per node of ``g_train``.

    """

    model = train(g_train, cfg)
    x, gt = graph_inputs(g_train)
    with torch.no_grad():
        embeddings = model.embed(x, gt).numpy()
    return EmbeddingSet(embeddings=embeddings)


def train_mlp(
    g_train: Graph,
    epochs: int = 100,
    lr: float = 0.5,
    seed: int = 0,
    hidden_dim: int = 32,
    weight_decay: float = 5e-4,
    max_grad_norm: float | None = 1.0,
) -> MlpModel:
    """
    Trains a feature-only classifier, ignoring every edge.

    Raises:
        EmptyGraphError: The graph has no nodes.

    """

    if g_train.n == 0:
        raise EmptyGraphError("cannot train on an empty graph")
    generator = torch.Generator().manual_seed(seed)
    model = MlpModel(g_train.feature_dim, hidden_dim, g_train.num_classes, generator)
    x = torch.from_numpy(np.ascontiguousarray(g_train.x, dtype=np.float64))
    y = _labels(g_train)
    model.loss_trace = _fit(
        model,
        lambda: F.cross_entropy(model.logits(x), y),
        epochs,
        lr,
        weight_decay,
        max_grad_norm=max_grad_norm,
    )
    return model


def mlp_f1(
    model: MlpModel, g: Graph, nodes: Iterable[int], average: Average = "micro"
) -> float:
    """Scores the MLP on the given nodes of ``g``."""

    index = np.asarray(list(nodes), dtype=np.int64)
    x = torch.from_numpy(np.ascontiguousarray(g.x[index], dtype=np.float64))
    with torch.no_grad():
        predictions = model(x).argmax(dim=-1).numpy()
    return f1_score(predictions, g.y[index], average)
