"""Message passing: the four aggregators, the three updaters, and a layer."""

import math
from typing import Optional

import numpy as np
import torch
import torch.nn.functional as F
from pydantic import BaseModel, ConfigDict
from torch import Tensor, nn

from ..graph import Graph
from .config import Aggregator, Updater

DTYPE = torch.float64
LEAKY_SLOPE = 0.2


class GraphTensors(BaseModel):
    """The directed edge list of an undirected graph, ready for scatter ops."""

    n: int
    src: Tensor
    dst: Tensor
    degree: Tensor

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    @classmethod
    def from_graph(cls, g: Graph) -> "GraphTensors":
        edge_index = torch.from_numpy(np.ascontiguousarray(g.edge_index()))
        return cls(
            n=g.n,
            src=edge_index[0],
            dst=edge_index[1],
            degree=torch.from_numpy(g.degrees.astype(np.float64)),
        )


def glorot(shape: tuple[int, ...], generator: Optional[torch.Generator]) -> Tensor:
    fan_out = shape[0]
    fan_in = shape[1] if len(shape) > 1 else 1
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return (torch.rand(shape, generator=generator, dtype=DTYPE) * 2.0 - 1.0) * bound


def gat_attention(
    embeddings: Tensor,
    gt: GraphTensors,
    w_att: Tensor,
    att: Tensor,
    leaky: bool = False,
) -> Tensor:
    """
    Computes the attention weight of every directed edge ``(v -> u)``.

    ``alpha[u, v] = exp(a . [W E_u || W E_v]) / sum over v' in N(u)``.

    Returns:
        One weight per edge, aligned with ``gt.src``/``gt.dst``.

    """

    projected = embeddings @ w_att.T
    width = projected.shape[1]
    logits = projected[gt.dst] @ att[:width] + projected[gt.src] @ att[width:]
    if leaky:
        logits = F.leaky_relu(logits, LEAKY_SLOPE)
    shift = torch.full((gt.n,), -math.inf, dtype=DTYPE).scatter_reduce(
        0, gt.dst, logits.detach(), reduce="amax", include_self=True
    )
    weights = torch.exp(logits - shift[gt.dst])
    totals = torch.zeros(gt.n, dtype=DTYPE).index_add(0, gt.dst, weights)
    return weights / totals[gt.dst]


def aggregate(
    kind: Aggregator,
    embeddings: Tensor,
    gt: GraphTensors,
    w_att: Optional[Tensor] = None,
    att: Optional[Tensor] = None,
    leaky: bool = False,
    node: Optional[int] = None,
) -> Tensor:
    """
    Builds the message every node receives from its neighbors.

    Nodes without neighbors receive the zero vector.

    Args:
        kind: GIN sums, SAGE averages, GCN sums with ``1/sqrt(|N(u)||N(v)|)``
            weights, GAT sums ``W E_v`` under attention weights.
        embeddings: One row per node.
        gt: The graph.
        w_att: GAT's shared matrix ``W``.
        att: GAT's attention vector ``a``.
        leaky: Apply a leaky rectifier to GAT's attention logits.
        node: If given, only this node's message is returned.

    Returns:
        An ``n x width`` message matrix, or one message vector.

    Raises:
        ValueError: The embeddings do not have one row per node, or GAT is
            missing its parameters.

    """

    if embeddings.shape[0] != gt.n:
        raise ValueError(f"expected {gt.n} embedding rows, got {embeddings.shape[0]}")

    zeros = torch.zeros(gt.n, embeddings.shape[1], dtype=embeddings.dtype)
    if kind == Aggregator.GIN:
        message = zeros.index_add(0, gt.dst, embeddings[gt.src])
    elif kind == Aggregator.SAGE:
        total = zeros.index_add(0, gt.dst, embeddings[gt.src])
        message = total / gt.degree.clamp(min=1.0).unsqueeze(1)
    elif kind == Aggregator.GCN:
        norm = torch.rsqrt(gt.degree[gt.dst] * gt.degree[gt.src])
        message = zeros.index_add(0, gt.dst, norm.unsqueeze(1) * embeddings[gt.src])
    else:
        if w_att is None or att is None:
            raise ValueError("GAT aggregation needs the attention parameters")
        alpha = gat_attention(embeddings, gt, w_att, att, leaky)
        projected = embeddings @ w_att.T
        message = torch.zeros_like(projected).index_add(
            0, gt.dst, alpha.unsqueeze(1) * projected[gt.src]
        )
    return message if node is None else message[node]


def update(
    kind: Updater, e_self: Tensor, message: Tensor, layer: "MessagePassingLayer"
) -> Tensor:
    """
    Combines a node's embedding with its message.

    ``linear`` is ``relu(W_self E_u + W_neigh m)``; ``concat`` appends
    ``E_u`` to it; ``interpolation`` is ``alpha_1 * linear + alpha_2 * E_u``,
    where ``E_u`` is replaced by ``W_self E_u`` when the widths differ.

    Raises:
        ValueError: The inputs do not match the layer's shapes.

    """

    if e_self.shape[-1] != layer.in_dim or message.shape[-1] != layer.in_dim:
        raise ValueError(
            f"layer expects width {layer.in_dim}, got {e_self.shape[-1]} and "
            f"{message.shape[-1]}"
        )
    linear = torch.relu(e_self @ layer.w_self.T + message @ layer.w_neigh.T)
    if kind == Updater.LINEAR:
        return linear
    if kind == Updater.CONCAT:
        return torch.cat([linear, e_self], dim=-1)
    skip = e_self if layer.in_dim == layer.out_dim else e_self @ layer.w_self.T
    return layer.alpha_linear * linear + layer.alpha_self * skip


class MessagePassingLayer(nn.Module):
    """One round of aggregation and update."""

    def __init__(
        self,
        in_dim: int,
        out_dim: int,
        aggregator: Aggregator,
        updater: Updater,
        gat_leaky: bool = False,
        generator: Optional[torch.Generator] = None,
    ) -> None:
        super().__init__()
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.aggregator = aggregator
        self.updater = updater
        self.gat_leaky = gat_leaky
        self.w_self = nn.Parameter(glorot((out_dim, in_dim), generator))
        self.w_neigh = nn.Parameter(glorot((out_dim, in_dim), generator))
        self.w_att: Optional[nn.Parameter] = None
        self.att: Optional[nn.Parameter] = None
        if aggregator == Aggregator.GAT:
            self.w_att = nn.Parameter(glorot((in_dim, in_dim), generator))
            self.att = nn.Parameter(glorot((2 * in_dim,), generator))
        if updater == Updater.INTERPOLATION:
            self.alpha_linear = nn.Parameter(torch.tensor(0.5, dtype=DTYPE))
            self.alpha_self = nn.Parameter(torch.tensor(0.5, dtype=DTYPE))

    @property
    def out_width(self) -> int:
        if self.updater == Updater.CONCAT:
            return self.out_dim + self.in_dim
        return self.out_dim

    def forward(self, embeddings: Tensor, gt: GraphTensors) -> Tensor:
        message = aggregate(
            self.aggregator, embeddings, gt, self.w_att, self.att, self.gat_leaky
        )
        return update(self.updater, embeddings, message, self)
