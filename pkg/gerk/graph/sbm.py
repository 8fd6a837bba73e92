"""Stochastic block model test-bed graphs."""

import logging

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PositiveInt, model_validator

from .graph import Graph

logger = logging.getLogger(__name__)


class SbmSpec(BaseModel):
    """Parameters of a planted-partition graph with block-centred features."""

    blocks: list[PositiveInt] = Field(
        description="The size of every block.", min_length=1
    )
    p_in: float = Field(description="Within-block edge probability.", ge=0.0, le=1.0)
    p_out: float = Field(description="Cross-block edge probability.", ge=0.0, le=1.0)
    feature_dim: PositiveInt = Field(default=16, description="Feature width d_X.")
    block_labels: bool = Field(
        default=True,
        description="Label every node with its block id; otherwise labels are "
        "drawn uniformly at random.",
    )
    feature_noise: float = Field(
        default=1.0,
        description="Standard deviation of the per-node perturbation around the "
        "block centroid.",
        ge=0.0,
    )
    centroid_scale: float = Field(
        default=1.0,
        description="Standard deviation of the block centroids. Zero gives every "
        "block the same centroid, leaving only structure as a signal.",
        ge=0.0,
    )
    seed: int = 0

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def _check_probabilities(self) -> "SbmSpec":
        if self.p_out > self.p_in:
            raise ValueError("p_out must not exceed p_in")
        return self


def generate_sbm(spec: SbmSpec) -> Graph:
    """
    Samples a graph from a stochastic block model.

    Every unordered node pair is an edge independently, with probability
    ``p_in`` inside a block and ``p_out`` across blocks.

    Args:
        spec: The model parameters.

    Returns:
        The graph; nodes are numbered block by block.

    """

    rng = np.random.default_rng(spec.seed)
    sizes = np.array(spec.blocks, dtype=np.int64)
    starts = np.concatenate([[0], np.cumsum(sizes)])
    n = int(starts[-1])
    block = np.repeat(np.arange(len(sizes)), sizes)

    chunks = []
    for a in range(len(sizes)):
        for b in range(a, len(sizes)):
            if a == b:
                draws = rng.random((sizes[a], sizes[a])) < spec.p_in
                draws = np.triu(draws, k=1)
            else:
                draws = rng.random((sizes[a], sizes[b])) < spec.p_out
            rows, cols = np.nonzero(draws)
            chunks.append(np.stack([rows + starts[a], cols + starts[b]], axis=1))
    edges = np.concatenate(chunks) if chunks else np.empty((0, 2), np.int64)

    centroids = rng.normal(0.0, spec.centroid_scale, (len(sizes), spec.feature_dim))
    x = centroids[block] + rng.normal(0.0, spec.feature_noise, (n, spec.feature_dim))
    if spec.block_labels:
        y = block
    else:
        y = rng.integers(0, len(sizes), size=n)

    graph = Graph.from_edges(x, y, edges, num_classes=len(sizes))
    logger.debug("generated SBM with %d nodes, %d edges", graph.n, graph.num_edges)
    return graph
