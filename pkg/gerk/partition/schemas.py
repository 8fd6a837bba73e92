"""Data types shared by the partition strategies."""

import math
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

PartitionMethod = Literal["random", "blpa", "bekm"]


class PartitionConfig(BaseModel):
    """Settings for splitting the training graph into shards."""

    method: PartitionMethod = "blpa"
    k: int = Field(default=10, description="The shard count.", ge=1)
    gamma: float = Field(
        default=1.0,
        description="Slack factor of the shard capacity, "
        "delta = ceil(gamma * n_train / k).",
        ge=1.0,
    )
    max_iterations: int = Field(default=30, description="The iteration cap T.", ge=1)
    seed: int = 0
    bekm_tol: float = Field(
        default=1e-6,
        description="Largest centroid displacement still counted as converged.",
        ge=0.0,
    )
    blpa_strict_improve: bool = Field(
        default=False,
        description="Only move a node when the destination holds strictly more "
        "of its neighbors than its current shard.",
    )

    model_config = ConfigDict(frozen=True)

    def delta(self, n_train: int) -> int:
        """The maximum shard size for ``n_train`` training nodes."""

        return max(1, math.ceil(self.gamma * n_train / self.k - 1e-9))


class ShardAssignment(BaseModel):
    """
    A map from training nodes to shards.

    ``assign[i]`` is the shard of the i-th training node, in the node order of
    the training graph the assignment was computed on.
    """

    k: int = Field(ge=1)
    delta: int = Field(description="The maximum shard size.", ge=1)
    method: PartitionMethod
    seed: int = 0
    assign: list[int]
    iterations_run: int = 0
    converged: bool = True
    repairs: int = Field(default=0, description="Empty shards re-seeded by BEKM.")

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def _check_shard_ids(self) -> "ShardAssignment":
        if any(not 0 <= s < self.k for s in self.assign):
            raise ValueError(f"shard ids must lie in [0, {self.k})")
        return self

    @property
    def n(self) -> int:
        return len(self.assign)

    def sizes(self) -> np.ndarray:
        return np.bincount(np.asarray(self.assign, dtype=np.int64), minlength=self.k)

    def members(self, shard: int) -> np.ndarray:
        """The training-node positions assigned to ``shard``, ascending."""

        return np.flatnonzero(np.asarray(self.assign, dtype=np.int64) == shard)

    def shard_of(self, node: int) -> int:
        return self.assign[node]

    def without(self, node: int) -> "ShardAssignment":
        """The assignment after removing a training node (later positions shift)."""

        assign = self.assign[:node] + self.assign[node + 1 :]
        return self.model_copy(update={"assign": assign})

    def is_balanced(self) -> bool:
        return bool(self.sizes().max(initial=0) <= self.delta)


class ReassignmentProfile(BaseModel):
    """A candidate BLPA move of node ``u`` into shard ``dst``."""

    u: int
    src: int
    dst: int
    xi: int = Field(description="Neighbors of u inside dst.", ge=1)

    model_config = ConfigDict(frozen=True)


class EmbeddingSet(BaseModel):
    """Node embeddings aligned with the training node order."""

    embeddings: np.ndarray = Field(description="n_train rows by d_E columns.")

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    @model_validator(mode="after")
    def _check_finite(self) -> "EmbeddingSet":
        if self.embeddings.ndim != 2:
            raise ValueError("embeddings must be a 2-D array")
        if not np.all(np.isfinite(self.embeddings)):
            raise ValueError("embeddings must be finite")
        return self

    @property
    def n(self) -> int:
        return int(self.embeddings.shape[0])


class ShardSizeSummary(BaseModel):
    """How evenly an assignment spreads the nodes."""

    k: int
    largest: int
    smallest: int
    largest_share: float
    smallest_share: float
    std: float
    empty_shards: int


def shard_size_summary(assignment: ShardAssignment) -> ShardSizeSummary:
    sizes = assignment.sizes()
    total = max(int(sizes.sum()), 1)
    return ShardSizeSummary(
        k=assignment.k,
        largest=int(sizes.max()),
        smallest=int(sizes.min()),
        largest_share=float(sizes.max() / total),
        smallest_share=float(sizes.min() / total),
        std=float(sizes.std()),
        empty_shards=int(np.count_nonzero(sizes == 0)),
    )
