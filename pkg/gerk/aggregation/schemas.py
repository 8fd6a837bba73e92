"""Data types for combining shard posteriors."""

import json
import os
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

AggregationMode = Literal["mean", "majority", "optimal"]

SUM_TOLERANCE = 1e-6


class OptAggrConfig(BaseModel):
    """Settings for learning importance scores."""

    lam: float = Field(
        default=1e-3, description="Weight of the l1 penalty on the scores.", ge=0.0
    )
    learning_rate: float = Field(default=0.5, gt=0.0)
    epochs: int = Field(default=100, ge=1)
    subset_frac: float = Field(
        default=0.1,
        description="Fraction of training nodes sampled to fit the scores.",
        gt=0.0,
        le=1.0,
    )
    seed: int = 0
    clamp: bool = Field(
        default=True,
        description="Whether negative pre-scores are clamped to zero every epoch.",
    )

    model_config = ConfigDict(frozen=True)


class ImportanceScores(BaseModel):
    """
    Nonnegative weights of the shard models, summing to one.

    ``score_train_nodes`` holds the root ids of the training nodes the scores
    were fit on; unlearning any of them makes the scores stale.
    """

    alpha: list[float]
    lam: float = Field(alias="lambda")
    subset_frac: float
    score_train_nodes: list[int]
    seed: int
    epochs_run: int
    loss_trace: list[float] = []

    model_config = ConfigDict(frozen=True, populate_by_name=True)

    @field_validator("alpha")
    @classmethod
    def _check_simplex(cls, alpha: list[float]) -> list[float]:
        if not alpha:
            raise ValueError("alpha must hold one score per shard")
        if min(alpha) < 0.0:
            raise ValueError("alpha must be nonnegative")
        if abs(sum(alpha) - 1.0) > SUM_TOLERANCE:
            raise ValueError(f"alpha must sum to 1, got {sum(alpha)}")
        return alpha

    @property
    def m(self) -> int:
        return len(self.alpha)

    @classmethod
    def uniform(cls, m: int) -> "ImportanceScores":
        """Equal weights, as used when no scores were fit."""

        return cls(
            alpha=[1.0 / m] * m,
            lam=0.0,
            subset_frac=0.0,
            score_train_nodes=[],
            seed=0,
            epochs_run=0,
        )

    def to_json(self) -> str:
        return json.dumps(self.model_dump(by_alias=True), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ImportanceScores":
        return cls.model_validate(json.loads(text))

    def save(self, path: str | os.PathLike) -> None:
        with open(path, "w") as f:
            f.write(self.to_json())

    @classmethod
    def load(cls, path: str | os.PathLike) -> "ImportanceScores":
        with open(path) as f:
            return cls.from_json(f.read())


class ShardPosteriors(BaseModel):
    """Posterior matrices of every shard over one ordered list of query nodes."""

    probabilities: np.ndarray = Field(
        description="Array of shape (shards, queries, classes); each row is stochastic."
    )

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    @model_validator(mode="after")
    def _check_stochastic(self) -> "ShardPosteriors":
        p = self.probabilities
        if p.ndim != 3 or p.shape[0] == 0:
            raise ValueError(
                f"expected a (shards, queries, classes) array, got {p.shape}"
            )
        rows_sum_to_one = np.allclose(p.sum(axis=-1), 1.0, atol=SUM_TOLERANCE)
        if np.any(p < -SUM_TOLERANCE) or not rows_sum_to_one:
            raise ValueError("every posterior row must be a probability vector")
        return self

    @classmethod
    def stack(cls, matrices: list[np.ndarray]) -> "ShardPosteriors":
        """Stacks per-shard posterior matrices of identical shape."""

        shapes = {m.shape for m in matrices}
        if len(shapes) > 1:
            raise ValueError(f"posterior matrices differ in shape: {sorted(shapes)}")
        return cls(probabilities=np.stack(matrices))

    @property
    def m(self) -> int:
        return int(self.probabilities.shape[0])

    @property
    def num_queries(self) -> int:
        return int(self.probabilities.shape[1])
