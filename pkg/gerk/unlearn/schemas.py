"""Configuration, requests and reports of the unlearning engine."""

from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..aggregation import OptAggrConfig
from ..gnn import GnnConfig, GnnModel
from ..partition import PartitionConfig

InferencePolicy = Literal["shard-local", "global-ego"]


class EraserConfig(BaseModel):
    """Everything needed to build, and later rebuild, a sharded model."""

    partition: PartitionConfig = PartitionConfig()
    gnn: GnnConfig = GnnConfig()
    aggregation: OptAggrConfig = OptAggrConfig()
    fit_scores: bool = Field(
        default=True,
        description="Whether to learn importance scores after shard training.",
    )
    inference_policy: InferencePolicy = Field(
        default="shard-local",
        description="shard-local: a shard sees its own training nodes plus the "
        "query and its non-training neighbors. global-ego: every shard sees the "
        "query's ego network in the current graph.",
    )
    workers: int = Field(
        default=0,
        description="Threads used to train shards; 0 picks a count automatically.",
        ge=0,
    )

    model_config = ConfigDict(frozen=True)


class UnlearnRequest(BaseModel):
    """
    A request to forget one training node, or one edge between training nodes.

    Node ids are root ids, i.e. ids of the originally loaded graph.
    """

    kind: Literal["node", "edge"]
    u: int
    v: Optional[int] = None

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def _check_endpoints(self) -> "UnlearnRequest":
        if self.kind == "edge" and self.v is None:
            raise ValueError("edge requests need both endpoints")
        if self.kind == "node" and self.v is not None:
            raise ValueError("node requests take a single node")
        if self.kind == "edge" and self.u == self.v:
            raise ValueError("self-loops are never part of a graph")
        return self

    @property
    def nodes(self) -> list[int]:
        """The root ids the request refers to."""

        return [self.u] if self.v is None else [self.u, self.v]

    def __str__(self) -> str:
        return f"node {self.u}" if self.kind == "node" else f"edge ({self.u}, {self.v})"


class UnlearnReport(BaseModel):
    """What servicing one request cost."""

    request: UnlearnRequest
    affected_shard: Optional[int] = Field(
        description="The retrained shard, or None when no shard saw the data."
    )
    retrain_seconds: float = Field(ge=0.0)
    scores_retrained: bool
    scores_retrain_seconds: float = Field(default=0.0, ge=0.0)
    total_seconds: float = Field(ge=0.0)

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def _check_timing(self) -> "UnlearnReport":
        if self.total_seconds < self.retrain_seconds:
            raise ValueError("total time cannot be below the retraining time")
        if self.scores_retrained and self.scores_retrain_seconds <= 0.0:
            raise ValueError("a score refit must take positive time")
        return self


class AuditReport(BaseModel):
    """Pass or fail per audited invariant, with the violations found."""

    checks: dict[str, bool]
    problems: dict[str, list[str]] = {}

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def failures(self) -> list[str]:
        return [name for name, ok in self.checks.items() if not ok]


class ShardModel(BaseModel):
    """
    A shard model together with a record of the data it was trained on.

    Attributes:
        shard: The shard id.
        seed: The training seed.
        graph_fingerprint: `Graph.fingerprint` of the shard graph at training time.
        nodes: Root ids of the training nodes.
        stub: Whether the model is the uniform stand-in of an empty shard.
        model: The trained model.

    """

    shard: int
    seed: int
    graph_fingerprint: str
    nodes: list[int]
    stub: bool = False
    model: GnnModel

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)
