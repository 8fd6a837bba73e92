"""Benchmark configuration and config-file loading."""

import json
import os
import tomllib
from pathlib import Path
from typing import Any, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..aggregation import AggregationMode, OptAggrConfig
from ..errors import ConfigError
from ..gnn import GnnConfig
from ..graph import Graph, SbmSpec, generate_sbm, load_graph, load_graph_snapshot
from ..partition import PartitionConfig, PartitionMethod
from ..unlearn import EraserConfig, InferencePolicy

GUIDELINE_THRESHOLD = 0.03


class DatasetSource(BaseModel):
    """
    Where a benchmark's graph comes from.

    Exactly one of a node/edge file pair, a snapshot, or an SBM spec is given.
    SBM graphs are resampled for every repetition, with the repetition's seed.
    """

    node_file: Optional[str] = None
    edge_file: Optional[str] = None
    snapshot: Optional[str] = None
    sbm: Optional[SbmSpec] = None
    num_classes: Optional[int] = Field(default=None, ge=1)

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def _check_one_source(self) -> "DatasetSource":
        files = self.node_file is not None or self.edge_file is not None
        if files and (self.node_file is None or self.edge_file is None):
            raise ValueError("node_file and edge_file must be given together")
        if sum([files, self.snapshot is not None, self.sbm is not None]) != 1:
            raise ValueError("give exactly one of node/edge files, snapshot or sbm")
        return self

    def load(self, seed: int = 0) -> Graph:
        if self.sbm is not None:
            spec = self.sbm.model_copy(update={"seed": self.sbm.seed + seed})
            return generate_sbm(spec)
        if self.snapshot is not None:
            return load_graph_snapshot(self.snapshot)
        return load_graph(str(self.node_file), str(self.edge_file), self.num_classes)


class BenchConfig(BaseModel):
    """Settings of every benchmark command; each report embeds a copy."""

    dataset: DatasetSource
    methods: list[PartitionMethod] = Field(
        default=["random", "blpa", "bekm"], min_length=1
    )
    k: int = Field(default=10, description="The shard count.", ge=1)
    gamma: float = Field(default=1.0, ge=1.0)
    max_iterations: int = Field(default=30, ge=1)
    blpa_strict_improve: bool = False
    bekm_tol: float = Field(default=1e-6, ge=0.0)
    gnn: GnnConfig = GnnConfig()
    aggregation: OptAggrConfig = OptAggrConfig()
    modes: list[AggregationMode] = Field(default=["optimal"], min_length=1)
    inference_policy: InferencePolicy = "shard-local"
    train_ratio: float = Field(default=0.8, gt=0.0, lt=1.0)
    stratify: bool = False
    n_requests: int = Field(default=100, ge=1)
    request_kind: Literal["node", "edge"] = "node"
    scratch_sample: int = Field(
        default=10,
        description="Requests timed against full retraining; the mean is "
        "extrapolated to the remaining requests.",
        ge=1,
    )
    repetitions: int = Field(default=10, ge=1)
    seed: int = 0
    k_list: list[int] = Field(default=[2, 5, 10, 20, 50], min_length=1)
    request_counts: list[int] = Field(default=[0, 1, 10, 50, 100], min_length=1)
    guideline_threshold: float = Field(default=GUIDELINE_THRESHOLD, ge=0.0)
    mlp_hidden_dim: int = Field(default=32, ge=1)
    average: Literal["micro", "macro"] = "micro"
    workers: int = Field(default=1, description="Cells run concurrently.", ge=1)
    output: str = "results"

    model_config = ConfigDict(frozen=True)

    def repetition_seed(self, rep: int) -> int:
        return self.seed + rep

    def eraser_config(
        self, method: PartitionMethod, rep: int, k: Optional[int] = None
    ) -> EraserConfig:
        """The pipeline settings of one cell; every seed follows the repetition."""

        seed = self.repetition_seed(rep)
        return EraserConfig(
            partition=PartitionConfig(
                method=method,
                k=k or self.k,
                gamma=self.gamma,
                max_iterations=self.max_iterations,
                seed=seed,
                bekm_tol=self.bekm_tol,
                blpa_strict_improve=self.blpa_strict_improve,
            ),
            gnn=self.gnn.model_copy(update={"seed": self.gnn.seed + seed}),
            aggregation=self.aggregation.model_copy(update={"seed": seed}),
            fit_scores="optimal" in self.modes,
            inference_policy=self.inference_policy,
        )


def load_config_file(path: str | os.PathLike) -> dict[str, Any]:
    """
    Reads a TOML or JSON config file into a dictionary.

    Raises:
        ConfigError: The file is missing, has another suffix, or does not parse.

    """

    path = Path(path)
    try:
        text = path.read_text()
    except OSError as error:
        raise ConfigError(f"cannot read config file {path}: {error}") from error
    try:
        if path.suffix == ".toml":
            return tomllib.loads(text)
        if path.suffix == ".json":
            return json.loads(text)
    except (tomllib.TOMLDecodeError, json.JSONDecodeError) as error:
        raise ConfigError(f"{path}: {error}") from error
    raise ConfigError(f"{path}: config files must be .toml or .json")
