"""A thread-safe handle on a sharded model that services unlearning requests."""

import os
import threading
from typing import Iterable, Optional

import numpy as np

from ..aggregation import AggregationMode
from ..errors import AuditError
from ..graph import Graph, NodeSplit
from .checkpoint import load_checkpoint, save_checkpoint
from .schemas import AuditReport, EraserConfig, UnlearnReport, UnlearnRequest
from .state import EraserState, audit, build, evaluate, predict, unlearn


class Eraser:
    """
    Owns the current `EraserState` and serializes requests against it.

    Unlearning requests run one at a time. Predictions read whichever state is
    current when they start and never wait for a request in flight; the new
    state becomes visible atomically once a request completes.

    Example:

    ```python
    from gerk import Eraser, EraserConfig, SbmSpec, generate_sbm, split_train_test

    g = generate_sbm(SbmSpec(blocks=[250] * 4, p_in=0.05, p_out=0.005))
    split = split_train_test(g, 0.8, seed=0)
    eraser = Eraser.build(g, split, EraserConfig())
    report = eraser.unlearn_node(int(split.train_nodes[0]))
    print(report.retrain_seconds, eraser.audit().passed)
    ```
    """

    def __init__(self, state: EraserState) -> None:
        self._state = state
        self._write_lock = threading.Lock()
        self.reports: list[UnlearnReport] = []

    @classmethod
    def build(
        cls, g: Graph, split: NodeSplit, cfg: Optional[EraserConfig] = None
    ) -> "Eraser":
        return cls(build(g, split, cfg or EraserConfig()))

    @classmethod
    def load(cls, directory: str | os.PathLike) -> "Eraser":
        return cls(load_checkpoint(directory))

    @property
    def state(self) -> EraserState:
        return self._state

    def unlearn(self, req: UnlearnRequest) -> UnlearnReport:
        """Services one request; see `gerk.unlearn.state.unlearn`."""

        with self._write_lock:
            self._state, report = unlearn(self._state, req)
            self.reports.append(report)
        return report

    def unlearn_node(self, u: int) -> UnlearnReport:
        return self.unlearn(UnlearnRequest(kind="node", u=u))

    def unlearn_edge(self, u: int, v: int) -> UnlearnReport:
        return self.unlearn(UnlearnRequest(kind="edge", u=u, v=v))

    def predict(
        self, query_roots: Iterable[int], mode: AggregationMode = "optimal"
    ) -> np.ndarray:
        return predict(self._state, query_roots, mode)

    def evaluate(
        self, query_roots: Iterable[int], mode: AggregationMode = "optimal"
    ) -> float:
        return evaluate(self._state, query_roots, mode)

    def audit(self, strict: bool = False) -> AuditReport:
        """
        Audits the current state.

        Args:
            strict: Whether to raise instead of returning a failing report.

        Raises:
            AuditError: ``strict`` is set and a check failed.

        """

        report = audit(self._state)
        if strict and not report.passed:
            raise AuditError(f"audit failed: {', '.join(report.failures())}")
        return report

    def save(self, directory: str | os.PathLike) -> None:
        with self._write_lock:
            save_checkpoint(self._state, directory)
