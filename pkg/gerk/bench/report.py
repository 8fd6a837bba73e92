"""Benchmark reports and their JSON, CSV and SVG renderings."""

import json
import os
import platform
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Optional

import numpy as np
import pandas as pd
import scipy
import sklearn
import torch
from pydantic import BaseModel, Field, computed_field

from ..errors import ConfigError
from ..partition import ShardSizeSummary


class MethodResult(BaseModel):
    """
    One cell of a benchmark: a partition method (or baseline) under one setting.

    ``param`` is the swept value of sweep commands: the shard count for
    ``sweep-shards`` and the number of removed nodes or edges for
    ``sweep-requests``.
    """

    method: str
    mode: Optional[str] = None
    k: Optional[int] = None
    param: Optional[int] = None
    f1_values: list[float] = []
    unlearn_seconds: list[float] = Field(
        default=[], description="Mean unlearning time of every repetition."
    )
    scratch_timings: list[float] = Field(
        default=[], description="Mean full-retraining time of every repetition."
    )
    scratch_extrapolated: bool = False
    model_hashes: list[str] = Field(
        default=[], description="Shard model parameter hashes, one per repetition."
    )
    shard_sizes: Optional[ShardSizeSummary] = None
    error: Optional[str] = None

    @computed_field  # type: ignore[prop-decorator]
    @property
    def f1_mean(self) -> Optional[float]:
        return float(np.mean(self.f1_values)) if self.f1_values else None

    @computed_field  # type: ignore[prop-decorator]
    @property
    def f1_std(self) -> Optional[float]:
        return float(np.std(self.f1_values)) if self.f1_values else None

    @computed_field  # type: ignore[prop-decorator]
    @property
    def unlearn_seconds_mean(self) -> Optional[float]:
        return float(np.mean(self.unlearn_seconds)) if self.unlearn_seconds else None

    @computed_field  # type: ignore[prop-decorator]
    @property
    def unlearn_seconds_std(self) -> Optional[float]:
        return float(np.std(self.unlearn_seconds)) if self.unlearn_seconds else None

    @computed_field  # type: ignore[prop-decorator]
    @property
    def scratch_seconds(self) -> Optional[float]:
        return float(np.mean(self.scratch_timings)) if self.scratch_timings else None

    @computed_field  # type: ignore[prop-decorator]
    @property
    def speedup(self) -> Optional[float]:
        """Scratch seconds over unlearning seconds."""

        method_seconds = self.unlearn_seconds_mean
        if self.scratch_seconds is None or not method_seconds:
            return None
        return self.scratch_seconds / method_seconds


class ShardRow(BaseModel):
    """A shard's size, standalone F1 and importance score."""

    shard: int
    size: int
    f1: float
    alpha: float


class BenchReport(BaseModel):
    """The outcome of one benchmark command."""

    command: str
    config: dict[str, Any]
    environment: dict[str, str]
    results: list[MethodResult] = []
    shards: list[ShardRow] = []
    rank_correlation: Optional[float] = None
    recommendation: Optional[dict[str, Any]] = None

    def result(
        self, method: str, mode: Optional[str] = None, param: Optional[int] = None
    ) -> MethodResult:
        """Finds a cell by method, and by mode or swept value when given."""

        for row in self.results:
            if (
                row.method == method
                and mode in (None, row.mode)
                and param in (None, row.param)
            ):
                return row
        raise KeyError(f"no result for method={method} mode={mode} param={param}")


def environment_stamp() -> dict[str, str]:
    from .. import __version__

    return {
        "gerk": __version__,
        "python": platform.python_version(),
        "platform": platform.platform(),
        "processor": platform.processor() or platform.machine(),
        "cpus": str(os.cpu_count()),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "scikit-learn": sklearn.__version__,
        "pandas": pd.__version__,
        "torch": torch.__version__,
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }


LIST_FIELDS = {
    "f1_values",
    "unlearn_seconds",
    "scratch_timings",
    "model_hashes",
    "shard_sizes",
}


def results_frame(report: BenchReport) -> pd.DataFrame:
    """The result cells as a table, one row per cell."""

    rows = []
    for result in report.results:
        row = result.model_dump(exclude=LIST_FIELDS)
        if result.shard_sizes is not None:
            sizes = result.shard_sizes.model_dump()
            row.update({f"shards_{key}": value for key, value in sizes.items()})
        rows.append(row)
    return pd.DataFrame(rows)


def write_report(report: BenchReport, directory: str | os.PathLike) -> Path:
    """
    Writes ``report.json`` plus ``results.csv`` and, when present, ``shards.csv``.

    Returns:
        The path of ``report.json``.

    """

    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    path = root / "report.json"
    path.write_text(report.model_dump_json(indent=2))
    if report.results:
        results_frame(report).to_csv(root / "results.csv", index=False)
    if report.shards:
        pd.DataFrame([row.model_dump() for row in report.shards]).to_csv(
            root / "shards.csv", index=False
        )
    return path


def load_report(path: str | os.PathLike) -> BenchReport:
    return BenchReport.model_validate(json.loads(Path(path).read_text()))


def plot_report(report: BenchReport, directory: str | os.PathLike) -> list[Path]:
    """
    Draws the report's figures as SVG files.

    Sweeps become line charts of F1 and unlearning time over the swept value,
    score correlations a scatter of importance score against shard F1, and
    every other report a bar chart of mean F1 per cell.

    Returns:
        The written files.

    Raises:
        ConfigError: matplotlib is not installed.

    """

    try:
        import matplotlib

        matplotlib.use("svg")
        import matplotlib.pyplot as plt
    except ImportError as error:
        raise ConfigError("plotting needs matplotlib; install gerk[plot]") from error

    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    written = []

    if report.shards:
        fig, ax = plt.subplots(figsize=(4.5, 3.5))
        ax.scatter([r.alpha for r in report.shards], [r.f1 for r in report.shards])
        for row in report.shards:
            ax.annotate(str(row.shard), (row.alpha, row.f1), fontsize=7)
        ax.set_xlabel("importance score")
        ax.set_ylabel("shard F1")
        if report.rank_correlation is not None:
            ax.set_title(f"Spearman rho = {report.rank_correlation:.3f}")
        written.append(_save(fig, root / "score_correlation.svg"))
    elif any(r.param is not None for r in report.results):
        frame = results_frame(report).dropna(subset=["param"])
        for column, label in (("f1_mean", "F1"), ("unlearn_seconds_mean", "seconds")):
            if frame[column].isna().all():
                continue
            fig, ax = plt.subplots(figsize=(4.5, 3.5))
            curves = frame.groupby(["method", "mode"], dropna=False)
            for (method, mode), group in curves:
                group = group.sort_values("param")
                curve = method if not isinstance(mode, str) else f"{method} {mode}"
                ax.plot(group["param"], group[column], marker="o", label=curve)
            ax.set_xlabel("k" if report.command == "sweep-shards" else "removed")
            ax.set_ylabel(label)
            ax.legend(frameon=False, fontsize=7)
            written.append(_save(fig, root / f"{report.command}_{column}.svg"))
    elif report.results:
        frame = results_frame(report).dropna(subset=["f1_mean"])
        fig, ax = plt.subplots(figsize=(5, 3.5))
        labels = [
            f"{m}\n{o}" if isinstance(o, str) else m
            for m, o in zip(frame["method"], frame["mode"])
        ]
        ax.bar(labels, frame["f1_mean"], yerr=frame["f1_std"], capsize=3)
        ax.set_ylabel("F1")
        written.append(_save(fig, root / f"{report.command}_f1.svg"))
    return written


def _save(fig: Any, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, format="svg")
    fig.clf()
    import matplotlib.pyplot as plt

    plt.close(fig)
    return path
