"""Reading and writing graphs.

Node files are UTF-8 CSV with a ``id,label,f0,...,f{d-1}`` header and contiguous
ids. Edge files hold one whitespace separated ``u v`` pair per line; lines
starting with ``#`` are comments. Snapshots are single ``.npz`` containers
tagged ``gerk-graph-v1``.
"""

import csv
import logging
import os
from typing import Optional

import numpy as np
import pandas as pd

from ..errors import GraphFormatError
from .graph import Graph

logger = logging.getLogger(__name__)

GRAPH_FORMAT = "gerk-graph-v1"


def load_graph(
    node_file: str | os.PathLike,
    edge_file: str | os.PathLike,
    num_classes: Optional[int] = None,
) -> Graph:
    """
    Loads a graph from a node file and an edge file.

    Args:
        node_file: CSV with an ``id,label,f0,...`` header.
        edge_file: Whitespace separated edge pairs.
        num_classes: The class count. Defaults to the largest label plus one.

    Returns:
        The symmetrized graph, with self-loops and repeated edges dropped.

    Raises:
        GraphFormatError: A line is malformed, a label is out of range, ids are
            not contiguous, or an edge references an unknown node.

    """

    node_path = os.fspath(node_file)
    edge_path = os.fspath(edge_file)
    x, y = _read_nodes(node_path, num_classes)
    if num_classes is None:
        num_classes = int(y.max()) + 1 if y.size else 1
    edges = _read_edges(edge_path, n=y.shape[0])

    self_loops = int(np.count_nonzero(edges[:, 0] == edges[:, 1]))
    graph = Graph.from_edges(x, y, edges, num_classes)
    duplicates = edges.shape[0] - self_loops - graph.num_edges
    if self_loops or duplicates:
        logger.warning(
            "%s: dropped %d self-loop(s) and %d duplicate edge line(s)",
            edge_path,
            self_loops,
            duplicates,
        )
    logger.info("loaded graph with %d nodes and %d edges", graph.n, graph.num_edges)
    return graph


def _read_nodes(path: str, num_classes: Optional[int]) -> tuple[np.ndarray, np.ndarray]:
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if not header or [h.strip() for h in header[:2]] != ["id", "label"]:
            raise GraphFormatError("header must start with 'id,label'", path, 1)
        width = len(header) - 2
        expected = [f"f{i}" for i in range(width)]
        if [h.strip() for h in header[2:]] != expected:
            raise GraphFormatError("feature columns must be f0..f{d-1}", path, 1)

        labels: list[int] = []
        rows: list[list[float]] = []
        for line_no, record in enumerate(reader, start=2):
            if not record:
                continue
            if len(record) != width + 2:
                raise GraphFormatError(
                    f"expected {width + 2} columns, got {len(record)}", path, line_no
                )
            try:
                node_id = int(record[0])
                label = int(record[1])
                features = [float(v) for v in record[2:]]
            except ValueError as error:
                raise GraphFormatError(str(error), path, line_no) from None
            if node_id != len(labels):
                raise GraphFormatError(
                    f"ids must be contiguous from 0, expected {len(labels)} "
                    f"got {node_id}",
                    path,
                    line_no,
                )
            if label < 0 or (num_classes is not None and label >= num_classes):
                raise GraphFormatError(f"label {label} out of range", path, line_no)
            labels.append(label)
            rows.append(features)

    x = np.array(rows, dtype=np.float64).reshape(len(rows), width)
    return x, np.array(labels, dtype=np.int64)


def _read_edges(path: str, n: int) -> np.ndarray:
    pairs: list[tuple[int, int]] = []
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            parts = text.split()
            if len(parts) != 2:
                raise GraphFormatError("expected a 'u v' pair", path, line_no)
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError as error:
                raise GraphFormatError(str(error), path, line_no) from None
            for node in (u, v):
                if not 0 <= node < n:
                    raise GraphFormatError(
                        f"node {node} is not in the node file", path, line_no
                    )
            pairs.append((u, v))
    return np.array(pairs, dtype=np.int64).reshape(-1, 2)


def save_graph(g: Graph, path: str | os.PathLike) -> None:
    """Writes a ``gerk-graph-v1`` snapshot to exactly ``path``."""

    with open(path, "wb") as f:
        np.savez(
            f,
            format=np.array(GRAPH_FORMAT),
            n=np.array(g.n),
            num_classes=np.array(g.num_classes),
            feature_dim=np.array(g.feature_dim),
            indptr=g.indptr,
            indices=g.indices,
            x=g.x,
            y=g.y,
            origin=g.origin,
        )


def load_graph_snapshot(path: str | os.PathLike) -> Graph:
    """
    Reads a snapshot written by `save_graph`.

    Raises:
        GraphFormatError: The file is not a ``gerk-graph-v1`` snapshot.

    """

    with np.load(path, allow_pickle=False) as data:
        if "format" not in data or str(data["format"]) != GRAPH_FORMAT:
            raise GraphFormatError(f"not a {GRAPH_FORMAT} snapshot", os.fspath(path))
        graph = Graph(
            indptr=data["indptr"],
            indices=data["indices"],
            x=data["x"].reshape(int(data["n"]), int(data["feature_dim"])),
            y=data["y"],
            num_classes=int(data["num_classes"]),
            origin=data["origin"],
        )
    problems = graph.check_invariants()
    if problems:
        raise GraphFormatError("; ".join(problems), os.fspath(path))
    return graph


def export_graph(
    g: Graph, node_file: str | os.PathLike, edge_file: str | os.PathLike
) -> None:
    """Writes a graph back out in the node/edge file formats read by `load_graph`."""

    frame = pd.DataFrame(g.x, columns=[f"f{i}" for i in range(g.feature_dim)])
    frame.insert(0, "label", g.y)
    frame.insert(0, "id", g.node_ids)
    frame.to_csv(node_file, index=False)
    np.savetxt(edge_file, g.edge_array(), fmt="%d", header="u v")
