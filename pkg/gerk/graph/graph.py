"""The undirected attributed graph and its structural operations."""

import hashlib
import logging
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp
from pydantic import BaseModel, ConfigDict, Field

from ..errors import GraphError

logger = logging.getLogger(__name__)

IdMap = dict[int, int]


class Graph(BaseModel):
    """
    A simple undirected graph with a feature row and a label per node.

    Nodes are dense ids ``0..n-1``. Adjacency is stored in CSR form with sorted,
    duplicate-free neighbor lists and no self-loops. Every graph derived from
    another one keeps ``origin``, the id each node had in the graph it was
    originally loaded or generated as, so that callers can refer to nodes
    across re-indexing.

    Graphs are immutable; every mutation returns a new graph. Build them with
    `Graph.from_edges` rather than directly.
    """

    indptr: np.ndarray = Field(description="CSR row pointer, length n + 1.")
    indices: np.ndarray = Field(description="CSR column indices (neighbor ids).")
    x: np.ndarray = Field(description="Feature matrix, n rows by d_X columns.")
    y: np.ndarray = Field(description="Integer label per node in [0, C).")
    num_classes: int = Field(description="The class count C.", ge=1)
    origin: np.ndarray = Field(description="Root id of every node.")

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    @classmethod
    def from_edges(
        cls,
        x: np.ndarray,
        y: np.ndarray,
        edges: np.ndarray | Iterable[tuple[int, int]],
        num_classes: int | None = None,
        origin: np.ndarray | None = None,
    ) -> "Graph":
        """
        Builds a graph from an edge list, enforcing every graph invariant.

        Edges are symmetrized; self-loops and repeated edges are dropped.

        Args:
            x: The feature matrix, one row per node.
            y: The label of every node.
            edges: Pairs ``(u, v)`` of node ids.
            num_classes: The class count. Defaults to ``max(y) + 1``.
            origin: Root ids. Defaults to ``0..n-1``.

        Returns:
            The graph.

        Raises:
            GraphError: An edge references a node outside ``0..n-1``.
            ValueError: The feature matrix, labels or origin are inconsistent.

        """

        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            x = x.reshape(-1, 1)
        y = np.asarray(y, dtype=np.int64)
        n = x.shape[0]
        if y.shape != (n,):
            raise ValueError(f"expected {n} labels, got shape {y.shape}")
        if num_classes is None:
            num_classes = int(y.max()) + 1 if n else 1
        if n and (y.min() < 0 or y.max() >= num_classes):
            raise ValueError(f"labels must lie in [0, {num_classes})")
        origin = np.arange(n, dtype=np.int64) if origin is None else np.asarray(origin)
        if origin.shape != (n,):
            raise ValueError(f"expected {n} origin ids, got shape {origin.shape}")

        pairs = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges)
        pairs = pairs.reshape(-1, 2).astype(np.int64)
        if pairs.size and (pairs.min() < 0 or pairs.max() >= n):
            raise GraphError(f"edge endpoint outside 0..{n - 1}")
        pairs = pairs[pairs[:, 0] != pairs[:, 1]]
        both = np.concatenate([pairs, pairs[:, ::-1]])
        codes = np.unique(both[:, 0] * n + both[:, 1]) if n else np.empty(0, np.int64)
        rows, cols = np.divmod(codes, max(n, 1))
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(rows, minlength=n), out=indptr[1:])

        return cls(
            indptr=indptr,
            indices=cols.astype(np.int64),
            x=x,
            y=y,
            num_classes=num_classes,
            origin=origin.astype(np.int64),
        )

    @property
    def n(self) -> int:
        return int(self.indptr.shape[0] - 1)

    @property
    def feature_dim(self) -> int:
        return int(self.x.shape[1])

    @property
    def node_ids(self) -> np.ndarray:
        return np.arange(self.n, dtype=np.int64)

    @property
    def num_edges(self) -> int:
        return int(self.indices.shape[0] // 2)

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        """The symmetric 0/1 adjacency matrix."""

        data = np.ones(self.indices.shape[0], dtype=np.float64)
        return sp.csr_matrix((data, self.indices, self.indptr), shape=(self.n, self.n))

    @cached_property
    def root_index(self) -> IdMap:
        """Maps root ids to dense ids."""

        return {int(root): i for i, root in enumerate(self.origin)}

    def neighbors(self, u: int) -> np.ndarray:
        """Returns the sorted neighbor ids of ``u``."""

        self._check_node(u)
        return self.indices[self.indptr[u] : self.indptr[u + 1]]

    def has_edge(self, u: int, v: int) -> bool:
        if not (0 <= u < self.n and 0 <= v < self.n):
            return False
        nbrs = self.indices[self.indptr[u] : self.indptr[u + 1]]
        pos = np.searchsorted(nbrs, v)
        return bool(pos < nbrs.shape[0] and nbrs[pos] == v)

    def edge_array(self) -> np.ndarray:
        """Returns every undirected edge once as an ``(m, 2)`` array with u < v."""

        rows = np.repeat(self.node_ids, self.degrees)
        keep = rows < self.indices
        return np.stack([rows[keep], self.indices[keep]], axis=1)

    def edge_index(self) -> np.ndarray:
        """Returns a ``(2, 2m)`` array of directed ``(source, target)`` pairs."""

        targets = np.repeat(self.node_ids, self.degrees)
        return np.stack([self.indices, targets])

    def index_of(self, roots: Iterable[int]) -> np.ndarray:
        """
        Translates root ids into this graph's dense ids.

        Raises:
            GraphError: A root id is not part of this graph.

        """

        index = self.root_index
        try:
            return np.array([index[int(r)] for r in roots], dtype=np.int64)
        except KeyError as error:
            raise GraphError(f"node {error.args[0]} is not in the graph") from None

    def contains_root(self, root: int) -> bool:
        return int(root) in self.root_index

    def fingerprint(self) -> str:
        """A content hash over structure, features, labels and origin."""

        digest = hashlib.sha256()
        for array in (self.origin, self.indptr, self.indices, self.x, self.y):
            digest.update(np.ascontiguousarray(array).tobytes())
        digest.update(str(self.num_classes).encode())
        return digest.hexdigest()

    def check_invariants(self) -> list[str]:
        """
        Scans the whole graph and reports every violated invariant.

        Returns:
            Human readable violations; empty when the graph is well formed.

        """

        problems = []
        if self.x.shape[0] != self.n:
            problems.append(f"feature rows {self.x.shape[0]} != n {self.n}")
        if self.y.shape != (self.n,):
            problems.append("label vector length differs from n")
        elif self.n and (self.y.min() < 0 or self.y.max() >= self.num_classes):
            problems.append("label outside [0, C)")
        rows = np.repeat(self.node_ids, self.degrees)
        if np.any(rows == self.indices):
            problems.append("self-loop present")
        for u in range(self.n):
            nbrs = self.indices[self.indptr[u] : self.indptr[u + 1]]
            if np.any(np.diff(nbrs) <= 0):
                problems.append(f"neighbor list of {u} unsorted or duplicated")
                break
        adjacency = self.adjacency
        if (adjacency != adjacency.T).nnz:
            problems.append("adjacency not symmetric")
        return problems

    def _check_node(self, u: int) -> None:
        if not 0 <= u < self.n:
            raise GraphError(f"node {u} is not in the graph (n={self.n})")


def induced_subgraph(g: Graph, nodes: Iterable[int]) -> tuple[Graph, IdMap]:
    """
    Restricts a graph to a node set.

    The kept nodes are re-indexed densely in ascending id order.

    Args:
        g: The graph.
        nodes: Node ids of ``g`` to keep.

    Returns:
        The subgraph holding exactly the edges of ``g`` with both endpoints
        kept, and the map from old ids to new ids.

    Raises:
        GraphError: A node id is not part of ``g``.

    """

    keep = np.unique(np.fromiter((int(u) for u in nodes), dtype=np.int64))
    if keep.size and (keep[0] < 0 or keep[-1] >= g.n):
        bad = keep[0] if keep[0] < 0 else keep[-1]
        raise GraphError(f"node {bad} is not in the graph (n={g.n})")
    sub = g.adjacency[keep][:, keep].tocsr()
    sub.sort_indices()
    graph = Graph(
        indptr=sub.indptr.astype(np.int64),
        indices=sub.indices.astype(np.int64),
        x=g.x[keep],
        y=g.y[keep],
        num_classes=g.num_classes,
        origin=g.origin[keep],
    )
    return graph, {int(old): new for new, old in enumerate(keep)}


def delete_node(g: Graph, u: int) -> tuple[Graph, IdMap]:
    """
    Removes a node with its feature row, label and incident edges.

    Raises:
        GraphError: ``u`` is not part of ``g``.

    """

    g._check_node(u)
    rest = np.delete(g.node_ids, u)
    return induced_subgraph(g, rest)


def delete_edge(g: Graph, u: int, v: int) -> Graph:
    """
    Removes the undirected edge ``(u, v)``; both nodes keep their features.

    Raises:
        GraphError: The edge does not exist.

    """

    if not g.has_edge(u, v):
        raise GraphError(f"edge ({u}, {v}) is not in the graph")
    edges = g.edge_array()
    a, b = min(u, v), max(u, v)
    edges = edges[~((edges[:, 0] == a) & (edges[:, 1] == b))]
    return Graph.from_edges(g.x, g.y, edges, g.num_classes, g.origin)


def ego_nodes(
    g: Graph, nodes: Iterable[int], hops: int, within: np.ndarray | None = None
) -> np.ndarray:
    """
    Returns the sorted ids within ``hops`` edges of any of ``nodes``.

    When ``within`` is given, a boolean mask over the nodes of ``g``, the walk
    only steps onto masked nodes, so the result is the ego network in the
    subgraph induced by the mask.
    """

    mask = np.zeros(g.n, dtype=bool)
    mask[np.fromiter((int(u) for u in nodes), dtype=np.int64)] = True
    frontier = np.flatnonzero(mask)
    for _ in range(hops):
        if not frontier.size:
            break
        reached = np.unique(g.adjacency[frontier].indices)
        if within is not None:
            reached = reached[within[reached]]
        frontier = reached[~mask[reached]]
        mask[frontier] = True
    return np.flatnonzero(mask)


def disjoint_union(graphs: Sequence[Graph]) -> tuple[Graph, np.ndarray]:
    """
    Places graphs side by side in one graph with no edges between them.

    Node order within every part is kept. Root ids may repeat across parts.

    Returns:
        The union and the offset of every part's first node in it.

    Raises:
        ValueError: No graphs were given or their feature widths or class
            counts differ.

    """

    if not graphs:
        raise ValueError("disjoint_union needs at least one graph")
    if len({(g.feature_dim, g.num_classes) for g in graphs}) > 1:
        raise ValueError("graphs differ in feature width or class count")
    sizes = np.array([g.n for g in graphs], dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(np.int64)
    adjacency = sp.block_diag([g.adjacency for g in graphs], format="csr")
    adjacency.sort_indices()
    union = Graph(
        indptr=adjacency.indptr.astype(np.int64),
        indices=adjacency.indices.astype(np.int64),
        x=np.vstack([g.x for g in graphs]),
        y=np.concatenate([g.y for g in graphs]),
        num_classes=graphs[0].num_classes,
        origin=np.concatenate([g.origin for g in graphs]),
    )
    return union, offsets
