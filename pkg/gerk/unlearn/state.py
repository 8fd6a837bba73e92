"""The sharded model and the operations that build, query, unlearn and audit it."""

import logging
import math
import os
import threading
from time import perf_counter
from typing import Callable, Iterable, Optional, Sequence, TypeVar

import numpy as np
from pydantic import BaseModel, ConfigDict

from ..aggregation import (
    AggregationMode,
    ImportanceScores,
    ShardPosteriors,
    maj_aggr,
    mean_aggr,
    opt_aggr_train,
    weighted_predict,
)
from ..errors import GraphError, UnlearnError
from ..gnn import GnnConfig, GnnModel, f1_score, forward, node_embeddings, train
from ..gnn.metrics import Average
from ..graph import (
    Graph,
    IdMap,
    NodeSplit,
    delete_edge,
    delete_node,
    disjoint_union,
    ego_nodes,
    induced_subgraph,
)
from ..partition import ShardAssignment, partition
from .schemas import (
    AuditReport,
    EraserConfig,
    ShardModel,
    UnlearnReport,
    UnlearnRequest,
)

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

MAX_WORKERS = 8


class EraserState(BaseModel):
    """
    A sharded model together with the data it was trained on.

    ``graph`` is the current full graph, test nodes included, and ``g_train``
    its induced subgraph on the training nodes. ``assignment`` is aligned with
    the node order of ``g_train``; ``shard_graphs[i]`` is the induced subgraph
    of ``g_train`` on shard ``i`` and ``shard_models[i]`` was trained on it.
    States are immutable; `unlearn` returns a new one.
    """

    config: EraserConfig
    graph: Graph
    g_train: Graph
    assignment: ShardAssignment
    shard_graphs: list[Graph]
    shard_models: list[ShardModel]
    scores: Optional[ImportanceScores] = None
    deletions: list[UnlearnRequest] = []

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    @property
    def k(self) -> int:
        return self.assignment.k

    def train_mask(self) -> np.ndarray:
        """Marks the nodes of ``graph`` that are training nodes."""

        return np.isin(self.graph.origin, self.g_train.origin)

    def test_nodes(self) -> np.ndarray:
        """Root ids of the nodes that are not training nodes."""

        return self.graph.origin[~self.train_mask()]

    def shard_of_root(self, root: int) -> int:
        return self.assignment.shard_of(int(self.g_train.index_of([root])[0]))


def _threaded_map(
    fn: Callable[[T], R], items: Sequence[T], workers: int = 0
) -> list[R]:
    """
    Applies ``fn`` to every item on a pool of threads, preserving order.

    Items are cut into one contiguous batch per thread. The first exception
    raised by any batch is re-raised once every thread has finished.
    """

    if not items:
        return []
    max_threads = workers or min(MAX_WORKERS, os.cpu_count() or 1)
    num_threads = min(len(items), max_threads)
    batch_size = math.ceil(len(items) / num_threads)
    result_lists: list[list[R]] = [[] for _ in range(num_threads)]
    errors: list[BaseException] = []

    def run_batch(thread_num: int) -> None:
        start = thread_num * batch_size
        end = min(len(items), (thread_num + 1) * batch_size)
        try:
            result_lists[thread_num] = [fn(items[i]) for i in range(start, end)]
        except BaseException as error:
            errors.append(error)

    threads = [
        threading.Thread(target=run_batch, args=(i,)) for i in range(num_threads)
    ]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    if errors:
        raise errors[0]
    return sum(result_lists, [])


def shard_config(cfg: GnnConfig, shard: int) -> GnnConfig:
    """The training settings of one shard; every shard gets its own seed."""

    return cfg.model_copy(update={"seed": cfg.seed + shard})


def train_shard(shard_graph: Graph, cfg: GnnConfig, shard: int) -> ShardModel:
    """
    Trains the model of one shard from scratch.

    An empty shard gets a model whose posterior is uniform everywhere.
    """

    shard_cfg = shard_config(cfg, shard)
    stub = shard_graph.n == 0
    if stub:
        logger.warning("shard %d is empty, using a uniform model", shard)
        model = GnnModel.uniform_stub(
            shard_cfg, shard_graph.feature_dim, shard_graph.num_classes
        )
    else:
        model = train(shard_graph, shard_cfg)
    return ShardModel(
        shard=shard,
        seed=shard_cfg.seed,
        graph_fingerprint=shard_graph.fingerprint(),
        nodes=[int(u) for u in shard_graph.origin],
        stub=stub,
        model=model,
    )


def train_shards(
    shard_graphs: Sequence[Graph], cfg: GnnConfig, workers: int = 0
) -> list[ShardModel]:
    """Trains every shard model, concurrently on independent data."""

    return _threaded_map(
        lambda shard: train_shard(shard_graphs[shard], cfg, shard),
        range(len(shard_graphs)),
        workers,
    )


def shard_graphs_of(g_train: Graph, assignment: ShardAssignment) -> list[Graph]:
    return [
        induced_subgraph(g_train, assignment.members(i))[0]
        for i in range(assignment.k)
    ]


def build(g: Graph, split: NodeSplit, cfg: EraserConfig) -> EraserState:
    """
    Partitions the training nodes, trains one model per shard and fits scores.

    Args:
        g: The full graph.
        split: Which nodes of ``g`` are training nodes.
        cfg: The pipeline settings.

    Returns:
        The built state.

    Raises:
        InfeasiblePartitionError: The partition settings cannot hold the
            training nodes.

    """

    start = perf_counter()
    g_train, _ = induced_subgraph(g, split.train_nodes)
    embeddings = None
    if cfg.partition.method == "bekm":
        embeddings = node_embeddings(g_train, cfg.gnn)
    assignment = partition(g_train, embeddings, cfg.partition)
    shard_graphs = shard_graphs_of(g_train, assignment)
    shard_models = train_shards(shard_graphs, cfg.gnn, cfg.workers)
    state = EraserState(
        config=cfg,
        graph=g,
        g_train=g_train,
        assignment=assignment,
        shard_graphs=shard_graphs,
        shard_models=shard_models,
    )
    if cfg.fit_scores:
        state = state.model_copy(update={"scores": fit_state_scores(state)})
    logger.info(
        "built %d %s shards over %d training nodes in %.2fs",
        assignment.k,
        assignment.method,
        g_train.n,
        perf_counter() - start,
    )
    return state


def fit_state_scores(state: EraserState) -> ImportanceScores:
    """Fits importance scores using the state's inference policy."""

    return opt_aggr_train(
        [record.model for record in state.shard_models],
        state.g_train,
        state.config.aggregation,
        posteriors=lambda nodes: shard_posteriors(state, state.g_train.origin[nodes]),
    )


def inference_inputs(
    state: EraserState, query_roots: Iterable[int]
) -> list[tuple[Graph, np.ndarray]]:
    """
    The graph each shard model reads to score a batch of query nodes.

    Every query is scored on its own input graph, so a posterior never depends
    on which other nodes share the batch. Under ``shard-local`` shard ``i``
    scores query ``w`` on the subgraph induced by its training nodes, ``w``
    and the non-training neighbors of ``w``. Under ``global-ego`` every shard
    scores ``w`` on its ego network in the current graph.

    The per-query graphs of a shard are packed into one disjoint union. Under
    ``shard-local`` each part is cut down to the ``layers + 1`` hop ego
    network of its query: that is everything a ``layers`` deep model reads
    from the induced subgraph, neighbor degrees included.

    Returns:
        Per shard, the input graph and the positions of the queries in it.

    Raises:
        GraphError: A query node is not part of the current graph.

    """

    graph = state.graph
    query = graph.index_of(query_roots)
    layers = state.config.gnn.layers
    if not query.size:
        empty, _ = induced_subgraph(graph, [])
        return [(empty, query)] * state.k

    if state.config.inference_policy == "global-ego":
        parts = [
            induced_subgraph(graph, ego_nodes(graph, [q], layers)) for q in query
        ]
        union, positions = _pack(parts, query)
        return [(union, positions)] * state.k

    train_mask = state.train_mask()
    inputs = []
    for shard in range(state.k):
        allowed = np.zeros(graph.n, dtype=bool)
        allowed[graph.index_of(state.shard_graphs[shard].origin)] = True
        parts = []
        for q in query:
            within = allowed.copy()
            neighbors = graph.neighbors(int(q))
            within[neighbors[~train_mask[neighbors]]] = True
            within[q] = True
            nodes = ego_nodes(graph, [q], layers + 1, within=within)
            parts.append(induced_subgraph(graph, nodes))
        inputs.append(_pack(parts, query))
    return inputs


def _pack(
    parts: list[tuple[Graph, IdMap]], query: np.ndarray
) -> tuple[Graph, np.ndarray]:
    union, offsets = disjoint_union([part for part, _ in parts])
    local = [index[int(q)] for (_, index), q in zip(parts, query)]
    return union, offsets + np.array(local, dtype=np.int64)


def shard_posteriors(state: EraserState, query_roots: Iterable[int]) -> ShardPosteriors:
    """Runs every shard model on the query nodes."""

    inputs = inference_inputs(state, query_roots)
    matrices = _threaded_map(
        lambda shard: forward(state.shard_models[shard].model, *inputs[shard]),
        range(state.k),
        state.config.workers,
    )
    return ShardPosteriors.stack(matrices)


def aggregate_labels(
    sp: ShardPosteriors, mode: AggregationMode, scores: Optional[ImportanceScores]
) -> np.ndarray:
    if mode == "mean":
        return mean_aggr(sp).argmax(axis=-1)
    if mode == "majority":
        return maj_aggr(sp)
    if scores is None:
        raise UnlearnError("no importance scores were fit; build with fit_scores")
    return weighted_predict(sp, scores)


def predict(
    state: EraserState, query_roots: Iterable[int], mode: AggregationMode = "optimal"
) -> np.ndarray:
    """
    Predicts the label of every query node.

    Args:
        state: The sharded model.
        query_roots: Root ids of the nodes to classify.
        mode: How shard posteriors are combined.

    Returns:
        One label per query node.

    Raises:
        UnlearnError: ``mode`` is ``optimal`` but no scores were fit.

    """

    return aggregate_labels(shard_posteriors(state, query_roots), mode, state.scores)


def evaluate(
    state: EraserState,
    query_roots: Iterable[int],
    mode: AggregationMode = "optimal",
    average: Average = "micro",
) -> float:
    """The F1 score of `predict` on the given nodes."""

    roots = np.fromiter((int(r) for r in query_roots), dtype=np.int64)
    labels = state.graph.y[state.graph.index_of(roots)]
    return f1_score(predict(state, roots, mode), labels, average)


def unlearn(
    state: EraserState, req: UnlearnRequest
) -> tuple[EraserState, UnlearnReport]:
    """
    Forgets a training node or an edge between training nodes.

    A node is removed from every graph and its shard model is retrained from
    scratch with the shard's original settings. An edge inside one shard
    triggers the same retraining; an edge across shards was never seen by a
    shard model and only leaves the stored graphs. Importance scores are
    refit when a removed node, or an endpoint of a removed edge, was used to
    fit them, or when the shard became empty.

    Returns:
        The new state and the report of what was retrained.

    Raises:
        GraphError: The node or edge does not exist.
        UnlearnError: The request names a test node.

    """

    start = perf_counter()
    roots = req.nodes
    for root in roots:
        if not state.graph.contains_root(root):
            raise GraphError(f"node {root} is not in the graph")
        if not state.g_train.contains_root(root):
            raise UnlearnError(
                f"node {root} is a test node; only training data can be unlearned"
            )

    if req.kind == "node":
        update, shard = _remove_node(state, req.u)
    else:
        update, shard = _remove_edge(state, *roots)

    shard_graphs = update.get("shard_graphs", state.shard_graphs)
    shard_models = list(state.shard_models)
    retrain_seconds = 0.0
    became_empty = False
    if shard is not None:
        retrain_start = perf_counter()
        shard_models[shard] = train_shard(shard_graphs[shard], state.config.gnn, shard)
        retrain_seconds = perf_counter() - retrain_start
        became_empty = shard_models[shard].stub and not state.shard_models[shard].stub
    update["shard_models"] = shard_models
    update["deletions"] = [*state.deletions, req]
    new_state = state.model_copy(update=update)

    scores_retrained = state.scores is not None and (
        became_empty or any(r in state.scores.score_train_nodes for r in roots)
    )
    scores_seconds = 0.0
    if scores_retrained:
        scores_start = perf_counter()
        new_state = new_state.model_copy(update={"scores": fit_state_scores(new_state)})
        scores_seconds = perf_counter() - scores_start

    report = UnlearnReport(
        request=req,
        affected_shard=shard,
        retrain_seconds=retrain_seconds,
        scores_retrained=scores_retrained,
        scores_retrain_seconds=scores_seconds,
        total_seconds=perf_counter() - start,
    )
    logger.info(
        "unlearned %s: shard %s retrained in %.3fs%s",
        req,
        shard,
        retrain_seconds,
        ", scores refit" if scores_retrained else "",
    )
    return new_state, report


def _remove_node(state: EraserState, root: int) -> tuple[dict, int]:
    position = int(state.g_train.index_of([root])[0])
    shard = state.assignment.shard_of(position)
    shard_graph = state.shard_graphs[shard]
    shard_graphs = list(state.shard_graphs)
    local = int(shard_graph.index_of([root])[0])
    shard_graphs[shard], _ = delete_node(shard_graph, local)
    graph, _ = delete_node(state.graph, int(state.graph.index_of([root])[0]))
    g_train, _ = delete_node(state.g_train, position)
    return {
        "graph": graph,
        "g_train": g_train,
        "assignment": state.assignment.without(position),
        "shard_graphs": shard_graphs,
    }, shard


def _remove_edge(state: EraserState, u: int, v: int) -> tuple[dict, Optional[int]]:
    gu, gv = state.graph.index_of([u, v])
    if not state.graph.has_edge(int(gu), int(gv)):
        raise GraphError(f"edge ({u}, {v}) is not in the graph")
    tu, tv = state.g_train.index_of([u, v])
    update: dict = {
        "graph": delete_edge(state.graph, int(gu), int(gv)),
        "g_train": delete_edge(state.g_train, int(tu), int(tv)),
    }
    shard = state.assignment.shard_of(int(tu))
    if shard != state.assignment.shard_of(int(tv)):
        return update, None
    shard_graph = state.shard_graphs[shard]
    su, sv = shard_graph.index_of([u, v])
    shard_graphs = list(state.shard_graphs)
    shard_graphs[shard] = delete_edge(shard_graph, int(su), int(sv))
    update["shard_graphs"] = shard_graphs
    return update, shard


def audit(state: EraserState) -> AuditReport:
    """
    Verifies every structural invariant of a state.

    Checks that the stored graphs are well formed, that the training graph is
    the induced subgraph of the full graph on the training nodes, that the
    shards cover it without exceeding their capacity, that every shard graph is
    the induced subgraph of its shard, that every model was trained on its
    current shard graph, that no deleted node or edge survives anywhere, and
    that the importance scores are valid and only reference current training
    nodes.

    Returns:
        Pass or fail per check, with the problems found.

    """

    problems: dict[str, list[str]] = {
        "graphs_well_formed": [],
        "train_subgraph": [],
        "shards_cover": [],
        "shard_graphs": [],
        "models_fresh": [],
        "deletions_absent": [],
        "scores_valid": [],
    }

    graphs = {"graph": state.graph, "g_train": state.g_train}
    graphs.update({f"shard {i}": g for i, g in enumerate(state.shard_graphs)})
    for name, g in graphs.items():
        problems["graphs_well_formed"] += [f"{name}: {p}" for p in g.check_invariants()]

    train_roots = state.g_train.origin
    if not all(state.graph.contains_root(r) for r in train_roots):
        problems["train_subgraph"].append("training node missing from the full graph")
    else:
        expected, _ = induced_subgraph(state.graph, state.graph.index_of(train_roots))
        if expected.fingerprint() != state.g_train.fingerprint():
            problems["train_subgraph"].append(
                "g_train differs from the induced subgraph"
            )

    assignment = state.assignment
    if assignment.n != state.g_train.n:
        problems["shards_cover"].append(
            f"assignment covers {assignment.n} of {state.g_train.n} training nodes"
        )
    elif not assignment.is_balanced():
        problems["shards_cover"].append(
            f"a shard exceeds its capacity {assignment.delta}"
        )
    if {len(state.shard_graphs), len(state.shard_models)} != {assignment.k}:
        problems["shards_cover"].append("shard graph or model count differs from k")

    if not problems["shards_cover"]:
        for i, (expected, record) in enumerate(
            zip(shard_graphs_of(state.g_train, assignment), state.shard_models)
        ):
            current = state.shard_graphs[i].fingerprint()
            if expected.fingerprint() != current:
                problems["shard_graphs"].append(
                    f"shard {i} graph is not its induced subgraph"
                )
            if record.graph_fingerprint != current or record.shard != i:
                problems["models_fresh"].append(
                    f"shard {i} model was trained on other data"
                )

    stored = [state.graph, state.g_train, *state.shard_graphs]
    for req in state.deletions:
        if req.kind == "node":
            if any(g.contains_root(req.u) for g in stored) or any(
                req.u in record.nodes for record in state.shard_models
            ):
                problems["deletions_absent"].append(f"deleted {req} still present")
        else:
            for g in stored:
                if all(g.contains_root(r) for r in req.nodes):
                    a, b = g.index_of(req.nodes)
                    if g.has_edge(int(a), int(b)):
                        problems["deletions_absent"].append(
                            f"deleted {req} still present"
                        )
                        break

    if state.scores is not None:
        if state.scores.m != assignment.k:
            problems["scores_valid"].append(
                f"{state.scores.m} importance scores for {assignment.k} shards"
            )
        stale = [
            u
            for u in state.scores.score_train_nodes
            if not state.g_train.contains_root(u)
        ]
        if stale:
            problems["scores_valid"].append(f"scores were fit on removed nodes {stale}")

    return AuditReport(
        checks={name: not found for name, found in problems.items()},
        problems={name: found for name, found in problems.items() if found},
    )
