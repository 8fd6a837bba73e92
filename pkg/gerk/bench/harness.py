"""
Benchmark commands: unlearning efficiency, utility, aggregator comparison,
shard-count and request-count sweeps, the MLP-gap guideline, and the
per-shard score correlation.

Every command takes a `BenchConfig`, derives all seeds from it and returns a
`BenchReport` embedding that config. Only timing fields vary between runs.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from time import perf_counter
from typing import Callable, Iterable, Optional, Sequence, TypeVar

import numpy as np
from scipy.stats import spearmanr
from tqdm import tqdm

from ..aggregation import AggregationMode
from ..errors import AuditError, GerkError
from ..gnn import Aggregator, GnnModel, f1_score, forward, mlp_f1, train, train_mlp
from ..gnn.metrics import Average
from ..graph import (
    Graph,
    NodeSplit,
    delete_edge,
    delete_node,
    induced_subgraph,
    split_train_test,
)
from ..partition import PartitionMethod, shard_size_summary
from ..unlearn import (
    EraserState,
    UnlearnRequest,
    aggregate_labels,
    audit,
    build,
    inference_inputs,
    shard_posteriors,
    unlearn,
)
from .config import BenchConfig
from .report import BenchReport, MethodResult, ShardRow, environment_stamp

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

SCRATCH = "scratch"
MLP = "mlp"


def _new_report(command: str, cfg: BenchConfig, **fields: object) -> BenchReport:
    return BenchReport(
        command=command,
        config=cfg.model_dump(mode="json"),
        environment=environment_stamp(),
        **fields,  # type: ignore[arg-type]
    )


def _run_cells(
    fn: Callable[[T], R], cells: Sequence[T], cfg: BenchConfig, desc: str, quiet: bool
) -> list[R]:
    """Runs cells on a thread pool behind a progress bar, keeping their order."""

    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        return list(
            tqdm(pool.map(fn, cells), total=len(cells), desc=desc, disable=quiet)
        )


def _merge(rows: Iterable[MethodResult]) -> list[MethodResult]:
    """Folds cells sharing a method, mode, k and swept value into one cell."""

    merged: dict[tuple, MethodResult] = {}
    for row in rows:
        key = (row.method, row.mode, row.k, row.param)
        first = merged.get(key)
        if first is None:
            merged[key] = row
            continue
        merged[key] = first.model_copy(
            update={
                "f1_values": first.f1_values + row.f1_values,
                "unlearn_seconds": first.unlearn_seconds + row.unlearn_seconds,
                "scratch_timings": first.scratch_timings + row.scratch_timings,
                "scratch_extrapolated": first.scratch_extrapolated
                or row.scratch_extrapolated,
                "model_hashes": first.model_hashes + row.model_hashes,
                "error": first.error or row.error,
            }
        )
    return list(merged.values())


def _dataset(cfg: BenchConfig, rep: int) -> tuple[Graph, NodeSplit]:
    seed = cfg.repetition_seed(rep)
    g = cfg.dataset.load(seed)
    return g, split_train_test(g, cfg.train_ratio, seed, cfg.stratify)


def _models_hash(state: EraserState) -> str:
    return ":".join(record.model.parameter_hash()[:16] for record in state.shard_models)


def _test_roots(g: Graph, split: NodeSplit) -> np.ndarray:
    return g.origin[split.test_nodes]


def state_f1(
    state: EraserState,
    roots: np.ndarray,
    modes: Iterable[AggregationMode],
    average: Average = "micro",
) -> dict[str, float]:
    """Scores a state under several aggregation modes from one posterior pass."""

    sp = shard_posteriors(state, roots)
    labels = state.graph.y[state.graph.index_of(roots)]
    return {
        mode: f1_score(aggregate_labels(sp, mode, state.scores), labels, average)
        for mode in modes
    }


def scratch_model(
    g: Graph, split: NodeSplit, cfg: BenchConfig, rep: int
) -> tuple[GnnModel, float]:
    """
    Trains one model on every training node and scores it on the test nodes.

    The model reads the full graph at prediction time.
    """

    g_train, _ = induced_subgraph(g, split.train_nodes)
    model = train(g_train, cfg.eraser_config("random", rep).gnn)
    predictions = forward(model, g, split.test_nodes).argmax(axis=-1)
    return model, f1_score(predictions, g.y[split.test_nodes], cfg.average)


def sample_requests(
    state: EraserState, count: int, kind: str, seed: int
) -> list[UnlearnRequest]:
    """
    Draws distinct unlearning requests over the current training graph.

    Node requests name training nodes and edge requests edges between
    training nodes. At most as many requests as there are candidates are
    returned.
    """

    rng = np.random.default_rng(seed)
    g_train = state.g_train
    if kind == "node":
        count = min(count, g_train.n)
        roots = rng.choice(g_train.origin, size=count, replace=False)
        return [UnlearnRequest(kind="node", u=int(u)) for u in roots]
    edges = g_train.origin[g_train.edge_array()]
    count = min(count, edges.shape[0])
    picked = edges[rng.choice(edges.shape[0], size=count, replace=False)]
    return [UnlearnRequest(kind="edge", u=int(u), v=int(v)) for u, v in picked]


def _apply(g_train: Graph, req: UnlearnRequest) -> Graph:
    if req.kind == "node":
        return delete_node(g_train, int(g_train.index_of([req.u])[0]))[0]
    u, v = g_train.index_of(req.nodes)
    return delete_edge(g_train, int(u), int(v))


def time_scratch(
    state: EraserState, requests: Sequence[UnlearnRequest], sample: int
) -> tuple[float, bool]:
    """
    Mean time of retraining one model on the whole reduced training graph.

    The first ``sample`` requests are applied cumulatively and each is
    followed by a full retrain; their mean stands in for every request.

    Returns:
        The mean seconds, and whether fewer requests were timed than given.

    """

    g_train = state.g_train
    cfg = state.config.gnn
    timings = []
    for req in requests[:sample]:
        g_train = _apply(g_train, req)
        start = perf_counter()
        train(g_train, cfg)
        timings.append(perf_counter() - start)
    return float(np.mean(timings)), len(timings) < len(requests)


def run_requests(
    state: EraserState, requests: Iterable[UnlearnRequest]
) -> tuple[EraserState, list[float]]:
    """Services requests in order; returns the unlearning time of each."""

    seconds = []
    for req in requests:
        state, report = unlearn(state, req)
        seconds.append(report.retrain_seconds + report.scores_retrain_seconds)
    return state, seconds


def _error_row(
    method: str, error: GerkError, k: int, param: Optional[int] = None
) -> MethodResult:
    logger.warning("%s cell failed: %s", method, error)
    return MethodResult(method=method, k=k, param=param, error=str(error))


def cmd_bench_unlearn(cfg: BenchConfig, quiet: bool = False) -> BenchReport:
    """
    Measures the average unlearning time of every partition method against
    retraining a single model from scratch.

    Every repetition builds each method once, samples ``n_requests`` requests
    from its training graph with the repetition's seed and services them in
    order. The scratch baseline retrains on the reduced training graph for the
    first ``scratch_sample`` of those requests and extrapolates.
    """

    def run(rep: int) -> list[MethodResult]:
        g, split = _dataset(cfg, rep)
        seed = cfg.repetition_seed(rep)
        rows = []
        for method in cfg.methods:
            try:
                state = build(g, split, cfg.eraser_config(method, rep))
            except GerkError as error:
                rows.append(_error_row(method, error, k=cfg.k))
                continue
            f1 = state_f1(state, _test_roots(g, split), cfg.modes[:1], cfg.average)
            requests = sample_requests(state, cfg.n_requests, cfg.request_kind, seed)
            scratch, extrapolated = time_scratch(state, requests, cfg.scratch_sample)
            _, seconds = run_requests(state, requests)
            rows.append(
                MethodResult(
                    method=method,
                    mode=cfg.modes[0],
                    k=cfg.k,
                    f1_values=list(f1.values()),
                    unlearn_seconds=[float(np.mean(seconds))],
                    scratch_timings=[scratch],
                    scratch_extrapolated=extrapolated,
                    model_hashes=[_models_hash(state)],
                    shard_sizes=shard_size_summary(state.assignment),
                )
            )
        return rows

    cells = _run_cells(run, range(cfg.repetitions), cfg, "bench-unlearn", quiet)
    return _new_report("bench-unlearn", cfg, results=_merge(sum(cells, [])))


def _utility_rows(
    cfg: BenchConfig,
    rep: int,
    methods: Sequence[PartitionMethod],
    modes: Sequence[AggregationMode],
    with_scratch: bool,
) -> list[MethodResult]:
    g, split = _dataset(cfg, rep)
    test = _test_roots(g, split)
    rows = []
    if with_scratch:
        model, f1 = scratch_model(g, split, cfg, rep)
        rows.append(
            MethodResult(
                method=SCRATCH,
                k=1,
                f1_values=[f1],
                model_hashes=[model.parameter_hash()],
            )
        )
    for method in methods:
        try:
            state = build(g, split, cfg.eraser_config(method, rep))
        except GerkError as error:
            rows.append(_error_row(method, error, k=cfg.k))
            continue
        digest = _models_hash(state)
        sizes = shard_size_summary(state.assignment)
        for mode, f1 in state_f1(state, test, modes, cfg.average).items():
            rows.append(
                MethodResult(
                    method=method,
                    mode=mode,
                    k=cfg.k,
                    f1_values=[f1],
                    model_hashes=[digest],
                    shard_sizes=sizes,
                )
            )
    return rows


def cmd_eval_utility(cfg: BenchConfig, quiet: bool = False) -> BenchReport:
    """
    Test F1 of the scratch model and of every partition method under every
    configured aggregation mode, with identical seeds per repetition.
    """

    cells = _run_cells(
        lambda rep: _utility_rows(cfg, rep, cfg.methods, cfg.modes, with_scratch=True),
        range(cfg.repetitions),
        cfg,
        "eval-utility",
        quiet,
    )
    return _new_report("eval-utility", cfg, results=_merge(sum(cells, [])))


def cmd_compare_aggregators(cfg: BenchConfig, quiet: bool = False) -> BenchReport:
    """
    Evaluates mean, majority and learned-score aggregation on the same shard
    models for every partition method.

    Within one repetition the three modes share one build, so their
    ``model_hashes`` agree.
    """

    modes: list[AggregationMode] = ["mean", "majority", "optimal"]
    cells = _run_cells(
        lambda rep: _utility_rows(cfg, rep, cfg.methods, modes, with_scratch=False),
        range(cfg.repetitions),
        cfg,
        "compare-agg",
        quiet,
    )
    return _new_report("compare-agg", cfg, results=_merge(sum(cells, [])))


def cmd_sweep_shards(
    cfg: BenchConfig, k_list: Optional[Sequence[int]] = None, quiet: bool = False
) -> BenchReport:
    """
    Unlearning time and F1 of every partition method for every shard count.

    Cells whose shard count cannot hold the training nodes are reported with
    their error instead of aborting the sweep.
    """

    k_values = sorted(k_list or cfg.k_list)

    def run(cell: tuple[int, int]) -> list[MethodResult]:
        k, rep = cell
        g, split = _dataset(cfg, rep)
        rows = []
        for method in cfg.methods:
            try:
                state = build(g, split, cfg.eraser_config(method, rep, k))
            except GerkError as error:
                rows.append(_error_row(method, error, k=k, param=k))
                continue
            f1 = state_f1(state, _test_roots(g, split), cfg.modes[:1], cfg.average)
            requests = sample_requests(
                state, cfg.n_requests, cfg.request_kind, cfg.repetition_seed(rep)
            )
            _, seconds = run_requests(state, requests)
            rows.append(
                MethodResult(
                    method=method,
                    mode=cfg.modes[0],
                    k=k,
                    param=k,
                    f1_values=list(f1.values()),
                    unlearn_seconds=[float(np.mean(seconds))],
                    model_hashes=[_models_hash(state)],
                    shard_sizes=shard_size_summary(state.assignment),
                )
            )
        return rows

    cells = [(k, rep) for k in k_values for rep in range(cfg.repetitions)]
    results = _run_cells(run, cells, cfg, "sweep-shards", quiet)
    return _new_report("sweep-shards", cfg, results=_merge(sum(results, [])))


def cmd_sweep_requests(
    cfg: BenchConfig, counts: Optional[Sequence[int]] = None, quiet: bool = False
) -> BenchReport:
    """
    Test F1 after cumulatively unlearning growing numbers of nodes or edges.

    The state is audited after every batch of requests.

    Raises:
        AuditError: An audit failed.

    """

    steps = sorted(set(counts or cfg.request_counts))

    def run(rep: int) -> list[MethodResult]:
        g, split = _dataset(cfg, rep)
        test = _test_roots(g, split)
        rows = []
        for method in cfg.methods:
            try:
                state = build(g, split, cfg.eraser_config(method, rep))
            except GerkError as error:
                rows.append(_error_row(method, error, k=cfg.k))
                continue
            requests = sample_requests(
                state, steps[-1], cfg.request_kind, cfg.repetition_seed(rep)
            )
            done = 0
            for count in steps:
                state, seconds = run_requests(state, requests[done:count])
                done = count
                report = audit(state)
                if not report.passed:
                    raise AuditError(
                        f"audit failed after {count} {cfg.request_kind} requests: "
                        f"{report.problems}"
                    )
                f1 = state_f1(state, test, cfg.modes[:1], cfg.average)
                rows.append(
                    MethodResult(
                        method=method,
                        mode=cfg.modes[0],
                        k=cfg.k,
                        param=count,
                        f1_values=list(f1.values()),
                        unlearn_seconds=[float(np.mean(seconds))] if seconds else [],
                    )
                )
        return rows

    results = _run_cells(run, range(cfg.repetitions), cfg, "sweep-requests", quiet)
    return _new_report("sweep-requests", cfg, results=_merge(sum(results, [])))


def recommend(gap: float, aggregator: Aggregator, threshold: float) -> PartitionMethod:
    """
    Picks a partition method from the GNN-over-MLP F1 gap.

    A small gap means the features carry the signal, so structure-preserving
    partitions buy nothing and random partitioning is chosen. Otherwise BLPA
    is chosen for GCN models and BEKM for every other aggregator.
    """

    if gap < threshold:
        return "random"
    return "blpa" if aggregator == Aggregator.GCN else "bekm"


def cmd_guideline(cfg: BenchConfig, quiet: bool = False) -> BenchReport:
    """Compares a feature-only MLP with the scratch GNN and recommends a method."""

    def run(rep: int) -> list[MethodResult]:
        g, split = _dataset(cfg, rep)
        g_train, _ = induced_subgraph(g, split.train_nodes)
        gnn_cfg = cfg.eraser_config("random", rep).gnn
        mlp = train_mlp(
            g_train,
            epochs=gnn_cfg.epochs,
            lr=gnn_cfg.learning_rate,
            seed=gnn_cfg.seed,
            hidden_dim=cfg.mlp_hidden_dim,
            weight_decay=gnn_cfg.weight_decay,
            max_grad_norm=gnn_cfg.max_grad_norm,
        )
        _, gnn_f1 = scratch_model(g, split, cfg, rep)
        return [
            MethodResult(
                method=MLP, f1_values=[mlp_f1(mlp, g, split.test_nodes, cfg.average)]
            ),
            MethodResult(method=SCRATCH, k=1, f1_values=[gnn_f1]),
        ]

    cells = _run_cells(run, range(cfg.repetitions), cfg, "guideline", quiet)
    results = _merge(sum(cells, []))
    mlp_mean = next(r.f1_mean for r in results if r.method == MLP)
    gnn_mean = next(r.f1_mean for r in results if r.method == SCRATCH)
    gap = float(gnn_mean) - float(mlp_mean)  # type: ignore[arg-type]
    choice = recommend(gap, cfg.gnn.aggregator, cfg.guideline_threshold)
    logger.info("GNN-MLP F1 gap %.4f: recommending %s", gap, choice)
    return _new_report(
        "guideline",
        cfg,
        results=results,
        recommendation={
            "mlp_f1": mlp_mean,
            "gnn_f1": gnn_mean,
            "gap": gap,
            "threshold": cfg.guideline_threshold,
            "aggregator": cfg.gnn.aggregator.value,
            "recommendation": choice,
        },
    )


def score_correlation(
    state: EraserState, query_roots: np.ndarray, average: Average = "micro"
) -> tuple[list[ShardRow], Optional[float]]:
    """
    Per shard: its size, the F1 of its model alone, and its importance score.

    Returns:
        One row per shard, and the Spearman rank correlation between shard F1
        and importance score (None when either column is constant).

    Raises:
        ValueError: The state has no importance scores.

    """

    if state.scores is None:
        raise ValueError("the state has no importance scores")
    labels = state.graph.y[state.graph.index_of(query_roots)]
    rows = []
    for shard, (graph, local) in enumerate(inference_inputs(state, query_roots)):
        model = state.shard_models[shard].model
        predictions = forward(model, graph, local).argmax(axis=-1)
        rows.append(
            ShardRow(
                shard=shard,
                size=state.shard_graphs[shard].n,
                f1=f1_score(predictions, labels, average),
                alpha=state.scores.alpha[shard],
            )
        )
    f1s = [row.f1 for row in rows]
    alphas = [row.alpha for row in rows]
    if len(set(f1s)) < 2 or len(set(alphas)) < 2:
        return rows, None
    rho = spearmanr(f1s, alphas).statistic
    return rows, None if np.isnan(rho) else float(rho)


def cmd_score_correlation(
    cfg: BenchConfig, state: Optional[EraserState] = None, quiet: bool = False
) -> BenchReport:
    """
    Reports shard F1 against importance score for one built state.

    Without a state, the first configured method is built on repetition 0.
    """

    if state is None:
        g, split = _dataset(cfg, 0)
        eraser_cfg = cfg.eraser_config(cfg.methods[0], 0).model_copy(
            update={"fit_scores": True}
        )
        state = build(g, split, eraser_cfg)
    rows, rho = score_correlation(state, state.test_nodes(), cfg.average)
    return _new_report("score-corr", cfg, shards=rows, rank_correlation=rho)
