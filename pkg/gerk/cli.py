"""The ``gerk`` command line.

Exit codes: 0 on success, 2 for invalid configuration, 3 for failed audits,
1 for any other error raised by gerk.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Optional, Sequence

import numpy as np
from pydantic import ValidationError

from .bench import (
    BenchConfig,
    BenchReport,
    cmd_bench_unlearn,
    cmd_compare_aggregators,
    cmd_eval_utility,
    cmd_guideline,
    cmd_score_correlation,
    cmd_sweep_requests,
    cmd_sweep_shards,
    load_config_file,
    load_report,
    plot_report,
    write_report,
)
from .errors import ConfigError, GerkError
from .gnn import GnnConfig, f1_score, forward, node_embeddings, save_model, train
from .graph import (
    SbmSpec,
    export_graph,
    generate_sbm,
    induced_subgraph,
    load_graph,
    load_graph_snapshot,
    save_graph,
    split_train_test,
)
from .partition import PartitionConfig, partition, shard_size_summary

logger = logging.getLogger("gerk")

BENCH_COMMANDS: dict[str, Callable[[BenchConfig, bool], BenchReport]] = {
    "bench-unlearn": lambda cfg, quiet: cmd_bench_unlearn(cfg, quiet=quiet),
    "eval-utility": lambda cfg, quiet: cmd_eval_utility(cfg, quiet=quiet),
    "compare-agg": lambda cfg, quiet: cmd_compare_aggregators(cfg, quiet=quiet),
    "sweep-shards": lambda cfg, quiet: cmd_sweep_shards(cfg, quiet=quiet),
    "sweep-requests": lambda cfg, quiet: cmd_sweep_requests(cfg, quiet=quiet),
    "guideline": lambda cfg, quiet: cmd_guideline(cfg, quiet=quiet),
    "score-corr": lambda cfg, quiet: cmd_score_correlation(cfg, quiet=quiet),
}


def _int_list(text: str) -> list[int]:
    try:
        return [int(item) for item in text.split(",") if item]
    except ValueError as error:
        raise argparse.ArgumentTypeError(
            f"expected comma separated integers: {text}"
        ) from error


def _str_list(text: str) -> list[str]:
    return [item for item in text.split(",") if item]


def _add_sbm_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("stochastic block model")
    group.add_argument(
        "--sbm-blocks", type=_int_list, help="Block sizes, e.g. 250,250,250,250."
    )
    group.add_argument("--p-in", type=float, help="Within-block edge probability.")
    group.add_argument("--p-out", type=float, help="Cross-block edge probability.")
    group.add_argument("--feature-dim", type=int)
    group.add_argument("--feature-noise", type=float)
    group.add_argument("--centroid-scale", type=float)
    group.add_argument(
        "--random-labels",
        action="store_true",
        default=None,
        help="Draw labels at random instead of using block ids.",
    )


def _add_gnn_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("model")
    group.add_argument("--aggregator", choices=["GIN", "SAGE", "GCN", "GAT"])
    group.add_argument("--updater", choices=["linear", "concat", "interpolation"])
    group.add_argument("--layers", type=int)
    group.add_argument("--hidden-dim", type=int)
    group.add_argument("--epochs", type=int)
    group.add_argument("--lr", type=float, dest="learning_rate")
    group.add_argument("--weight-decay", type=float)
    group.add_argument("--optimizer", choices=["sgd", "adam"])
    group.add_argument(
        "--gat-leaky",
        action="store_true",
        default=None,
        help="Apply a leaky rectifier to GAT attention logits.",
    )


def _add_partition_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("partition tuning")
    group.add_argument(
        "--blpa-strict-improve",
        action="store_true",
        default=None,
        help="BLPA only moves a node into a shard holding strictly more of its "
        "neighbors.",
    )
    group.add_argument(
        "--bekm-tol", type=float, help="BEKM centroid displacement at convergence."
    )


def _partition_flags(args: argparse.Namespace) -> dict[str, Any]:
    return _prune(
        {
            "blpa_strict_improve": args.blpa_strict_improve,
            "bekm_tol": args.bekm_tol,
        }
    )


def _add_dataset_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("dataset")
    group.add_argument("--graph", help="A gerk-graph-v1 snapshot.")
    group.add_argument("--nodes", help="Node CSV file.")
    group.add_argument("--edges", help="Edge list file.")
    group.add_argument("--num-classes", type=int)
    _add_sbm_flags(parser)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gerk",
        description="Sharded graph unlearning: partition, train, unlearn, benchmark.",
    )
    parser.add_argument(
        "-v", "--verbose", action="store_true", help="Log debug detail."
    )
    parser.add_argument(
        "-q",
        "--quiet",
        action="store_true",
        help="Only log warnings; no progress bars.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    ingest = commands.add_parser(
        "ingest", help="Convert node/edge files to a snapshot."
    )
    ingest.add_argument("--nodes", required=True)
    ingest.add_argument("--edges", required=True)
    ingest.add_argument("--num-classes", type=int)
    ingest.add_argument("--out", required=True, help="Snapshot file to write.")

    sbm = commands.add_parser("sbm", help="Generate a stochastic block model graph.")
    _add_sbm_flags(sbm)
    sbm.add_argument("--seed", type=int, default=0)
    sbm.add_argument("--out", required=True, help="Snapshot file to write.")
    sbm.add_argument("--export", help="Also write nodes.csv and edges.txt here.")

    part = commands.add_parser("partition", help="Partition a graph's training nodes.")
    part.add_argument("--graph", required=True)
    part.add_argument("--method", choices=["random", "blpa", "bekm"], default="blpa")
    part.add_argument("--k", type=int, default=10)
    part.add_argument("--gamma", type=float, default=1.0)
    part.add_argument("--max-iterations", type=int, default=30)
    part.add_argument("--train-ratio", type=float, default=0.8)
    part.add_argument("--seed", type=int, default=0)
    _add_partition_flags(part)
    _add_gnn_flags(part)
    part.add_argument("--out", required=True, help="Assignment JSON to write.")

    trn = commands.add_parser(
        "train", help="Train one model on a graph's training nodes."
    )
    trn.add_argument("--graph", required=True)
    trn.add_argument("--train-ratio", type=float, default=0.8)
    trn.add_argument("--seed", type=int, default=0)
    _add_gnn_flags(trn)
    trn.add_argument("--out", required=True, help="Model file to write.")

    for name in BENCH_COMMANDS:
        cmd = commands.add_parser(name, help=f"Run the {name} benchmark.")
        cmd.add_argument(
            "--config", help="TOML or JSON file; its values override flags."
        )
        _add_dataset_flags(cmd)
        _add_gnn_flags(cmd)
        cmd.add_argument("--methods", type=_str_list, help="e.g. random,blpa,bekm")
        cmd.add_argument("--modes", type=_str_list, help="e.g. mean,majority,optimal")
        cmd.add_argument("--k", type=int)
        cmd.add_argument("--gamma", type=float)
        cmd.add_argument("--max-iterations", type=int)
        _add_partition_flags(cmd)
        cmd.add_argument("--policy", choices=["shard-local", "global-ego"])
        cmd.add_argument("--lam", type=float, help="Importance-score l1 weight.")
        cmd.add_argument("--subset-frac", type=float)
        cmd.add_argument(
            "--no-clamp",
            action="store_true",
            default=None,
            help="Do not clamp negative importance pre-scores.",
        )
        cmd.add_argument("--n-requests", type=int)
        cmd.add_argument("--request-kind", choices=["node", "edge"])
        cmd.add_argument("--scratch-sample", type=int)
        cmd.add_argument("--repetitions", type=int)
        cmd.add_argument("--seed", type=int)
        cmd.add_argument("--k-list", type=_int_list)
        cmd.add_argument("--counts", type=_int_list, dest="request_counts")
        cmd.add_argument("--threshold", type=float, dest="guideline_threshold")
        cmd.add_argument(
            "--macro", action="store_true", default=None, help="Report macro-F1."
        )
        cmd.add_argument("--workers", type=int)
        cmd.add_argument("--out", dest="output", help="Output directory.")

    plot = commands.add_parser("plot", help="Draw SVG charts from a report.json.")
    plot.add_argument("--report", required=True)
    plot.add_argument("--out", help="Output directory; defaults to the report's.")
    return parser


def _prune(values: dict[str, Any]) -> dict[str, Any]:
    return {key: value for key, value in values.items() if value is not None}


def _deep_update(base: dict[str, Any], override: dict[str, Any]) -> dict[str, Any]:
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_update(merged[key], value)
        else:
            merged[key] = value
    return merged


def _sbm_flags(args: argparse.Namespace) -> dict[str, Any]:
    return _prune(
        {
            "blocks": args.sbm_blocks,
            "p_in": args.p_in,
            "p_out": args.p_out,
            "feature_dim": args.feature_dim,
            "feature_noise": args.feature_noise,
            "centroid_scale": args.centroid_scale,
            "block_labels": False if args.random_labels else None,
        }
    )


def _gnn_flags(args: argparse.Namespace) -> dict[str, Any]:
    return _prune(
        {
            "aggregator": args.aggregator,
            "updater": args.updater,
            "layers": args.layers,
            "hidden_dim": args.hidden_dim,
            "epochs": args.epochs,
            "learning_rate": args.learning_rate,
            "weight_decay": args.weight_decay,
            "optimizer": args.optimizer,
            "gat_leaky": args.gat_leaky,
        }
    )


def bench_config(args: argparse.Namespace) -> BenchConfig:
    """
    Merges command-line flags with the optional config file.

    Raises:
        ConfigError: No dataset was given, or the config file is unreadable.
        ValidationError: A value is out of range.

    """

    dataset = _prune(
        {
            "snapshot": args.graph,
            "node_file": args.nodes,
            "edge_file": args.edges,
            "num_classes": args.num_classes,
        }
    )
    if args.sbm_blocks is not None:
        dataset["sbm"] = _sbm_flags(args)
    values = _prune(
        {
            "methods": args.methods,
            "modes": args.modes,
            "k": args.k,
            "gamma": args.gamma,
            "max_iterations": args.max_iterations,
            "inference_policy": args.policy,
            "n_requests": args.n_requests,
            "request_kind": args.request_kind,
            "scratch_sample": args.scratch_sample,
            "repetitions": args.repetitions,
            "seed": args.seed,
            "k_list": args.k_list,
            "request_counts": args.request_counts,
            "guideline_threshold": args.guideline_threshold,
            "average": "macro" if args.macro else None,
            "workers": args.workers,
            "output": args.output,
        }
    )
    values.update(_partition_flags(args))
    if dataset:
        values["dataset"] = dataset
    if gnn := _gnn_flags(args):
        values["gnn"] = gnn
    aggregation = _prune(
        {
            "lam": args.lam,
            "subset_frac": args.subset_frac,
            "clamp": False if args.no_clamp else None,
        }
    )
    if aggregation:
        values["aggregation"] = aggregation
    if args.config:
        values = _deep_update(values, load_config_file(args.config))
    if "dataset" not in values:
        raise ConfigError(
            "give a dataset: --graph, --nodes/--edges, --sbm-blocks or a config file"
        )
    return BenchConfig.model_validate(values)


def _ingest(args: argparse.Namespace) -> str:
    g = load_graph(args.nodes, args.edges, args.num_classes)
    save_graph(g, args.out)
    return (
        f"wrote {args.out}: {g.n} nodes, {g.num_edges} edges, "
        f"{g.num_classes} classes"
    )


def _sbm(args: argparse.Namespace) -> str:
    if args.sbm_blocks is None:
        raise ConfigError("--sbm-blocks is required")
    spec = SbmSpec.model_validate({**_sbm_flags(args), "seed": args.seed})
    g = generate_sbm(spec)
    save_graph(g, args.out)
    if args.export:
        export_dir = Path(args.export)
        export_dir.mkdir(parents=True, exist_ok=True)
        export_graph(g, export_dir / "nodes.csv", export_dir / "edges.txt")
    return f"wrote {args.out}: {g.n} nodes, {g.num_edges} edges"


def _partition(args: argparse.Namespace) -> str:
    g = load_graph_snapshot(args.graph)
    split = split_train_test(g, args.train_ratio, args.seed)
    g_train, _ = induced_subgraph(g, split.train_nodes)
    cfg = PartitionConfig.model_validate(
        {
            "method": args.method,
            "k": args.k,
            "gamma": args.gamma,
            "max_iterations": args.max_iterations,
            "seed": args.seed,
            **_partition_flags(args),
        }
    )
    embeddings = None
    if cfg.method == "bekm":
        gnn = GnnConfig.model_validate({**_gnn_flags(args), "seed": args.seed})
        embeddings = node_embeddings(g_train, gnn)
    assignment = partition(g_train, embeddings, cfg)
    summary = shard_size_summary(assignment)
    payload = {
        "assignment": assignment.model_dump(),
        "train_nodes": [int(u) for u in g_train.origin],
        "summary": summary.model_dump(),
    }
    Path(args.out).write_text(json.dumps(payload, indent=2))
    return (
        f"wrote {args.out}: {cfg.method} into {assignment.k} shards, "
        f"sizes {summary.smallest}..{summary.largest}"
    )


def _train(args: argparse.Namespace) -> str:
    g = load_graph_snapshot(args.graph)
    split = split_train_test(g, args.train_ratio, args.seed)
    g_train, _ = induced_subgraph(g, split.train_nodes)
    cfg = GnnConfig.model_validate({**_gnn_flags(args), "seed": args.seed})
    model = train(g_train, cfg)
    save_model(model, args.out)
    predictions = np.argmax(forward(model, g, split.test_nodes), axis=-1)
    f1 = f1_score(predictions, g.y[split.test_nodes])
    return f"wrote {args.out}: test micro-F1 {f1:.4f}"


def _bench(args: argparse.Namespace) -> str:
    cfg = bench_config(args)
    report = BENCH_COMMANDS[args.command](cfg, args.quiet)
    path = write_report(report, cfg.output)
    failed = [r.method for r in report.results if r.error]
    suffix = f"; failed cells: {', '.join(failed)}" if failed else ""
    if report.recommendation is not None:
        suffix += f"; recommendation: {report.recommendation['recommendation']}"
    return f"wrote {path} ({len(report.results) or len(report.shards)} rows){suffix}"


def _plot(args: argparse.Namespace) -> str:
    report = load_report(args.report)
    written = plot_report(report, args.out or Path(args.report).parent)
    return f"wrote {len(written)} chart(s)"


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    level = logging.INFO
    if args.verbose:
        level = logging.DEBUG
    elif args.quiet:
        level = logging.WARNING
    logging.basicConfig(
        level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s"
    )

    handlers: dict[str, Callable[[argparse.Namespace], str]] = {
        "ingest": _ingest,
        "sbm": _sbm,
        "partition": _partition,
        "train": _train,
        "plot": _plot,
    }
    try:
        summary = handlers.get(args.command, _bench)(args)
    except ValidationError as error:
        logger.error("invalid configuration:\n%s", error)
        return ConfigError.exit_code
    except GerkError as error:
        logger.error("%s", error)
        return error.exit_code
    print(summary)
    return 0


if __name__ == "__main__":
    sys.exit(main())
