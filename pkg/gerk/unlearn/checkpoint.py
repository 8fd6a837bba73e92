"""Saving and restoring an `EraserState` as a directory."""

import hashlib
import json
import logging
import os
from pathlib import Path

from ..aggregation import ImportanceScores
from ..errors import AuditError
from ..gnn import load_model, save_model
from ..graph import induced_subgraph, load_graph_snapshot, save_graph
from ..partition import ShardAssignment
from .schemas import EraserConfig, ShardModel, UnlearnRequest
from .state import EraserState, shard_graphs_of

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "gerk-checkpoint-v1"
GRAPH_FILE = "graph.bin"
ASSIGNMENT_FILE = "assignment.json"
SCORES_FILE = "scores.json"
MANIFEST_FILE = "manifest.json"


def _shard_file(shard: int) -> str:
    return f"shard_{shard}.model"


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def save_checkpoint(state: EraserState, directory: str | os.PathLike) -> Path:
    """
    Writes a state to a directory.

    The directory holds the full graph snapshot, the assignment, one model file
    per shard, the importance scores when present, and a manifest with the
    configuration, the training node ids, the deletion log, the shard training
    records and the sha256 of every other file.

    Args:
        state: The state to save.
        directory: The target directory; created if missing.

    Returns:
        The path of the manifest.

    """

    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    save_graph(state.graph, root / GRAPH_FILE)
    (root / ASSIGNMENT_FILE).write_text(state.assignment.model_dump_json(indent=2))
    files = [GRAPH_FILE, ASSIGNMENT_FILE]
    for record in state.shard_models:
        save_model(record.model, root / _shard_file(record.shard))
        files.append(_shard_file(record.shard))
    if state.scores is not None:
        state.scores.save(root / SCORES_FILE)
        files.append(SCORES_FILE)

    manifest = {
        "format": CHECKPOINT_FORMAT,
        "config": state.config.model_dump(mode="json"),
        "train_nodes": [int(u) for u in state.g_train.origin],
        "deletions": [req.model_dump() for req in state.deletions],
        "shards": [
            record.model_dump(exclude={"model"}) for record in state.shard_models
        ],
        "files": {name: _sha256(root / name) for name in files},
    }
    path = root / MANIFEST_FILE
    path.write_text(json.dumps(manifest, indent=2))
    logger.info("saved checkpoint with %d shards to %s", state.k, root)
    return path


def load_checkpoint(directory: str | os.PathLike) -> EraserState:
    """
    Restores a state written by `save_checkpoint`.

    Raises:
        AuditError: A file is missing or does not match its manifest hash.
        ValueError: The directory is not a ``gerk-checkpoint-v1`` checkpoint.

    """

    root = Path(directory)
    manifest = json.loads((root / MANIFEST_FILE).read_text())
    if manifest.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{root} is not a {CHECKPOINT_FORMAT} checkpoint")
    for name, expected in manifest["files"].items():
        if not (root / name).exists():
            raise AuditError(f"checkpoint file {name} is missing")
        if _sha256(root / name) != expected:
            raise AuditError(f"checkpoint file {name} does not match its manifest hash")

    graph = load_graph_snapshot(root / GRAPH_FILE)
    g_train, _ = induced_subgraph(graph, graph.index_of(manifest["train_nodes"]))
    assignment = ShardAssignment.model_validate_json(
        (root / ASSIGNMENT_FILE).read_text()
    )
    shard_models = [
        ShardModel(**record, model=load_model(root / _shard_file(record["shard"])))
        for record in manifest["shards"]
    ]
    scores = None
    if SCORES_FILE in manifest["files"]:
        scores = ImportanceScores.load(root / SCORES_FILE)
    return EraserState(
        config=EraserConfig.model_validate(manifest["config"]),
        graph=graph,
        g_train=g_train,
        assignment=assignment,
        shard_graphs=shard_graphs_of(g_train, assignment),
        shard_models=shard_models,
        scores=scores,
        deletions=[UnlearnRequest.model_validate(req) for req in manifest["deletions"]],
    )
