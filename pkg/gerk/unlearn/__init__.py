from .checkpoint import load_checkpoint, save_checkpoint
from .eraser import Eraser
from .schemas import (
    AuditReport,
    EraserConfig,
    InferencePolicy,
    ShardModel,
    UnlearnReport,
    UnlearnRequest,
)
from .state import (
    EraserState,
    aggregate_labels,
    audit,
    build,
    evaluate,
    fit_state_scores,
    inference_inputs,
    predict,
    shard_posteriors,
    train_shard,
    unlearn,
)
