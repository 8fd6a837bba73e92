from enum import Enum
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field


class Aggregator(str, Enum):
    GIN = "GIN"
    SAGE = "SAGE"
    GCN = "GCN"
    GAT = "GAT"


class Updater(str, Enum):
    LINEAR = "linear"
    CONCAT = "concat"
    INTERPOLATION = "interpolation"


class GnnConfig(BaseModel):
    """Architecture and training settings of a message-passing model."""

    aggregator: Aggregator = Aggregator.SAGE
    updater: Updater = Updater.LINEAR
    layers: int = Field(default=2, description="Message-passing rounds.", ge=1)
    hidden_dim: int = Field(default=32, description="Width of every layer.", ge=1)
    epochs: int = Field(default=100, ge=1)
    learning_rate: float = Field(default=0.5, gt=0.0)
    weight_decay: float = Field(default=5e-4, ge=0.0)
    optimizer: Literal["sgd", "adam"] = Field(
        default="sgd", description="Full-batch gradient descent, or Adam for ablations."
    )
    max_grad_norm: float | None = Field(
        default=1.0,
        description="Clip the gradient to this norm before every step; None disables.",
        gt=0.0,
    )
    gat_leaky: bool = Field(
        default=False,
        description="Apply a leaky rectifier to the attention logits.",
    )
    seed: int = 0

    model_config = ConfigDict(frozen=True)
