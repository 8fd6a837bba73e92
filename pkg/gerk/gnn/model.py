"""GNN and MLP node classifiers, inference, and model files."""

import hashlib
import os
from typing import Iterable, Optional

import numpy as np
import torch
from torch import Tensor, nn

from ..graph import Graph
from .config import GnnConfig
from .layers import DTYPE, GraphTensors, MessagePassingLayer, glorot

MODEL_FORMAT = "gerk-model-v1"


class GnnModel(nn.Module):
    """
    Stacked message-passing layers followed by a softmax classifier.

    Attributes:
        config: The architecture and training settings.
        in_dim: The feature width d_X.
        num_classes: The class count C.
        loss_trace: The training loss of every epoch, empty for untrained models.

    """

    def __init__(
        self,
        config: GnnConfig,
        in_dim: int,
        num_classes: int,
        generator: Optional[torch.Generator] = None,
    ) -> None:
        super().__init__()
        self.config = config
        self.in_dim = in_dim
        self.num_classes = num_classes
        self.loss_trace: list[float] = []

        layers = []
        width = in_dim
        for _ in range(config.layers):
            layer = MessagePassingLayer(
                width,
                config.hidden_dim,
                config.aggregator,
                config.updater,
                config.gat_leaky,
                generator,
            )
            layers.append(layer)
            width = layer.out_width
        self.layers = nn.ModuleList(layers)
        self.embedding_dim = width
        self.classifier_weight = nn.Parameter(glorot((num_classes, width), generator))
        self.classifier_bias = nn.Parameter(torch.zeros(num_classes, dtype=DTYPE))

    @classmethod
    def uniform_stub(
        cls, config: GnnConfig, in_dim: int, num_classes: int
    ) -> "GnnModel":
        """A model whose posterior is uniform for every node."""

        generator = torch.Generator().manual_seed(config.seed)
        model = cls(config, in_dim, num_classes, generator)
        with torch.no_grad():
            model.classifier_weight.zero_()
        return model

    def embed(self, x: Tensor, gt: GraphTensors) -> Tensor:
        """Returns the final-layer embeddings that feed the classifier."""

        h = x
        for layer in self.layers:
            h = layer(h, gt)
        return h

    def logits(self, x: Tensor, gt: GraphTensors) -> Tensor:
        return self.embed(x, gt) @ self.classifier_weight.T + self.classifier_bias

    def forward(self, x: Tensor, gt: GraphTensors) -> Tensor:
        return torch.softmax(self.logits(x, gt), dim=-1)

    def parameter_hash(self) -> str:
        """A hash over every parameter value, in registration order."""

        digest = hashlib.sha256()
        for name, tensor in self.state_dict().items():
            digest.update(name.encode())
            digest.update(tensor.detach().contiguous().numpy().tobytes())
        return digest.hexdigest()


class MlpModel(nn.Module):
    """A three-layer perceptron over node features only."""

    def __init__(
        self,
        in_dim: int,
        hidden_dim: int,
        num_classes: int,
        generator: Optional[torch.Generator] = None,
    ) -> None:
        super().__init__()
        self.in_dim = in_dim
        self.num_classes = num_classes
        widths = [in_dim, hidden_dim, hidden_dim, num_classes]
        self.weights = nn.ParameterList(
            nn.Parameter(glorot((b, a), generator))
            for a, b in zip(widths, widths[1:])
        )
        self.biases = nn.ParameterList(
            [nn.Parameter(torch.zeros(b, dtype=DTYPE)) for b in widths[1:]]
        )
        self.loss_trace: list[float] = []

    def logits(self, x: Tensor) -> Tensor:
        h = x
        for i, (weight, bias) in enumerate(zip(self.weights, self.biases)):
            h = h @ weight.T + bias
            if i < len(self.weights) - 1:
                h = torch.relu(h)
        return h

    def forward(self, x: Tensor) -> Tensor:
        return torch.softmax(self.logits(x), dim=-1)


def graph_inputs(g: Graph) -> tuple[Tensor, GraphTensors]:
    """Converts a graph into the feature tensor and edge tensors a model reads."""

    return torch.from_numpy(np.ascontiguousarray(g.x, dtype=np.float64)), (
        GraphTensors.from_graph(g)
    )


def forward(
    model: GnnModel, g: Graph, query_nodes: Optional[Iterable[int]] = None
) -> np.ndarray:
    """
    Computes the posterior matrix of a model over a graph.

    Args:
        model: The model.
        g: The graph the model reads; it must contain the ego networks of the
            query nodes.
        query_nodes: Ids of ``g`` to score. Defaults to every node.

    Returns:
        One row of class probabilities per query node.

    Raises:
        ValueError: The graph's feature width does not match the model.

    """

    if g.feature_dim != model.in_dim:
        raise ValueError(
            f"model expects {model.in_dim} features, graph has {g.feature_dim}"
        )
    x, gt = graph_inputs(g)
    with torch.no_grad():
        posterior = model(x, gt).numpy()
    if query_nodes is None:
        return posterior
    return posterior[np.asarray(list(query_nodes), dtype=np.int64)]


def save_model(model: GnnModel, path: str | os.PathLike) -> None:
    """Writes a ``gerk-model-v1`` file with the config echo and loss trace."""

    torch.save(
        {
            "format": MODEL_FORMAT,
            "config": model.config.model_dump(mode="json"),
            "in_dim": model.in_dim,
            "num_classes": model.num_classes,
            "state": model.state_dict(),
            "loss_trace": list(model.loss_trace),
        },
        path,
    )


def load_model(path: str | os.PathLike) -> GnnModel:
    """
    Reads a model written by `save_model`.

    Raises:
        ValueError: The file is not a ``gerk-model-v1`` model.

    """

    payload = torch.load(path, weights_only=True)
    if payload.get("format") != MODEL_FORMAT:
        raise ValueError(f"{os.fspath(path)} is not a {MODEL_FORMAT} file")
    model = GnnModel(
        GnnConfig.model_validate(payload["config"]),
        payload["in_dim"],
        payload["num_classes"],
    )
    model.load_state_dict(payload["state"])
    model.loss_trace = list(payload["loss_trace"])
    return model
