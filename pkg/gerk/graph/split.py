"""Train/test node splits."""

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from sklearn.model_selection import train_test_split

from .graph import Graph


class NodeSplit(BaseModel):
    """A disjoint, covering split of a graph's nodes."""

    train_nodes: np.ndarray = Field(description="Sorted training node ids.")
    test_nodes: np.ndarray = Field(description="Sorted test node ids.")
    seed: int

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)


def split_train_test(
    g: Graph, ratio: float = 0.8, seed: int = 0, stratify: bool = False
) -> NodeSplit:
    """
    Randomly splits the nodes of a graph into a training and a test part.

    Args:
        g: The graph.
        ratio: The training fraction; the training part has
            ``round(ratio * n)`` nodes.
        seed: The random seed.
        stratify: Whether to preserve class proportions in both parts.

    Returns:
        The split.

    Raises:
        ValueError: ``ratio`` is not strictly between 0 and 1, or it leaves
            the training or the test part empty.

    """

    if not 0.0 < ratio < 1.0:
        raise ValueError(f"ratio must lie in (0, 1), got {ratio}")
    n_train = int(round(ratio * g.n))
    if n_train == 0:
        raise ValueError(f"ratio {ratio} leaves no training nodes out of {g.n}")
    if n_train == g.n:
        raise ValueError(f"ratio {ratio} leaves no test nodes out of {g.n}")
    train, test = train_test_split(
        g.node_ids,
        train_size=n_train,
        random_state=seed,
        stratify=g.y if stratify else None,
    )
    return NodeSplit(train_nodes=np.sort(train), test_nodes=np.sort(test), seed=seed)
