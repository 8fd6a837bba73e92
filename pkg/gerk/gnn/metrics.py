from typing import Literal

import numpy as np
from sklearn.metrics import f1_score as _sk_f1

Average = Literal["micro", "macro"]


def f1_score(
    predictions: np.ndarray, labels: np.ndarray, average: Average = "micro"
) -> float:
    """
    F1 of single-label multi-class predictions.

    Raises:
        ValueError: There are no predictions, or the lengths differ.

    """

    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if predictions.size == 0:
        raise ValueError("cannot score an empty prediction set")
    if predictions.shape != labels.shape:
        raise ValueError(f"shape mismatch: {predictions.shape} vs {labels.shape}")
    return float(_sk_f1(labels, predictions, average=average))


def micro_f1(predictions: np.ndarray, labels: np.ndarray) -> float:
    return f1_score(predictions, labels, "micro")


def macro_f1(predictions: np.ndarray, labels: np.ndarray) -> float:
    return f1_score(predictions, labels, "macro")
