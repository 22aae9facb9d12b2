"""
Scalar losses and the weighted sum that combines them.
"""

from typing import Optional, Sequence

import numpy as np

from src.diffnet.tensor import Tape, Tensor
from src.exceptions import ShapeError

BCE_EPS = 1e-7


def kl_gaussian(tape: Optional[Tape], mu: Tensor, logvar: Tensor) -> Tensor:
    """KL(N(mu, exp(logvar)) || N(0, I)) summed over dims, averaged over the batch."""
    if mu.shape != logvar.shape:
        raise ShapeError(f"kl_gaussian: mu {mu.shape} vs logvar {logvar.shape}")
    batch = mu.shape[0]
    var = np.exp(logvar.data)
    out = Tensor(0.5 * np.sum(mu.data**2 + var - logvar.data - 1.0) / batch)
    if tape is not None:

        def backward():
            if out.grad is None:
                return
            mu.accumulate(out.grad * mu.data / batch)
            logvar.accumulate(out.grad * 0.5 * (var - 1.0) / batch)

        tape.push(backward)
    return out


def bce(
    tape: Optional[Tape], pred: Tensor, target: np.ndarray, reduce: str = "mean"
) -> Tensor:
    """
    Binary cross-entropy with predictions clamped to [1e-7, 1 - 1e-7].

    Args:
        pred: probabilities, first axis is the batch
        target: labels in [0, 1], same shape as pred
        reduce: "mean" over every element, or "sample_sum" to sum each sample's
            elements and average over the batch
    """
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ShapeError(f"bce: pred {pred.shape} vs target {target.shape}")
    if reduce == "mean":
        denom = pred.data.size
    elif reduce == "sample_sum":
        denom = pred.shape[0]
    else:
        raise ValueError(f"Unknown reduction {reduce}")

    p = np.clip(pred.data, BCE_EPS, 1.0 - BCE_EPS)
    value = -np.sum(target * np.log(p) + (1.0 - target) * np.log(1.0 - p)) / denom
    out = Tensor(np.asarray(value))
    if tape is not None:

        def backward():
            if out.grad is None:
                return
            inside = (pred.data > BCE_EPS) & (pred.data < 1.0 - BCE_EPS)
            grad = (p - target) / (p * (1.0 - p)) / denom
            pred.accumulate(out.grad * grad * inside)

        tape.push(backward)
    return out


def weighted_sum(
    tape: Optional[Tape], terms: Sequence[Tensor], weights: Sequence[float]
) -> Tensor:
    """Sum of scalar tensors, each scaled by its weight."""
    out = Tensor(np.asarray(sum(w * t.data for t, w in zip(terms, weights))))
    if tape is not None:

        def backward():
            if out.grad is None:
                return
            for t, w in zip(terms, weights):
                t.accumulate(out.grad * w)

        tape.push(backward)
    return out
