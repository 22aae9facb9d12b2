"""
Central finite-difference check of tape gradients.
"""

from typing import Callable, Optional

import numpy as np
from loguru import logger

from src.diffnet.params import ParamStore
from src.diffnet.tensor import Tape, Tensor

LossFn = Callable[[Optional[Tape]], Tensor]


def grad_check(
    fn: LossFn,
    params: ParamStore,
    n_coords: int = 100,
    h: float = 1e-5,
    seed: int = 0,
    atol: float = 1e-8,
) -> float:
    """
    Compare analytic and numeric gradients on a random subsample of coordinates.

    Args:
        fn: builds a scalar loss from the parameters; records on the tape when
            one is given
        params: store whose tensors fn reads
        n_coords: how many coordinates to check
        h: finite-difference step
        atol: a coordinate whose |analytic - numeric| is at most atol reports
            an error of 0 instead of the ratio below; pass 0.0 for the plain
            relative error

    Returns:
        max over coordinates of |analytic - numeric| / max(1e-8, |analytic| + |numeric|),
        with coordinates inside atol counted as 0
    """
    params.zero_grad()
    tape = Tape()
    loss = fn(tape)
    tape.backward(loss)

    names = params.names()
    sizes = np.array([params[name].data.size for name in names])
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    rng = np.random.default_rng(seed)
    picks = np.sort(rng.choice(offsets[-1], size=min(n_coords, offsets[-1]), replace=False))

    worst = 0.0
    for flat in picks:
        slot = int(np.searchsorted(offsets, flat, side="right") - 1)
        tensor = params[names[slot]]
        index = np.unravel_index(int(flat - offsets[slot]), tensor.shape)
        analytic = float(tensor.grad[index])

        original = tensor.data[index]
        tensor.data[index] = original + h
        plus = fn(None).item()
        tensor.data[index] = original - h
        minus = fn(None).item()
        tensor.data[index] = original
        numeric = (plus - minus) / (2.0 * h)

        gap = abs(analytic - numeric)
        error = 0.0 if gap <= atol else gap / max(1e-8, abs(analytic) + abs(numeric))
        worst = max(worst, error)

    logger.debug(f"Gradient check over {len(picks)} coordinates: max rel. error {worst:.3e}")
    params.zero_grad()
    return worst
