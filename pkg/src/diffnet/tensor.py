"""
Tensors and the tape that replays their backward passes in reverse order.
"""

from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

import numpy as np


@dataclass(eq=False)
class Tensor:
    """A float64 array plus the gradient accumulated into it during backward."""

    data: np.ndarray
    grad: Optional[np.ndarray] = None
    requires_grad: bool = True

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    def accumulate(self, g: np.ndarray) -> None:
        if not self.requires_grad:
            return
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64, copy=True)
        else:
            self.grad += g

    def item(self) -> float:
        return float(self.data)


def constant(value) -> Tensor:
    return Tensor(np.asarray(value, dtype=np.float64), requires_grad=False)


class Tape:
    """Records backward closures as ops run forward."""

    def __init__(self):
        self._ops: List[Callable[[], None]] = []

    def __len__(self) -> int:
        return len(self._ops)

    def push(self, backward: Callable[[], None]) -> None:
        self._ops.append(backward)

    def backward(self, output: Tensor) -> None:
        """Seed d(output)/d(output) = 1 and run every recorded closure in reverse."""
        output.accumulate(np.ones_like(output.data))
        for op in reversed(self._ops):
            op()
        self._ops.clear()
