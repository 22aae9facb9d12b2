"""
Adam with bias correction.
"""

from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from src.diffnet.params import ParamStore


@dataclass
class OptimizerState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)

    def moments(self) -> ParamStore:
        """Both moment sets as one store, paths prefixed with m/ and v/."""
        store = ParamStore()
        for name in sorted(self.m):
            store.add(f"m/{name}", self.m[name])
            store.add(f"v/{name}", self.v[name])
        return store

    def restore_moments(self, store: ParamStore) -> None:
        for path, tensor in store.items():
            kind, name = path.split("/", 1)
            target = self.m if kind == "m" else self.v
            target[name] = tensor.data.copy()


def adam_state(params: ParamStore, lr: float = 1e-3, **hyper) -> OptimizerState:
    state = OptimizerState(lr=lr, **hyper)
    for name, tensor in params.items():
        state.m[name] = np.zeros_like(tensor.data)
        state.v[name] = np.zeros_like(tensor.data)
    return state


def adam_step(params: ParamStore, state: OptimizerState) -> None:
    """Apply one Adam update from the accumulated gradients, then zero them."""
    state.step += 1
    correction1 = 1.0 - state.beta1**state.step
    correction2 = 1.0 - state.beta2**state.step
    for name, tensor in params.items():
        g = tensor.grad
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        m_hat = m / correction1
        v_hat = v / correction2
        tensor.data -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    params.zero_grad()
