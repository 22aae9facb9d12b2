from src.diffnet.gradcheck import grad_check
from src.diffnet.layers import (
    center_crop,
    concat,
    conv2d,
    deconv2d,
    dense,
    relu,
    reparameterize,
    reshape,
    sigmoid,
    split,
)
from src.diffnet.losses import bce, kl_gaussian, weighted_sum
from src.diffnet.optim import OptimizerState, adam_state, adam_step
from src.diffnet.params import ParamStore
from src.diffnet.tensor import Tape, Tensor, constant

__all__ = [
    "OptimizerState",
    "ParamStore",
    "Tape",
    "Tensor",
    "adam_state",
    "adam_step",
    "bce",
    "center_crop",
    "concat",
    "constant",
    "conv2d",
    "deconv2d",
    "dense",
    "grad_check",
    "kl_gaussian",
    "relu",
    "reparameterize",
    "reshape",
    "sigmoid",
    "split",
    "weighted_sum",
]
