"""
Differentiable layers.

Every op takes the active Tape (or None for inference) followed by its
operands, and returns a new Tensor. With a tape, the op pushes a closure that
reads the output gradient and accumulates into its inputs.
"""

from typing import Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from src.diffnet.tensor import Tape, Tensor
from src.exceptions import ShapeError

KERNEL = 3


def dense(tape: Optional[Tape], x: Tensor, W: Tensor, b: Tensor) -> Tensor:
    """y = xW + b for x of shape (B, in), W (in, out), b (out,)."""
    if x.data.ndim != 2 or W.data.ndim != 2 or x.shape[1] != W.shape[0]:
        raise ShapeError(f"dense: x {x.shape} does not match W {W.shape}")
    if b.shape != (W.shape[1],):
        raise ShapeError(f"dense: b {b.shape} does not match W {W.shape}")
    out = Tensor(x.data @ W.data + b.data)

    if tape is not None:

        def backward():
            if out.grad is None:
                return
            x.accumulate(out.grad @ W.data.T)
            W.accumulate(x.data.T @ out.grad)
            b.accumulate(out.grad.sum(axis=0))

        tape.push(backward)
    return out


def _conv_out(size: int, stride: int, padding: int) -> int:
    return (size + 2 * padding - KERNEL) // stride + 1


def _windows(x: np.ndarray, stride: int, padding: int) -> np.ndarray:
    # (B, C, H, W) -> (B, C, Ho, Wo, 3, 3)
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    out_h = _conv_out(x.shape[2], stride, padding)
    out_w = _conv_out(x.shape[3], stride, padding)
    win = sliding_window_view(xp, (KERNEL, KERNEL), axis=(2, 3))
    return win[:, :, ::stride, ::stride][:, :, :out_h, :out_w]


def _correlate(x: np.ndarray, k: np.ndarray, stride: int, padding: int) -> np.ndarray:
    cols = _windows(x, stride, padding)
    y = np.tensordot(cols, k, axes=([1, 4, 5], [1, 2, 3]))
    return np.ascontiguousarray(y.transpose(0, 3, 1, 2))


def _correlate_adjoint(
    dy: np.ndarray, k: np.ndarray, in_shape: Tuple[int, ...], stride: int, padding: int
) -> np.ndarray:
    # Scatter (B, F, Ho, Wo) back onto the (B, C, H, W) grid the correlation read.
    batch, channels, height, width = in_shape
    out_h, out_w = dy.shape[2], dy.shape[3]
    dxp = np.zeros((batch, channels, height + 2 * padding, width + 2 * padding))
    for i in range(KERNEL):
        for j in range(KERNEL):
            contrib = np.tensordot(dy, k[:, :, i, j], axes=([1], [0]))
            dxp[
                :, :, i : i + stride * out_h : stride, j : j + stride * out_w : stride
            ] += contrib.transpose(0, 3, 1, 2)
    return dxp[:, :, padding : padding + height, padding : padding + width]


def _kernel_grad(x: np.ndarray, dy: np.ndarray, stride: int, padding: int) -> np.ndarray:
    cols = _windows(x, stride, padding)
    return np.tensordot(dy, cols, axes=([0, 2, 3], [0, 2, 3]))


def _check_conv(x: Tensor, k: Tensor, channel_axis: int, name: str) -> None:
    if x.data.ndim != 4 or k.data.ndim != 4:
        raise ShapeError(f"{name}: expected 4-d input and kernel, got {x.shape}, {k.shape}")
    if k.shape[2:] != (KERNEL, KERNEL):
        raise ShapeError(f"{name}: kernel must be 3x3, got {k.shape[2:]}")
    if x.shape[1] != k.shape[channel_axis]:
        raise ShapeError(f"{name}: input channels {x.shape[1]} do not match {k.shape}")


def conv2d(
    tape: Optional[Tape], x: Tensor, k: Tensor, stride: int = 2, padding: int = 1
) -> Tensor:
    """
    Zero-padded cross-correlation.

    Args:
        x: input of shape (B, C, H, W)
        k: kernel of shape (F, C, 3, 3)

    Returns:
        Tensor of shape (B, F, Ho, Wo), Ho = (H + 2*padding - 3) // stride + 1.
    """
    _check_conv(x, k, 1, "conv2d")
    out = Tensor(_correlate(x.data, k.data, stride, padding))

    if tape is not None:

        def backward():
            if out.grad is None:
                return
            if x.requires_grad:
                x.accumulate(
                    _correlate_adjoint(out.grad, k.data, x.shape, stride, padding)
                )
            k.accumulate(_kernel_grad(x.data, out.grad, stride, padding))

        tape.push(backward)
    return out


def deconv2d(
    tape: Optional[Tape], x: Tensor, k: Tensor, stride: int = 2, padding: int = 1
) -> Tensor:
    """
    Transposed convolution, the adjoint of conv2d with the same kernel.

    Args:
        x: input of shape (B, Cin, h, w)
        k: kernel of shape (Cin, Cout, 3, 3)

    Returns:
        Tensor of shape (B, Cout, stride*h, stride*w).
    """
    _check_conv(x, k, 0, "deconv2d")
    batch, _, h, w = x.shape
    out_shape = (batch, k.shape[1], stride * h, stride * w)
    out = Tensor(_correlate_adjoint(x.data, k.data, out_shape, stride, padding))

    if tape is not None:

        def backward():
            if out.grad is None:
                return
            x.accumulate(_correlate(out.grad, k.data, stride, padding))
            k.accumulate(_kernel_grad(out.grad, x.data, stride, padding))

        tape.push(backward)
    return out


def relu(tape: Optional[Tape], x: Tensor) -> Tensor:
    mask = x.data > 0
    out = Tensor(np.where(mask, x.data, 0.0))
    if tape is not None:

        def backward():
            if out.grad is not None:
                x.accumulate(out.grad * mask)

        tape.push(backward)
    return out


def sigmoid(tape: Optional[Tape], x: Tensor) -> Tensor:
    s = 0.5 * (1.0 + np.tanh(0.5 * x.data))
    out = Tensor(s)
    if tape is not None:

        def backward():
            if out.grad is not None:
                x.accumulate(out.grad * s * (1.0 - s))

        tape.push(backward)
    return out


def reparameterize(
    tape: Optional[Tape], mu: Tensor, logvar: Tensor, noise: np.ndarray
) -> Tensor:
    """z = mu + exp(0.5 * logvar) * noise, with noise supplied by the caller."""
    if not (mu.shape == logvar.shape == np.shape(noise)):
        raise ShapeError(
            f"reparameterize: mu {mu.shape}, logvar {logvar.shape}, noise {np.shape(noise)}"
        )
    std = np.exp(0.5 * logvar.data)
    out = Tensor(mu.data + std * noise)
    if tape is not None:

        def backward():
            if out.grad is None:
                return
            mu.accumulate(out.grad)
            logvar.accumulate(out.grad * noise * 0.5 * std)

        tape.push(backward)
    return out


def reshape(tape: Optional[Tape], x: Tensor, shape: Sequence[int]) -> Tensor:
    out = Tensor(x.data.reshape(shape))
    if tape is not None:

        def backward():
            if out.grad is not None:
                x.accumulate(out.grad.reshape(x.shape))

        tape.push(backward)
    return out


def split(tape: Optional[Tape], x: Tensor, at: int) -> Tuple[Tensor, Tensor]:
    """Split the last axis into [:at] and [at:]."""
    left = Tensor(x.data[..., :at])
    right = Tensor(x.data[..., at:])
    if tape is not None:

        def backward():
            grad = np.zeros_like(x.data)
            if left.grad is not None:
                grad[..., :at] += left.grad
            if right.grad is not None:
                grad[..., at:] += right.grad
            x.accumulate(grad)

        tape.push(backward)
    return left, right


def concat(tape: Optional[Tape], a: Tensor, b: Tensor) -> Tensor:
    """Concatenate along the last axis."""
    at = a.shape[-1]
    out = Tensor(np.concatenate([a.data, b.data], axis=-1))
    if tape is not None:

        def backward():
            if out.grad is None:
                return
            a.accumulate(out.grad[..., :at])
            b.accumulate(out.grad[..., at:])

        tape.push(backward)
    return out


def center_crop(tape: Optional[Tape], x: Tensor, size: int) -> Tensor:
    """Crop the two trailing spatial axes of (B, C, H, W) to size x size."""
    top = (x.shape[2] - size) // 2
    left = (x.shape[3] - size) // 2
    if top < 0 or left < 0:
        raise ShapeError(f"center_crop: {x.shape} is smaller than {size}")
    out = Tensor(x.data[:, :, top : top + size, left : left + size])
    if tape is not None:

        def backward():
            if out.grad is None:
                return
            grad = np.zeros_like(x.data)
            grad[:, :, top : top + size, left : left + size] = out.grad
            x.accumulate(grad)

        tape.push(backward)
    return out
