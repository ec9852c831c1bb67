"""Dense kernel operations: 2-D convolution, ReLU and pooling, each with
the input-gradient needed to backpropagate a pixel loss through a frozen
network.

Tensors are numpy float32 arrays of shape (batch, channels, height, width).
Convolution is im2col + sgemm; the tests keep an independent naive-loop
oracle. Weight gradients are intentionally absent: the network never
trains, only the input image does.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

Tensor = np.ndarray  # (batch, channels, height, width), float32


@dataclass(frozen=True)
class ConvKernel:
    """Convolution weights (out, in, kh, kw) plus one bias per out channel."""

    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        if self.weights.ndim != 4:
            raise ConfigurationError(
                f"kernel weights must be rank 4, got shape {self.weights.shape}"
            )
        if self.bias.shape != (self.weights.shape[0],):
            raise ConfigurationError(
                f"bias shape {self.bias.shape} does not match "
                f"{self.weights.shape[0]} output channels"
            )

    @property
    def out_channels(self) -> int:
        return self.weights.shape[0]

    @property
    def in_channels(self) -> int:
        return self.weights.shape[1]


def _check_input(x: np.ndarray, name: str = "input") -> None:
    if x.ndim != 4:
        raise ConfigurationError(f"{name} must be rank 4, got shape {x.shape}")


def conv_output_hw(h: int, w: int, kernel: ConvKernel, pad: int, stride: int):
    kh, kw = kernel.weights.shape[2:]
    return (h + 2 * pad - kh) // stride + 1, (w + 2 * pad - kw) // stride + 1


def _im2col(x: np.ndarray, kh: int, kw: int, pad: int, stride: int) -> np.ndarray:
    """(B, C, H, W) -> (B, C*kh*kw, out_h*out_w) column matrix, zero padded."""
    if pad:
        x = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    windows = np.lib.stride_tricks.sliding_window_view(x, (kh, kw), axis=(2, 3))
    windows = windows[:, :, ::stride, ::stride]  # (B, C, oh, ow, kh, kw)
    b, c, oh, ow = windows.shape[:4]
    cols = windows.transpose(0, 1, 4, 5, 2, 3).reshape(b, c * kh * kw, oh * ow)
    return np.ascontiguousarray(cols)


def conv2d_forward(x: Tensor, kernel: ConvKernel, pad: int = 0, stride: int = 1) -> Tensor:
    """Cross-correlate x with the kernel, add bias, zero padding."""
    _check_input(x)
    b, c, h, w = x.shape
    o, ci, kh, kw = kernel.weights.shape
    if c != ci:
        raise ConfigurationError(
            f"input has {c} channels but kernel expects {ci} "
            f"(input {x.shape}, kernel {kernel.weights.shape})"
        )
    if stride < 1:
        raise ConfigurationError(f"stride must be >= 1, got {stride}")
    if h + 2 * pad < kh or w + 2 * pad < kw:
        raise ConfigurationError(
            f"padded input {h + 2 * pad}x{w + 2 * pad} smaller than "
            f"kernel {kh}x{kw}"
        )
    oh, ow = conv_output_hw(h, w, kernel, pad, stride)
    cols = _im2col(x, kh, kw, pad, stride)
    wmat = kernel.weights.reshape(o, ci * kh * kw)
    out = np.matmul(wmat, cols)  # (B, O, oh*ow)
    out += kernel.bias[None, :, None]
    return out.reshape(b, o, oh, ow)


def conv2d_backward_input(
    grad_out: Tensor,
    kernel: ConvKernel,
    input_shape: tuple[int, int, int, int],
    pad: int = 0,
    stride: int = 1,
) -> Tensor:
    """Gradient of sum(grad_out * conv2d_forward(x)) with respect to x."""
    _check_input(grad_out, "grad_out")
    b, c, h, w = input_shape
    o, ci, kh, kw = kernel.weights.shape
    oh, ow = conv_output_hw(h, w, kernel, pad, stride)
    if grad_out.shape != (b, o, oh, ow):
        raise ConfigurationError(
            f"grad_out shape {grad_out.shape} does not match conv output "
            f"{(b, o, oh, ow)} for input {input_shape}"
        )
    wmat = kernel.weights.reshape(o, ci * kh * kw)
    col_grad = np.matmul(wmat.T, grad_out.reshape(b, o, oh * ow))
    col_grad = col_grad.reshape(b, ci, kh, kw, oh, ow)
    padded = np.zeros((b, c, h + 2 * pad, w + 2 * pad), dtype=np.float32)
    for i in range(kh):
        for j in range(kw):
            padded[:, :, i : i + stride * oh : stride, j : j + stride * ow : stride] += (
                col_grad[:, :, i, j]
            )
    if pad:
        padded = padded[:, :, pad : pad + h, pad : pad + w]
    return np.ascontiguousarray(padded)


def relu_forward(x: Tensor) -> Tensor:
    return np.maximum(x, 0)


def relu_backward(grad_out: Tensor, saved_input: Tensor) -> Tensor:
    if grad_out.shape != saved_input.shape:
        raise ConfigurationError(
            f"grad shape {grad_out.shape} != saved input shape {saved_input.shape}"
        )
    return np.where(saved_input > 0, grad_out, np.float32(0.0))


@dataclass(frozen=True)
class PoolContext:
    """What pool2d_backward needs: mode, input shape, argmax for max mode."""

    mode: str
    input_shape: tuple[int, int, int, int]
    argmax: np.ndarray | None  # (B, C, oh, ow) flat index into the 2x2 window


def pool2d_forward(x: Tensor, mode: str = "average") -> tuple[Tensor, PoolContext]:
    """2x2 window, stride 2. Odd trailing rows/columns are dropped (VGG
    floor semantics) so arbitrary working resolutions stay usable."""
    _check_input(x)
    if mode not in ("max", "average"):
        raise ConfigurationError(f"unknown pool mode {mode!r}")
    b, c, h, w = x.shape
    if h < 2 or w < 2:
        raise ConfigurationError(f"spatial extents {h}x{w} too small to pool")
    oh, ow = h // 2, w // 2
    win = x[:, :, : 2 * oh, : 2 * ow].reshape(b, c, oh, 2, ow, 2)
    win = win.transpose(0, 1, 2, 4, 3, 5).reshape(b, c, oh, ow, 4)
    if mode == "average":
        out = win.mean(axis=-1, dtype=np.float32)
        ctx = PoolContext(mode, x.shape, None)
    else:
        idx = win.argmax(axis=-1)
        out = np.take_along_axis(win, idx[..., None], axis=-1)[..., 0]
        ctx = PoolContext(mode, x.shape, idx)
    return np.ascontiguousarray(out), ctx


def pool2d_backward(grad_out: Tensor, ctx: PoolContext) -> Tensor:
    b, c, h, w = ctx.input_shape
    oh, ow = h // 2, w // 2
    if grad_out.shape != (b, c, oh, ow):
        raise ConfigurationError(
            f"grad_out shape {grad_out.shape} != pooled shape {(b, c, oh, ow)}"
        )
    win_grad = np.zeros((b, c, oh, ow, 4), dtype=np.float32)
    if ctx.mode == "average":
        win_grad[:] = (grad_out / 4.0)[..., None]
    else:
        np.put_along_axis(win_grad, ctx.argmax[..., None], grad_out[..., None], axis=-1)
    grad_in = np.zeros((b, c, h, w), dtype=np.float32)
    grad_in[:, :, : 2 * oh, : 2 * ow] = (
        win_grad.reshape(b, c, oh, ow, 2, 2)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(b, c, 2 * oh, 2 * ow)
    )
    return grad_in
