"""Dense numeric kernels and layer parameter containers.

All image-like arrays are channels-first: (C, H, W), row-major, float64 in
training and test paths.  A float32 copy of the parameters may be used for
inference (see ``ConvLayerParams.astype``); gradients are always float64.

Every forward kernel checks its output for NaN/Inf and raises
``NumericError`` on violation: non-finite values are a contract bug, never
a value to propagate.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class NumericError(RuntimeError):
    """A numeric contract was violated (NaN/Inf where finite values are required)."""


def ensure_finite(arr: np.ndarray, what: str) -> np.ndarray:
    if not np.isfinite(arr).all():
        raise NumericError(f"non-finite values in {what}")
    return arr


@dataclass
class ConvLayerParams:
    """Filter bank weights: kernels (out_ch, in_ch, kh, kw), bias (out_ch,)."""

    kernels: np.ndarray
    bias: np.ndarray
    grad_kernels: np.ndarray
    grad_bias: np.ndarray

    @classmethod
    def initialize(cls, rng: np.random.Generator, out_channels: int, in_channels: int,
                   kh: int, kw: int) -> "ConvLayerParams":
        # uniform in +-1/sqrt(fan-in), the usual stable default
        bound = 1.0 / np.sqrt(in_channels * kh * kw)
        kernels = rng.uniform(-bound, bound, size=(out_channels, in_channels, kh, kw))
        bias = np.zeros(out_channels)
        return cls(kernels, bias, np.zeros_like(kernels), np.zeros_like(bias))

    def zero_grad(self) -> None:
        self.grad_kernels[...] = 0.0
        self.grad_bias[...] = 0.0

    def sgd_step(self, lr: float) -> None:
        self.kernels -= lr * self.grad_kernels
        self.bias -= lr * self.grad_bias

    def astype(self, dtype) -> "ConvLayerParams":
        """Casted copy for inference; gradient buffers stay float64."""
        return ConvLayerParams(self.kernels.astype(dtype), self.bias.astype(dtype),
                               np.zeros_like(self.kernels), np.zeros_like(self.bias))


@dataclass
class LinearLayerParams:
    """Affine map weights: weight (out, in), bias (out,)."""

    weight: np.ndarray
    bias: np.ndarray
    grad_weight: np.ndarray
    grad_bias: np.ndarray

    @classmethod
    def initialize(cls, rng: np.random.Generator, out_features: int,
                   in_features: int) -> "LinearLayerParams":
        bound = 1.0 / np.sqrt(in_features)
        weight = rng.uniform(-bound, bound, size=(out_features, in_features))
        bias = np.zeros(out_features)
        return cls(weight, bias, np.zeros_like(weight), np.zeros_like(bias))

    def zero_grad(self) -> None:
        self.grad_weight[...] = 0.0
        self.grad_bias[...] = 0.0

    def sgd_step(self, lr: float) -> None:
        self.weight -= lr * self.grad_weight
        self.bias -= lr * self.grad_bias

    def astype(self, dtype) -> "LinearLayerParams":
        return LinearLayerParams(self.weight.astype(dtype), self.bias.astype(dtype),
                                 np.zeros_like(self.weight), np.zeros_like(self.bias))


def _im2col(x: np.ndarray, kh: int, kw: int) -> np.ndarray:
    """Patch matrix of shape (H'*W', C*kh*kw) for stride-1 windows of x (C, H, W)."""
    c = x.shape[0]
    windows = np.lib.stride_tricks.sliding_window_view(x, (kh, kw), axis=(1, 2))
    hp, wp = windows.shape[1], windows.shape[2]
    return windows.transpose(1, 2, 0, 3, 4).reshape(hp * wp, c * kh * kw)


def _pad_same(x: np.ndarray, kh: int, kw: int) -> np.ndarray:
    ph, pw = kh // 2, kw // 2
    return np.pad(x, ((0, 0), (ph, ph), (pw, pw)))


def conv2d_forward(x: np.ndarray, params: ConvLayerParams, padding: str = "same") -> np.ndarray:
    """Cross-correlate x (C_in, H, W) with the filter bank and add bias.

    padding="same" zero-pads so the spatial size is preserved (odd kernels);
    padding="valid" yields (H-kh+1, W-kw+1).
    """
    out_ch, in_ch, kh, kw = params.kernels.shape
    if x.ndim != 3 or x.shape[0] != in_ch:
        raise ValueError(f"expected input ({in_ch}, H, W), got {x.shape}")
    if padding == "same":
        xp = _pad_same(x, kh, kw)
    elif padding == "valid":
        if x.shape[1] < kh or x.shape[2] < kw:
            raise ValueError(f"input {x.shape[1:]} smaller than kernel ({kh}, {kw})")
        xp = x
    else:
        raise ValueError(f"unknown padding {padding!r}")
    hp = xp.shape[1] - kh + 1
    wp = xp.shape[2] - kw + 1
    cols = _im2col(xp, kh, kw)
    kmat = params.kernels.reshape(out_ch, in_ch * kh * kw)
    out = cols @ kmat.T + params.bias
    out = out.T.reshape(out_ch, hp, wp)
    return ensure_finite(out, "conv2d output")


def conv2d_backward(x: np.ndarray, params: ConvLayerParams, grad_output: np.ndarray,
                    padding: str = "same") -> np.ndarray:
    """Exact gradients of conv2d_forward.

    Accumulates into params.grad_kernels / params.grad_bias (caller zeroes
    them) and returns grad wrt x.
    """
    out_ch, in_ch, kh, kw = params.kernels.shape
    xp = _pad_same(x, kh, kw) if padding == "same" else x
    hp = xp.shape[1] - kh + 1
    wp = xp.shape[2] - kw + 1
    if grad_output.shape != (out_ch, hp, wp):
        raise ValueError(f"grad_output {grad_output.shape} does not match forward output "
                         f"({out_ch}, {hp}, {wp})")

    gmat = grad_output.reshape(out_ch, hp * wp)
    cols = _im2col(xp, kh, kw)
    params.grad_kernels += (gmat @ cols).reshape(params.kernels.shape)
    params.grad_bias += grad_output.sum(axis=(1, 2))

    # scatter grad through the patch extraction back onto the padded input
    kmat = params.kernels.reshape(out_ch, in_ch * kh * kw)
    gcols = (gmat.T @ kmat).reshape(hp, wp, in_ch, kh, kw)
    gxp = np.zeros_like(xp)
    for ky in range(kh):
        for kx in range(kw):
            gxp[:, ky:ky + hp, kx:kx + wp] += gcols[:, :, :, ky, kx].transpose(2, 0, 1)
    if padding == "same":
        ph, pw = kh // 2, kw // 2
        return gxp[:, ph:ph + x.shape[1], pw:pw + x.shape[2]]
    return gxp


def maxpool2x2_forward(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Non-overlapping 2x2 max pool; ties resolved to the first window entry
    in row-major order.  Returns (pooled, argmax) with argmax in 0..3."""
    c, h, w = x.shape
    if h % 2 or w % 2:
        raise ValueError(f"maxpool2x2 needs even extents, got {h}x{w}")
    win = x.reshape(c, h // 2, 2, w // 2, 2).transpose(0, 1, 3, 2, 4).reshape(c, h // 2, w // 2, 4)
    argmax = win.argmax(axis=3)
    out = np.take_along_axis(win, argmax[..., None], axis=3)[..., 0]
    return out, argmax


def maxpool2x2_backward(argmax: np.ndarray, grad_output: np.ndarray) -> np.ndarray:
    """Route each upstream gradient to its argmax location, zeros elsewhere."""
    if argmax.shape != grad_output.shape:
        raise ValueError("argmax and grad_output shapes differ")
    if argmax.min() < 0 or argmax.max() > 3:
        raise ValueError("argmax index out of bounds for a 2x2 window")
    c, hh, hw = grad_output.shape
    win = np.zeros((c, hh, hw, 4), dtype=grad_output.dtype)
    np.put_along_axis(win, argmax[..., None], grad_output[..., None], axis=3)
    return win.reshape(c, hh, hw, 2, 2).transpose(0, 1, 3, 2, 4).reshape(c, hh * 2, hw * 2)


def tanh_forward(x: np.ndarray) -> np.ndarray:
    return np.tanh(x)


def tanh_backward(y: np.ndarray, grad_output: np.ndarray) -> np.ndarray:
    """Gradient through tanh given the forward *output* y: (1 - y^2) * g."""
    return (1.0 - y * y) * grad_output


def linear_forward(x: np.ndarray, params: LinearLayerParams) -> np.ndarray:
    """Affine map on a single feature vector x (in,) -> (out,)."""
    if x.shape != (params.weight.shape[1],):
        raise ValueError(f"expected input ({params.weight.shape[1]},), got {x.shape}")
    out = params.weight @ x + params.bias
    return ensure_finite(out, "linear output")


def linear_backward(x: np.ndarray, params: LinearLayerParams,
                    grad_output: np.ndarray) -> np.ndarray:
    if grad_output.shape != (params.weight.shape[0],):
        raise ValueError("grad_output shape does not match layer output")
    params.grad_weight += np.outer(grad_output, x)
    params.grad_bias += grad_output
    return params.weight.T @ grad_output


def softmax_nll(logits: np.ndarray, target: int) -> tuple[float, np.ndarray]:
    """Negative log-likelihood of `target` under softmax(logits).

    Computed with max-subtraction for stability.  Returns (loss, grad wrt
    logits); grad = softmax(logits) - onehot(target).
    """
    k = logits.shape[0]
    if not 0 <= target < k:
        raise ValueError(f"target {target} out of range for {k} classes")
    shifted = logits - logits.max()
    exps = np.exp(shifted)
    total = exps.sum()
    probs = exps / total
    loss = float(np.log(total) - shifted[target])
    grad = probs.copy()
    grad[target] -= 1.0
    return loss, grad


def softmax_rows(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax of a (N, K) matrix, max-subtracted."""
    shifted = logits - logits.max(axis=1, keepdims=True)
    exps = np.exp(shifted)
    return exps / exps.sum(axis=1, keepdims=True)


def upsample_nearest(x: np.ndarray, factor: int) -> np.ndarray:
    """Nearest-neighbor replication of x (C, h, w) by an integer factor."""
    if factor < 1 or int(factor) != factor:
        raise ValueError(f"factor must be a positive integer, got {factor}")
    if factor == 1:
        return x.copy()
    return np.repeat(np.repeat(x, factor, axis=1), factor, axis=2)


def downsample_block_sum(grad: np.ndarray, factor: int) -> np.ndarray:
    """Adjoint of upsample_nearest: sum the gradient over each replicated block."""
    c, h, w = grad.shape
    if h % factor or w % factor:
        raise ValueError("gradient extents not divisible by factor")
    return grad.reshape(c, h // factor, factor, w // factor, factor).sum(axis=(2, 4))


def concat_channels(inputs: list[np.ndarray]) -> np.ndarray:
    """Stack (Ci, H, W) maps along the channel axis in argument order."""
    if not inputs:
        raise ValueError("concat_channels needs at least one input")
    hw = inputs[0].shape[1:]
    for t in inputs[1:]:
        if t.shape[1:] != hw:
            raise ValueError(f"spatial extents differ: {t.shape[1:]} vs {hw}")
    return np.concatenate(inputs, axis=0)
