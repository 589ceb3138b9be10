"""Shared-weight multiscale feature extractor.

One 3-stage convolutional network (conv 7x7 -> tanh -> pool 2x2, twice, then
conv 7x7 -> tanh) is applied to every pyramid scale with a single parameter
set.  Coarse-scale outputs are upsampled to the finest feature resolution
and concatenated fine-to-coarse, giving 3 * 256 = 768 channels at 1/4 of the
input resolution for the standard configuration.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .preprocess import Pyramid
from .tensor import (
    ConvLayerParams,
    concat_channels,
    conv2d_backward,
    conv2d_forward,
    downsample_block_sum,
    maxpool2x2_backward,
    maxpool2x2_forward,
    tanh_backward,
    tanh_forward,
    upsample_nearest,
)


@dataclass
class NetworkConfig:
    """Architecture constants.  Defaults are the full-size network: feature
    map counts 16/64/256, 7x7 kernels, 2x2 pooling after stages 1 and 2,
    three pyramid scales on 240x320 input, classifier hidden size 1024."""

    n_classes: int
    in_channels: int = 4
    stage_channels: tuple[int, int, int] = (16, 64, 256)
    kernel_size: int = 7
    n_scales: int = 3
    input_hw: tuple[int, int] = (240, 320)
    hidden_size: int = 1024

    def __post_init__(self) -> None:
        if len(self.stage_channels) != 3:
            raise ValueError("exactly three convolutional stages are supported")
        if self.kernel_size % 2 == 0:
            raise ValueError("kernel size must be odd (same-padding)")
        h, w = self.input_hw
        divisor = 4 * 2 ** (self.n_scales - 1)
        if h % divisor or w % divisor:
            raise ValueError(f"input {h}x{w} must be divisible by {divisor}")

    @property
    def feature_channels(self) -> int:
        return self.n_scales * self.stage_channels[-1]

    @property
    def feature_hw(self) -> tuple[int, int]:
        return self.input_hw[0] // 4, self.input_hw[1] // 4


@dataclass
class FeatureExtractorParams:
    """The single stage1..stage3 parameter set shared across all scales."""

    stages: list[ConvLayerParams] = field(default_factory=list)

    @classmethod
    def initialize(cls, rng: np.random.Generator, config: NetworkConfig) -> "FeatureExtractorParams":
        stages = []
        in_ch = config.in_channels
        for out_ch in config.stage_channels:
            stages.append(ConvLayerParams.initialize(rng, out_ch, in_ch,
                                                     config.kernel_size, config.kernel_size))
            in_ch = out_ch
        return cls(stages=stages)

    def zero_grad(self) -> None:
        for s in self.stages:
            s.zero_grad()

    def sgd_step(self, lr: float) -> None:
        for s in self.stages:
            s.sgd_step(lr)

    def astype(self, dtype) -> "FeatureExtractorParams":
        return FeatureExtractorParams(stages=[s.astype(dtype) for s in self.stages])

    def state_tensors(self) -> dict[str, np.ndarray]:
        out = {}
        for i, s in enumerate(self.stages, start=1):
            out[f"stage{i}.kernels"] = s.kernels
            out[f"stage{i}.bias"] = s.bias
        return out

    @classmethod
    def from_state(cls, tensors: dict[str, np.ndarray]) -> "FeatureExtractorParams":
        stages = []
        i = 1
        while f"stage{i}.kernels" in tensors:
            k = np.asarray(tensors[f"stage{i}.kernels"], dtype=np.float64)
            b = np.asarray(tensors[f"stage{i}.bias"], dtype=np.float64)
            stages.append(ConvLayerParams(k, b, np.zeros_like(k), np.zeros_like(b)))
            i += 1
        if not stages:
            raise KeyError("no stage parameters in checkpoint")
        return cls(stages=stages)


def _scale_forward(x: np.ndarray, params: FeatureExtractorParams) -> tuple[np.ndarray, list]:
    """Run the 3 stages on one scale, keeping the caches backward needs."""
    cache = []
    out = x
    last = len(params.stages) - 1
    for i, stage in enumerate(params.stages):
        conv_in = out
        act = tanh_forward(conv2d_forward(conv_in, stage, padding="same"))
        if i < last:
            pooled, argmax = maxpool2x2_forward(act)
            cache.append((conv_in, act, argmax))
            out = pooled
        else:
            cache.append((conv_in, act, None))
            out = act
    return out, cache


def _scale_backward(grad: np.ndarray, params: FeatureExtractorParams, cache: list) -> None:
    for i in range(len(params.stages) - 1, -1, -1):
        conv_in, act, argmax = cache[i]
        if argmax is not None:
            grad = maxpool2x2_backward(argmax, grad)
        grad = tanh_backward(act, grad)
        grad = conv2d_backward(conv_in, params.stages[i], grad, padding="same")


def extract_scale(scale_input: np.ndarray, params: FeatureExtractorParams) -> np.ndarray:
    """Features for one pyramid scale: (C, h, w) -> (stage3_ch, h/4, w/4)."""
    h, w = scale_input.shape[1], scale_input.shape[2]
    if h % 4 or w % 4:
        raise ValueError(f"scale extents {h}x{w} must be divisible by 4")
    out, _ = _scale_forward(scale_input, params)
    return out


def extract_multiscale_cached(pyramid: Pyramid,
                              params: FeatureExtractorParams) -> tuple[np.ndarray, list[list]]:
    """Concatenated multiscale features plus the per-scale backward caches."""
    outs = []
    caches = []
    for i, scale in enumerate(pyramid.scales):
        if scale.shape[1] % 4 or scale.shape[2] % 4:
            raise ValueError(f"pyramid scale {i} extents {scale.shape[1:]} not divisible by 4")
        out, cache = _scale_forward(scale, params)
        outs.append(upsample_nearest(out, 2 ** i))
        caches.append(cache)
    return concat_channels(outs), caches


def extract_multiscale(pyramid: Pyramid, params: FeatureExtractorParams) -> np.ndarray:
    """Dense feature map over all scales, fine-to-coarse channel order.

    Standard configuration: 3 scales x 256 maps = 768 channels at 60x80.
    """
    features, _ = extract_multiscale_cached(pyramid, params)
    return features


def extract_backward(pyramid: Pyramid, params: FeatureExtractorParams,
                     grad_features: np.ndarray, caches: list[list] | None = None) -> None:
    """Accumulate parameter gradients for extract_multiscale.

    Weight sharing means the gradient is the sum over the three per-scale
    contributions; pooling argmaxes and activations are taken from `caches`
    when the caller kept them, otherwise the forward pass is recomputed.
    """
    if caches is None:
        _, caches = extract_multiscale_cached(pyramid, params)
    per_scale_ch = params.stages[-1].kernels.shape[0]
    if grad_features.shape[0] != per_scale_ch * pyramid.n_scales:
        raise ValueError(f"grad_features has {grad_features.shape[0]} channels, expected "
                         f"{per_scale_ch * pyramid.n_scales}")
    for i in range(pyramid.n_scales):
        block = grad_features[i * per_scale_ch:(i + 1) * per_scale_ch]
        _scale_backward(downsample_block_sum(block, 2 ** i), params, caches[i])
