"""Frame preprocessing: rescaling, local contrast normalization, and the
3-scale normalized pyramid fed to the feature extractor.

The pyramid is built from Gaussian levels (5-tap binomial blur + decimate by
2); each level is then locally contrast-normalized per channel.  LCN is
band-pass, so the normalized Gaussian levels play the role of Laplacian
bands.  Depth goes through exactly the same code path as a color channel.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .container import DataError
from .tensor import NumericError, concat_channels

TARGET_H = 240
TARGET_W = 320
N_SCALES = 3
LCN_WINDOW = 15
LCN_EPS = 1e-4
LCN_SIGMA_RATIO = 7.0  # sigma = window / 7: taps truncate at 3.5 sigma

BINOMIAL5 = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0


@dataclass
class RgbdFrame:
    """A color+depth frame: rgb (3, H, W) in [0, 1], depth (1, H, W) in meters."""

    rgb: np.ndarray
    depth: np.ndarray

    def __post_init__(self) -> None:
        if self.rgb.ndim != 3 or self.rgb.shape[0] != 3:
            raise DataError(f"rgb must be (3, H, W), got {self.rgb.shape}")
        if self.depth.ndim != 3 or self.depth.shape[0] != 1:
            raise DataError(f"depth must be (1, H, W), got {self.depth.shape}")
        if self.rgb.shape[1:] != self.depth.shape[1:]:
            raise DataError(f"rgb {self.rgb.shape[1:]} and depth {self.depth.shape[1:]} disagree")
        if not np.isfinite(self.rgb).all():
            raise DataError("non-finite rgb values")
        if not np.isfinite(self.depth).all():
            raise DataError("non-finite depth values (depth must be pre-inpainted)")
        if self.depth.min() < 0:
            raise DataError("negative depth")

    @property
    def hw(self) -> tuple[int, int]:
        return self.rgb.shape[1], self.rgb.shape[2]

    def channels(self, use_depth: bool = True) -> np.ndarray:
        """Stacked planes: RGB plus, by default, depth as a fourth channel."""
        if use_depth:
            return concat_channels([self.rgb, self.depth])
        return self.rgb.copy()


@dataclass
class Pyramid:
    """Per-scale normalized planes; scale i halves both extents of scale i-1."""

    scales: list[np.ndarray]

    def __post_init__(self) -> None:
        if not self.scales:
            raise DataError("empty pyramid")
        c = self.scales[0].shape[0]
        for i in range(1, len(self.scales)):
            prev, cur = self.scales[i - 1].shape, self.scales[i].shape
            if cur[0] != c or cur[1] * 2 != prev[1] or cur[2] * 2 != prev[2]:
                raise DataError(f"pyramid scale {i} has shape {cur}, expected "
                                f"({c}, {prev[1] // 2}, {prev[2] // 2})")

    @property
    def n_scales(self) -> int:
        return len(self.scales)

    @property
    def n_channels(self) -> int:
        return self.scales[0].shape[0]


def _corr1d(plane: np.ndarray, taps: np.ndarray, axis: int) -> np.ndarray:
    """1-D correlation along axis with zero padding, accumulated tap by tap."""
    r = len(taps) // 2
    pad = [(0, 0), (0, 0)]
    pad[axis] = (r, r)
    xp = np.pad(plane, pad)
    out = np.zeros(plane.shape, dtype=np.float64)
    n = plane.shape[axis]
    for k, t in enumerate(taps):
        if axis == 0:
            out += t * xp[k:k + n, :]
        else:
            out += t * xp[:, k:k + n]
    return out


def _window_mass(n: int, taps: np.ndarray) -> np.ndarray:
    """Per-position sum of taps that fall inside [0, n): the truncation mass."""
    r = len(taps) // 2
    onesp = np.pad(np.ones(n), (r, r))
    mass = np.zeros(n)
    for k, t in enumerate(taps):
        mass += t * onesp[k:k + n]
    return mass


def normalized_correlate(plane: np.ndarray, taps: np.ndarray) -> np.ndarray:
    """Separable windowed average with border windows renormalized to unit mass."""
    num = _corr1d(_corr1d(plane, taps, 0), taps, 1)
    den = np.outer(_window_mass(plane.shape[0], taps), _window_mass(plane.shape[1], taps))
    return num / den


def gaussian_taps(window: int, sigma: float) -> np.ndarray:
    if window % 2 == 0 or window < 1:
        raise ValueError(f"window must be odd and positive, got {window}")
    d = np.arange(window) - window // 2
    taps = np.exp(-0.5 * (d / sigma) ** 2)
    return taps / taps.sum()


def local_contrast_normalize(plane: np.ndarray, window: int = LCN_WINDOW,
                             eps: float = LCN_EPS) -> np.ndarray:
    """Subtract the Gaussian-weighted local mean and divide by max(local std, eps).

    The Gaussian window has sigma = window/7 (taps truncated at 3.5 sigma);
    truncated border windows are renormalized.  A constant plane maps to
    (numerically) all zeros via the eps floor.
    """
    if plane.ndim != 2:
        raise ValueError(f"expected a 2-D plane, got shape {plane.shape}")
    if not np.isfinite(plane).all():
        raise NumericError("non-finite input to local_contrast_normalize")
    taps = gaussian_taps(window, window / LCN_SIGMA_RATIO)
    mean = normalized_correlate(plane, taps)
    centered = plane - mean
    var = normalized_correlate(centered * centered, taps)
    std = np.sqrt(np.maximum(var, 0.0))
    return centered / np.maximum(std, eps)


def binomial_blur(plane: np.ndarray) -> np.ndarray:
    """5-tap binomial low-pass with renormalized borders."""
    return normalized_correlate(plane, BINOMIAL5)


def decimate2(plane: np.ndarray) -> np.ndarray:
    return plane[::2, ::2]


def bilinear_resize(planes: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear rescale of (C, h, w) planes using half-pixel sample centers."""
    c, h, w = planes.shape
    src_y = np.clip((np.arange(out_h) + 0.5) * (h / out_h) - 0.5, 0.0, h - 1.0)
    src_x = np.clip((np.arange(out_w) + 0.5) * (w / out_w) - 0.5, 0.0, w - 1.0)
    y0 = np.floor(src_y).astype(np.intp)
    x0 = np.floor(src_x).astype(np.intp)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (src_y - y0)[None, :, None]
    fx = (src_x - x0)[None, None, :]
    top = planes[:, y0[:, None], x0[None, :]] * (1 - fx) + planes[:, y0[:, None], x1[None, :]] * fx
    bot = planes[:, y1[:, None], x0[None, :]] * (1 - fx) + planes[:, y1[:, None], x1[None, :]] * fx
    return top * (1 - fy) + bot * fy


def rescale_frame(raw_rgb: np.ndarray, raw_depth: np.ndarray,
                  out_hw: tuple[int, int] = (TARGET_H, TARGET_W)) -> RgbdFrame:
    """Bilinearly rescale all channels to the working resolution (240x320).

    Integer-coded rgb (e.g. u8 containers) is mapped to [0, 1] first; depth
    stays in meters.
    """
    rgb = np.asarray(raw_rgb, dtype=np.float64)
    if np.issubdtype(np.asarray(raw_rgb).dtype, np.integer):
        rgb = rgb / 255.0
    depth = np.asarray(raw_depth, dtype=np.float64)
    if depth.ndim == 2:
        depth = depth[None]
    if rgb.ndim != 3 or rgb.shape[0] != 3:
        raise DataError(f"raw rgb must be (3, h, w), got {np.asarray(raw_rgb).shape}")
    h, w = out_hw
    if rgb.shape[1:] != (h, w):
        rgb = bilinear_resize(rgb, h, w)
    if depth.shape[1:] != (h, w):
        depth = bilinear_resize(depth, h, w)
    return RgbdFrame(rgb=rgb, depth=depth)


def build_pyramid(frame: RgbdFrame, n_scales: int = N_SCALES, window: int = LCN_WINDOW,
                  eps: float = LCN_EPS, use_depth: bool = True,
                  expected_hw: tuple[int, int] = (TARGET_H, TARGET_W)) -> Pyramid:
    """Gaussian levels G0..G{n-1}, each locally contrast-normalized per channel.

    For the standard configuration the scales come out as 4x240x320,
    4x120x160 and 4x60x80.
    """
    if frame.hw != tuple(expected_hw):
        raise DataError(f"frame is {frame.hw}, expected {tuple(expected_hw)}")
    level = frame.channels(use_depth=use_depth).astype(np.float64)
    scales = []
    for i in range(n_scales):
        scales.append(np.stack([local_contrast_normalize(ch, window, eps) for ch in level]))
        if i + 1 < n_scales:
            if level.shape[1] % 2 or level.shape[2] % 2:
                raise DataError(f"cannot halve odd extents {level.shape[1:]} at scale {i}")
            level = np.stack([decimate2(binomial_blur(ch)) for ch in level])
    return Pyramid(scales=scales)
