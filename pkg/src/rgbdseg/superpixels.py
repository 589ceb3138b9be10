"""Graph-based superpixel segmentation and per-region prediction aggregation.

Felzenszwalb-Huttenlocher merging on the 8-connected pixel grid: edges are
weighted by Euclidean RGB distance after Gaussian pre-smoothing, sorted
ascending (stable, so equal weights keep edge construction order), and two
components merge when the joining weight is no larger than
min(Int(Ci) + k/|Ci|, Int(Cj) + k/|Cj|).  A final pass merges regions
smaller than min_size.  Everything is deterministic.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .container import DataError
from .preprocess import gaussian_taps, normalized_correlate


@dataclass
class SuperpixelConfig:
    k: float = 300.0        # scale of observation, on 0..255 color units
    min_size: int = 20
    sigma: float = 0.8

    def __post_init__(self) -> None:
        if self.k <= 0:
            raise ValueError("k must be positive")
        if self.min_size < 1:
            raise ValueError("min_size must be >= 1")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")


@dataclass
class Segmentation:
    """Region partition: labels (H, W) in 0..R-1, contiguous, plus region sizes."""

    labels: np.ndarray
    sizes: np.ndarray

    @property
    def n_regions(self) -> int:
        return len(self.sizes)


def smooth_for_segmentation(rgb: np.ndarray, sigma: float) -> np.ndarray:
    """Per-channel Gaussian pre-smoothing on the 0..255 scale; sigma=0 skips."""
    img = np.asarray(rgb, dtype=np.float64) * 255.0
    if sigma == 0:
        return img
    radius = max(1, int(np.ceil(3.0 * sigma)))
    taps = gaussian_taps(2 * radius + 1, sigma)
    return np.stack([normalized_correlate(ch, taps) for ch in img])


def grid_edges(h: int, w: int) -> tuple[np.ndarray, np.ndarray]:
    """8-connected grid edges as (a, b) index arrays, in the fixed order
    right, down, down-right, down-left, each block row-major."""
    ids = np.arange(h * w).reshape(h, w)
    pairs = [
        (ids[:, :-1], ids[:, 1:]),
        (ids[:-1, :], ids[1:, :]),
        (ids[:-1, :-1], ids[1:, 1:]),
        (ids[:-1, 1:], ids[1:, :-1]),
    ]
    a = np.concatenate([p.ravel() for p, _ in pairs])
    b = np.concatenate([q.ravel() for _, q in pairs])
    return a, b


def segment(rgb: np.ndarray, config: SuperpixelConfig = SuperpixelConfig()) -> Segmentation:
    """Felzenszwalb superpixels of an rgb (3, H, W) image with values in [0, 1]."""
    if rgb.ndim != 3 or rgb.shape[0] != 3:
        raise DataError(f"expected rgb (3, H, W), got {rgb.shape}")
    h, w = rgb.shape[1], rgb.shape[2]
    if h == 0 or w == 0:
        raise DataError("empty image")
    n = h * w
    smoothed = smooth_for_segmentation(rgb, config.sigma)

    if n == 1:
        return Segmentation(labels=np.zeros((1, 1), dtype=np.int32), sizes=np.array([1]))

    ea, eb = grid_edges(h, w)
    flat = smoothed.reshape(3, n)
    diff = flat[:, ea] - flat[:, eb]
    weights = np.sqrt((diff * diff).sum(axis=0))
    order = np.argsort(weights, kind="stable")
    ea = ea[order].tolist()
    eb = eb[order].tolist()
    wlist = weights[order].tolist()

    k = float(config.k)
    parent = list(range(n))
    size = [1] * n
    thr = [k] * n  # Int(C) + k/|C|, with Int = 0 for singletons

    for i in range(len(wlist)):
        a = ea[i]
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        b = eb[i]
        while parent[b] != b:
            parent[b] = parent[parent[b]]
            b = parent[b]
        if a != b:
            wi = wlist[i]
            if wi <= thr[a] and wi <= thr[b]:
                parent[b] = a
                size[a] += size[b]
                thr[a] = wi + k / size[a]

    min_size = config.min_size
    if min_size > 1:
        for i in range(len(wlist)):
            a = ea[i]
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            b = eb[i]
            while parent[b] != b:
                parent[b] = parent[parent[b]]
                b = parent[b]
            if a != b and (size[a] < min_size or size[b] < min_size):
                parent[b] = a
                size[a] += size[b]

    # contiguous region ids in row-major first-occurrence order
    labels = np.empty(n, dtype=np.int32)
    remap: dict[int, int] = {}
    for p in range(n):
        r = p
        while parent[r] != r:
            parent[r] = parent[parent[r]]
            r = parent[r]
        lab = remap.get(r)
        if lab is None:
            lab = len(remap)
            remap[r] = lab
        labels[p] = lab
    sizes = np.bincount(labels, minlength=len(remap))
    return Segmentation(labels=labels.reshape(h, w), sizes=sizes)


def region_mean_distributions(dist: np.ndarray, seg: Segmentation) -> np.ndarray:
    """Mean class distribution per region: (K, H, W) -> (R, K)."""
    k = dist.shape[0]
    if dist.shape[1:] != seg.labels.shape:
        raise ValueError(f"distribution grid {dist.shape[1:]} does not match "
                         f"segmentation {seg.labels.shape}")
    sums = np.zeros((seg.n_regions, k))
    np.add.at(sums, seg.labels.ravel(), dist.reshape(k, -1).T)
    return sums / seg.sizes[:, None]


def aggregate(dist: np.ndarray, seg: Segmentation) -> np.ndarray:
    """Label every pixel of a region with the argmax of the region's mean
    class distribution (lowest class index wins ties)."""
    region_label = region_mean_distributions(dist, seg).argmax(axis=1)
    return region_label[seg.labels].astype(np.int64)


def save_segmentation(path, seg: Segmentation) -> None:
    """Serialize the region-id map as a u16 container."""
    from .container import write_tensor

    if seg.n_regions > 65535:
        raise DataError(f"{seg.n_regions} regions exceed the u16 label image")
    write_tensor(path, seg.labels.astype(np.uint16))


def load_segmentation(path) -> Segmentation:
    from .container import read_tensor

    labels = np.asarray(read_tensor(path), dtype=np.int32)
    if labels.ndim != 2:
        raise DataError(f"{path}: segmentation must be a 2-D label image")
    return Segmentation(labels=labels, sizes=np.bincount(labels.ravel()))
