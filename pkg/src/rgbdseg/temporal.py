"""Cross-frame label smoothing for video.

Superpixels are computed per frame, matched to the previous frame's regions
by pixel overlap, and each matched region's class distribution is smoothed
with an exponential moving average.  A simplified stand-in for dedicated
temporally-consistent superpixels; its job is to cut label flicker.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .superpixels import Segmentation


@dataclass
class TemporalConfig:
    alpha: float = 0.7        # EMA weight on history
    min_overlap: float = 0.3  # fraction of the current region that must overlap

    def __post_init__(self) -> None:
        if not 0.0 <= self.alpha < 1.0:
            raise ValueError("alpha must be in [0, 1)")
        if not 0.0 <= self.min_overlap <= 1.0:
            raise ValueError("min_overlap must be in [0, 1]")


@dataclass
class TrackState:
    segmentation: Segmentation
    region_dists: np.ndarray  # (R, K), normalized


NO_MATCH = -1


def match_regions(seg_t: Segmentation, seg_prev: Segmentation,
                  min_overlap: float) -> np.ndarray:
    """Map each current region to the previous region with maximal overlap.

    Returns an (R_t,) int array; NO_MATCH where the best overlap covers less
    than min_overlap of the current region.  Ties break to the lower
    previous-region id.
    """
    if seg_t.labels.shape != seg_prev.labels.shape:
        raise ValueError("segmentations cover different grids")
    rt, rp = seg_t.n_regions, seg_prev.n_regions
    keys = seg_t.labels.ravel().astype(np.int64) * rp + seg_prev.labels.ravel()
    counts = np.bincount(keys, minlength=rt * rp).reshape(rt, rp)
    best = counts.argmax(axis=1)  # first max = lowest previous id on ties
    best_counts = counts[np.arange(rt), best]
    mapping = np.where(best_counts >= min_overlap * seg_t.sizes, best, NO_MATCH)
    return mapping.astype(np.int64)


def smooth(dist_regions_t: np.ndarray, mapping: np.ndarray, seg_t: Segmentation,
           state: TrackState | None, config: TemporalConfig) -> tuple[np.ndarray, TrackState]:
    """EMA-smooth matched regions against the previous state.

    Matched region r: d <- normalize(alpha * d_prev + (1 - alpha) * d_t);
    unmatched regions pass through.  alpha=0 is an exact no-op on the
    distributions, so the pipeline degrades to frame-by-frame output.
    Returns the smoothed (R, K) array and the updated state.
    """
    smoothed = dist_regions_t.copy()
    if state is not None and config.alpha > 0.0:
        matched = np.nonzero(mapping != NO_MATCH)[0]
        if matched.size:
            prev = state.region_dists[mapping[matched]]
            mix = config.alpha * prev + (1.0 - config.alpha) * dist_regions_t[matched]
            smoothed[matched] = mix / mix.sum(axis=1, keepdims=True)
    return smoothed, TrackState(segmentation=seg_t, region_dists=smoothed)
