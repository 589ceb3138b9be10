import numpy as np
import pytest

from rgbdseg.superpixels import Segmentation
from rgbdseg.temporal import NO_MATCH, TemporalConfig, TrackState, match_regions, smooth


def seg_from_labels(labels):
    labels = np.asarray(labels, dtype=np.int32)
    return Segmentation(labels=labels, sizes=np.bincount(labels.ravel()))


def overlap_oracle(seg_t, seg_prev, min_overlap):
    """Brute-force overlap maximization with lowest-prev-id tie-break."""
    out = np.full(seg_t.n_regions, NO_MATCH, dtype=np.int64)
    for r in range(seg_t.n_regions):
        mask = seg_t.labels == r
        best, best_count = NO_MATCH, 0
        for p in range(seg_prev.n_regions):
            count = int((seg_prev.labels[mask] == p).sum())
            if count > best_count:
                best, best_count = p, count
        if best != NO_MATCH and best_count >= min_overlap * mask.sum():
            out[r] = best
    return out


def cell_grid_segmentation(h, w, cell, offset=0):
    """Checkerboard of cell x cell regions, optionally shifted diagonally."""
    ys = ((np.arange(h) + offset) // cell)[:, None]
    xs = ((np.arange(w) + offset) // cell)[None, :]
    raw = ys * ((w + cell - 1 + offset) // cell + 1) + xs
    _, labels = np.unique(raw, return_inverse=True)
    return seg_from_labels(labels.reshape(h, w))


class TestMatchRegions:
    def test_identical_segmentations(self):
        seg = cell_grid_segmentation(8, 8, 2)
        mapping = match_regions(seg, seg, min_overlap=0.3)
        assert np.array_equal(mapping, np.arange(seg.n_regions))

    def test_shift_by_one_keeps_identity(self):
        labels = np.zeros((10, 12), dtype=np.int32)
        labels[:, 6:] = 1
        seg_prev = seg_from_labels(labels)
        shifted = np.zeros((10, 12), dtype=np.int32)
        shifted[:, 7:] = 1
        seg_t = seg_from_labels(shifted)
        mapping = match_regions(seg_t, seg_prev, min_overlap=0.3)
        assert np.array_equal(mapping, [0, 1])
        assert np.array_equal(mapping, overlap_oracle(seg_t, seg_prev, 0.3))

    def test_checkerboard_vs_offset_inverse_all_none(self):
        seg_t = cell_grid_segmentation(8, 8, 2)
        seg_prev = cell_grid_segmentation(8, 8, 2, offset=1)
        mapping = match_regions(seg_t, seg_prev, min_overlap=0.6)
        # every cell overlaps the shifted grid in at most a quarter
        assert (mapping == NO_MATCH).all()
        assert np.array_equal(mapping, overlap_oracle(seg_t, seg_prev, 0.6))

    @pytest.mark.parametrize("seed", range(3))
    def test_matches_overlap_oracle_random(self, seed):
        rng = np.random.default_rng(seed)
        seg_t = seg_from_labels(rng.integers(0, 5, size=(9, 11)))
        seg_prev = seg_from_labels(rng.integers(0, 4, size=(9, 11)))
        for mo in (0.0, 0.3, 0.6):
            assert np.array_equal(match_regions(seg_t, seg_prev, mo),
                                  overlap_oracle(seg_t, seg_prev, mo))

    def test_grid_mismatch_rejected(self):
        with pytest.raises(ValueError):
            match_regions(seg_from_labels(np.zeros((2, 2), dtype=int)),
                          seg_from_labels(np.zeros((3, 2), dtype=int)), 0.3)


class TestSmooth:
    def setup_method(self):
        self.seg = cell_grid_segmentation(6, 6, 3)
        self.rng = np.random.default_rng(42)

    def region_dists(self, concentration=1.0):
        return self.rng.dirichlet(np.full(4, concentration), size=self.seg.n_regions)

    def test_alpha_zero_passthrough(self):
        cfg = TemporalConfig(alpha=0.0, min_overlap=0.3)
        d0 = self.region_dists()
        _, state = smooth(d0, np.full(self.seg.n_regions, NO_MATCH), self.seg, None, cfg)
        d1 = self.region_dists()
        mapping = np.arange(self.seg.n_regions)
        smoothed, _ = smooth(d1, mapping, self.seg, state, cfg)
        assert np.array_equal(smoothed, d1)

    def test_first_frame_passthrough(self):
        cfg = TemporalConfig(alpha=0.7)
        d0 = self.region_dists()
        smoothed, state = smooth(d0, np.full(self.seg.n_regions, NO_MATCH), self.seg, None, cfg)
        assert np.array_equal(smoothed, d0)
        assert state.segmentation is self.seg

    def test_constant_video_converges(self):
        cfg = TemporalConfig(alpha=0.5)
        target = self.region_dists(concentration=2.0)
        # state starts somewhere else entirely
        start = self.region_dists(concentration=2.0)
        state = TrackState(segmentation=self.seg, region_dists=start)
        mapping = np.arange(self.seg.n_regions)
        smoothed = None
        for _ in range(30):
            smoothed, state = smooth(target, mapping, self.seg, state, cfg)
        assert np.abs(smoothed - target).max() < 1e-6  # 0.5^30 of the initial gap

    def test_single_frame_flip_does_not_change_argmax(self):
        cfg = TemporalConfig(alpha=0.7)
        prior = np.array([[0.8, 0.2]])
        flip = np.array([[0.2, 0.8]])
        state = TrackState(segmentation=self.seg, region_dists=prior)
        smoothed, _ = smooth(flip, np.array([0]), self.seg, state, cfg)
        # alpha * prior margin (0.42) beats (1 - alpha) * flip margin (0.18)
        assert smoothed[0].argmax() == 0

    def test_unmatched_regions_pass_through(self):
        cfg = TemporalConfig(alpha=0.7)
        d_prev = self.region_dists()
        state = TrackState(segmentation=self.seg, region_dists=d_prev)
        d_t = self.region_dists()
        mapping = np.full(self.seg.n_regions, NO_MATCH)
        mapping[0] = 1
        smoothed, _ = smooth(d_t, mapping, self.seg, state, cfg)
        assert np.array_equal(smoothed[1:], d_t[1:])
        assert not np.array_equal(smoothed[0], d_t[0])

    def test_normalization_preserved(self):
        cfg = TemporalConfig(alpha=0.7, min_overlap=0.0)
        state = None
        mapping = np.arange(self.seg.n_regions)
        for _ in range(20):
            d = self.region_dists()
            smoothed, state = smooth(d, mapping, self.seg, state, cfg)
            assert np.abs(smoothed.sum(axis=1) - 1.0).max() < 1e-9

    def test_config_validation(self):
        with pytest.raises(ValueError):
            TemporalConfig(alpha=1.0)
        with pytest.raises(ValueError):
            TemporalConfig(alpha=-0.1)
        with pytest.raises(ValueError):
            TemporalConfig(min_overlap=1.5)
