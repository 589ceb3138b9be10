"""Synthetic indoor RGBD scenes with exact labels, for desk-scale training.

Each scene is a ceiling band, a wall band, a floor band and a few box props.
Depth carries the plane identity: the floor profile is convex along columns,
the ceiling concave, the wall flat, so the classes stay separable in the
depth channel even after local contrast normalization removes absolute
depth and constant gradients.  Colors are per-class by default; with
``identical_plane_colors`` the three plane classes share one color
distribution and only depth tells them apart.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .container import write_tensor

CLASS_NAMES = ("floor", "ceiling", "wall", "prop")
FLOOR, CEILING, WALL, PROP = range(4)
N_CLASSES = len(CLASS_NAMES)

PLANE_BASE_COLORS = {
    FLOOR: (0.45, 0.32, 0.22),
    CEILING: (0.85, 0.85, 0.82),
    WALL: (0.55, 0.60, 0.65),
}


@dataclass
class SynthConfig:
    height: int = 240
    width: int = 320
    ceiling_frac: tuple[float, float] = (0.22, 0.30)
    floor_frac: tuple[float, float] = (0.26, 0.34)
    wall_depth: tuple[float, float] = (2.8, 3.4)
    n_props: tuple[int, int] = (2, 4)
    prop_extent: tuple[int, int] = (16, 48)
    color_noise: float = 0.08
    plane_noise: float = 0.12       # noise in identical-color mode
    depth_noise: float = 0.002
    identical_plane_colors: bool = False
    alternate_vertical_flip: bool = False  # flip odd-indexed scenes: row index stops
                                           # predicting the plane classes, curvature
                                           # (flip-invariant) still does

    def expected_fractions(self) -> dict[int, float]:
        """Approximate per-class pixel fractions implied by the ranges."""
        ceil_f = sum(self.ceiling_frac) / 2
        floor_f = sum(self.floor_frac) / 2
        mean_extent = sum(self.prop_extent) / 2
        mean_props = sum(self.n_props) / 2
        prop_f = mean_props * mean_extent ** 2 / (self.height * self.width)
        scale = 1.0 - prop_f
        return {FLOOR: floor_f * scale, CEILING: ceil_f * scale,
                WALL: (1.0 - ceil_f - floor_f) * scale, PROP: prop_f}


def _plane_color(rng: np.random.Generator, shape: tuple[int, int], class_id: int,
                 config: SynthConfig) -> np.ndarray:
    if config.identical_plane_colors:
        base = (0.5, 0.5, 0.5)
        noise = config.plane_noise
    else:
        base = PLANE_BASE_COLORS[class_id]
        noise = config.color_noise
    out = np.empty((3,) + shape)
    for c in range(3):
        out[c] = base[c] + rng.uniform(-noise, noise, size=shape)
    return np.clip(out, 0.0, 1.0)


def _prop_color(rng: np.random.Generator, shape: tuple[int, int]) -> np.ndarray:
    # saturated per-box color: every channel pushed near 0 or 1
    base = np.where(rng.random(3) < 0.5, rng.uniform(0.0, 0.12, 3), rng.uniform(0.88, 1.0, 3))
    out = np.empty((3,) + shape)
    for c in range(3):
        out[c] = base[c] + rng.uniform(-0.04, 0.04, size=shape)
    return np.clip(out, 0.0, 1.0)


def generate_scene(rng: np.random.Generator,
                   config: SynthConfig = SynthConfig()) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """One scene: rgb (3, H, W) in [0, 1], depth (1, H, W) meters, labels (H, W) u16."""
    h, w = config.height, config.width
    h_c = int(round(h * rng.uniform(*config.ceiling_frac)))
    h_w = h - int(round(h * rng.uniform(*config.floor_frac)))
    d_wall = rng.uniform(*config.wall_depth)

    labels = np.full((h, w), WALL, dtype=np.uint16)
    labels[:h_c] = CEILING
    labels[h_w:] = FLOOR

    depth_col = np.empty(h)
    rows = np.arange(h)
    # ceiling: concave profile rising toward the wall junction
    t = (h_c - rows[:h_c]) / max(h_c, 1)
    depth_col[:h_c] = d_wall * (1.0 - 0.30 * t - 0.45 * t * t)
    depth_col[h_c:h_w] = d_wall
    # floor: convex profile falling away from the wall junction
    t = (rows[h_w:] - h_w) / max(h - h_w, 1)
    depth_col[h_w:] = d_wall * (1.0 - 0.75 * t + 0.30 * t * t)
    depth = np.broadcast_to(depth_col[:, None], (h, w)).copy()

    rgb = np.empty((3, h, w))
    for class_id, rows_sel in ((CEILING, slice(0, h_c)), (WALL, slice(h_c, h_w)),
                               (FLOOR, slice(h_w, h))):
        rgb[:, rows_sel, :] = _plane_color(rng, (rows_sel.stop - rows_sel.start, w),
                                           class_id, config)

    n_props = int(rng.integers(config.n_props[0], config.n_props[1] + 1))
    for _ in range(n_props):
        bh = int(rng.integers(config.prop_extent[0], config.prop_extent[1] + 1))
        bw = int(rng.integers(config.prop_extent[0], config.prop_extent[1] + 1))
        y0 = int(rng.integers(0, h - bh + 1))
        x0 = int(rng.integers(0, w - bw + 1))
        labels[y0:y0 + bh, x0:x0 + bw] = PROP
        depth[y0:y0 + bh, x0:x0 + bw] = rng.uniform(1.3, d_wall - 0.5)
        rgb[:, y0:y0 + bh, x0:x0 + bw] = _prop_color(rng, (bh, bw))

    depth += rng.uniform(-config.depth_noise, config.depth_noise, size=(h, w))
    return rgb, depth[None], labels


def generate_dataset(out_dir: str | Path, n_scenes: int, seed: int,
                     split: str = "train", config: SynthConfig = SynthConfig()) -> list[Path]:
    """Write n_scenes container triplets under out_dir/split; deterministic by seed.

    Scene i depends only on (seed, i), so extending a dataset keeps earlier
    scenes bit-identical.
    """
    split_dir = Path(out_dir) / split
    split_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for i in range(n_scenes):
        rng = np.random.default_rng([seed, i])
        rgb, depth, labels = generate_scene(rng, config)
        if config.alternate_vertical_flip and i % 2 == 1:
            rgb = rgb[:, ::-1].copy()
            depth = depth[:, ::-1].copy()
            labels = labels[::-1].copy()
        base = split_dir / f"{i:04d}"
        write_tensor(f"{base}.rgb.rgdt", rgb.astype(np.float32))
        write_tensor(f"{base}.depth.rgdt", depth.astype(np.float32))
        write_tensor(f"{base}.labels.rgdt", labels)
        written.append(base)
    return written
