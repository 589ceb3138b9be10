"""Label-map rendering: editable palette files and PNG output."""
from __future__ import annotations

from importlib import resources
from pathlib import Path

import numpy as np
from PIL import Image

from .container import DataError


def default_palette(n_classes: int) -> np.ndarray:
    """Deterministic (n, 3) u8 palette: golden-angle hues, full saturation."""
    colors = np.empty((n_classes, 3), dtype=np.uint8)
    for i in range(n_classes):
        hue = (i * 0.61803398875) % 1.0
        colors[i] = _hsv_to_rgb(hue, 0.85, 0.95)
    return colors


def _hsv_to_rgb(h: float, s: float, v: float) -> tuple[int, int, int]:
    i = int(h * 6.0) % 6
    f = h * 6.0 - int(h * 6.0)
    p, q, t = v * (1 - s), v * (1 - f * s), v * (1 - (1 - f) * s)
    r, g, b = [(v, t, p), (q, v, p), (p, v, t), (p, q, v), (t, p, v), (v, p, q)][i]
    return int(r * 255), int(g * 255), int(b * 255)


def load_palette(path: str | Path) -> np.ndarray:
    """Palette file: lines ``class_id R G B [name]``; returns (max_id+1, 3) u8."""
    entries = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) < 4:
            raise DataError(f"{path}:{lineno}: expected class_id R G B [name]")
        try:
            cid = int(parts[0])
            rgb = tuple(int(v) for v in parts[1:4])
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: non-integer palette entry") from exc
        if not all(0 <= v <= 255 for v in rgb):
            raise DataError(f"{path}:{lineno}: color out of range")
        entries[cid] = rgb
    if not entries:
        raise DataError(f"{path}: empty palette")
    palette = np.zeros((max(entries) + 1, 3), dtype=np.uint8)
    for cid, rgb in entries.items():
        palette[cid] = rgb
    return palette


def packaged_data_path(name: str) -> Path:
    return Path(resources.files("rgbdseg.data") / name)


def colorize(labels: np.ndarray, palette: np.ndarray,
             ignore_label: int | None = None) -> np.ndarray:
    """Map a (H, W) label image to (H, W, 3) u8; ignore pixels become black."""
    out = np.zeros(labels.shape + (3,), dtype=np.uint8)
    valid = np.ones(labels.shape, dtype=bool)
    if ignore_label is not None:
        valid = labels != ignore_label
    ids = labels[valid].astype(np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= len(palette)):
        raise DataError(f"label id outside the {len(palette)}-entry palette")
    out[valid] = palette[ids]
    return out


def save_label_png(path: str | Path, labels: np.ndarray, palette: np.ndarray,
                   ignore_label: int | None = None) -> None:
    Image.fromarray(colorize(labels, palette, ignore_label), mode="RGB").save(path)
