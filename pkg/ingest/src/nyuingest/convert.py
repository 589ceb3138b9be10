"""NYU-depth-v2 labeled archive -> per-frame containers, split lists, class
tables and default cluster maps.

The archive is a MATLAB v7.3 (HDF5) file.  MATLAB stores arrays column-major,
so h5py sees the labeled fields transposed: images (N, 3, W, H), depths and
labels (N, W, H).  Frames are emitted at their raw resolution; rescaling is
the consuming pipeline's job.

Label ids are shifted on output: raw 0 means "unlabeled" and becomes the
ignore sentinel 65535; classes 1..894 become 0..893, matching the emitted
class-name table.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import h5py
import numpy as np

from .container import write_tensor

IGNORE_LABEL = 65535
REQUIRED_FIELDS = ("images", "depths", "labels", "names")

# editable defaults: first matching keyword wins, scanned in list order
FOUR_CLASS_CLUSTERS = [
    ("ground", ("floor", "ground", "rug", "carpet", "doormat")),
    ("furniture", ("bed", "chair", "sofa", "couch", "table", "desk", "cabinet",
                   "dresser", "shelf", "shelves", "counter", "bench", "stool",
                   "wardrobe", "nightstand", "drawer", "ottoman")),
    ("structure", ("wall", "ceiling", "window", "door", "stair", "column", "pillar",
                   "banister", "railing", "beam", "blinds", "curtain")),
    ("props", ()),  # catch-all
]

FOURTEEN_CLASS_CLUSTERS = [
    ("bed", ("bed", "mattress", "headboard")),
    ("chair", ("chair", "stool", "bench")),
    ("sofa", ("sofa", "couch", "futon")),
    ("table", ("table", "desk", "nightstand")),
    ("ceiling", ("ceiling",)),
    ("floor", ("floor", "rug", "carpet", "doormat")),
    ("furniture", ("cabinet", "dresser", "shelf", "shelves", "counter", "wardrobe",
                   "drawer", "ottoman", "furniture")),
    ("deco", ("picture", "painting", "photo", "poster", "mirror", "decoration",
              "sculpture", "art")),
    ("wall", ("wall",)),
    ("window", ("window", "blinds", "curtain")),
    ("books", ("book", "magazine")),
    ("tv", ("television", "tv", "monitor", "screen")),
    ("objects", ()),  # catch-all
]


class IngestError(RuntimeError):
    """Archive or split input unusable."""


@dataclass
class IngestManifest:
    archive: str
    out_dir: str
    n_frames: int
    n_train: int
    n_test: int
    split_source: str
    raw_depth: bool

    def as_text(self) -> str:
        return (f"archive={self.archive}\n"
                f"out_dir={self.out_dir}\n"
                f"frames={self.n_frames}\n"
                f"train={self.n_train}\n"
                f"test={self.n_test}\n"
                f"split_source={self.split_source}\n"
                f"raw_depth={'true' if self.raw_depth else 'false'}\n")


def _decode_name(archive: h5py.File, ref) -> str:
    chars = np.asarray(archive[ref]).ravel()
    return "".join(chr(int(c)) for c in chars)


def read_class_names(archive: h5py.File) -> list[str]:
    refs = np.asarray(archive["names"]).ravel()
    return [_decode_name(archive, r) for r in refs]


def load_splits_mat(path: str | Path) -> tuple[list[int], list[int]]:
    """Official splits.mat: trainNdxs/testNdxs, 1-based MATLAB indices."""
    from scipy.io import loadmat

    mat = loadmat(str(path))
    try:
        train = [int(v) for v in np.asarray(mat["trainNdxs"]).ravel()]
        test = [int(v) for v in np.asarray(mat["testNdxs"]).ravel()]
    except KeyError as exc:
        raise IngestError(f"{path}: missing {exc} (expected trainNdxs/testNdxs)") from exc
    return train, test


def load_splits_text(train_path: str | Path, test_path: str | Path) -> tuple[list[int], list[int]]:
    """Text split lists: one 1-based frame index per line."""

    def read(path):
        out = []
        for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                out.append(int(line))
            except ValueError as exc:
                raise IngestError(f"{path}:{lineno}: not an index: {line!r}") from exc
        return out

    return read(train_path), read(test_path)


def _check_splits(train: list[int], test: list[int], n_frames: int) -> None:
    all_idx = train + test
    if len(set(all_idx)) != len(all_idx):
        raise IngestError("train/test splits overlap")
    if any(i < 1 or i > n_frames for i in all_idx):
        raise IngestError(f"split index outside 1..{n_frames}")
    if len(all_idx) != n_frames:
        raise IngestError(f"splits cover {len(all_idx)} of {n_frames} frames")


def _cluster_map(names: list[str], clusters) -> list[tuple[int, int, str]]:
    cluster_names = [c for c, _ in clusters]
    rows = []
    for source_id, name in enumerate(names):
        lowered = name.lower()
        target = len(clusters) - 1  # catch-all
        for t, (_, keywords) in enumerate(clusters):
            if any(k in lowered for k in keywords):
                target = t
                break
        rows.append((source_id, target, cluster_names[target]))
    return rows


def write_cluster_map(path: Path, names: list[str], clusters) -> None:
    lines = ["# source_id<TAB>target_id<TAB>cluster  (keyword defaults; edit freely)"]
    used = sorted({t for _, t, _ in _cluster_map(names, clusters)})
    renumber = {t: i for i, t in enumerate(used)}
    for source_id, target, cname in _cluster_map(names, clusters):
        lines.append(f"{source_id}\t{renumber[target]}\t{cname}")
    path.write_text("\n".join(lines) + "\n")


def convert(archive_path: str | Path, out_dir: str | Path,
            splits: tuple[list[int], list[int]], split_source: str,
            raw_depth: bool = False) -> IngestManifest:
    """Emit containers and metadata for every labeled frame.

    Deterministic: re-running produces byte-identical files.
    """
    out = Path(out_dir)
    train_idx, test_idx = splits
    with h5py.File(archive_path, "r") as archive:
        missing = [f for f in REQUIRED_FIELDS if f not in archive]
        if missing:
            raise IngestError(f"{archive_path}: missing fields {missing}")
        if raw_depth and "rawDepths" not in archive:
            raise IngestError(f"{archive_path}: no rawDepths field")
        images = archive["images"]
        depths = archive["depths"]
        labels = archive["labels"]
        n_frames = images.shape[0]
        _check_splits(train_idx, test_idx, n_frames)
        names = read_class_names(archive)

        for split, indices in (("train", train_idx), ("test", test_idx)):
            split_dir = out / split
            split_dir.mkdir(parents=True, exist_ok=True)
            for seq, frame_no in enumerate(indices):
                i = frame_no - 1
                rgb = np.asarray(images[i]).transpose(0, 2, 1)
                if rgb.dtype != np.uint8:
                    raise IngestError(f"frame {frame_no}: rgb dtype {rgb.dtype}, expected u8")
                depth = np.asarray(depths[i], dtype=np.float32).T
                if not np.isfinite(depth).all():
                    raise IngestError(f"frame {frame_no}: non-finite depth "
                                      "(the inpainted 'depths' field is required)")
                raw = np.asarray(labels[i]).T
                if raw.max(initial=0) > len(names):
                    raise IngestError(f"frame {frame_no}: label id {int(raw.max())} "
                                      f"exceeds the {len(names)}-name table")
                shifted = np.where(raw == 0, IGNORE_LABEL, raw.astype(np.int64) - 1)
                base = split_dir / f"{seq:04d}"
                write_tensor(f"{base}.rgb.rgdt", rgb)
                write_tensor(f"{base}.depth.rgdt", depth[None])
                write_tensor(f"{base}.labels.rgdt", shifted.astype(np.uint16))
                if raw_depth:
                    rd = np.asarray(archive["rawDepths"][i], dtype=np.float32).T
                    write_tensor(f"{base}.rawdepth.rgdt", rd[None])

    out.mkdir(parents=True, exist_ok=True)
    (out / "train_indices.txt").write_text("".join(f"{i}\n" for i in train_idx))
    (out / "test_indices.txt").write_text("".join(f"{i}\n" for i in test_idx))
    (out / "class_names.txt").write_text(
        "".join(f"{i}\t{name}\n" for i, name in enumerate(names)))
    write_cluster_map(out / "classmap_4.tsv", names, FOUR_CLASS_CLUSTERS)
    write_cluster_map(out / "classmap_14.tsv", names, FOURTEEN_CLASS_CLUSTERS)

    manifest = IngestManifest(archive=str(archive_path), out_dir=str(out),
                              n_frames=n_frames, n_train=len(train_idx),
                              n_test=len(test_idx), split_source=split_source,
                              raw_depth=raw_depth)
    (out / "manifest.txt").write_text(manifest.as_text())
    return manifest
