"""Dataset directory handling and checkpoint packing.

Layout: ``{root}/{split}/{index}.rgb.rgdt`` plus ``.depth.rgdt`` and, for
labeled samples, ``.labels.rgdt`` (u16 class ids; the ignore id marks
unlabeled pixels).  Integer rgb containers are 0..255, float containers
0..1; depth is meters.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .classifier import ClassifierParams, TrainSample
from .config import RunConfig, parse_run_config_text
from .container import DataError, read_checkpoint, read_tensor, write_checkpoint
from .convnet import FeatureExtractorParams
from .preprocess import build_pyramid, rescale_frame


@dataclass
class Sample:
    index: int
    rgb_path: Path
    depth_path: Path
    labels_path: Path | None

    def load(self) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
        rgb = read_tensor(self.rgb_path)
        depth = read_tensor(self.depth_path)
        if rgb.ndim != 3 or rgb.shape[0] != 3:
            raise DataError(f"{self.rgb_path}: expected (3, H, W), got {rgb.shape}")
        if depth.ndim == 2:
            depth = depth[None]
        if depth.shape[1:] != rgb.shape[1:]:
            raise DataError(f"{self.depth_path}: depth {depth.shape[1:]} does not match "
                            f"rgb {rgb.shape[1:]}")
        labels = None
        if self.labels_path is not None:
            labels = read_tensor(self.labels_path)
            if labels.shape != rgb.shape[1:]:
                raise DataError(f"{self.labels_path}: labels {labels.shape} do not match "
                                f"rgb {rgb.shape[1:]}")
        return rgb, depth, labels


@dataclass
class Dataset:
    root: Path
    split: str
    samples: list[Sample]

    def __len__(self) -> int:
        return len(self.samples)


def load_split(root: str | Path, split: str, require_labels: bool = True) -> Dataset:
    split_dir = Path(root) / split
    if not split_dir.is_dir():
        raise DataError(f"no such split directory: {split_dir}")
    samples = []
    for rgb_path in sorted(split_dir.glob("*.rgb.rgdt")):
        stem = rgb_path.name[:-len(".rgb.rgdt")]
        depth_path = split_dir / f"{stem}.depth.rgdt"
        labels_path = split_dir / f"{stem}.labels.rgdt"
        if not depth_path.exists():
            raise DataError(f"missing depth container for {rgb_path}")
        if not labels_path.exists():
            if require_labels:
                raise DataError(f"missing labels container for {rgb_path}")
            labels_path = None
        try:
            index = int(stem)
        except ValueError:
            index = len(samples)
        samples.append(Sample(index=index, rgb_path=rgb_path, depth_path=depth_path,
                              labels_path=labels_path))
    if not samples:
        raise DataError(f"no samples under {split_dir}")
    return Dataset(root=Path(root), split=split, samples=samples)


def downsample_labels(labels: np.ndarray, factor: int = 4) -> np.ndarray:
    """Labels at feature resolution: the center sample of each factor-block."""
    h, w = labels.shape
    if h % factor or w % factor:
        raise DataError(f"label extents {h}x{w} not divisible by {factor}")
    off = factor // 2
    return np.asarray(labels[off::factor, off::factor], dtype=np.int64)


def rescale_labels_nearest(labels: np.ndarray, out_hw: tuple[int, int]) -> np.ndarray:
    """Nearest-neighbor label rescale (labels are ids, never interpolated)."""
    h, w = labels.shape
    oh, ow = out_hw
    if (h, w) == (oh, ow):
        return labels.copy()
    ys = np.minimum((np.arange(oh) + 0.5) * (h / oh), h - 1).astype(np.intp)
    xs = np.minimum((np.arange(ow) + 0.5) * (w / ow), w - 1).astype(np.intp)
    return labels[ys[:, None], xs[None, :]]


def prepare_training_set(dataset: Dataset, config: RunConfig) -> list[TrainSample]:
    """Pyramids plus feature-resolution targets for every labeled sample."""
    out = []
    hw = (config.input_h, config.input_w)
    for sample in dataset.samples:
        rgb, depth, labels = sample.load()
        if labels is None:
            raise DataError(f"sample {sample.index} has no labels")
        frame = rescale_frame(rgb, depth, out_hw=hw)
        pyramid = build_pyramid(frame, n_scales=config.n_scales, window=config.lcn_window,
                                eps=config.lcn_eps, use_depth=config.use_depth,
                                expected_hw=hw)
        labels = rescale_labels_nearest(labels, hw)
        targets = downsample_labels(labels, factor=4)
        ignore = targets == config.ignore_label
        if ((targets < 0) | (targets >= config.n_classes))[~ignore].any():
            raise DataError(f"sample {sample.index}: label id outside [0, {config.n_classes})")
        out.append(TrainSample(pyramid=pyramid, targets=targets))
    return out


def save_checkpoint(path: str | Path, net: FeatureExtractorParams, clf: ClassifierParams,
                    config: RunConfig, epoch: int) -> None:
    tensors: dict[str, np.ndarray] = {}
    tensors.update(net.state_tensors())
    tensors.update(clf.state_tensors())
    tensors["meta.config"] = np.frombuffer(config.as_text().encode("utf-8"), dtype=np.uint8).copy()
    tensors["meta.epoch"] = np.array([epoch], dtype=np.uint16)
    write_checkpoint(path, tensors)


def load_checkpoint(path: str | Path) -> tuple[FeatureExtractorParams, ClassifierParams,
                                               RunConfig, int]:
    tensors = read_checkpoint(path)
    try:
        net = FeatureExtractorParams.from_state(tensors)
        clf = ClassifierParams.from_state(tensors)
        config_text = bytes(tensors["meta.config"]).decode("utf-8")
        epoch = int(tensors["meta.epoch"][0])
    except KeyError as exc:
        raise DataError(f"{path}: incomplete checkpoint ({exc})") from exc
    config = parse_run_config_text(config_text, where=f"{path}:meta.config")
    return net, clf, config, epoch
