"""Class taxonomy remapping and the two accuracy measures.

Classwise accuracy is the mean of the row-normalized confusion-matrix
diagonal (per-class recall) over classes that actually occur; pixelwise
accuracy is reported both as per-image statistics (mean / median /
population std-dev) and as the pooled ratio.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .container import DataError

IGNORE_TARGET = -1


@dataclass
class ClassMap:
    """Surjective source-class -> target-cluster map; target -1 means ignored.

    The mapping file is line-oriented: ``source_id<TAB>target_id<TAB>name``
    where name labels the target cluster (rows of the same target must
    agree).  Ignored sources use target -1.
    """

    mapping: np.ndarray          # (n_source,) int, IGNORE_TARGET for ignored classes
    target_names: list[str]

    def __post_init__(self) -> None:
        targets = np.unique(self.mapping[self.mapping != IGNORE_TARGET])
        if targets.size and (targets[0] < 0 or targets[-1] != targets.size - 1):
            raise DataError("target ids must be contiguous from 0")
        if targets.size != len(self.target_names):
            raise DataError(f"{targets.size} targets but {len(self.target_names)} names")

    @property
    def n_source(self) -> int:
        return len(self.mapping)

    @property
    def n_target(self) -> int:
        return len(self.target_names)

    @classmethod
    def identity(cls, n: int, names: list[str] | None = None) -> "ClassMap":
        return cls(mapping=np.arange(n), target_names=names or [f"class{i}" for i in range(n)])

    @classmethod
    def from_tsv(cls, path: str | Path) -> "ClassMap":
        rows: dict[int, int] = {}
        names: dict[int, str] = {}
        for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise DataError(f"{path}:{lineno}: expected source<TAB>target<TAB>name")
            try:
                src, tgt = int(parts[0]), int(parts[1])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: non-integer class id") from exc
            if src in rows:
                raise DataError(f"{path}:{lineno}: duplicate source id {src}")
            rows[src] = tgt
            if tgt != IGNORE_TARGET:
                if names.setdefault(tgt, parts[2]) != parts[2]:
                    raise DataError(f"{path}:{lineno}: conflicting names for target {tgt}")
        if not rows:
            raise DataError(f"{path}: empty class map")
        n_source = max(rows) + 1
        if set(rows) != set(range(n_source)):
            raise DataError(f"{path}: source ids must cover 0..{n_source - 1}")
        mapping = np.array([rows[i] for i in range(n_source)])
        name_list = [names[t] for t in sorted(names)]
        return cls(mapping=mapping, target_names=name_list)


def remap_labels(labels: np.ndarray, class_map: ClassMap, ignore_label: int) -> np.ndarray:
    """Index-map a label image; sources mapped to -1 become ignore_label.

    Input values equal to ignore_label pass through unchanged.
    """
    out = np.full(labels.shape, ignore_label, dtype=np.int64)
    valid = labels != ignore_label
    vals = labels[valid].astype(np.int64)
    if vals.size and (vals.min() < 0 or vals.max() >= class_map.n_source):
        raise DataError("label id outside the class map")
    mapped = class_map.mapping[vals]
    mapped = np.where(mapped == IGNORE_TARGET, ignore_label, mapped)
    out[valid] = mapped
    return out


def remap_distributions(dist: np.ndarray, class_map: ClassMap) -> np.ndarray:
    """Sum member-class probabilities per cluster: (K_s, ...) -> (K_t, ...).

    Mass on ignored source classes is dropped, so columns remain normalized
    only when the map has no ignored sources.
    """
    if dist.shape[0] != class_map.n_source:
        raise ValueError(f"distribution has {dist.shape[0]} classes, map expects "
                         f"{class_map.n_source}")
    out = np.zeros((class_map.n_target,) + dist.shape[1:])
    for src, tgt in enumerate(class_map.mapping):
        if tgt != IGNORE_TARGET:
            out[tgt] += dist[src]
    return out


@dataclass
class ConfusionMatrix:
    """K x K counts; rows are ground truth, columns are predictions."""

    counts: np.ndarray

    @classmethod
    def empty(cls, n_classes: int) -> "ConfusionMatrix":
        return cls(counts=np.zeros((n_classes, n_classes), dtype=np.int64))

    @property
    def n_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def add(self, truth: np.ndarray, pred: np.ndarray, ignore_label: int | None = None) -> None:
        t = truth.ravel()
        p = pred.ravel()
        if t.shape != p.shape:
            raise ValueError("truth and prediction shapes differ")
        if ignore_label is not None:
            keep = t != ignore_label
            t, p = t[keep], p[keep]
        k = self.n_classes
        if t.size and (t.min() < 0 or t.max() >= k or p.min() < 0 or p.max() >= k):
            raise ValueError("class id outside the confusion matrix")
        self.counts += np.bincount(t * k + p, minlength=k * k).reshape(k, k)

    def merge(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(counts=self.counts + other.counts)


def per_class_accuracy(cm: ConfusionMatrix) -> np.ndarray:
    """Row-normalized diagonal; NaN for classes with no ground-truth pixels."""
    rowsum = cm.counts.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(rowsum > 0, np.diag(cm.counts) / rowsum, np.nan)


def classwise_accuracy(cm: ConfusionMatrix) -> float:
    """Mean of the confusion-matrix diagonal over classes that occur."""
    acc = per_class_accuracy(cm)
    present = ~np.isnan(acc)
    if not present.any():
        raise ValueError("no ground-truth pixels in any class")
    return float(acc[present].mean())


@dataclass
class PixelAccuracy:
    mean: float
    median: float
    stddev: float
    pooled: float


def pixelwise_accuracy(per_image: list[tuple[int, int]]) -> PixelAccuracy:
    """Reduce per-image (correct, total) pairs; images with no evaluated
    pixels are skipped.  stddev is the population standard deviation."""
    accs = [c / t for c, t in per_image if t > 0]
    if not accs:
        raise ValueError("no evaluated pixels")
    total_correct = sum(c for c, t in per_image)
    total = sum(t for c, t in per_image)
    arr = np.array(accs)
    return PixelAccuracy(mean=float(arr.mean()), median=float(np.median(arr)),
                         stddev=float(arr.std()), pooled=total_correct / total)


@dataclass
class EvalReport:
    name: str
    confusion: ConfusionMatrix
    class_names: list[str]
    pixel: PixelAccuracy
    extras: dict[str, float] = field(default_factory=dict)

    def key_values(self) -> dict[str, float]:
        out = {f"{self.name}.classwise_accuracy": classwise_accuracy(self.confusion),
               f"{self.name}.pixel_accuracy_mean": self.pixel.mean,
               f"{self.name}.pixel_accuracy_median": self.pixel.median,
               f"{self.name}.pixel_accuracy_stddev": self.pixel.stddev,
               f"{self.name}.pixel_accuracy_pooled": self.pixel.pooled}
        acc = per_class_accuracy(self.confusion)
        for i, cname in enumerate(self.class_names):
            if not np.isnan(acc[i]):
                out[f"{self.name}.class.{cname}"] = float(acc[i])
        out.update({f"{self.name}.{k}": v for k, v in self.extras.items()})
        return out

    def as_text(self) -> str:
        acc = per_class_accuracy(self.confusion)
        width = max([len(c) for c in self.class_names] + [12])
        lines = [f"== {self.name} ==",
                 f"{'class':<{width}}  acc(%)"]
        for i, cname in enumerate(self.class_names):
            shown = "   -" if np.isnan(acc[i]) else f"{100 * acc[i]:6.1f}"
            lines.append(f"{cname:<{width}}  {shown}")
        lines.append(f"{'Avg. Class Acc.':<{width}}  {100 * classwise_accuracy(self.confusion):6.1f}")
        lines.append(f"{'Pixel Acc. (mean)':<{width}}  {100 * self.pixel.mean:6.1f}")
        lines.append(f"{'Pixel Acc. (median)':<{width}}  {100 * self.pixel.median:6.1f}")
        lines.append(f"{'Pixel Acc. (std. dev.)':<{width}}  {100 * self.pixel.stddev:6.1f}")
        lines.append(f"{'Pixel Acc. (pooled)':<{width}}  {100 * self.pixel.pooled:6.1f}")
        lines.append("")
        for key, value in self.key_values().items():
            lines.append(f"{key}={value:.6f}")
        return "\n".join(lines) + "\n"
