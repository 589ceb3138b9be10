"""Per-pixel classifier head and the SGD training loop.

The classifier is a 2-layer MLP (feature_dim -> hidden -> K, tanh hidden)
applied independently at every feature-map position.  Training minimizes
the per-pixel negative log-likelihood with plain SGD: classifier updates
are applied per pixel (or per `batch_pixels` chunk), while the shared
feature extractor receives one averaged update per image visit, since an
exact per-pixel extractor update would cost a full backward pass per pixel.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .convnet import FeatureExtractorParams, NetworkConfig, extract_backward, extract_multiscale_cached
from .preprocess import Pyramid
from .tensor import LinearLayerParams, NumericError, ensure_finite, softmax_rows, upsample_nearest


class TrainingDiverged(NumericError):
    """Loss became non-finite during training."""


@dataclass
class ClassifierParams:
    layer1: LinearLayerParams
    layer2: LinearLayerParams

    @classmethod
    def initialize(cls, rng: np.random.Generator, config: NetworkConfig) -> "ClassifierParams":
        return cls(
            layer1=LinearLayerParams.initialize(rng, config.hidden_size, config.feature_channels),
            layer2=LinearLayerParams.initialize(rng, config.n_classes, config.hidden_size),
        )

    def zero_grad(self) -> None:
        self.layer1.zero_grad()
        self.layer2.zero_grad()

    def sgd_step(self, lr: float) -> None:
        self.layer1.sgd_step(lr)
        self.layer2.sgd_step(lr)

    def astype(self, dtype) -> "ClassifierParams":
        return ClassifierParams(self.layer1.astype(dtype), self.layer2.astype(dtype))

    def state_tensors(self) -> dict[str, np.ndarray]:
        return {
            "clf.layer1.weight": self.layer1.weight,
            "clf.layer1.bias": self.layer1.bias,
            "clf.layer2.weight": self.layer2.weight,
            "clf.layer2.bias": self.layer2.bias,
        }

    @classmethod
    def from_state(cls, tensors: dict[str, np.ndarray]) -> "ClassifierParams":
        layers = []
        for i in (1, 2):
            w = np.asarray(tensors[f"clf.layer{i}.weight"], dtype=np.float64)
            b = np.asarray(tensors[f"clf.layer{i}.bias"], dtype=np.float64)
            layers.append(LinearLayerParams(w, b, np.zeros_like(w), np.zeros_like(b)))
        return cls(layer1=layers[0], layer2=layers[1])


def predict_distributions(features: np.ndarray, params: ClassifierParams) -> np.ndarray:
    """Softmax class distributions at every feature position.

    features (F, h, w) -> (K, h, w); each position's K values sum to 1.
    """
    f, h, w = features.shape
    x = features.reshape(f, h * w).T
    hidden = np.tanh(x @ params.layer1.weight.T + params.layer1.bias)
    logits = hidden @ params.layer2.weight.T + params.layer2.bias
    probs = softmax_rows(logits)
    ensure_finite(probs, "predicted distributions")
    return probs.T.reshape(params.layer2.weight.shape[0], h, w)


def upsample_distributions(dist: np.ndarray, factor: int = 4) -> np.ndarray:
    """Nearest-neighbor upsampling of (K, h, w) distributions to full resolution."""
    return upsample_nearest(dist, factor)


def pixel_loss_and_grads(x: np.ndarray, target: int, params: ClassifierParams):
    """Forward/backward of the MLP on one feature vector.

    Returns (loss, predicted_class, grad_x, gw1, gb1, gw2, gb2).  This is
    the exact gradient path the training loop applies, so gradient checks
    of this function cover training itself.
    """
    w1, b1 = params.layer1.weight, params.layer1.bias
    w2, b2 = params.layer2.weight, params.layer2.bias
    hidden = np.tanh(w1 @ x + b1)
    logits = w2 @ hidden + b2
    m = logits.max()
    exps = np.exp(logits - m)
    total = exps.sum()
    loss = float(np.log(total) - (logits[target] - m))
    pred = int(np.argmax(logits))
    gl = exps / total
    gl[target] -= 1.0
    gw2 = np.outer(gl, hidden)
    gh = w2.T @ gl
    ga = (1.0 - hidden * hidden) * gh
    gw1 = np.outer(ga, x)
    gx = w1.T @ ga
    return loss, pred, gx, gw1, ga, gw2, gl


@dataclass
class TrainConfig:
    n_classes: int
    learning_rate: float = 1e-3
    epochs: int = 100
    seed: int = 0
    ignore_label: int = 65535
    batch_pixels: int = 1       # classifier update granularity; 1 = per-pixel SGD
    log_every: int = 1

    def __post_init__(self) -> None:
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.batch_pixels < 1:
            raise ValueError("batch_pixels must be >= 1")


@dataclass
class TrainSample:
    """One prepared training image: its pyramid and feature-resolution targets."""

    pyramid: Pyramid
    targets: np.ndarray  # (h, w) int, values in [0, K) or ignore_label


@dataclass
class EpochStats:
    epoch: int
    mean_loss: float
    pixel_accuracy: float

    def as_line(self) -> str:
        return f"epoch={self.epoch} loss={self.mean_loss:.6f} acc={self.pixel_accuracy:.4f}"


@dataclass
class TrainLog:
    epochs: list[EpochStats] = field(default_factory=list)

    def as_text(self) -> str:
        return "\n".join(e.as_line() for e in self.epochs) + "\n"


def _epoch_rng(seed: int, epoch: int) -> np.random.Generator:
    # per-epoch stream so resuming at an epoch boundary replays identically
    return np.random.default_rng([seed, epoch])


def train(dataset: list[TrainSample], net_params: FeatureExtractorParams,
          clf_params: ClassifierParams, config: TrainConfig,
          start_epoch: int = 0, on_epoch=None) -> TrainLog:
    """Plain SGD over shuffled labeled pixels; ignore_label pixels are skipped.

    Raises TrainingDiverged if the loss goes non-finite.
    """
    if not dataset:
        raise ValueError("empty training set")
    for s in dataset:
        bad = (s.targets != config.ignore_label) & ((s.targets < 0) | (s.targets >= config.n_classes))
        if bad.any():
            raise ValueError("targets outside [0, K) and not ignore_label")

    lr = config.learning_rate
    log = TrainLog()
    for epoch in range(start_epoch, config.epochs):
        rng = _epoch_rng(config.seed, epoch)
        order = rng.permutation(len(dataset))
        loss_sum = 0.0
        correct = 0
        seen = 0
        for img_idx in order:
            sample = dataset[img_idx]
            features, caches = extract_multiscale_cached(sample.pyramid, net_params)
            ys, xs = np.nonzero(sample.targets != config.ignore_label)
            if ys.size == 0:
                continue
            perm = rng.permutation(ys.size)
            ys, xs = ys[perm], xs[perm]
            grad_features = np.zeros_like(features)
            w1, b1 = clf_params.layer1.weight, clf_params.layer1.bias
            w2, b2 = clf_params.layer2.weight, clf_params.layer2.bias
            for start in range(0, ys.size, config.batch_pixels):
                cy = ys[start:start + config.batch_pixels]
                cx = xs[start:start + config.batch_pixels]
                n = cy.size
                gw1 = gb1 = gw2 = gb2 = None
                for i in range(n):
                    x = features[:, cy[i], cx[i]]
                    target = int(sample.targets[cy[i], cx[i]])
                    loss, pred, gx, pw1, pb1, pw2, pb2 = pixel_loss_and_grads(x, target, clf_params)
                    if not np.isfinite(loss):
                        raise TrainingDiverged(
                            f"loss became non-finite at epoch {epoch}, image {img_idx}, "
                            f"pixel ({cy[i]}, {cx[i]})")
                    loss_sum += loss
                    correct += int(pred == target)
                    seen += 1
                    grad_features[:, cy[i], cx[i]] += gx
                    if n == 1:
                        w1 -= lr * pw1
                        b1 -= lr * pb1
                        w2 -= lr * pw2
                        b2 -= lr * pb2
                    else:
                        gw1 = pw1 if gw1 is None else gw1 + pw1
                        gb1 = pb1 if gb1 is None else gb1 + pb1
                        gw2 = pw2 if gw2 is None else gw2 + pw2
                        gb2 = pb2 if gb2 is None else gb2 + pb2
                if n > 1:
                    scale = lr / n
                    w1 -= scale * gw1
                    b1 -= scale * gb1
                    w2 -= scale * gw2
                    b2 -= scale * gb2
            # one averaged extractor step per image visit
            net_params.zero_grad()
            extract_backward(sample.pyramid, net_params, grad_features / ys.size, caches)
            net_params.sgd_step(lr)
        stats = EpochStats(epoch=epoch, mean_loss=loss_sum / max(seen, 1),
                           pixel_accuracy=correct / max(seen, 1))
        log.epochs.append(stats)
        if on_epoch is not None:
            on_epoch(stats)
    return log
