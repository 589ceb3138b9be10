"""Frame-level inference, dataset evaluation, and video labeling.

One frame goes: rescale -> pyramid -> multiscale features -> per-pixel
distributions -> upsample to full resolution -> argmax ("convnet-only")
and, in parallel, superpixel segmentation + per-region aggregation
("with superpixels").  Video adds the temporal smoother on the region
distributions.
"""
from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .classifier import ClassifierParams, predict_distributions, upsample_distributions
from .config import RunConfig
from .convnet import FeatureExtractorParams, extract_multiscale
from .dataset import Dataset, rescale_labels_nearest
from .metrics import (
    ClassMap,
    ConfusionMatrix,
    EvalReport,
    pixelwise_accuracy,
    remap_distributions,
    remap_labels,
)
from .preprocess import RgbdFrame, build_pyramid, rescale_frame
from .superpixels import Segmentation, aggregate, region_mean_distributions, segment
from .temporal import TrackState, match_regions, smooth


@dataclass
class LabelResult:
    dist_full: np.ndarray             # (K, H, W) distributions at full resolution
    labels_convnet: np.ndarray        # (H, W) per-pixel argmax
    labels_superpixel: np.ndarray | None
    segmentation: Segmentation | None
    timings: dict[str, float] = field(default_factory=dict)


def _inference_params(net: FeatureExtractorParams, clf: ClassifierParams, dtype: str):
    if dtype == "f32":
        return net.astype(np.float32), clf.astype(np.float32)
    if dtype == "f64":
        return net, clf
    raise ValueError(f"unknown inference dtype {dtype!r}")


def label_frame(frame: RgbdFrame, net: FeatureExtractorParams, clf: ClassifierParams,
                config: RunConfig, with_superpixels: bool = True,
                class_map: ClassMap | None = None) -> LabelResult:
    """Run the full single-frame pipeline, recording per-stage wall-clock."""
    timings: dict[str, float] = {}
    hw = (config.input_h, config.input_w)

    t0 = time.perf_counter()
    pyramid = build_pyramid(frame, n_scales=config.n_scales, window=config.lcn_window,
                            eps=config.lcn_eps, use_depth=config.use_depth, expected_hw=hw)
    timings["pyramid"] = time.perf_counter() - t0

    net_i, clf_i = _inference_params(net, clf, config.inference_dtype)
    if config.inference_dtype == "f32":
        pyramid = type(pyramid)(scales=[s.astype(np.float32) for s in pyramid.scales])

    t0 = time.perf_counter()
    features = extract_multiscale(pyramid, net_i)
    timings["features"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    dist = predict_distributions(features, clf_i).astype(np.float64)
    if class_map is not None:
        dist = remap_distributions(dist, class_map)
    dist_full = upsample_distributions(dist, factor=4)
    timings["classifier"] = time.perf_counter() - t0

    labels_convnet = dist_full.argmax(axis=0)

    seg = None
    labels_sp = None
    if with_superpixels:
        t0 = time.perf_counter()
        seg = segment(frame.rgb, config.superpixel_config())
        labels_sp = aggregate(dist_full, seg)
        timings["superpixels"] = time.perf_counter() - t0

    timings["total"] = sum(timings.values())
    return LabelResult(dist_full=dist_full, labels_convnet=labels_convnet,
                       labels_superpixel=labels_sp, segmentation=seg, timings=timings)


def _eval_one(args):
    sample, net, clf, config, class_map = args
    rgb, depth, labels = sample.load()
    hw = (config.input_h, config.input_w)
    frame = rescale_frame(rgb, depth, out_hw=hw)
    result = label_frame(frame, net, clf, config, with_superpixels=True, class_map=class_map)
    truth = rescale_labels_nearest(np.asarray(labels, dtype=np.int64), hw)
    if class_map is not None:
        truth = remap_labels(truth, class_map, config.ignore_label)
    return truth, result.labels_convnet, result.labels_superpixel


def evaluate_dataset(dataset: Dataset, net: FeatureExtractorParams, clf: ClassifierParams,
                     config: RunConfig, class_map: ClassMap | None = None,
                     class_names: list[str] | None = None) -> tuple[EvalReport, EvalReport]:
    """Confusion matrices and accuracy statistics for both output routes.

    Returns (convnet-only report, with-superpixels report).
    """
    n_eval = class_map.n_target if class_map is not None else config.n_classes
    if class_names is None:
        class_names = (class_map.target_names if class_map is not None
                       else [f"class{i}" for i in range(n_eval)])
    cm_net = ConfusionMatrix.empty(n_eval)
    cm_sp = ConfusionMatrix.empty(n_eval)
    per_image_net = []
    per_image_sp = []

    jobs = [(s, net, clf, config, class_map) for s in dataset.samples]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_eval_one, jobs))
    else:
        results = [_eval_one(j) for j in jobs]

    for truth, pred_net, pred_sp in results:
        keep = truth != config.ignore_label
        cm_net.add(truth, pred_net, ignore_label=config.ignore_label)
        cm_sp.add(truth, pred_sp, ignore_label=config.ignore_label)
        per_image_net.append((int((pred_net[keep] == truth[keep]).sum()), int(keep.sum())))
        per_image_sp.append((int((pred_sp[keep] == truth[keep]).sum()), int(keep.sum())))

    report_net = EvalReport(name="convnet", confusion=cm_net, class_names=class_names,
                            pixel=pixelwise_accuracy(per_image_net))
    report_sp = EvalReport(name="superpixels", confusion=cm_sp, class_names=class_names,
                           pixel=pixelwise_accuracy(per_image_sp))
    return report_net, report_sp


@dataclass
class VideoFrameResult:
    labels: np.ndarray
    timings: dict[str, float]


def label_video(frames: list[RgbdFrame], net: FeatureExtractorParams, clf: ClassifierParams,
                config: RunConfig, temporal: bool = True,
                class_map: ClassMap | None = None) -> list[VideoFrameResult]:
    """Frame-by-frame labeling with optional temporal smoothing of the
    per-region distributions.  temporal=False is exactly the single-frame path."""
    temporal_cfg = config.temporal_config()
    state: TrackState | None = None
    out = []
    for frame in frames:
        result = label_frame(frame, net, clf, config, with_superpixels=True,
                             class_map=class_map)
        seg = result.segmentation
        timings = dict(result.timings)
        if temporal:
            t0 = time.perf_counter()
            dist_regions = region_mean_distributions(result.dist_full, seg)
            if state is None:
                mapping = np.full(seg.n_regions, -1, dtype=np.int64)
            else:
                mapping = match_regions(seg, state.segmentation, temporal_cfg.min_overlap)
            smoothed, state = smooth(dist_regions, mapping, seg, state, temporal_cfg)
            labels = smoothed.argmax(axis=1)[seg.labels]
            timings["temporal"] = time.perf_counter() - t0
            timings["total"] += timings["temporal"]
        else:
            labels = result.labels_superpixel
        out.append(VideoFrameResult(labels=np.asarray(labels, dtype=np.int64), timings=timings))
    return out
