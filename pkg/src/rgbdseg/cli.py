"""Command-line entry points: train, eval, label, label-video, synth.

Exit codes: 0 ok, 1 usage error, 2 data error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .classifier import ClassifierParams, train
from .config import RunConfig, parse_run_config
from .container import DataError, read_tensor, write_tensor
from .convnet import FeatureExtractorParams
from .dataset import (
    load_checkpoint,
    load_split,
    prepare_training_set,
    save_checkpoint,
)
from .metrics import ClassMap
from .pipeline import evaluate_dataset, label_frame, label_video
from .preprocess import rescale_frame
from .render import default_palette, load_palette, save_label_png
from .synth import SynthConfig, generate_dataset
from .tensor import NumericError


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse default exits 2; usage errors are 1 here
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _build_parser() -> _Parser:
    parser = _Parser(prog="rgbdseg", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key=value run config file")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--workers", type=int, help="parallel workers for evaluation")
        p.add_argument("--classes", type=int, choices=(894, 14, 4),
                       help="evaluation taxonomy size")
        p.add_argument("--no-superpixels", action="store_true",
                       help="skip superpixel aggregation")
        p.add_argument("--temporal-alpha", type=float, help="override temporal EMA weight")

    p = sub.add_parser("train", help="train end-to-end on a dataset directory")
    common(p)
    p.add_argument("data", help="dataset root (contains train/)")
    p.add_argument("out", help="output checkpoint path")
    p.add_argument("--resume", help="checkpoint to resume from")
    p.add_argument("--log", help="training log path (default: <out>.log)")

    p = sub.add_parser("eval", help="evaluate a checkpoint on a test split")
    common(p)
    p.add_argument("checkpoint")
    p.add_argument("data", help="dataset root (contains test/)")
    p.add_argument("--split", default="test")
    p.add_argument("--class-map", help="TSV class map for remapped evaluation")
    p.add_argument("--report", help="write the text report here as well as stdout")

    p = sub.add_parser("label", help="label one frame and write a PNG")
    common(p)
    p.add_argument("checkpoint")
    p.add_argument("frame", help="frame prefix: reads <frame>.rgb.rgdt and <frame>.depth.rgdt")
    p.add_argument("out", help="output PNG path")
    p.add_argument("--palette", help="palette text file")

    p = sub.add_parser("label-video", help="label a directory of frames in order")
    common(p)
    p.add_argument("checkpoint")
    p.add_argument("frame_dir")
    p.add_argument("out_dir")
    p.add_argument("--temporal", choices=("on", "off"), default="on")
    p.add_argument("--palette", help="palette text file")

    p = sub.add_parser("synth", help="generate synthetic labeled RGBD scenes")
    common(p)
    p.add_argument("out_dir")
    p.add_argument("--scenes", type=int, default=4)
    p.add_argument("--split", default="train")
    p.add_argument("--identical-plane-colors", action="store_true",
                   help="floor/ceiling/wall share one color distribution")
    return parser


def _load_config(args) -> RunConfig:
    config = parse_run_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        config.seed = args.seed
    if getattr(args, "workers", None) is not None:
        config.workers = args.workers
    if getattr(args, "classes", None) is not None:
        config.n_classes = args.classes
    if getattr(args, "temporal_alpha", None) is not None:
        config.temporal_alpha = args.temporal_alpha
    return config


def _resolve_class_map(config: RunConfig, override: str | None) -> ClassMap | None:
    path = override or (None if config.class_map == "identity" else config.class_map)
    return ClassMap.from_tsv(path) if path else None


def _resolve_palette(config: RunConfig, override: str | None, n_classes: int) -> np.ndarray:
    path = override or (None if config.palette == "default" else config.palette)
    return load_palette(path) if path else default_palette(n_classes)


def _cmd_train(args) -> int:
    config = _load_config(args)
    if args.resume:
        net, clf, config_ck, start_epoch = load_checkpoint(args.resume)
        if args.config is None:
            config = config_ck
    else:
        rng = np.random.default_rng(config.seed)
        net_cfg = config.network_config()
        net = FeatureExtractorParams.initialize(rng, net_cfg)
        clf = ClassifierParams.initialize(rng, net_cfg)
        start_epoch = 0
    dataset = load_split(args.data, "train")
    samples = prepare_training_set(dataset, config)
    log_path = Path(args.log) if args.log else Path(str(args.out) + ".log")
    print(f"training on {len(samples)} images, epochs {start_epoch}..{config.epochs - 1}")
    with open(log_path, "w") as log_file:
        log_file.write("# run config\n")
        for line in config.as_text().splitlines():
            log_file.write(f"# {line}\n")

        def on_epoch(stats):
            log_file.write(stats.as_line() + "\n")
            log_file.flush()
            print(stats.as_line())

        train(samples, net, clf, config.train_config(), start_epoch=start_epoch,
              on_epoch=on_epoch)
    save_checkpoint(args.out, net, clf, config, epoch=config.epochs)
    print(f"checkpoint written to {args.out}")
    return 0


def _cmd_eval(args) -> int:
    net, clf, config, _ = load_checkpoint(args.checkpoint)
    cli_config = _load_config(args)
    config.workers = cli_config.workers
    config.seed = cli_config.seed if args.seed is not None else config.seed
    class_map = _resolve_class_map(config, args.class_map)
    dataset = load_split(args.data, args.split)
    report_net, report_sp = evaluate_dataset(dataset, net, clf, config, class_map=class_map)
    text = report_net.as_text() + "\n" + report_sp.as_text()
    if args.no_superpixels:
        text = report_net.as_text()
    print(text, end="")
    if args.report:
        Path(args.report).write_text(text)
    return 0


def _load_frame(prefix: str, config: RunConfig):
    rgb = read_tensor(f"{prefix}.rgb.rgdt")
    depth = read_tensor(f"{prefix}.depth.rgdt")
    return rescale_frame(rgb, depth, out_hw=(config.input_h, config.input_w))


def _cmd_label(args) -> int:
    net, clf, config, _ = load_checkpoint(args.checkpoint)
    frame = _load_frame(args.frame, config)
    result = label_frame(frame, net, clf, config,
                         with_superpixels=not args.no_superpixels)
    labels = result.labels_convnet if args.no_superpixels else result.labels_superpixel
    palette = _resolve_palette(config, args.palette, config.n_classes)
    save_label_png(args.out, labels, palette)
    stages = " ".join(f"{k}={v:.3f}s" for k, v in result.timings.items())
    print(f"labeled {args.frame}: {stages}")
    return 0


def _cmd_label_video(args) -> int:
    net, clf, config, _ = load_checkpoint(args.checkpoint)
    if args.temporal_alpha is not None:
        config.temporal_alpha = args.temporal_alpha
    frame_dir = Path(args.frame_dir)
    prefixes = sorted(p.name[:-len(".rgb.rgdt")] for p in frame_dir.glob("*.rgb.rgdt"))
    if not prefixes:
        raise DataError(f"no frames under {frame_dir}")
    frames = [_load_frame(str(frame_dir / p), config) for p in prefixes]
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    palette = _resolve_palette(config, args.palette, config.n_classes)
    results = label_video(frames, net, clf, config, temporal=args.temporal == "on")
    for prefix, res in zip(prefixes, results):
        write_tensor(out_dir / f"{prefix}.labels.rgdt", res.labels.astype(np.uint16))
        save_label_png(out_dir / f"{prefix}.png", res.labels, palette)
        stages = " ".join(f"{k}={v:.3f}s" for k, v in res.timings.items())
        print(f"frame {prefix}: {stages}")
    return 0


def _cmd_synth(args) -> int:
    config = _load_config(args)
    synth_cfg = SynthConfig(identical_plane_colors=args.identical_plane_colors)
    written = generate_dataset(args.out_dir, args.scenes, config.seed, split=args.split,
                               config=synth_cfg)
    print(f"wrote {len(written)} scenes to {Path(args.out_dir) / args.split}")
    return 0


_COMMANDS = {
    "train": _cmd_train,
    "eval": _cmd_eval,
    "label": _cmd_label,
    "label-video": _cmd_label_video,
    "synth": _cmd_synth,
}


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
