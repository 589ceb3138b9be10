"""nyu-ingest: convert the labeled NYU-depth-v2 archive.

Exit codes: 0 ok, 1 usage error, 2 data error.
"""
from __future__ import annotations

import argparse
import sys

from .convert import IngestError, convert, load_splits_mat, load_splits_text


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def main(argv: list[str] | None = None) -> int:
    parser = _Parser(prog="nyu-ingest", description=__doc__)
    parser.add_argument("archive", help="nyu_depth_v2_labeled.mat (MATLAB v7.3)")
    parser.add_argument("out_dir")
    parser.add_argument("--splits", help="official splits.mat (trainNdxs/testNdxs)")
    parser.add_argument("--train-list", help="text file of 1-based train frame indices")
    parser.add_argument("--test-list", help="text file of 1-based test frame indices")
    parser.add_argument("--raw-depth", action="store_true",
                        help="also emit the un-inpainted rawDepths field")
    args = parser.parse_args(argv)

    if args.splits and (args.train_list or args.test_list):
        parser.error("--splits and --train-list/--test-list are mutually exclusive")
    if not args.splits and not (args.train_list and args.test_list):
        parser.error("provide --splits or both --train-list and --test-list")

    try:
        if args.splits:
            splits = load_splits_mat(args.splits)
            source = args.splits
        else:
            splits = load_splits_text(args.train_list, args.test_list)
            source = f"{args.train_list},{args.test_list}"
        manifest = convert(args.archive, args.out_dir, splits, split_source=source,
                           raw_depth=args.raw_depth)
    except IngestError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {manifest.n_train} train + {manifest.n_test} test frames to "
          f"{manifest.out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
