"""Command-line feature extraction: input tree -> classifier-ready CSV."""
from __future__ import annotations

import argparse
import sys


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="echo-extract", description=__doc__)
    parser.add_argument("--input", required=True,
                        help="root with labels.csv and <patient>/<view>/ frames or <view> videos")
    parser.add_argument("--out", required=True, help="output feature CSV path")
    parser.add_argument("--device", choices=("cpu", "gpu"), default="cpu")
    parser.add_argument("--weights", choices=("imagenet", "random"), default="imagenet",
                        help="'random' runs the full pipeline without downloaded weights")
    parser.add_argument("--seed", type=int, default=0, help="seed for --weights random")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    from .backbones import BackboneLoadError, load_backbones
    from .extract import emit_dataset
    from .frames import ClipError, discover_clips

    device = "cuda" if args.device == "gpu" else "cpu"
    try:
        clips = discover_clips(args.input)
        backbones = load_backbones(device=device, weights=args.weights, seed=args.seed)
        patients = emit_dataset(clips, args.out, backbones)
    except ClipError as exc:
        sys.stderr.write(f"echo-extract: error: {exc}\n")
        return 2
    except BackboneLoadError as exc:
        sys.stderr.write(f"echo-extract: environment error: {exc}\n")
        return 1
    sys.stdout.write(f"wrote features for {patients} patients to {args.out}\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
