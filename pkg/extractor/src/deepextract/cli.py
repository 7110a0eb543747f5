"""Command-line interface.

``extract`` runs one model over an image manifest and writes the FMX
pair.  Exit codes: 0 success, 1 configuration or usage, 2 image decoding,
3 training, 4 malformed manifest or artifact I/O.
"""
from __future__ import annotations

import argparse
import sys

from . import __version__
from .errors import (
    ConfigurationError,
    ExtractorError,
    FormatError,
    ImageError,
    TrainingError,
)
from .extract import ExtractorConfig, run_extraction
from .zoo import available_models

EXIT_CODES = (
    (ConfigurationError, 1),
    (ImageError, 2),
    (TrainingError, 3),
    (FormatError, 4),
)


class _Parser(argparse.ArgumentParser):
    """Usage mistakes exit with the configuration code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def build_parser() -> _Parser:
    parser = _Parser(
        prog="deepextract",
        description="Extract CNN bottleneck features from images into FMX files.",
    )
    parser.add_argument(
        "--version", action="version", version=f"deepextract {__version__}"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("extract", help="run one model over an image manifest")
    p.add_argument(
        "--model", required=True, help=f"one of: {', '.join(available_models())}"
    )
    p.add_argument("--mode", choices=("BN", "FT"), default="BN")
    p.add_argument("--images", required=True, help="CSV manifest: sample_id,path[,label]")
    p.add_argument("--out", required=True, help="output .fmx path")
    p.add_argument("--input-size", type=int, help="square input edge (default: model's)")
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--epochs", type=int, default=2, help="FT epochs")
    p.add_argument("--learning-rate", type=float, default=3e-4, help="FT learning rate")
    p.add_argument("--momentum", type=float, default=0.9, help="FT momentum")
    p.add_argument("--no-shuffle", action="store_true", help="FT: fixed batch order")
    p.add_argument("--seed", type=int, default=0, help="FT head init and batch order")
    p.add_argument(
        "--no-fetch",
        action="store_true",
        help="skip the zoo download attempt and use the seeded fallback weights",
    )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = ExtractorConfig(
            model=args.model,
            mode=args.mode,
            input_size=args.input_size,
            batch_size=args.batch_size,
            epochs=args.epochs,
            learning_rate=args.learning_rate,
            momentum=args.momentum,
            shuffle=not args.no_shuffle,
            seed=args.seed,
            fetch_weights=not args.no_fetch,
        )
        provenance = run_extraction(args.images, args.out, cfg)
    except ExtractorError as exc:
        print(f"deepextract: {exc}", file=sys.stderr)
        for kind, code in EXIT_CODES:
            if isinstance(exc, kind):
                return code
        return 1
    except OSError as exc:
        print(f"deepextract: {exc}", file=sys.stderr)
        return 4
    print(
        f"extracted {provenance['n_images']} rows x {provenance['feature_dim']} "
        f"columns ({provenance['model']}, {provenance['mode']}, "
        f"{provenance['weights_source']}): {args.out}"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
