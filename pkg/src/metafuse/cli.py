"""Command-line interface.

Every stage of the experiment is exposed as a subcommand so feature
matrices, splits, models, and reports can be produced and inspected
piecemeal; ``run`` executes the whole paired pipeline from one config.
Failures exit with a stage-specific code: 1 configuration, 2 encoding,
3 feature preparation, 4 splitting, 5 training, 6 evaluation, 7 reporting.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
from PIL import Image

from . import __version__
from .augment import AugmentSpec, augment
from .classifier import TrainConfig, load_model, predict_proba, save_model, train
from .errors import ConfigError, InputError, MetafuseError, StageError
from .features import FeatureMatrix, fuse, read_fmx, write_fmx
from .figures import auroc_delta_box, improvement_bar, weight_histograms
from .interpret import shared_bin_edges, split_weights
from .metadata import build_schema, encode_table, load_metadata_table, load_schema_declaration
from .metrics import build_report, improvement, report_from_json
from .pipeline import CONFIG_EXIT_CODE, STAGE_EXIT_CODES, ExperimentConfig, run_experiment
from .scalograms import DEFAULT_TILE_SIZE, EcgSignal, montage, read_signal_csv, write_montage_png
from .splits import (
    DatasetIndex,
    apply_label_map,
    bundled_label_map,
    filter_unique,
    load_label_map,
    read_split_csv,
    split_counts,
    stratified_split,
    write_split_csv,
)
from .wavelets import WaveletSpec


class _Parser(argparse.ArgumentParser):
    """Usage mistakes are configuration errors, exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(CONFIG_EXIT_CODE)


def _pair(text: str, sep: str = "x") -> tuple:
    parts = text.lower().split(sep)
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected ROWS{sep}COLS, got {text!r}")
    return int(parts[0]), int(parts[1])


def _fractions(text: str) -> tuple:
    parts = [float(p) for p in text.split(",")]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(
            f"expected train,val,test fractions, got {text!r}"
        )
    return tuple(parts)


def _load_index(features_path: Path) -> FeatureMatrix:
    matrix = read_fmx(features_path)
    if matrix.labels is None:
        raise InputError(f"{features_path}: sidecar carries no labels")
    return matrix


def _subset_xy(matrix, index, subset, class_names):
    wanted = set(index.subset_ids(subset))
    label_of = dict(zip(index.sample_ids, index.labels))
    rows = [i for i, s in enumerate(matrix.sample_ids) if s in wanted]
    ids = [matrix.sample_ids[i] for i in rows]
    missing = sorted({label_of[s] for s in ids} - set(class_names))
    if missing:
        raise InputError(f"labels {missing} absent from model classes {class_names}")
    x = matrix.data[rows].astype(np.float64)
    y = np.array([class_names.index(label_of[s]) for s in ids], dtype=np.int64)
    return x, y, ids


def _cmd_encode(args) -> int:
    kinds, _ = load_schema_declaration(args.declaration)
    records = load_metadata_table(args.table, kinds)
    schema = build_schema(records, kinds)
    encoded = encode_table(records, schema)
    matrix = FeatureMatrix(
        encoded,
        tuple(r.sample_id for r in records),
        None,
        f"metadata({Path(args.table).name})",
    )
    write_fmx(matrix, args.out)
    schema_out = args.schema_out or str(Path(args.out).with_suffix(".schema.json"))
    schema.to_json(schema_out)
    print(f"encoded {matrix.n_samples} records -> {matrix.width} columns: {args.out}")
    return 0


def _cmd_scalogram(args) -> int:
    spec = WaveletSpec(
        gamma=args.gamma,
        time_bandwidth=args.time_bandwidth,
        voices_per_octave=args.voices,
    )
    signal = read_signal_csv(args.signal, sidecar=args.sidecar)
    mont = montage(
        signal,
        spec=spec,
        layout=args.layout,
        tile_size=args.tile,
        workers=args.workers,
    )
    write_montage_png(mont, args.out)
    print(
        f"montage {mont.image.shape[0]}x{mont.image.shape[1]} "
        f"({signal.n_leads} leads, {len(mont.scales)} scales): {args.out}"
    )
    return 0


def _cmd_augment(args) -> int:
    spec = AugmentSpec(
        max_shift_px=args.max_shift,
        allow_reflect_x=not args.no_reflect_x,
        allow_reflect_y=not args.no_reflect_y,
        max_rotate_deg=args.max_rotate,
        seed=args.seed,
    )
    with Image.open(args.image) as im:
        mode = im.mode
        pixels = np.asarray(im)
    out = augment(pixels, spec, args.draw_index)
    Image.fromarray(out, mode=mode).save(args.out)
    print(f"augmented draw {args.draw_index}: {args.out}")
    return 0


def _cmd_fuse(args) -> int:
    images = read_fmx(args.images)
    metadata = read_fmx(args.metadata)
    fused = fuse(images, metadata)
    write_fmx(fused, args.out)
    print(
        f"fused {fused.n_samples} samples: {fused.split_point} image + "
        f"{fused.width - fused.split_point} metadata columns: {args.out}"
    )
    return 0


def _cmd_split(args) -> int:
    matrix = _load_index(args.features)
    index = DatasetIndex(matrix.sample_ids, matrix.labels)
    if args.label_map:
        if args.label_map.startswith("bundled:"):
            lmap = bundled_label_map(args.label_map.split(":", 1)[1])
        else:
            lmap = load_label_map(args.label_map)
        index = apply_label_map(index, lmap)
        index, removed = filter_unique(index)
        print(f"dropped {removed} samples without a unique mapped label")
    index = stratified_split(index, args.fractions, args.seed)
    write_split_csv(index, args.out)
    print(f"split {split_counts(index)}: {args.out}")
    return 0


def _cmd_train(args) -> int:
    matrix = _load_index(args.features)
    index = read_split_csv(args.split)
    class_names = tuple(sorted({str(v) for v in index.labels}))
    cfg = TrainConfig(
        learning_rate=args.learning_rate,
        max_epochs=args.max_epochs,
        gradient_tol=args.gradient_tol,
        seed=args.seed,
    )
    x, y, _ = _subset_xy(matrix, index, args.subset, class_names)
    model = train(x, y, cfg, class_names=class_names)
    save_model(model, args.out)
    meta = model.training_meta
    print(
        f"trained on {x.shape[0]} samples, {meta['epochs_run']} epochs "
        f"({meta['stop_reason']}), loss {meta['final_loss']:.6f}: {args.out}"
    )
    return 0


def _cmd_evaluate(args) -> int:
    matrix = read_fmx(args.features)
    if matrix.labels is None:
        raise InputError(f"{args.features}: sidecar carries no labels")
    index = read_split_csv(args.split)
    model = load_model(args.model)
    x, y, _ = _subset_xy(matrix, index, args.subset, model.class_names)
    probs = predict_proba(model, x)
    preds = np.argmax(probs, axis=1)
    report = build_report(y, preds, probs, model.class_names)
    json_path = Path(str(args.out_prefix) + ".json")
    report.write_json(json_path)
    report.write_csv(Path(str(args.out_prefix) + ".csv"))
    print(
        f"evaluated {len(y)} {args.subset} samples, overall accuracy "
        f"{report.overall_accuracy:.4f}: {json_path}"
    )
    return 0


def _cmd_report(args) -> int:
    base = report_from_json(args.base)
    fused = report_from_json(args.fused)
    imp = improvement(base, fused)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    imp.write_json(out / "improvement.json")
    imp.write_csv(out / "improvement.csv")
    imp.write_boxplot_csv(out / "auroc_pairs.csv")
    improvement_bar(imp, out / "improvement.png")
    auroc_delta_box(imp, out / "auroc_delta.png")
    written = [
        "improvement.json",
        "improvement.csv",
        "auroc_pairs.csv",
        "improvement.png",
        "auroc_delta.png",
    ]
    if args.model_image and args.model_fused:
        if args.split_point is None:
            raise InputError("--split-point is required with model weight reports")
        m_img = load_model(args.model_image)
        m_fused = load_model(args.model_fused)
        edges = shared_bin_edges(m_img.weights, m_fused.weights[: args.split_point])
        w_img = split_weights(
            m_img, m_img.n_features, metadata_names=(), image_bin_edges=edges
        )
        w_fused = split_weights(m_fused, args.split_point, image_bin_edges=edges)
        w_img.write_json(out / "weights_image.json")
        w_img.write_csv(out / "weights_image.csv")
        w_fused.write_json(out / "weights_fused.json")
        w_fused.write_csv(out / "weights_fused.csv")
        weight_histograms(w_img, w_fused, out / "weights.png")
        written += [
            "weights_image.json",
            "weights_image.csv",
            "weights_fused.json",
            "weights_fused.csv",
            "weights.png",
        ]
    print(f"report (p={imp.p_value:.4g}{imp.stars}): {out} [{', '.join(written)}]")
    return 0


def _cmd_run(args) -> int:
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["out_dir"] = args.out
    if args.no_figures:
        overrides["render_figures"] = False
    if args.augment is True:
        try:
            doc = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError):
            doc = {}
        if not doc.get("augment"):
            overrides["augment"] = {}
    elif args.augment is False:
        overrides["augment"] = None
    cfg = ExperimentConfig.from_json(args.config, overrides)
    result = run_experiment(cfg)
    imp = result.improvement
    print(
        f"run complete: {result.out_dir} | overall accuracy delta "
        f"{imp.overall_accuracy_delta:+.2f} pp, wilcoxon p = "
        f"{imp.p_value:.4g}{imp.stars}"
    )
    return 0


def build_parser() -> _Parser:
    parser = _Parser(
        prog="metafuse",
        description="Fuse image features with encoded metadata and compare classifiers.",
    )
    parser.add_argument("--version", action="version", version=f"metafuse {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("encode", help="encode a metadata table to a feature matrix")
    p.add_argument("--table", required=True, help="CSV or JSONL metadata table")
    p.add_argument("--declaration", required=True, help="column-kind declaration JSON")
    p.add_argument("--out", required=True, help="output .fmx path")
    p.add_argument("--schema-out", help="schema JSON path (default: <out>.schema.json)")
    p.set_defaults(func=_cmd_encode, exit_code=2)

    p = sub.add_parser("scalogram", help="render a signal's scalogram montage PNG")
    p.add_argument("--signal", required=True, help="CSV of per-lead sample columns")
    p.add_argument("--sidecar", help="signal sidecar JSON (default: <signal>.json)")
    p.add_argument("--out", required=True, help="output PNG path")
    p.add_argument("--layout", type=_pair, default=(3, 4), help="tile grid ROWSxCOLS")
    p.add_argument(
        "--tile", type=_pair, default=DEFAULT_TILE_SIZE, help="tile size HxW"
    )
    p.add_argument("--gamma", type=float, default=3.0)
    p.add_argument("--time-bandwidth", type=float, default=60.0)
    p.add_argument("--voices", type=int, default=10)
    p.add_argument("--workers", type=int, help="thread count (default METAFUSE_THREADS)")
    p.set_defaults(func=_cmd_scalogram, exit_code=3)

    p = sub.add_parser("augment", help="apply one seeded augmentation draw to an image")
    p.add_argument("--image", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--draw-index", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-shift", type=int, default=30)
    p.add_argument("--max-rotate", type=float, default=90.0)
    p.add_argument("--no-reflect-x", action="store_true")
    p.add_argument("--no-reflect-y", action="store_true")
    p.set_defaults(func=_cmd_augment, exit_code=3)

    p = sub.add_parser("fuse", help="append metadata columns to image features")
    p.add_argument("--images", required=True, help="image feature .fmx")
    p.add_argument("--metadata", required=True, help="encoded metadata .fmx")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_fuse, exit_code=3)

    p = sub.add_parser("split", help="stratified train/val/test assignment")
    p.add_argument("--features", required=True, help=".fmx with labels in the sidecar")
    p.add_argument("--out", required=True, help="output split CSV")
    p.add_argument("--fractions", type=_fractions, default=(0.7, 0.15, 0.15))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--label-map", help="JSON path or bundled:<name>")
    p.set_defaults(func=_cmd_split, exit_code=4)

    p = sub.add_parser("train", help="train the softmax classifier on one subset")
    p.add_argument("--features", required=True)
    p.add_argument("--split", required=True, help="split CSV")
    p.add_argument("--out", required=True, help="model JSON path")
    p.add_argument("--subset", default="train", choices=("train", "val", "test"))
    p.add_argument("--learning-rate", type=float, default=0.1)
    p.add_argument("--max-epochs", type=int, default=2000)
    p.add_argument("--gradient-tol", type=float, default=1e-6)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_train, exit_code=5)

    p = sub.add_parser("evaluate", help="score a trained model on one subset")
    p.add_argument("--features", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out-prefix", required=True, help="writes <prefix>.json and .csv")
    p.add_argument("--subset", default="test", choices=("train", "val", "test"))
    p.set_defaults(func=_cmd_evaluate, exit_code=6)

    p = sub.add_parser(
        "report", help="paired improvement tables and figures from two metric files"
    )
    p.add_argument("--base", required=True, help="image-only metrics JSON")
    p.add_argument("--fused", required=True, help="fused metrics JSON")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--model-image", help="add weight reports: image-only model JSON")
    p.add_argument("--model-fused", help="add weight reports: fused model JSON")
    p.add_argument("--split-point", type=int, help="image-block width in the fused model")
    p.set_defaults(func=_cmd_report, exit_code=7)

    p = sub.add_parser("run", help="full paired experiment from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--out", help="override the output directory")
    p.add_argument("--no-figures", action="store_true")
    aug = p.add_mutually_exclusive_group()
    aug.add_argument(
        "--augment",
        dest="augment",
        action="store_true",
        default=None,
        help="record augmentation provenance (config spec or defaults)",
    )
    aug.add_argument(
        "--no-augment",
        dest="augment",
        action="store_false",
        help="strip any augmentation spec from the run",
    )
    p.set_defaults(func=_cmd_run, exit_code=1)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except StageError as exc:
        print(f"metafuse: {exc}", file=sys.stderr)
        return STAGE_EXIT_CODES.get(exc.stage, args.exit_code)
    except ConfigError as exc:
        print(f"metafuse: {exc}", file=sys.stderr)
        return CONFIG_EXIT_CODE
    except MetafuseError as exc:
        print(f"metafuse: {exc}", file=sys.stderr)
        return args.exit_code
    except OSError as exc:
        print(f"metafuse: {exc}", file=sys.stderr)
        return args.exit_code


if __name__ == "__main__":
    sys.exit(main())
