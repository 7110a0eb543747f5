"""End-to-end paired experiment: image-only versus fused features.

One call runs encode -> fuse -> split -> train -> evaluate -> report with a
single top-level seed.  The two models differ only in their feature matrix;
the split, training configuration, and evaluation subset are shared and the
manifest records enough hashes to prove it.  Stage timings live only in the
manifest so reports and models are byte-reproducible for a fixed config.
"""
from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .augment import AugmentSpec
from .classifier import SoftmaxModel, TrainConfig, predict, predict_proba, save_model, train
from .errors import ConfigError, MetafuseError, StageError
from .features import FeatureMatrix, fuse, read_fmx, write_fmx
from .figures import auroc_delta_box, improvement_bar, weight_histograms
from .interpret import WeightReport, shared_bin_edges, split_weights
from .metadata import (
    MetadataSchema,
    build_schema,
    encode_table,
    load_metadata_table,
    load_schema_declaration,
)
from .metrics import ImprovementReport, MetricReport, build_report, improvement
from .splits import (
    DatasetIndex,
    apply_label_map,
    bundled_label_map,
    filter_unique,
    load_label_map,
    stratified_split,
    write_split_csv,
)

STAGES = ("encode", "features", "split", "train", "evaluate", "report")
STAGE_EXIT_CODES = {name: code for code, name in enumerate(STAGES, start=2)}
CONFIG_EXIT_CODE = 1
LOCK_NAME = ".metafuse-lock"


def stage_seed(seed: int, stage: str) -> int:
    """Stable per-stage seed: first 8 bytes of sha256 of ``"<seed>:<stage>"``."""
    digest = hashlib.sha256(f"{seed}:{stage}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass(frozen=True)
class ExperimentConfig:
    features_fmx: Path
    metadata_table: Path
    schema_declaration: Path
    out_dir: Path
    label_map: str | None = None
    seed: int = 0
    split_fractions: tuple = (0.7, 0.15, 0.15)
    train: TrainConfig = field(default_factory=TrainConfig)
    augment: AugmentSpec | None = None
    augment_test: bool = True
    transfer_tag: str | None = None
    render_figures: bool = True

    def __post_init__(self):
        for name in ("features_fmx", "metadata_table", "schema_declaration"):
            object.__setattr__(self, name, Path(getattr(self, name)))
            if not getattr(self, name).exists():
                raise ConfigError(f"{name} path {getattr(self, name)} not found")
        object.__setattr__(self, "out_dir", Path(self.out_dir))
        if self.transfer_tag is not None and self.transfer_tag not in ("BN", "FT"):
            raise ConfigError(
                f"transfer_tag must be 'BN' or 'FT', got {self.transfer_tag!r}"
            )
        if len(self.split_fractions) != 3:
            raise ConfigError(
                f"split_fractions must have 3 entries, got {self.split_fractions}"
            )

    def snapshot(self) -> dict:
        return {
            "features_fmx": str(self.features_fmx),
            "metadata_table": str(self.metadata_table),
            "schema_declaration": str(self.schema_declaration),
            "label_map": self.label_map,
            "out_dir": str(self.out_dir),
            "seed": self.seed,
            "split_fractions": list(self.split_fractions),
            "train": self.train.to_dict(),
            "augment": self.augment.to_dict() if self.augment else None,
            "augment_test": self.augment_test,
            "transfer_tag": self.transfer_tag,
            "render_figures": self.render_figures,
        }

    @classmethod
    def from_json(cls, path, overrides=None) -> "ExperimentConfig":
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        doc.update(overrides or {})
        try:
            train_cfg = TrainConfig(**doc.get("train", {}))
            aug = doc.get("augment")
            aug_spec = AugmentSpec(**aug) if aug is not None else None
            return cls(
                features_fmx=doc["features_fmx"],
                metadata_table=doc["metadata_table"],
                schema_declaration=doc["schema_declaration"],
                out_dir=doc.get("out_dir", "run-out"),
                label_map=doc.get("label_map"),
                seed=int(doc.get("seed", 0)),
                split_fractions=tuple(doc.get("split_fractions", (0.7, 0.15, 0.15))),
                train=train_cfg,
                augment=aug_spec,
                augment_test=bool(doc.get("augment_test", True)),
                transfer_tag=doc.get("transfer_tag"),
                render_figures=bool(doc.get("render_figures", True)),
            )
        except KeyError as exc:
            raise ConfigError(f"config {path} lacks required key {exc}") from exc
        except (TypeError, ValueError, MetafuseError) as exc:
            raise ConfigError(f"config {path} is invalid: {exc}") from exc


@dataclass
class RunResult:
    out_dir: Path
    manifest: dict
    metrics_image: MetricReport
    metrics_fused: MetricReport
    improvement: ImprovementReport
    model_image: SoftmaxModel
    model_fused: SoftmaxModel
    weights_image: WeightReport
    weights_fused: WeightReport


class _Lock:
    """Exclusive run-directory lock; a second writer fails fast."""

    def __init__(self, directory: Path):
        self.path = directory / LOCK_NAME
        self.fd = None

    def __enter__(self):
        try:
            self.fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
            os.write(self.fd, str(os.getpid()).encode())
        except FileExistsError:
            raise ConfigError(
                f"run directory {self.path.parent} is locked by another writer "
                f"(remove {self.path.name} if stale)"
            ) from None
        return self

    def __exit__(self, *exc):
        if self.fd is not None:
            os.close(self.fd)
            self.path.unlink(missing_ok=True)
        return False


def _subset_rows(matrix: FeatureMatrix, index: DatasetIndex, subset: str):
    wanted = set(index.subset_ids(subset))
    rows = [i for i, s in enumerate(matrix.sample_ids) if s in wanted]
    return matrix.data[rows].astype(np.float64), [matrix.sample_ids[i] for i in rows]


def run_experiment(cfg: ExperimentConfig) -> RunResult:
    """Run the full paired experiment; see the module docstring.

    Raises :class:`StageError` naming the failing stage; the manifest
    written so far is flushed with the error attached.
    """
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    figures_dir = out / "figures"
    manifest = {
        "package_version": __version__,
        "numpy_version": np.__version__,
        "config": cfg.snapshot(),
        "seeds": {
            "top": cfg.seed,
            "split": stage_seed(cfg.seed, "split"),
            "augment": stage_seed(cfg.seed, "augment"),
        },
        "seed_rule": "sha256('<seed>:<stage>') first 8 bytes, big-endian",
        "augmentation": {
            "spec": cfg.augment.to_dict() if cfg.augment else None,
            "applied_to_test": bool(cfg.augment and cfg.augment_test),
            "note": (
                "augmented test data mirrors the source methodology; pass "
                "augment_test=false for a clean-test protocol"
            ),
        },
        "transfer_tag": cfg.transfer_tag,
        "inputs": {},
        "outputs": {},
        "timings_s": {},
        "stages_completed": [],
    }

    def finish_stage(stage: str, t0: float):
        manifest["timings_s"][stage] = time.perf_counter() - t0
        manifest["stages_completed"].append(stage)

    def flush_manifest():
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")

    with _Lock(out):
        state = {}
        stage = STAGES[0]
        try:
            for stage in STAGES:
                t0 = time.perf_counter()
                _run_stage(stage, cfg, out, figures_dir, manifest, state)
                finish_stage(stage, t0)
        except MetafuseError as exc:
            manifest["error"] = {"stage": stage, "message": str(exc)}
            flush_manifest()
            if isinstance(exc, StageError):
                raise
            raise StageError(stage, exc) from exc
        flush_manifest()

    return RunResult(
        out_dir=out,
        manifest=manifest,
        metrics_image=state["metrics_image"],
        metrics_fused=state["metrics_fused"],
        improvement=state["improvement"],
        model_image=state["model_image"],
        model_fused=state["model_fused"],
        weights_image=state["weights_image"],
        weights_fused=state["weights_fused"],
    )


def _record_output(manifest: dict, out: Path, path: Path) -> None:
    manifest["outputs"][str(path.relative_to(out))] = file_sha256(path)


def _run_stage(stage, cfg, out, figures_dir, manifest, state):
    if stage == "encode":
        manifest["inputs"]["features_fmx"] = file_sha256(cfg.features_fmx)
        manifest["inputs"]["metadata_table"] = file_sha256(cfg.metadata_table)
        manifest["inputs"]["schema_declaration"] = file_sha256(cfg.schema_declaration)
        kinds, excluded = load_schema_declaration(cfg.schema_declaration)
        records = load_metadata_table(cfg.metadata_table, kinds)
        schema = build_schema(records, kinds)
        encoded = encode_table(records, schema)
        metadata_matrix = FeatureMatrix(
            encoded,
            tuple(r.sample_id for r in records),
            None,
            f"metadata({cfg.metadata_table.name})",
        )
        schema.to_json(out / "schema.json")
        write_fmx(metadata_matrix, out / "encoded_metadata.fmx")
        for name in ("schema.json", "encoded_metadata.fmx", "encoded_metadata.fmx.json"):
            _record_output(manifest, out, out / name)
        manifest["excluded_columns"] = list(excluded)
        state["schema"] = schema
        state["metadata_matrix"] = metadata_matrix

    elif stage == "features":
        images = read_fmx(cfg.features_fmx)
        if images.labels is None:
            raise ConfigError(
                f"{cfg.features_fmx}: sidecar must carry labels for training"
            )
        fused = fuse(images, state["metadata_matrix"])
        write_fmx(fused, out / "fused.fmx")
        for name in ("fused.fmx", "fused.fmx.json"):
            _record_output(manifest, out, out / name)
        state["images"] = images
        state["fused"] = fused

    elif stage == "split":
        images = state["images"]
        index = DatasetIndex(images.sample_ids, images.labels)
        if cfg.label_map:
            if cfg.label_map.startswith("bundled:"):
                lmap = bundled_label_map(cfg.label_map.split(":", 1)[1])
            else:
                lmap = load_label_map(cfg.label_map)
            index = apply_label_map(index, lmap)
            index, removed = filter_unique(index)
            manifest["label_filtering"] = {
                "removed_non_unique": removed,
                "kept": len(index),
            }
        index = stratified_split(
            index, cfg.split_fractions, stage_seed(cfg.seed, "split")
        )
        write_split_csv(index, out / "split.csv")
        _record_output(manifest, out, out / "split.csv")
        manifest["split_counts"] = {
            s: index.split_assignment.count(s) for s in ("train", "val", "test")
        }
        state["index"] = index

    elif stage == "train":
        index = state["index"]
        class_names = tuple(sorted(set(index.labels)))
        label_of = dict(zip(index.sample_ids, index.labels))
        split_hash = file_sha256(out / "split.csv")
        models = {}
        for tag, matrix in (("image", state["images"]), ("fused", state["fused"])):
            x_train, ids = _subset_rows(matrix, index, "train")
            y_train = np.array([class_names.index(label_of[s]) for s in ids])
            model = train(x_train, y_train, cfg.train, class_names=class_names)
            model.training_meta["feature_set"] = tag
            model.training_meta["split_sha256"] = split_hash
            save_model(model, out / f"model_{tag}.json")
            _record_output(manifest, out, out / f"model_{tag}.json")
            models[tag] = model
        fairness = [
            {
                "split_sha256": m.training_meta["split_sha256"],
                "train_config": cfg.train.to_dict(),
            }
            for m in models.values()
        ]
        if fairness[0] != fairness[1]:
            raise ConfigError("paired runs diverged in split or training config")
        manifest["paired_fairness"] = fairness[0]
        state["model_image"] = models["image"]
        state["model_fused"] = models["fused"]
        state["class_names"] = class_names
        state["label_of"] = label_of

    elif stage == "evaluate":
        index = state["index"]
        class_names = state["class_names"]
        label_of = state["label_of"]
        for tag, matrix in (("image", state["images"]), ("fused", state["fused"])):
            x_test, ids = _subset_rows(matrix, index, "test")
            y_test = np.array([class_names.index(label_of[s]) for s in ids])
            model = state[f"model_{tag}"]
            probs = predict_proba(model, x_test)
            preds = np.argmax(probs, axis=1)
            report = build_report(y_test, preds, probs, class_names)
            report.write_json(out / f"metrics_{tag}.json")
            report.write_csv(out / f"metrics_{tag}.csv")
            _record_output(manifest, out, out / f"metrics_{tag}.json")
            _record_output(manifest, out, out / f"metrics_{tag}.csv")
            state[f"metrics_{tag}"] = report

    elif stage == "report":
        imp = improvement(state["metrics_image"], state["metrics_fused"])
        imp.write_json(out / "improvement.json")
        imp.write_csv(out / "improvement.csv")
        imp.write_boxplot_csv(out / "auroc_pairs.csv")
        model_image = state["model_image"]
        model_fused = state["model_fused"]
        split_point = state["fused"].split_point
        metadata_names = tuple(state["schema"].expanded_names())
        image_edges = shared_bin_edges(
            model_image.weights, model_fused.weights[:split_point]
        )
        w_img = split_weights(
            model_image,
            split_point=model_image.n_features,
            metadata_names=(),
            image_bin_edges=image_edges,
        )
        w_fused = split_weights(
            model_fused,
            split_point=split_point,
            metadata_names=metadata_names,
            image_bin_edges=image_edges,
        )
        w_img.write_json(out / "weights_image.json")
        w_img.write_csv(out / "weights_image.csv")
        w_fused.write_json(out / "weights_fused.json")
        w_fused.write_csv(out / "weights_fused.csv")
        for name in (
            "improvement.json",
            "improvement.csv",
            "auroc_pairs.csv",
            "weights_image.json",
            "weights_image.csv",
            "weights_fused.json",
            "weights_fused.csv",
        ):
            _record_output(manifest, out, out / name)
        if cfg.render_figures:
            figures_dir.mkdir(exist_ok=True)
            improvement_bar(imp, figures_dir / "improvement.png")
            auroc_delta_box(imp, figures_dir / "auroc_delta.png")
            weight_histograms(w_img, w_fused, figures_dir / "weights.png")
            for name in ("improvement.png", "auroc_delta.png", "weights.png"):
                _record_output(manifest, out, figures_dir / name)
        state["improvement"] = imp
        state["weights_image"] = w_img
        state["weights_fused"] = w_fused
