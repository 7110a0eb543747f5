"""Acceptance gate: nine timed end-to-end checks, one verdict line each.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the verdict
lines stream; each line carries the measured runtime against the
criterion's budget and the pinned tolerance outcome.
"""
import json
import math
import os
import subprocess
import sys
import time

import numpy as np

from conftest import make_suite, write_suite_files
from test_wavelets import direct_magnitudes
from metafuse import (
    DatasetIndex,
    MetadataRecord,
    SoftmaxModel,
    TrainConfig,
    build_report,
    build_schema,
    cwt,
    encode_record,
    equivalent_frequencies,
    fuse,
    improvement_delta,
    loss_and_gradient,
    predict_proba,
    stratified_split,
    train,
)
from metafuse.metrics import METRIC_NAMES, confusion
from metafuse.pipeline import file_sha256, run_experiment
from metafuse.pipeline import ExperimentConfig


def _finish(criterion, t0, budget_s, problems, detail):
    elapsed = time.perf_counter() - t0
    status = "PASS" if not problems and elapsed < budget_s else "FAIL"
    tail = f" [{'; '.join(problems)}]" if problems else ""
    print(
        f"{criterion} {status} {elapsed:.2f}s (budget {budget_s:.0f}s): {detail}{tail}",
        flush=True,
    )
    assert not problems, f"{criterion}: " + "; ".join(problems)
    assert elapsed < budget_s, f"{criterion} took {elapsed:.2f}s, budget {budget_s}s"


def test_a1_metadata_codec_encodes_datetimes_and_missing_values():
    t0 = time.perf_counter()
    problems = []
    records = [
        MetadataRecord("s0", {"when": "2001-05-28 12:49:25"}),
        MetadataRecord("s1", {"when": None}),
    ]
    schema = build_schema(records, {"when": "datetime"})
    got = encode_record(records[0], schema).tolist()
    if got != [2001.0, 5.0, 28.0, 12.0, 49.0, 25.0]:
        problems.append(f"datetime encoded to {got}")
    missing = encode_record(records[1], schema).tolist()
    if missing != [-1.0] * 6:
        problems.append(f"missing datetime encoded to {missing}")
    plain = [
        MetadataRecord("s0", {"age": 60.0, "sex": "male"}),
        MetadataRecord("s1", {"age": None, "sex": None}),
    ]
    plain_schema = build_schema(plain, {"age": "numeric", "sex": "categorical"})
    sentinel = encode_record(plain[1], plain_schema).tolist()
    if sentinel != [-1.0, -1.0]:
        problems.append(f"missing scalar columns encoded to {sentinel}")
    _finish("A1", t0, 1.0, problems, "datetime split and -1 sentinels exact")


def test_a2_analytic_gradient_matches_finite_differences():
    t0 = time.perf_counter()
    problems = []
    h = 1e-5
    worst = 0.0
    for i in range(100):
        rng = np.random.default_rng(np.random.SeedSequence([2, i]))
        n = int(rng.integers(1, 21))
        d = int(rng.integers(1, 11))
        k = int(rng.integers(2, 6))
        x = rng.normal(size=(n, d))
        y = rng.integers(0, k, size=n)
        model = SoftmaxModel(
            rng.normal(scale=0.5, size=(d, k)),
            rng.normal(scale=0.5, size=k),
            tuple(f"c{j}" for j in range(k)),
        )
        _, grad = loss_and_gradient(model, x, y)
        numeric = np.zeros_like(grad)
        for r in range(d + 1):
            for c in range(k):
                for sign in (1.0, -1.0):
                    w = model.weights.copy()
                    b = model.bias.copy()
                    if r < d:
                        w[r, c] += sign * h
                    else:
                        b[c] += sign * h
                    shifted = SoftmaxModel(w, b, model.class_names)
                    loss, _ = loss_and_gradient(shifted, x, y)
                    numeric[r, c] += sign * loss / (2.0 * h)
        rel = np.abs(grad - numeric) / np.maximum(1.0, np.abs(numeric))
        worst = max(worst, float(rel.max()))
    if worst > 1e-5:
        problems.append(f"gradient mismatch {worst:.2e} > 1e-5")
    for d, k in ((3, 2), (5, 4), (2, 5)):
        zero = SoftmaxModel(np.zeros((d, k)), np.zeros(k), tuple(f"c{j}" for j in range(k)))
        rng = np.random.default_rng(np.random.SeedSequence([2, 1000, d, k]))
        x = rng.normal(size=(8, d))
        y = rng.integers(0, k, size=8)
        loss, _ = loss_and_gradient(zero, x, y)
        if loss != math.log(k):
            problems.append(f"zero-model loss {loss!r} != ln {k}")
    _finish(
        "A2", t0, 10.0, problems,
        f"max relative gradient error {worst:.2e} over 100 instances; "
        f"zero-model loss equals ln K exactly",
    )


def _paired_accuracies(seed, shuffle_metadata):
    image_matrix, metadata_matrix, _ = make_suite(seed, shuffle_metadata=shuffle_metadata)
    fused_matrix = fuse(image_matrix, metadata_matrix)
    index = stratified_split(
        DatasetIndex(image_matrix.sample_ids, image_matrix.labels),
        (0.7, 0.15, 0.15),
        seed,
    )
    label_of = dict(zip(index.sample_ids, index.labels))
    class_names = tuple(sorted(set(index.labels)))
    accuracies = {}
    for tag, matrix in (("image", image_matrix), ("fused", fused_matrix)):
        out = {}
        for subset in ("train", "test"):
            wanted = set(index.subset_ids(subset))
            rows = [i for i, s in enumerate(matrix.sample_ids) if s in wanted]
            x = matrix.data[rows].astype(np.float64)
            y = np.array(
                [class_names.index(label_of[matrix.sample_ids[i]]) for i in rows]
            )
            out[subset] = (x, y)
        model = train(*out["train"], TrainConfig(seed=seed), class_names=class_names)
        x_test, y_test = out["test"]
        preds = np.argmax(predict_proba(model, x_test), axis=1)
        accuracies[tag] = float(np.mean(preds == y_test))
    return (accuracies["fused"] - accuracies["image"]) * 100.0


def test_a3_fusion_lifts_accuracy_by_thirty_points_on_every_seed():
    t0 = time.perf_counter()
    problems = []
    deltas = [_paired_accuracies(seed, shuffle_metadata=False) for seed in range(5)]
    for seed, delta in enumerate(deltas):
        if delta < 30.0:
            problems.append(f"seed {seed}: delta {delta:.1f} pp < 30")
    _finish(
        "A3", t0, 30.0, problems,
        "fused-minus-image deltas "
        + "/".join(f"{d:+.1f}" for d in deltas)
        + " pp (threshold +30)",
    )


def test_a4_shuffled_metadata_yields_no_fabricated_improvement():
    t0 = time.perf_counter()
    problems = []
    deltas = [_paired_accuracies(seed, shuffle_metadata=True) for seed in range(5)]
    for seed, delta in enumerate(deltas):
        if abs(delta) > 5.0:
            problems.append(f"seed {seed}: |delta| {abs(delta):.1f} pp > 5")
    _finish(
        "A4", t0, 30.0, problems,
        "null deltas "
        + "/".join(f"{d:+.1f}" for d in deltas)
        + " pp (threshold |5|)",
    )


def _oracle_metric_row(tp, fp, fn, tn):
    def ratio(num, den):
        return num / den if den else 0.0

    sens = ratio(tp, tp + fn)
    spec = ratio(tn, tn + fp)
    prec = ratio(tp, tp + fp)
    npv = ratio(tn, tn + fn)
    den = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    return {
        "accuracy": ratio(tp + tn, tp + fp + fn + tn),
        "specificity": spec,
        "sensitivity": sens,
        "precision": prec,
        "f_measure": ratio(2.0 * prec * sens, prec + sens),
        "informedness": sens + spec - 1.0,
        "markedness": prec + npv - 1.0,
        "mcc": (tp * tn - fp * fn) / math.sqrt(den) if den else 0.0,
    }


def _oracle_auroc(y, scores, c):
    pos = [float(v) for t, v in zip(y, scores) if t == c]
    neg = [float(v) for t, v in zip(y, scores) if t != c]
    if not pos or not neg:
        return None
    wins = sum(1.0 for a in pos for b in neg if a > b)
    ties = sum(1.0 for a in pos for b in neg if a == b)
    return (wins + 0.5 * ties) / (len(pos) * len(neg))


def test_a5_metrics_match_a_brute_force_oracle():
    t0 = time.perf_counter()
    problems = []
    worst_auroc = 0.0
    for i in range(200):
        rng = np.random.default_rng(np.random.SeedSequence([5, i]))
        k = int(rng.integers(2, 6))
        n = int(rng.integers(k + 3, 41))
        y = np.concatenate([np.arange(k), rng.integers(0, k, size=n - k)])
        rng.shuffle(y)
        preds = rng.integers(0, k, size=n)
        raw = rng.integers(1, 9, size=(n, k)).astype(np.float64)
        scores = raw / raw.sum(axis=1, keepdims=True)
        report = build_report(y, preds, scores, tuple(f"c{j}" for j in range(k)))
        counts = confusion(y, preds, k)
        for c in range(k):
            tp = sum(1 for t, q in zip(y, preds) if t == c and q == c)
            fp = sum(1 for t, q in zip(y, preds) if t != c and q == c)
            fn = sum(1 for t, q in zip(y, preds) if t == c and q != c)
            tn = n - tp - fp - fn
            if (
                int(counts.tp[c]) != tp
                or int(counts.fp[c]) != fp
                or int(counts.fn[c]) != fn
                or int(counts.tn[c]) != tn
            ):
                problems.append(f"instance {i} class {c}: confusion counts differ")
                continue
            expected = _oracle_metric_row(tp, fp, fn, tn)
            for name in METRIC_NAMES:
                got = report.per_class[name][c]
                if abs(got - expected[name]) > 1e-12:
                    problems.append(
                        f"instance {i} class {c} {name}: {got!r} vs {expected[name]!r}"
                    )
            want_auroc = _oracle_auroc(y, scores[:, c], c)
            if want_auroc is not None:
                diff = abs(report.per_class["auroc"][c] - want_auroc)
                worst_auroc = max(worst_auroc, diff)
                if diff > 1e-12:
                    problems.append(f"instance {i} class {c} auroc off by {diff:.2e}")
        overall = float(np.mean(preds == y))
        if report.overall_accuracy != overall:
            problems.append(f"instance {i}: overall accuracy differs")
    if improvement_delta(0.70, 0.80) != 10.0:
        problems.append("0.70 -> 0.80 did not map to +10.0 exactly")
    _finish(
        "A5", t0, 10.0, problems[:5],
        f"200 instances: counts exact, max AUROC deviation {worst_auroc:.2e}, "
        f"0.70->0.80 gives +10.0 exactly",
    )


def test_a6_fft_scalograms_match_direct_quadrature():
    t0 = time.perf_counter()
    problems = []
    worst = 0.0
    for i in range(20):
        rng = np.random.default_rng(np.random.SeedSequence([6, i]))
        x = rng.normal(size=64)
        scalo = cwt(x)
        want = direct_magnitudes(x, scalo)
        interior = slice(2, 62)
        for r in range(scalo.n_scales):
            scale_max = want[r, interior].max()
            if scale_max == 0.0:
                continue
            err = np.abs(scalo.magnitudes[r, interior] - want[r, interior]).max()
            worst = max(worst, err / scale_max)
    if worst > 1e-6:
        problems.append(f"relative deviation {worst:.2e} > 1e-6")
    zero = cwt(np.zeros(64))
    if zero.magnitudes.any():
        problems.append("zero signal produced nonzero magnitudes")
    fs = 100.0
    tone = np.sin(2.0 * math.pi * 5.0 * np.arange(200) / fs)
    scalo = cwt(tone)
    freqs = equivalent_frequencies(scalo.spec, scalo.scales, fs)
    peak_hz = float(freqs[int(np.argmax(scalo.magnitudes[:, 100]))])
    if abs(math.log2(peak_hz / 5.0)) > 0.1:
        problems.append(f"5 Hz tone peaked at {peak_hz:.2f} Hz")
    _finish(
        "A6", t0, 20.0, problems,
        f"20 signals, max row-relative deviation {worst:.2e}; zero maps to "
        f"zero; 5 Hz tone peaks at {peak_hz:.2f} Hz",
    )


def test_a7_stratified_split_reproduces_the_published_subset_totals():
    t0 = time.perf_counter()
    problems = []
    histogram = (6705, 1113, 1099, 514, 327, 142, 115)
    ids = []
    labels = []
    for c, count in enumerate(histogram):
        for i in range(count):
            ids.append(f"k{c}_{i}")
            labels.append(f"k{c}")
    index = stratified_split(
        DatasetIndex(tuple(ids), tuple(labels)), (0.701, 0.1499, 0.1500), seed=0
    )
    totals = {
        s: sum(1 for a in index.split_assignment if a == s)
        for s in ("train", "val", "test")
    }
    for subset, expected in (("train", 7021), ("val", 1502), ("test", 1502)):
        if abs(totals[subset] - expected) > 8:
            problems.append(f"{subset}: {totals[subset]} vs {expected} +/- 8")
    _finish(
        "A7", t0, 1.0, problems,
        f"totals {totals['train']}/{totals['val']}/{totals['test']} vs "
        f"7021/1502/1502 within +/- 8",
    )


def test_a8_identical_configs_rerun_byte_identically(tmp_path):
    t0 = time.perf_counter()
    problems = []
    config_path = write_suite_files(tmp_path, seed=0)
    runs = []
    for name in ("a", "b"):
        cfg = ExperimentConfig.from_json(
            config_path, {"out_dir": str(tmp_path / name)}
        )
        runs.append(run_experiment(cfg))
    first, second = runs
    if first.manifest["outputs"] != second.manifest["outputs"]:
        problems.append("output hash maps differ between reruns")
    else:
        for rel in first.manifest["outputs"]:
            a = (tmp_path / "a" / rel).read_bytes()
            b = (tmp_path / "b" / rel).read_bytes()
            if a != b:
                problems.append(f"{rel} differs between reruns")
                break
    _finish(
        "A8", t0, 60.0, problems,
        f"{len(first.manifest['outputs'])} outputs (reports, models, figures) "
        f"byte-identical across reruns",
    )


A9_SCRIPT = """
import os
for var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ[var] = "1"
import json
import time
import numpy as np
from metafuse import TrainConfig, train

rng = np.random.default_rng(9)
x = rng.normal(size=(15000, 1000))
y = rng.integers(0, 7, size=15000)
t0 = time.perf_counter()
model = train(x, y, TrainConfig())
elapsed = time.perf_counter() - t0
print(json.dumps({
    "elapsed": elapsed,
    "epochs": model.training_meta["epochs_run"],
    "stop": model.training_meta["stop_reason"],
}))
"""


def test_a9_head_training_at_scale_stays_under_two_minutes(tmp_path):
    problems = []
    script = tmp_path / "train_at_scale.py"
    script.write_text(A9_SCRIPT)
    env = dict(os.environ)
    env.update(
        OPENBLAS_NUM_THREADS="1", OMP_NUM_THREADS="1", MKL_NUM_THREADS="1"
    )
    proc = subprocess.run(
        [sys.executable, str(script)],
        capture_output=True,
        text=True,
        env=env,
        timeout=400,
    )
    if proc.returncode != 0:
        problems.append(f"training subprocess failed: {proc.stderr[-400:]}")
        measured = float("inf")
        detail = "subprocess failed"
    else:
        doc = json.loads(proc.stdout.strip().splitlines()[-1])
        measured = doc["elapsed"]
        detail = (
            f"15000x1000, K=7: {doc['epochs']} epochs ({doc['stop']}) in "
            f"{measured:.1f}s single-threaded"
        )
        if measured >= 120.0:
            problems.append(f"training took {measured:.1f}s >= 120s")
    status = "PASS" if not problems else "FAIL"
    tail = f" [{'; '.join(problems)}]" if problems else ""
    print(f"A9 {status} {measured:.2f}s (budget 120s): {detail}{tail}", flush=True)
    assert not problems, "A9: " + "; ".join(problems)
