"""Scalogram tiles and multi-lead montages.

Each lead's magnitude surface is min-max normalized on its own, resampled to
a fixed tile size, and placed row-major into a rows x cols grid; unused grid
cells stay black.  The PNG sidecar records the layout, tile order, scale
grid, wavelet parameters, and normalization so downstream consumers are
self-describing.
"""
from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import InputError, ParameterError
from .wavelets import Scalogram, WaveletSpec, cwt, equivalent_frequencies

# Standard clinical 12-lead order used by the bundled fixtures and docs.
DEFAULT_LEAD_ORDER = (
    "I", "II", "III", "aVR", "aVL", "aVF",
    "V1", "V2", "V3", "V4", "V5", "V6",
)

DEFAULT_TILE_SIZE = (224, 224)
THREADS_ENV_VAR = "METAFUSE_THREADS"


@dataclass(frozen=True)
class EcgSignal:
    """Multi-lead signal: ``samples[i]`` is the trace for ``lead_names[i]``."""

    samples: np.ndarray  # (n_leads, n_samples) float
    sampling_rate: float
    lead_names: tuple

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=np.float64)
        object.__setattr__(self, "samples", arr)
        object.__setattr__(self, "lead_names", tuple(self.lead_names))
        if arr.ndim != 2:
            raise InputError(f"samples must be 2-D, got shape {arr.shape}")
        if len(self.lead_names) != arr.shape[0]:
            raise InputError(
                f"{len(self.lead_names)} lead names for {arr.shape[0]} traces"
            )
        if arr.shape[1] < 2:
            raise InputError("each lead needs at least 2 samples")
        if not np.all(np.isfinite(arr)):
            raise InputError("signal holds non-finite samples")
        if not (self.sampling_rate > 0):
            raise InputError(f"sampling rate must be positive, got {self.sampling_rate}")

    @property
    def n_leads(self) -> int:
        return self.samples.shape[0]

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]


def read_signal_csv(path, sidecar=None) -> EcgSignal:
    """Load a lead-per-column CSV; the sidecar JSON holds the sampling rate."""
    path = Path(path)
    sidecar = Path(sidecar) if sidecar else Path(str(path) + ".json")
    if not sidecar.exists():
        raise InputError(f"signal sidecar {sidecar} not found")
    meta = json.loads(sidecar.read_text())
    if "sampling_rate" not in meta:
        raise InputError(f"{sidecar}: missing 'sampling_rate'")
    with open(path) as fh:
        header = fh.readline().strip()
    names = [n.strip() for n in header.split(",")]
    data = np.loadtxt(path, delimiter=",", skiprows=1, dtype=np.float64, ndmin=2)
    if data.shape[1] != len(names):
        raise InputError(
            f"{path}: header names {len(names)} leads but rows have "
            f"{data.shape[1]} columns"
        )
    return EcgSignal(data.T, float(meta["sampling_rate"]), tuple(names))


def _bilinear_resize(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Separable bilinear resampling with corner-aligned sample points."""
    in_h, in_w = img.shape
    if (in_h, in_w) == (out_h, out_w):
        return img.copy()
    rows = np.linspace(0.0, in_h - 1.0, out_h) if out_h > 1 else np.zeros(1)
    cols = np.linspace(0.0, in_w - 1.0, out_w) if out_w > 1 else np.zeros(1)
    r0 = np.clip(np.floor(rows).astype(int), 0, in_h - 1)
    r1 = np.clip(r0 + 1, 0, in_h - 1)
    c0 = np.clip(np.floor(cols).astype(int), 0, in_w - 1)
    c1 = np.clip(c0 + 1, 0, in_w - 1)
    fr = (rows - r0)[:, None]
    fc = (cols - c0)[None, :]
    top = img[r0][:, c0] * (1 - fc) + img[r0][:, c1] * fc
    bot = img[r1][:, c0] * (1 - fc) + img[r1][:, c1] * fc
    return top * (1 - fr) + bot * fr


def render_scalogram(scalo: Scalogram, tile_size=None) -> np.ndarray:
    """Min-max normalize a magnitude surface into a [0, 1] image.

    Row 0 of the result is the smallest scale (highest frequency), so the
    frequency axis reads low-at-bottom when displayed.  A constant surface
    renders as all zeros.  ``tile_size`` is ``(height, width)`` or ``None``
    to keep the native resolution.
    """
    mags = scalo.magnitudes
    lo = float(mags.min())
    hi = float(mags.max())
    if hi > lo:
        tile = (mags - lo) / (hi - lo)
    else:
        tile = np.zeros_like(mags)
    if tile_size is not None:
        h, w = tile_size
        if h < 1 or w < 1:
            raise ParameterError(f"tile size must be positive, got {tile_size}")
        tile = _bilinear_resize(tile, int(h), int(w))
    return tile


@dataclass(frozen=True)
class ScalogramMontage:
    """Single-channel [0, 1] image of per-lead tiles plus its provenance."""

    image: np.ndarray
    layout: tuple  # (rows, cols)
    tile_size: tuple  # (height, width)
    tile_order: tuple  # lead name per occupied cell, row-major
    scales: np.ndarray
    sampling_rate: float
    spec: WaveletSpec
    fft_length: int

    def sidecar(self) -> dict:
        return {
            "layout": list(self.layout),
            "tile_size": list(self.tile_size),
            "tile_order": list(self.tile_order),
            "scales": [float(a) for a in self.scales],
            "equivalent_frequencies_hz": [
                float(f)
                for f in equivalent_frequencies(self.spec, self.scales, self.sampling_rate)
            ],
            "sampling_rate": self.sampling_rate,
            "wavelet": {
                "family": "generalized-morse",
                "gamma": self.spec.gamma,
                "time_bandwidth": self.spec.time_bandwidth,
                "voices_per_octave": self.spec.voices_per_octave,
            },
            "scale_rule": (
                "geometric, voices_per_octave per octave, from the scale whose "
                "peak response sits at Nyquist up to the largest scale whose "
                "time-domain standard deviation fits the signal duration"
            ),
            "normalization": "per-lead min-max to [0,1]; stored as 8-bit PNG",
            "orientation": "row 0 is the smallest scale (highest frequency)",
            "boundary": "zero-pad",
            "fft_length": self.fft_length,
        }


def _env_workers() -> int:
    raw = os.environ.get(THREADS_ENV_VAR, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def montage(
    signal: EcgSignal,
    spec: WaveletSpec | None = None,
    layout: tuple = (3, 4),
    tile_size: tuple = DEFAULT_TILE_SIZE,
    workers: int | None = None,
) -> ScalogramMontage:
    """Scalogram tiles for every lead, placed row-major into one image.

    Leads are tiled in ``signal.lead_names`` order.  ``workers`` defaults to
    the METAFUSE_THREADS environment variable (1 when unset); results are
    identical for any worker count.
    """
    spec = spec or WaveletSpec()
    rows, cols = int(layout[0]), int(layout[1])
    if rows < 1 or cols < 1:
        raise ParameterError(f"layout must be positive, got {layout}")
    if signal.n_leads > rows * cols:
        raise ParameterError(
            f"layout {rows}x{cols} holds {rows * cols} tiles but signal has "
            f"{signal.n_leads} leads"
        )
    workers = _env_workers() if workers is None else max(1, int(workers))

    def one(trace):
        return cwt(trace, spec)

    if workers > 1 and signal.n_leads > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            scalos = list(pool.map(one, signal.samples))
    else:
        scalos = [one(trace) for trace in signal.samples]

    th, tw = int(tile_size[0]), int(tile_size[1])
    image = np.zeros((rows * th, cols * tw))
    for i, scalo in enumerate(scalos):
        r, c = divmod(i, cols)
        image[r * th : (r + 1) * th, c * tw : (c + 1) * tw] = render_scalogram(
            scalo, (th, tw)
        )
    return ScalogramMontage(
        image=image,
        layout=(rows, cols),
        tile_size=(th, tw),
        tile_order=signal.lead_names,
        scales=scalos[0].scales,
        sampling_rate=signal.sampling_rate,
        spec=spec,
        fft_length=scalos[0].fft_length,
    )


def write_montage_png(mont: ScalogramMontage, path) -> None:
    """Write the montage as an 8-bit grayscale PNG plus a JSON sidecar."""
    path = Path(path)
    img8 = np.clip(np.rint(mont.image * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(img8, mode="L").save(path, format="PNG")
    Path(str(path) + ".json").write_text(json.dumps(mont.sidecar(), indent=2) + "\n")
