"""Deterministic image augmentation: shift, then reflect, then rotate.

Every transform for a given ``(seed, draw_index)`` pair is a pure function:
the generator is seeded from exactly those two integers, so augmented sets
are reproducible across processes and machines.  Draw order is fixed as
shift-x, shift-y, reflect-x, reflect-y, angle; a draw is consumed only for
transforms the AugmentSpec enables.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import InputError, ParameterError


@dataclass(frozen=True)
class AugmentSpec:
    max_shift_px: int = 30
    allow_reflect_x: bool = True
    allow_reflect_y: bool = True
    max_rotate_deg: float = 90.0
    seed: int = 0

    def __post_init__(self):
        if self.max_shift_px < 0:
            raise ParameterError(f"max_shift_px must be >= 0, got {self.max_shift_px}")
        if not (0 <= self.max_rotate_deg <= 180):
            raise ParameterError(
                f"max_rotate_deg must be in [0, 180], got {self.max_rotate_deg}"
            )

    def to_dict(self) -> dict:
        return {
            "max_shift_px": self.max_shift_px,
            "allow_reflect_x": self.allow_reflect_x,
            "allow_reflect_y": self.allow_reflect_y,
            "max_rotate_deg": self.max_rotate_deg,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class Transform:
    """Decoded augmentation parameters for one draw."""

    shift_x: int
    shift_y: int
    reflect_x: bool
    reflect_y: bool
    angle_deg: float


def draw_transform(spec: AugmentSpec, draw_index: int) -> Transform:
    """Decode the transform for ``(spec.seed, draw_index)``.

    Shifts are integer pixels uniform over [-max, max]; each enabled
    reflection fires with probability 1/2; the angle is uniform over
    [-max_rotate_deg, +max_rotate_deg].
    """
    if draw_index < 0:
        raise ParameterError(f"draw_index must be >= 0, got {draw_index}")
    rng = np.random.default_rng(
        np.random.SeedSequence([spec.seed & 0xFFFFFFFFFFFFFFFF, draw_index])
    )
    m = spec.max_shift_px
    dx = int(rng.integers(-m, m + 1)) if m > 0 else 0
    dy = int(rng.integers(-m, m + 1)) if m > 0 else 0
    fx = bool(rng.random() < 0.5) if spec.allow_reflect_x else False
    fy = bool(rng.random() < 0.5) if spec.allow_reflect_y else False
    ang = float(rng.uniform(-spec.max_rotate_deg, spec.max_rotate_deg))
    if spec.max_rotate_deg == 0:
        ang = 0.0
    return Transform(dx, dy, fx, fy, ang)


def _shift2d(img: np.ndarray, dx: int, dy: int) -> np.ndarray:
    """Translate by (dx right, dy down) with zero fill."""
    out = np.zeros_like(img)
    h, w = img.shape[:2]
    if abs(dx) >= w or abs(dy) >= h:
        return out
    ys = slice(max(dy, 0), min(h + dy, h))
    xs = slice(max(dx, 0), min(w + dx, w))
    ys_src = slice(max(-dy, 0), min(h - dy, h))
    xs_src = slice(max(-dx, 0), min(w - dx, w))
    out[ys, xs] = img[ys_src, xs_src]
    return out


def apply_transform(image: np.ndarray, t: Transform) -> np.ndarray:
    """Apply shift, reflections, then rotation (bilinear, zero fill)."""
    out = image.astype(np.float64, copy=True)
    if t.shift_x or t.shift_y:
        out = _shift2d(out, t.shift_x, t.shift_y)
    if t.reflect_x:
        out = out[:, ::-1].copy()
    if t.reflect_y:
        out = out[::-1, :].copy()
    if t.angle_deg != 0.0:
        out = ndimage.rotate(
            out, t.angle_deg, axes=(1, 0), reshape=False, order=1,
            mode="constant", cval=0.0,
        )
    return out


def augment(image: np.ndarray, spec: AugmentSpec, draw_index: int) -> np.ndarray:
    """Augmented copy of ``image`` for this draw; dtype and shape preserved.

    Accepts HxW or HxWxC arrays.  Regions shifted or rotated out of frame
    are filled with zeros.
    """
    image = np.asarray(image)
    if image.ndim not in (2, 3):
        raise InputError(f"image must be HxW or HxWxC, got shape {image.shape}")
    if image.ndim == 3 and image.shape[2] < 1:
        raise InputError(f"image has no channels: shape {image.shape}")
    t = draw_transform(spec, draw_index)
    out = apply_transform(image, t)
    if np.issubdtype(image.dtype, np.integer):
        info = np.iinfo(image.dtype)
        out = np.clip(np.rint(out), info.min, info.max)
    return out.astype(image.dtype, copy=False)
