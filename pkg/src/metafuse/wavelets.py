"""Continuous wavelet analysis with generalized Morse wavelets.

The analyzing wavelet is defined in the frequency domain as

    psi_hat(w) = a_bg * w**beta * exp(-w**gamma)    for w > 0, else 0,

with ``beta = time_bandwidth / gamma`` and the bandpass normalization
``a_bg`` chosen so the peak value is exactly 2 at the peak angular frequency
``w_p = (beta/gamma)**(1/gamma)``.

The transform of a sampled signal x is computed per scale ``a`` as

    W(a, b) = sqrt(a) * ifft( fft(x_padded) * psi_hat(a * w_k) ),

with ``w_k = 2*pi*k/N`` over the non-negative DFT bins and zero elsewhere
(the wavelet is analytic).  This evaluates, exactly, the discretized analysis
integral ``|a|**-0.5 * sum_t x(t) * conj(psi)((t-b)/a)`` for the band-limited,
zero-padded periodic extension of x.  Scales are unitless sample counts;
the sampling rate only labels equivalent frequencies.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, ParameterError


@dataclass(frozen=True)
class WaveletSpec:
    """Morse wavelet family parameters plus the scale-grid density.

    ``gamma`` is the symmetry parameter, ``time_bandwidth`` the P^2 product
    (so ``beta = time_bandwidth / gamma``), ``voices_per_octave`` the number
    of scales per octave in the analysis grid.
    """

    gamma: float = 3.0
    time_bandwidth: float = 60.0
    voices_per_octave: int = 10

    def __post_init__(self):
        if not (self.gamma > 0 and math.isfinite(self.gamma)):
            raise ParameterError(f"gamma must be positive, got {self.gamma}")
        if not (self.time_bandwidth > self.gamma):
            raise ParameterError(
                f"time_bandwidth must exceed gamma, got "
                f"{self.time_bandwidth} <= {self.gamma}"
            )
        if int(self.voices_per_octave) != self.voices_per_octave or self.voices_per_octave < 1:
            raise ParameterError(
                f"voices_per_octave must be a positive integer, got "
                f"{self.voices_per_octave}"
            )

    @property
    def beta(self) -> float:
        return self.time_bandwidth / self.gamma


def peak_frequency(spec: WaveletSpec) -> float:
    """Angular frequency (rad/sample at scale 1) of the spectral peak."""
    return (spec.beta / spec.gamma) ** (1.0 / spec.gamma)


def _log_amplitude(spec: WaveletSpec) -> float:
    # peak value psi_hat(w_p) = 2:  ln a = ln 2 + r - r*ln r,  r = beta/gamma
    r = spec.beta / spec.gamma
    return math.log(2.0) + r - r * math.log(r)


def morse_wavelet_fd(spec: WaveletSpec, omega: np.ndarray) -> np.ndarray:
    """Evaluate the wavelet spectrum on a non-negative frequency grid.

    Returns zeros at ``omega <= 0``; the peak value is 2 by construction.
    """
    omega = np.asarray(omega, dtype=np.float64)
    if omega.size and np.any(omega < 0):
        raise ParameterError("omega grid must be non-negative")
    if omega.size > 1 and np.any(np.diff(omega) < 0):
        raise ParameterError("omega grid must be ascending")
    out = np.zeros_like(omega)
    pos = omega > 0
    if np.any(pos):
        w = omega[pos]
        out[pos] = np.exp(
            _log_amplitude(spec) + spec.beta * np.log(w) - w ** spec.gamma
        )
    return out


def _abs_moment(p: float, gamma: float) -> float:
    # integral_0^inf w**p * exp(-2 w**gamma) dw
    q = (p + 1.0) / gamma
    return math.exp(math.lgamma(q) - math.log(gamma) - q * math.log(2.0))


def time_spread(spec: WaveletSpec) -> float:
    """Time-domain standard deviation (samples at scale 1).

    From Plancherel, sigma_t^2 = int |psi_hat'|^2 / int |psi_hat|^2 with
    psi_hat' = psi_hat * (beta/w - gamma*w**(gamma-1)); the moments reduce to
    Gamma functions.
    """
    b, g = spec.beta, spec.gamma
    num = (
        b * b * _abs_moment(2 * b - 2, g)
        - 2 * b * g * _abs_moment(2 * b + g - 2, g)
        + g * g * _abs_moment(2 * b + 2 * g - 2, g)
    )
    return math.sqrt(num / _abs_moment(2 * b, g))


def scale_grid(spec: WaveletSpec, n_samples: int) -> np.ndarray:
    """Geometric scale grid from the Nyquist-peak scale up to duration limit.

    The smallest scale puts the wavelet's peak frequency at Nyquist
    (``a_min = w_p / pi``); the largest is the biggest scale whose
    time-domain standard deviation ``a * sigma_t`` still fits within the
    signal duration.  Successive scales differ by ``2**(1/voices)``.
    """
    if n_samples < 2:
        raise InputError(f"need at least 2 samples, got {n_samples}")
    a_min = peak_frequency(spec) / math.pi
    a_max = max(n_samples / time_spread(spec), a_min)
    voices = int(spec.voices_per_octave)
    n_scales = int(math.floor(voices * math.log2(a_max / a_min))) + 1
    return a_min * 2.0 ** (np.arange(n_scales) / voices)


def equivalent_frequencies(spec: WaveletSpec, scales, sampling_rate: float) -> np.ndarray:
    """Hz at which each scale's wavelet response peaks."""
    scales = np.asarray(scales, dtype=np.float64)
    return peak_frequency(spec) * sampling_rate / (2.0 * math.pi * scales)


@dataclass(frozen=True)
class Scalogram:
    """Magnitude surface of one lead: rows are scales, columns are time."""

    magnitudes: np.ndarray  # (n_scales, n_samples), non-negative
    scales: np.ndarray  # strictly increasing, samples
    coi_samples: tuple  # per-scale boundary extent (samples per edge)
    fft_length: int
    boundary: str
    spec: WaveletSpec

    def __post_init__(self):
        if self.magnitudes.ndim != 2:
            raise InputError(f"magnitudes must be 2-D, got {self.magnitudes.shape}")
        if self.magnitudes.shape[0] != len(self.scales):
            raise InputError("one magnitude row per scale required")
        if np.any(np.asarray(self.scales) <= 0) or np.any(np.diff(self.scales) <= 0):
            raise InputError("scales must be positive and strictly increasing")

    @property
    def n_scales(self) -> int:
        return self.magnitudes.shape[0]

    @property
    def n_samples(self) -> int:
        return self.magnitudes.shape[1]


# Envelope clearance, in time-domain standard deviations, kept between the
# signal and its circular wrap when zero-padding.  psi decays faster than
# a Gaussian core out to several sigma and polynomially (~|t|^-(beta+1))
# beyond, so 8 sigma makes wrap-around negligible at double precision.
_PAD_SIGMAS = 8.0


def _padded_length(n_samples: int, max_scale: float, sigma_t: float) -> int:
    margin = int(math.ceil(_PAD_SIGMAS * sigma_t * max_scale))
    return 1 << int(math.ceil(math.log2(n_samples + margin)))


def cwt(x, spec: WaveletSpec | None = None, boundary: str = "zero-pad") -> Scalogram:
    """Magnitude scalogram of a 1-D signal over the default scale grid.

    ``boundary`` is ``"zero-pad"`` (pad with zeros to a power of two with
    generous wrap clearance, then keep the first ``len(x)`` columns) or
    ``"periodic"`` (circular analysis at the native length).
    """
    spec = spec or WaveletSpec()
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise InputError(f"signal must be 1-D, got shape {x.shape}")
    if x.size < 2:
        raise InputError(f"signal must have at least 2 samples, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise InputError("signal holds non-finite samples")
    if boundary not in ("zero-pad", "periodic"):
        raise ParameterError(f"unknown boundary mode '{boundary}'")

    n = x.size
    scales = scale_grid(spec, n)
    sigma_t = time_spread(spec)
    if boundary == "zero-pad":
        nfft = _padded_length(n, float(scales[-1]), sigma_t)
        xp = np.zeros(nfft)
        xp[:n] = x
    else:
        nfft = n
        xp = x

    spectrum = np.fft.fft(xp)
    omega = 2.0 * math.pi * np.arange(nfft // 2 + 1) / nfft
    # response matrix over non-negative bins; negative bins stay zero
    filt = np.zeros((len(scales), nfft))
    for i, a in enumerate(scales):
        filt[i, : nfft // 2 + 1] = morse_wavelet_fd(spec, a * omega)
    coefs = np.fft.ifft(spectrum[None, :] * filt, axis=1)
    coefs *= np.sqrt(scales)[:, None]
    mags = np.abs(coefs[:, :n])
    coi = tuple(int(math.ceil(a * sigma_t)) for a in scales)
    return Scalogram(
        magnitudes=mags,
        scales=scales,
        coi_samples=coi,
        fft_length=nfft,
        boundary=boundary,
        spec=spec,
    )
