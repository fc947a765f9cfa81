"""Bank of second-order bandpass filters with exponentially spaced centers.

Every channel is the discrete counterpart of the analog resonator

    H(s) = (w0/Q) s / (s^2 + (w0/Q) s + w0^2)

obtained with the bilinear transform. Both the center frequency and the
-3 dB bandwidth are prewarped, so each channel has unity gain exactly at its
center and a measured quality factor equal to the configured one whenever
the requested bandwidth fits below Nyquist.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.signal import lfilter

from .errors import ArgumentError, ConfigError, InputError

# Channels centered at or above this fraction of Nyquist are emitted inactive.
NYQUIST_CLAMP = 0.95
# Largest realizable -3 dB bandwidth, as a fraction of Nyquist.
MAX_BANDWIDTH_FRACTION = 0.95


@dataclass(frozen=True)
class FilterbankConfig:
    n_filters: int
    f_max_hz: float
    q_filter: float
    f_min_hz: float = 100.0
    sample_rate_hz: float = 16000.0

    def __post_init__(self):
        validate_config(self)

    @property
    def nyquist_hz(self) -> float:
        return self.sample_rate_hz / 2.0


def validate_config(config: FilterbankConfig) -> None:
    n = config.n_filters
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 1:
        raise ConfigError(f"n_filters must be a positive integer, got {n!r}")
    for name in ("f_max_hz", "q_filter", "f_min_hz", "sample_rate_hz"):
        value = getattr(config, name)
        if not isinstance(value, (int, float, np.number)) or not math.isfinite(value) or value <= 0:
            raise ConfigError(f"{name} must be a finite positive number, got {value!r}")
    if config.f_min_hz > config.f_max_hz:
        raise ConfigError(
            f"f_min_hz ({config.f_min_hz}) must not exceed f_max_hz ({config.f_max_hz})"
        )


TYPICAL = FilterbankConfig(n_filters=24, f_max_hz=7000.0, q_filter=8.0)
TINY = FilterbankConfig(n_filters=10, f_max_hz=2000.0, q_filter=2.0)
PRESETS = {"typical": TYPICAL, "tiny": TINY}


@dataclass(frozen=True)
class BiquadCoeffs:
    b0: float
    b1: float
    b2: float
    a1: float
    a2: float
    f_c_hz: float
    active: bool = True

    @property
    def b(self) -> np.ndarray:
        return np.array([self.b0, self.b1, self.b2])

    @property
    def a(self) -> np.ndarray:
        return np.array([1.0, self.a1, self.a2])

    def poles(self) -> np.ndarray:
        return np.roots([1.0, self.a1, self.a2])


@dataclass(frozen=True)
class FilterbankDesign:
    config: FilterbankConfig
    centers_hz: tuple[float, ...]
    channels: tuple[BiquadCoeffs, ...] = field(repr=False)

    @property
    def n_channels(self) -> int:
        return len(self.channels)

    @property
    def active_mask(self) -> np.ndarray:
        return np.array([ch.active for ch in self.channels])


def center_frequencies(config: FilterbankConfig) -> list[float]:
    """Exponentially spaced centers, anchored so the last one is exactly ``f_max_hz``.

    A single filter sits at ``f_max_hz``.
    """
    validate_config(config)
    n = int(config.n_filters)
    f_max = float(config.f_max_hz)
    if n == 1:
        return [f_max]
    f_min = float(config.f_min_hz)
    if f_min == f_max:
        raise ConfigError("f_min_hz must be below f_max_hz when n_filters > 1")
    log_ratio = math.log(f_max / f_min) / (n - 1)
    centers = [f_max * math.exp(log_ratio * (k - (n - 1))) for k in range(n)]
    # anchor both ends bit-exactly; interior points already lie on the progression
    centers[0] = f_min
    centers[-1] = f_max
    return centers


def design_bandpass(f_c_hz: float, q: float, sample_rate_hz: float) -> BiquadCoeffs:
    for name, value in (("f_c_hz", f_c_hz), ("q", q), ("sample_rate_hz", sample_rate_hz)):
        if not math.isfinite(value):
            raise ConfigError(f"{name} must be finite, got {value!r}")
        if value <= 0:
            raise ConfigError(f"{name} must be positive, got {value!r}")
    nyquist = sample_rate_hz / 2.0
    if f_c_hz >= NYQUIST_CLAMP * nyquist:
        return BiquadCoeffs(0.0, 0.0, 0.0, 0.0, 0.0, f_c_hz=float(f_c_hz), active=False)

    w0 = 2.0 * math.pi * f_c_hz / sample_rate_hz
    bandwidth = min(2.0 * math.pi * (f_c_hz / q) / sample_rate_hz, MAX_BANDWIDTH_FRACTION * math.pi)
    alpha = math.tan(bandwidth / 2.0)
    norm = 1.0 + alpha
    return BiquadCoeffs(
        b0=alpha / norm,
        b1=0.0,
        b2=-alpha / norm,
        a1=-2.0 * math.cos(w0) / norm,
        a2=(1.0 - alpha) / norm,
        f_c_hz=float(f_c_hz),
    )


def design_filterbank(config: FilterbankConfig) -> FilterbankDesign:
    centers = center_frequencies(config)
    channels = tuple(design_bandpass(fc, config.q_filter, config.sample_rate_hz) for fc in centers)
    return FilterbankDesign(config=config, centers_hz=tuple(centers), channels=channels)


def frequency_response(coeffs: BiquadCoeffs, f_hz, sample_rate_hz: float):
    """Complex gain of the channel at ``f_hz`` (scalar or array)."""
    f = np.asarray(f_hz, dtype=float)
    nyquist = sample_rate_hz / 2.0
    if np.any(~np.isfinite(f)) or np.any(f < 0) or np.any(f > nyquist):
        raise ArgumentError(f"frequency must lie in [0, {nyquist}] Hz, got {f_hz!r}")
    if not coeffs.active:
        out = np.zeros(f.shape, dtype=complex)
    else:
        zinv = np.exp(-2j * np.pi * f / sample_rate_hz)
        num = coeffs.b0 + coeffs.b1 * zinv + coeffs.b2 * zinv**2
        den = 1.0 + coeffs.a1 * zinv + coeffs.a2 * zinv**2
        out = num / den
    return complex(out) if out.ndim == 0 else out


def half_power_edges(coeffs: BiquadCoeffs, sample_rate_hz: float) -> tuple[float, float]:
    """Locate the lower and upper -3 dB frequencies numerically."""
    if not coeffs.active:
        raise ArgumentError("inactive channel has no passband")
    nyquist = sample_rate_hz / 2.0

    def excess(f):
        return abs(frequency_response(coeffs, f, sample_rate_hz)) ** 2 - 0.5

    fc = coeffs.f_c_hz
    lo = brentq(excess, 0.0, fc, xtol=1e-9, rtol=1e-14)
    hi = brentq(excess, fc, nyquist, xtol=1e-9, rtol=1e-14)
    return lo, hi


def measured_q(coeffs: BiquadCoeffs, sample_rate_hz: float) -> float:
    lo, hi = half_power_edges(coeffs, sample_rate_hz)
    return coeffs.f_c_hz / (hi - lo)


def filter_signal(coeffs: BiquadCoeffs, samples) -> np.ndarray:
    """Run one channel over ``samples`` starting from zero state."""
    x = np.asarray(samples, dtype=float)
    if x.ndim != 1:
        raise InputError(f"expected a 1-D waveform, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InputError("waveform contains non-finite samples")
    if not coeffs.active:
        return np.zeros_like(x)
    return lfilter(coeffs.b, coeffs.a, x)


def filter_bank(design: FilterbankDesign, samples) -> np.ndarray:
    """All channel outputs stacked as ``[n_channels, n_samples]``."""
    x = np.asarray(samples, dtype=float)
    return np.stack([filter_signal(ch, x) for ch in design.channels])
