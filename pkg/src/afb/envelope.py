"""Short-time average power of each filter channel."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ConfigError, InputError


@dataclass(frozen=True)
class EnvelopeConfig:
    window_ms: float = 20.0
    hop_ms: float = 10.0
    sample_rate_hz: float = 16000.0

    def __post_init__(self):
        if not (self.window_ms > 0 and self.hop_ms > 0 and self.sample_rate_hz > 0):
            raise ConfigError("window_ms, hop_ms and sample_rate_hz must be positive")
        if self.hop_ms > self.window_ms:
            raise ConfigError(f"hop_ms ({self.hop_ms}) must not exceed window_ms ({self.window_ms})")
        for name, ms in (("window_ms", self.window_ms), ("hop_ms", self.hop_ms)):
            n = ms * self.sample_rate_hz / 1000.0
            if abs(n - round(n)) > 1e-9 or round(n) < 1:
                raise ConfigError(f"{name}={ms} is not a whole number of samples at {self.sample_rate_hz} Hz")

    @property
    def window_samples(self) -> int:
        return int(round(self.window_ms * self.sample_rate_hz / 1000.0))

    @property
    def hop_samples(self) -> int:
        return int(round(self.hop_ms * self.sample_rate_hz / 1000.0))


def frame_count(n_samples: int, config: EnvelopeConfig) -> int:
    w, h = config.window_samples, config.hop_samples
    if n_samples < w:
        raise InputError(f"signal of {n_samples} samples is shorter than one {w}-sample window")
    return (n_samples - w) // h + 1


def detect_envelope(channel, config: EnvelopeConfig) -> np.ndarray:
    """Mean of squared samples over each rectangular window; trailing partial frames are dropped.

    Accepts a single waveform or a ``[channels, samples]`` stack.
    """
    x = np.asarray(channel, dtype=float)
    n_frames = frame_count(x.shape[-1], config)
    w, h = config.window_samples, config.hop_samples
    frames = sliding_window_view(x, w, axis=-1)[..., : (n_frames - 1) * h + 1 : h, :]
    return np.mean(frames * frames, axis=-1)


def frame_times_ms(n_frames: int, config: EnvelopeConfig) -> np.ndarray:
    """Window start times, handy for axis labels."""
    return np.arange(n_frames) * config.hop_ms

