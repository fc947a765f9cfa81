"""Filterbank + envelope detector bank producing log-power spectrograms."""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Iterable, Sequence

import numpy as np

from .envelope import EnvelopeConfig, detect_envelope
from .errors import ArgumentError, ConfigError, InputError, ContainerError
from .filterbank import FilterbankDesign, filter_bank

LOG_FLOOR = 1e-8
STD_FLOOR = 1e-6
# Bumped whenever feature values would change; part of every cache key.
EXTRACTOR_VERSION = 1

SPEC_MAGIC = b"AFBS"
SPEC_VERSION = 1
_SPEC_HEADER = struct.Struct("<4sIII")


@dataclass(frozen=True, eq=False)
class Spectrogram:
    values: np.ndarray  # [n_channels, n_frames], float32
    channel_centers_hz: tuple[float, ...]
    frame_hop_ms: float

    @property
    def n_channels(self) -> int:
        return self.values.shape[0]

    @property
    def n_frames(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True, eq=False)
class Normalizer:
    mean: np.ndarray
    std: np.ndarray

    @property
    def n_channels(self) -> int:
        return self.mean.shape[0]

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Normalizer":
        return cls(np.asarray(d["mean"], dtype=float), np.asarray(d["std"], dtype=float))


def extract_spectrogram(fb: FilterbankDesign, env: EnvelopeConfig, clip, sample_rate_hz: float | None = None) -> Spectrogram:
    """Filter ``clip`` through every channel, take short-time power, log-compress.

    ``clip`` is either a waveform object with ``samples``/``sample_rate_hz``
    or a bare array, in which case ``sample_rate_hz`` may be passed alongside.
    """
    if hasattr(clip, "samples"):
        samples = clip.samples
        sample_rate_hz = clip.sample_rate_hz
    else:
        samples = clip
    fs = fb.config.sample_rate_hz
    if env.sample_rate_hz != fs:
        raise ConfigError(f"envelope sample rate {env.sample_rate_hz} Hz != filterbank sample rate {fs} Hz")
    if sample_rate_hz is not None and sample_rate_hz != fs:
        raise ConfigError(f"clip sample rate {sample_rate_hz} Hz != filterbank sample rate {fs} Hz")
    x = np.asarray(samples, dtype=float)
    if x.ndim != 1:
        raise InputError(f"expected a mono waveform, got shape {x.shape}")
    if x.size < env.window_samples:
        raise InputError(f"clip of {x.size} samples is shorter than one envelope window ({env.window_samples})")
    power = detect_envelope(filter_bank(fb, x), env)
    values = np.log(power + LOG_FLOOR).astype(np.float32)
    return Spectrogram(values, tuple(fb.centers_hz), env.hop_ms)


def _stack_channels(spectrograms: Sequence[Spectrogram]) -> np.ndarray:
    counts = {s.n_channels for s in spectrograms}
    if len(counts) != 1:
        raise ArgumentError(f"spectrograms disagree on channel count: {sorted(counts)}")
    return np.concatenate([np.asarray(s.values, dtype=float) for s in spectrograms], axis=1)


def fit_normalizer(spectrograms: Iterable[Spectrogram]) -> Normalizer:
    spectrograms = list(spectrograms)
    if not spectrograms:
        raise ArgumentError("cannot fit a normalizer on an empty collection")
    flat = _stack_channels(spectrograms)
    # two-pass: center first, then average squared deviations
    mean = flat.mean(axis=1)
    var = np.mean((flat - mean[:, None]) ** 2, axis=1)
    std = np.maximum(np.sqrt(var), STD_FLOOR)
    return Normalizer(mean, std)


def normalize(s: Spectrogram, n: Normalizer) -> Spectrogram:
    if s.n_channels != n.n_channels:
        raise ArgumentError(f"spectrogram has {s.n_channels} channels, normalizer {n.n_channels}")
    values = (np.asarray(s.values, dtype=float) - n.mean[:, None]) / n.std[:, None]
    return Spectrogram(values, s.channel_centers_hz, s.frame_hop_ms)


# -- binary container ----------------------------------------------------------


def _write_record(f: BinaryIO, values: np.ndarray) -> None:
    v = np.ascontiguousarray(values, dtype="<f4")
    f.write(_SPEC_HEADER.pack(SPEC_MAGIC, SPEC_VERSION, v.shape[0], v.shape[1]))
    f.write(v.tobytes())


def _read_record(f: BinaryIO) -> np.ndarray | None:
    head = f.read(_SPEC_HEADER.size)
    if not head:
        return None
    if len(head) < _SPEC_HEADER.size:
        raise ContainerError("truncated spectrogram header")
    magic, version, n_ch, n_fr = _SPEC_HEADER.unpack(head)
    if magic != SPEC_MAGIC:
        raise ContainerError(f"bad spectrogram magic {magic!r}")
    if version != SPEC_VERSION:
        raise ContainerError(f"unsupported spectrogram version {version}")
    nbytes = 4 * n_ch * n_fr
    body = f.read(nbytes)
    if len(body) != nbytes:
        raise ContainerError("truncated spectrogram body")
    return np.frombuffer(body, dtype="<f4").reshape(n_ch, n_fr).astype(np.float32)


def spectrogram_to_bytes(s: Spectrogram) -> bytes:
    buf = io.BytesIO()
    _write_record(buf, s.values)
    return buf.getvalue()


def spectrogram_from_bytes(data: bytes, channel_centers_hz=(), frame_hop_ms: float = 10.0) -> Spectrogram:
    values = _read_record(io.BytesIO(data))
    if values is None:
        raise ContainerError("empty spectrogram container")
    return Spectrogram(values, tuple(channel_centers_hz), frame_hop_ms)


def save_spectrograms(path, spectrograms: Iterable[Spectrogram]) -> None:
    """Write records back to back; a single spectrogram is just a one-record file."""
    with open(Path(path), "wb") as f:
        for s in spectrograms:
            _write_record(f, s.values)


def load_spectrograms(path, channel_centers_hz=(), frame_hop_ms: float = 10.0) -> list[Spectrogram]:
    out = []
    with open(Path(path), "rb") as f:
        while (values := _read_record(f)) is not None:
            out.append(Spectrogram(values, tuple(channel_centers_hz), frame_hop_ms))
    return out


def equalize_gain(s: Spectrogram, active_mask=None) -> Spectrogram:
    """Remove the clip's overall level: subtract the mean log power of the active rows.

    A constant gain on the waveform adds the same constant to every
    above-floor entry, so this makes features insensitive to recording level,
    much like an automatic gain stage ahead of an analog front end. Inactive
    rows are left at the log floor so they stay constant across clips.
    """
    values = np.asarray(s.values, dtype=float)
    mask = np.ones(values.shape[0], dtype=bool) if active_mask is None else np.asarray(active_mask, dtype=bool)
    if mask.shape != (values.shape[0],):
        raise ArgumentError(f"active mask has {mask.shape} entries for {values.shape[0]} channels")
    out = values.copy()
    if mask.any():
        out[mask] -= values[mask].mean()
    return Spectrogram(out.astype(np.float32), s.channel_centers_hz, s.frame_hop_ms)
