"""Synthetic speech-like corpus in the Speech Commands directory layout.

Each of the 35 words is rendered from a rough phonetic transcription with a
source-filter model: a harmonic glottal source shaped by moving formant
resonances for voiced sounds, and band-limited noise for fricatives, bursts
and aspiration. Every clip draws its own speaker (pitch, vocal-tract scale),
tempo, onset, level and background-noise SNR, so the classes overlap the way
real recordings do. The corpus exists to exercise the full pipeline without
the real dataset; accuracies measured on it are not comparable to GSCD numbers.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import butter, sosfilt

from .dataset import CLIP_SAMPLES, GSCD_WORDS, KEYWORDS, SAMPLE_RATE_HZ, write_wav

FS = SAMPLE_RATE_HZ
CONTROL_HOP = 80  # samples (5 ms)

TRANSCRIPTIONS = {
    "backward": "B AE K W ER D",
    "bed": "B EH D",
    "bird": "B ER D",
    "cat": "K AE T",
    "dog": "D AO G",
    "down": "D AW N",
    "eight": "EY T",
    "five": "F AY V",
    "follow": "F AA L OW",
    "forward": "F AO R W ER D",
    "four": "F AO R",
    "go": "G OW",
    "happy": "HH AE P IY",
    "house": "HH AW S",
    "learn": "L ER N",
    "left": "L EH F T",
    "marvin": "M AA R V IH N",
    "nine": "N AY N",
    "no": "N OW",
    "off": "AO F",
    "on": "AA N",
    "one": "W AH N",
    "right": "R AY T",
    "seven": "S EH V AH N",
    "sheila": "SH IY L AH",
    "six": "S IH K S",
    "stop": "S T AA P",
    "three": "TH R IY",
    "tree": "T R IY",
    "two": "T UW",
    "up": "AH P",
    "visual": "V IH ZH UW AH L",
    "wow": "W AW",
    "yes": "Y EH S",
    "zero": "Z IY R OW",
}

# formant targets (Hz) for an adult male vocal tract; diphthongs glide start -> end
_VOWELS = {
    "IY": (270, 2290, 3010), "IH": (390, 1990, 2550), "EH": (530, 1840, 2480),
    "AE": (660, 1720, 2410), "AH": (520, 1190, 2390), "AA": (730, 1090, 2440),
    "AO": (570, 840, 2410), "UH": (440, 1020, 2240), "UW": (300, 870, 2240),
    "ER": (490, 1350, 1690),
}
_DIPHTHONGS = {
    "AY": ((730, 1090, 2440), (400, 2000, 2550)),
    "AW": ((730, 1090, 2440), (450, 1000, 2250)),
    "EY": ((480, 1900, 2500), (290, 2250, 2900)),
    "OW": ((540, 1000, 2300), (330, 900, 2250)),
}
_SONORANTS = {  # formants, relative voicing level
    "W": ((300, 610, 2200), 0.6), "Y": ((280, 2250, 2900), 0.6),
    "R": ((310, 1060, 1380), 0.7), "L": ((360, 1300, 2900), 0.6),
    "M": ((250, 1000, 2200), 0.3), "N": ((250, 1700, 2600), 0.3),
}
_FRICATIVES = {  # noise band (Hz), level, voiced
    "S": ((4000, 7500), 0.45, False), "SH": ((2000, 5000), 0.5, False),
    "F": ((1200, 7500), 0.12, False), "TH": ((1400, 7500), 0.1, False),
    "HH": ((400, 5000), 0.12, False), "Z": ((4000, 7500), 0.3, True),
    "V": ((1200, 7500), 0.1, True), "ZH": ((2000, 5000), 0.3, True),
}
_STOPS = {  # burst band, burst level, voiced
    "P": ((400, 1500), 0.3, False), "B": ((400, 1500), 0.2, True),
    "T": ((3000, 7000), 0.4, False), "D": ((2500, 6000), 0.3, True),
    "K": ((1500, 3500), 0.4, False), "G": ((1200, 3000), 0.3, True),
}
_ASPIRATION = ((500, 5000), 0.1)
# Formant targets at the point of constriction. Neighbouring vowels glide to and
# from these, which is how place of articulation shows up below 2 kHz.
_LOCI = {
    "labial": (250, 900, 2300), "dental": (250, 1400, 2600), "alveolar": (250, 1800, 2700),
    "postalveolar": (250, 2100, 2600), "velar": (250, 2000, 2300), "glottal": None,
}
_PLACE = {
    "P": "labial", "B": "labial", "M": "labial", "F": "labial", "V": "labial",
    "TH": "dental", "T": "alveolar", "D": "alveolar", "N": "alveolar", "S": "alveolar", "Z": "alveolar",
    "SH": "postalveolar", "ZH": "postalveolar", "K": "velar", "G": "velar", "HH": "glottal",
}
BREATHINESS = 0.06  # aspiration noise level relative to voicing
_NEUTRAL = (500, 1500, 2500)
_BANDWIDTHS = (70.0, 100.0, 140.0, 200.0, 250.0)


@dataclass
class _Track:
    """Piecewise-linear control trajectories sampled every CONTROL_HOP samples."""

    n: int

    def __post_init__(self):
        self.voicing = np.zeros(self.n)
        self.formants = np.tile(np.array(_NEUTRAL, dtype=float), (self.n, 1))
        self.noise: dict[tuple[int, int], np.ndarray] = {}

    def add_noise(self, band, i0, i1, level):
        band = (int(band[0]), int(band[1]))
        track = self.noise.setdefault(band, np.zeros(self.n))
        track[i0:i1] = np.maximum(track[i0:i1], level)


def _render_plan(word: str, rng: np.random.Generator, tempo: float, vt_scale: float):
    """Lay out phonemes on the 5 ms control grid."""
    phones = TRANSCRIPTIONS[word].split()
    frame_ms = 1000.0 * CONTROL_HOP / FS
    segments = []
    for ph in phones:
        jitter = rng.uniform(0.85, 1.15) * tempo
        if ph in _VOWELS:
            dur = 140
        elif ph in _DIPHTHONGS:
            dur = 200
        elif ph in _SONORANTS:
            dur = 75
        elif ph in _FRICATIVES:
            dur = 120 if ph in ("S", "SH", "Z") else 95
        else:
            dur = 85  # closure + burst (+ aspiration)
        segments.append((ph, max(2, int(round(dur * jitter / frame_ms)))))

    total = sum(d for _, d in segments)
    track = _Track(total)
    anchors_t, anchors_f = [], []
    pos = 0
    for ph, d in segments:
        i0, i1 = pos, pos + d
        fj = rng.uniform(0.94, 1.06, size=3) * vt_scale
        if ph in _VOWELS:
            track.voicing[i0:i1] = 1.0
            anchors_t += [i0 + 0.3 * d, i0 + 0.7 * d]
            anchors_f += [np.array(_VOWELS[ph]) * fj] * 2
        elif ph in _DIPHTHONGS:
            start, end = _DIPHTHONGS[ph]
            track.voicing[i0:i1] = 1.0
            anchors_t += [i0 + 0.2 * d, i0 + 0.85 * d]
            anchors_f += [np.array(start) * fj, np.array(end) * fj]
        elif ph in _SONORANTS:
            formants, level = _SONORANTS[ph]
            if ph in _PLACE:  # nasals share the oral locus of their place
                formants = tuple(0.5 * (a + b) for a, b in zip(formants, _LOCI[_PLACE[ph]]))
            track.voicing[i0:i1] = level
            anchors_t.append(i0 + d / 2)
            anchors_f.append(np.array(formants) * fj)
        elif ph in _FRICATIVES:
            _add_locus(anchors_t, anchors_f, ph, i0 + d / 2, fj)
            band, level, voiced = _FRICATIVES[ph]
            band = (band[0] * vt_scale, min(band[1] * vt_scale, 7600))
            track.add_noise(band, i0, i1, level * rng.uniform(0.7, 1.3))
            if voiced:
                track.voicing[i0:i1] = 0.35
        else:
            _add_locus(anchors_t, anchors_f, ph, i0 + d / 2, fj)
            band, level, voiced = _STOPS[ph]
            band = (band[0] * vt_scale, min(band[1] * vt_scale, 7600))
            closure = int(d * 0.55)
            burst = max(1, int(d * 0.2))
            if voiced:
                track.voicing[i0 : i0 + closure] = 0.1
            b0 = i0 + closure
            track.add_noise(band, b0, b0 + burst, level * rng.uniform(0.7, 1.3))
            if not voiced:
                track.add_noise(_ASPIRATION[0], b0 + burst, i1, _ASPIRATION[1])
            elif i1 > b0 + burst:
                track.voicing[b0 + burst : i1] = 0.5
        pos = i1

    if anchors_t:
        anchors_f = np.array(anchors_f)
        grid = np.arange(total)
        for j in range(3):
            track.formants[:, j] = np.interp(grid, anchors_t, anchors_f[:, j])
    return track


def _add_locus(anchors_t, anchors_f, ph, t, fj):
    locus = _LOCI[_PLACE[ph]]
    if locus is not None:
        anchors_t.append(t)
        anchors_f.append(np.array(locus) * fj)


def _smooth(x: np.ndarray, width: int = 3) -> np.ndarray:
    if width <= 1 or x.size < width:
        return x
    kernel = np.ones(width) / width
    return np.convolve(np.pad(x, (width // 2, width - 1 - width // 2), mode="edge"), kernel, mode="valid")


def _voiced(track: _Track, f0_frames: np.ndarray, vt_scale: float, n_samples: int) -> np.ndarray:
    n = track.n
    f_upper = np.array([3500.0, 4500.0]) * vt_scale
    formants = np.concatenate([track.formants, np.tile(f_upper, (n, 1))], axis=1)  # [n, 5]
    k_max = int(0.475 * FS / f0_frames.min())
    k = np.arange(1, k_max + 1)
    freqs = f0_frames[:, None] * k[None, :]  # [n, K]
    # glottal roll-off with lip radiation: roughly -6 dB/octave
    amp = 1.0 / (1.0 + freqs / 200.0)
    for j, bw in enumerate(_BANDWIDTHS):
        fj = formants[:, j : j + 1]
        amp = amp * fj**2 / np.sqrt((fj**2 - freqs**2) ** 2 + (bw * freqs) ** 2)
    amp *= freqs < 0.475 * FS
    # each frame's harmonic set is scaled to an RMS equal to its voicing level
    amp *= (_smooth(track.voicing) / np.sqrt(0.5 * np.sum(amp**2, axis=1)))[:, None]

    t_frames = np.arange(n) * CONTROL_HOP
    t = np.arange(n_samples)
    f0 = np.interp(t, t_frames, f0_frames)
    phase = 2.0 * np.pi * np.cumsum(f0) / FS
    idx = np.minimum(t // CONTROL_HOP, n - 1)
    nxt = np.minimum(idx + 1, n - 1)
    frac = (t - idx * CONTROL_HOP) / CONTROL_HOP
    out = np.zeros(n_samples)
    for j in range(k_max):
        a = amp[idx, j] * (1.0 - frac) + amp[nxt, j] * frac
        if a.any():
            out += a * np.sin((j + 1) * phase)
    return out


def _noise(track: _Track, rng: np.random.Generator, n_samples: int) -> np.ndarray:
    out = np.zeros(n_samples)
    t_frames = np.arange(track.n) * CONTROL_HOP
    t = np.arange(n_samples)
    for (lo, hi), levels in sorted(track.noise.items()):
        sos = butter(4, [lo, min(hi, 0.47 * FS)], btype="bandpass", fs=FS, output="sos")
        band = sosfilt(sos, rng.standard_normal(n_samples))
        band /= np.sqrt(np.mean(band**2))
        out += band * np.interp(t, t_frames, _smooth(levels))
    return out


def synthesize_word(word: str, rng: np.random.Generator, n_samples: int = CLIP_SAMPLES) -> np.ndarray:
    """One utterance of ``word`` with randomized speaker, timing, level and background noise."""
    if word not in TRANSCRIPTIONS:
        raise KeyError(f"no transcription for {word!r}")
    vt_scale = rng.uniform(0.88, 1.2)
    f0_base = rng.uniform(85.0, 240.0)
    tempo = rng.uniform(0.75, 1.3)
    track = _render_plan(word, rng, tempo, vt_scale)
    n_frames = track.n
    f0_frames = f0_base * np.linspace(1.1, 0.85, n_frames) * (1 + 0.03 * np.sin(np.linspace(0, rng.uniform(2, 6), n_frames)))
    f0_frames *= 1 + 0.02 * _smooth(rng.standard_normal(n_frames), 3)  # jitter
    track.noise[(300, 6000)] = BREATHINESS * track.voicing

    speech_len = n_frames * CONTROL_HOP
    speech = _voiced(track, f0_frames, vt_scale, speech_len) + _noise(track, rng, speech_len)
    rms = np.sqrt(np.mean(speech**2)) or 1.0
    speech /= rms

    clip = np.zeros(n_samples)
    slack = n_samples - speech_len
    if slack > 0:
        start = int(rng.integers(int(0.02 * slack), max(int(0.98 * slack), int(0.02 * slack) + 1)))
        clip[start : start + speech_len] = speech
    else:
        clip[:] = speech[:n_samples]

    # background: mix of white and low-pass ("pink-ish") noise at a random SNR
    snr_db = rng.uniform(8.0, 30.0)
    white = rng.standard_normal(n_samples)
    pinkish = sosfilt(butter(1, 500, fs=FS, output="sos"), rng.standard_normal(n_samples)) * 4.0
    bg = white * rng.uniform(0.2, 1.0) + pinkish
    bg *= np.sqrt(np.mean(speech**2)) / (np.sqrt(np.mean(bg**2)) * 10 ** (snr_db / 20.0))
    clip += bg

    peak_db = rng.uniform(-30.0, -4.0)
    clip *= 10 ** (peak_db / 20.0) / np.max(np.abs(clip))
    return clip


def make_corpus(root, per_word: int | dict[str, int], seed: int = 0, words=GSCD_WORDS, short_fraction: float = 0.1) -> Path:
    """Write ``per_word`` clips for every word under ``root/<word>/``.

    A ``short_fraction`` of files are cut short so loaders exercise end padding.
    Existing files with the same names are overwritten.
    """
    root = Path(root)
    for word in words:
        count = per_word[word] if isinstance(per_word, dict) else per_word
        folder = root / word
        folder.mkdir(parents=True, exist_ok=True)
        for i in range(count):
            rng = np.random.default_rng([int(seed) & 0xFFFFFFFF, zlib.crc32(word.encode()), i])
            clip = synthesize_word(word, rng)
            if rng.random() < short_fraction:
                clip = clip[: int(rng.integers(12000, CLIP_SAMPLES))]
            speaker = zlib.crc32(f"{seed}:{word}:{i}".encode())
            write_wav(folder / f"{speaker:08x}_nohash_{i}.wav", clip)
    return root


def desk_corpus_counts(per_keyword: int, unknown_total: int, splits: int = 3) -> dict[str, int]:
    """Clips per word needed to fill ``splits`` splits at the given quotas."""
    n_unknown_words = len(GSCD_WORDS) - len(KEYWORDS)
    per_unknown = -(-unknown_total // n_unknown_words)
    return {w: splits * (per_keyword if w in KEYWORDS else per_unknown) for w in GSCD_WORDS}
