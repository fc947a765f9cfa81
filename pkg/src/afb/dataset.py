"""Speech-Commands-layout corpus ingestion and deterministic split construction.

The corpus is a directory of word-named folders, each holding 1 s PCM16 mono
16 kHz WAV clips. Ten words are keywords; the remaining 25 are pooled into a
single "unknown" class.
"""

from __future__ import annotations

import csv
import hashlib
import io
import wave
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ArgumentError, DatasetError, UnsupportedFormatError, WavParseError

SAMPLE_RATE_HZ = 16000
CLIP_SAMPLES = 16000

KEYWORDS = ("yes", "no", "up", "down", "left", "right", "on", "off", "stop", "go")
UNKNOWN_LABEL = "unknown"
LABELS = KEYWORDS + (UNKNOWN_LABEL,)
N_CLASSES = len(LABELS)
UNKNOWN_INDEX = LABELS.index(UNKNOWN_LABEL)

GSCD_WORDS = (
    "backward", "bed", "bird", "cat", "dog", "down", "eight", "five", "follow",
    "forward", "four", "go", "happy", "house", "learn", "left", "marvin", "nine",
    "no", "off", "on", "one", "right", "seven", "sheila", "six", "stop", "three",
    "tree", "two", "up", "visual", "wow", "yes", "zero",
)
UNKNOWN_WORDS = tuple(w for w in GSCD_WORDS if w not in KEYWORDS)

# (examples per keyword, unknown examples) in each of train/validation/test
PRESETS = {
    "small": (200, 800),
    "large": (2000, 8000),
    "desk": (50, 200),
}
SPLIT_NAMES = ("train", "validation", "test")


@dataclass(frozen=True)
class LabelMap:
    classes: tuple[str, ...] = LABELS

    def index_of_word(self, word: str) -> int:
        return self.classes.index(word) if word in KEYWORDS else UNKNOWN_INDEX

    def __len__(self):
        return len(self.classes)


@dataclass(frozen=True, eq=False)
class Waveform:
    samples: np.ndarray
    sample_rate_hz: int = SAMPLE_RATE_HZ


def condition_length(samples: np.ndarray, n: int = CLIP_SAMPLES) -> np.ndarray:
    """Zero-pad at the end or truncate to exactly ``n`` samples."""
    if samples.size >= n:
        return samples[:n]
    return np.concatenate([samples, np.zeros(n - samples.size, dtype=samples.dtype)])


def load_waveform(path, sample_rate_hz: int = SAMPLE_RATE_HZ) -> Waveform:
    path = Path(path)
    with open(path, "rb") as f:
        head = f.read(12)
        if len(head) < 12 or head[:4] != b"RIFF" or head[8:12] != b"WAVE":
            raise WavParseError(f"{path}: not a RIFF/WAVE file")
        f.seek(0)
        try:
            with wave.open(f) as w:
                channels, width, rate = w.getnchannels(), w.getsampwidth(), w.getframerate()
                if channels != 1 or width != 2 or rate != sample_rate_hz:
                    raise UnsupportedFormatError(
                        f"{path}: need PCM16 mono {sample_rate_hz} Hz, got "
                        f"{8 * width}-bit, {channels} channel(s), {rate} Hz"
                    )
                raw = w.readframes(w.getnframes())
        except wave.Error as exc:
            if "unknown format" in str(exc):
                raise UnsupportedFormatError(f"{path}: {exc}") from exc
            raise WavParseError(f"{path}: {exc}") from exc
        except EOFError as exc:
            raise WavParseError(f"{path}: truncated header") from exc
    if len(raw) % 2:
        raw = raw[:-1]
    pcm = np.frombuffer(raw, dtype="<i2")
    samples = condition_length(pcm.astype(np.float64) / 32768.0)
    return Waveform(samples, sample_rate_hz)


def write_wav(path, samples, sample_rate_hz: int = SAMPLE_RATE_HZ) -> None:
    """Write unit-scaled samples as PCM16 mono, clipping to the representable range."""
    pcm = np.clip(np.round(np.asarray(samples, dtype=float) * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(sample_rate_hz)
        w.writeframes(pcm.tobytes())


# -- splits ----------------------------------------------------------------------


@dataclass(frozen=True)
class DatasetSplits:
    root: Path
    preset: str
    seed: int
    train: tuple[tuple[str, int], ...]
    validation: tuple[tuple[str, int], ...]
    test: tuple[tuple[str, int], ...]
    counts: dict = field(default_factory=dict, compare=False)

    def split(self, name: str) -> tuple[tuple[str, int], ...]:
        if name not in SPLIT_NAMES:
            raise ArgumentError(f"unknown split {name!r}")
        return getattr(self, name)

    def path(self, rel: str) -> Path:
        return self.root / rel

    def manifest_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["path", "class_index", "split"])
        for name in SPLIT_NAMES:
            for rel, label in self.split(name):
                writer.writerow([rel, label, name])
        return buf.getvalue()

    def digest(self) -> str:
        return hashlib.sha256(self.manifest_csv().encode()).hexdigest()

    def write_manifest(self, path) -> None:
        Path(path).write_text(self.manifest_csv())


def word_seed(seed: int, word: str) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(seed) & 0xFFFFFFFF, zlib.crc32(word.encode())])


def _list_clips(root: Path, word: str) -> list[str]:
    folder = root / word
    if not folder.is_dir():
        raise DatasetError(f"missing word directory: {folder}")
    return sorted(p.name for p in folder.iterdir() if p.suffix.lower() == ".wav")


def _unknown_quota(total: int, seed: int) -> dict[str, int]:
    base, extra = divmod(total, len(UNKNOWN_WORDS))
    order = np.random.default_rng(word_seed(seed, "<unknown-remainder>")).permutation(len(UNKNOWN_WORDS))
    quota = {w: base for w in UNKNOWN_WORDS}
    for i in order[:extra]:
        quota[UNKNOWN_WORDS[i]] += 1
    return quota


def build_splits(root_dir, preset: str = "small", seed: int = 0, *, quotas: tuple[int, int] | None = None) -> DatasetSplits:
    """Sample disjoint train/validation/test lists with exact per-class quotas.

    ``quotas`` overrides the preset's (per-keyword, unknown-total) counts.
    """
    root = Path(root_dir)
    if quotas is None:
        if preset not in PRESETS:
            raise ArgumentError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        quotas = PRESETS[preset]
    per_keyword, unknown_total = quotas
    if per_keyword < 0 or unknown_total < 0:
        raise ArgumentError("quotas must be non-negative")
    labels = LabelMap()

    per_word = {w: per_keyword for w in KEYWORDS}
    per_word.update(_unknown_quota(unknown_total, seed))

    splits = {name: [] for name in SPLIT_NAMES}
    for word in GSCD_WORDS:
        files = _list_clips(root, word)
        need = 3 * per_word[word]
        if len(files) < need:
            raise DatasetError(f"word {word!r} has {len(files)} clips, needs {need}")
        perm = np.random.default_rng(word_seed(seed, word)).permutation(len(files))
        label = labels.index_of_word(word)
        q = per_word[word]
        for i, name in enumerate(SPLIT_NAMES):
            chosen = sorted(perm[i * q : (i + 1) * q])
            splits[name].extend((f"{word}/{files[j]}", label) for j in chosen)

    counts = {
        name: np.bincount([lab for _, lab in items], minlength=N_CLASSES).tolist()
        for name, items in splits.items()
    }
    return DatasetSplits(
        root=root,
        preset=preset,
        seed=int(seed),
        train=tuple(splits["train"]),
        validation=tuple(splits["validation"]),
        test=tuple(splits["test"]),
        counts=counts,
    )


def read_manifest(path, root) -> DatasetSplits:
    """Rebuild splits from an exported manifest CSV."""
    splits = {name: [] for name in SPLIT_NAMES}
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != ["path", "class_index", "split"]:
            raise DatasetError(f"{path}: unexpected manifest columns {reader.fieldnames}")
        for row in reader:
            if row["split"] not in splits:
                raise DatasetError(f"{path}: unknown split {row['split']!r}")
            splits[row["split"]].append((row["path"], int(row["class_index"])))
    return DatasetSplits(
        root=Path(root), preset="manifest", seed=-1,
        train=tuple(splits["train"]), validation=tuple(splits["validation"]), test=tuple(splits["test"]),
        counts={n: np.bincount([l for _, l in v], minlength=N_CLASSES).tolist() for n, v in splits.items()},
    )
