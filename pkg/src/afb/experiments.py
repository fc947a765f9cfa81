"""One-parameter-at-a-time sweeps and two-configuration comparisons.

Every sweep point builds its own filterbank, extracts features for the
train and test splits (cached on disk when a cache directory is given), then
trains and evaluates the classifier once per trial. Trial seeds are hashed
from (base seed, point, trial), so the worker count never changes results.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import classifier
from .dataset import DatasetSplits, load_waveform
from .envelope import EnvelopeConfig
from .errors import ArgumentError, TrainingDivergedError
from .extractor import (
    EXTRACTOR_VERSION,
    equalize_gain,
    extract_spectrogram,
    fit_normalizer,
    load_spectrograms,
    normalize,
    save_spectrograms,
)
from .filterbank import TYPICAL, FilterbankConfig, design_filterbank
from .power import power_ratio, relative_power

log = logging.getLogger(__name__)

SWEEP_VALUES = {
    "n_filters": (1, 2, 4, 6, 8, 10, 12, 14, 16, 20, 24, 28, 32, 48, 64),
    "f_max": tuple(1000.0 * v for v in (0.25, 0.5, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 12, 16, 20)),
    "q": (0.2, 0.4, 0.6, 0.8, 1, 2, 3, 4, 6, 8, 10, 15, 20, 25, 30, 40, 60),
}
# sweep parameter name -> FilterbankConfig field
CONFIG_FIELD = {"n_filters": "n_filters", "f_max": "f_max_hz", "q": "q_filter"}

CSV_COLUMNS = ("sweep_param", "point_value", "trial", "seed", "accuracy", "relative_power", "ci_low", "ci_high")
FEATURE_SPLITS = ("train", "test")


@dataclass(frozen=True)
class SweepSpec:
    parameter: str
    values: tuple
    base: FilterbankConfig = TYPICAL
    trials: int = 3
    preset: str = "small"
    base_seed: int = 0

    def __post_init__(self):
        if self.parameter not in CONFIG_FIELD:
            raise ArgumentError(f"sweep parameter must be one of {sorted(CONFIG_FIELD)}, got {self.parameter!r}")
        if not self.values:
            raise ArgumentError("sweep needs at least one value")
        if any(not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0) for v in self.values):
            raise ArgumentError(f"sweep values must be finite and positive: {self.values}")
        if self.trials < 1:
            raise ArgumentError(f"trials must be >= 1, got {self.trials}")

    def config_at(self, value) -> FilterbankConfig:
        if self.parameter == "n_filters":
            value = int(value)
        return replace(self.base, **{CONFIG_FIELD[self.parameter]: value})

    def configs(self) -> list[FilterbankConfig]:
        return [self.config_at(v) for v in self.values]


def default_sweeps(base: FilterbankConfig = TYPICAL, trials: int = 3, preset: str = "small", base_seed: int = 0) -> list[SweepSpec]:
    return [SweepSpec(p, SWEEP_VALUES[p], base, trials, preset, base_seed) for p in SWEEP_VALUES]


def trial_seed(base_seed: int, point, trial: int) -> int:
    """32-bit seed from a hash of (base seed, point label, trial)."""
    digest = hashlib.sha256(f"{int(base_seed)}:{point}:{int(trial)}".encode()).digest()
    return int.from_bytes(digest[:4], "little")


# -- features ----------------------------------------------------------------------


@dataclass(frozen=True)
class FeatureSettings:
    envelope: EnvelopeConfig = field(default_factory=EnvelopeConfig)
    equalize_gain: bool = True


def feature_cache_key(config: FilterbankConfig, settings: FeatureSettings, manifest_digest: str) -> str:
    blob = json.dumps(
        {"filterbank": asdict(config), "envelope": asdict(settings.envelope), "manifest": manifest_digest, "version": EXTRACTOR_VERSION},
        sort_keys=True,
    )
    return hashlib.sha256(blob.encode()).hexdigest()[:24]


def _extract_paths(root: str, rels: list[str], config: FilterbankConfig, envelope: EnvelopeConfig):
    design = design_filterbank(config)
    return [extract_spectrogram(design, envelope, load_waveform(Path(root) / rel)) for rel in rels]


def raw_features(config: FilterbankConfig, dataset: DatasetSplits, settings: FeatureSettings = FeatureSettings(), cache_dir=None) -> dict:
    """Un-normalized spectrograms for the train and test splits, via the cache if possible."""
    cache = None
    if cache_dir is not None:
        cache = Path(cache_dir) / feature_cache_key(config, settings, dataset.digest())
    out = {}
    for split in FEATURE_SPLITS:
        rels = [rel for rel, _ in dataset.split(split)]
        path = cache / f"{split}.afbs" if cache else None
        if path is not None and path.exists():
            specs = load_spectrograms(path)
            if len(specs) == len(rels):
                out[split] = specs
                continue
            log.warning("feature cache %s holds %d records, expected %d; recomputing", path, len(specs), len(rels))
        specs = _extract_paths(str(dataset.root), rels, config, settings.envelope)
        if path is not None:
            path.parent.mkdir(parents=True, exist_ok=True)
            tmp = path.with_suffix(".tmp")
            save_spectrograms(tmp, specs)
            tmp.replace(path)
        out[split] = specs
    return out


def prepare_arrays(raw: dict, dataset: DatasetSplits, config: FilterbankConfig, settings: FeatureSettings = FeatureSettings()):
    """Gain-equalize (optionally), standardize with train statistics, stack to arrays."""
    mask = design_filterbank(config).active_mask
    prepared = {}
    for split, specs in raw.items():
        prepared[split] = [equalize_gain(s, mask) for s in specs] if settings.equalize_gain else list(specs)
    norm = fit_normalizer(prepared["train"])
    arrays = {}
    for split, specs in prepared.items():
        x = np.stack([normalize(s, norm).values for s in specs]).astype(np.float32)
        y = np.array([label for _, label in dataset.split(split)], dtype=int)
        arrays[split] = (x, y)
    return arrays, norm


# -- trials ------------------------------------------------------------------------


@dataclass(frozen=True)
class TrialRecord:
    point_index: int
    point_value: float
    trial: int
    seed: int
    accuracy: float | None
    error: str | None = None


def _run_trial(job):
    point_index, value, trial, seed, arrays, train_config = job
    try:
        model, _ = classifier.train(classifier.init_model(seed), arrays["train"], replace(train_config, seed=seed))
        acc = classifier.evaluate(model, arrays["test"]).accuracy
        return TrialRecord(point_index, value, trial, seed, acc)
    except TrainingDivergedError as exc:
        return TrialRecord(point_index, value, trial, seed, None, str(exc))


def _map(fn, jobs, workers: int):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def _extract_job(job):
    config, dataset, settings, cache_dir = job
    return raw_features(config, dataset, settings, cache_dir)


# -- results -----------------------------------------------------------------------


@dataclass
class PointResult:
    value: float
    config: FilterbankConfig
    relative_power: float
    records: list[TrialRecord]

    @property
    def accuracies(self) -> list[float]:
        return [r.accuracy for r in self.records if r.accuracy is not None]

    @property
    def n_failed(self) -> int:
        return sum(r.accuracy is None for r in self.records)

    @property
    def complete(self) -> bool:
        """False when any trial failed, so the interval rests on fewer trials than requested."""
        return self.n_failed == 0

    @property
    def mean(self) -> float:
        acc = self.accuracies
        return float(np.mean(acc)) if acc else float("nan")

    @property
    def ci(self) -> tuple[float, float]:
        acc = self.accuracies
        if len(acc) < 2:
            return float("nan"), float("nan")
        return classifier.confidence_interval(acc)


def _fmt(v) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    return repr(float(v)) if isinstance(v, float) else str(v)


@dataclass
class SweepResult:
    spec: SweepSpec
    points: list[PointResult]

    @property
    def records(self) -> list[TrialRecord]:
        return [r for p in self.points for r in p.records]

    def point(self, value) -> PointResult:
        for p in self.points:
            if p.value == value:
                return p
        raise KeyError(value)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for p in self.points:
            lo, hi = p.ci
            for r in p.records:
                w.writerow([self.spec.parameter, _fmt(float(p.value)), r.trial, r.seed, _fmt(r.accuracy), _fmt(p.relative_power), _fmt(lo), _fmt(hi)])
        return buf.getvalue()

    def write_csv(self, path) -> None:
        Path(path).write_text(self.to_csv())


def read_results_csv(path) -> dict[str, list[dict]]:
    """Rows of a results CSV grouped by sweep parameter, values parsed to floats."""
    groups: dict[str, list[dict]] = {}
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ArgumentError(f"{path}: expected columns {','.join(CSV_COLUMNS)}")
        for row in reader:
            parsed = {k: (float(v) if v != "" else float("nan")) for k, v in row.items() if k != "sweep_param"}
            groups.setdefault(row["sweep_param"], []).append(parsed)
    return groups


def run_sweep(
    spec: SweepSpec,
    dataset: DatasetSplits,
    *,
    train_config: classifier.TrainConfig = classifier.TRAIN_PRESETS["default"],
    settings: FeatureSettings = FeatureSettings(),
    cache_dir=None,
    workers: int = 1,
) -> SweepResult:
    configs = spec.configs()
    log.info("sweep %s: %d points x %d trials", spec.parameter, len(configs), spec.trials)
    raws = _map(_extract_job, [(c, dataset, settings, cache_dir) for c in configs], workers)
    jobs = []
    for i, (value, config, raw) in enumerate(zip(spec.values, configs, raws)):
        arrays, _ = prepare_arrays(raw, dataset, config, settings)
        for t in range(spec.trials):
            jobs.append((i, value, t, trial_seed(spec.base_seed, f"{spec.parameter}/{i}", t), arrays, train_config))
    records = _map(_run_trial, jobs, workers)
    for r in records:
        if r.accuracy is None:
            log.warning("sweep %s point %s trial %d failed: %s", spec.parameter, r.point_value, r.trial, r.error)
    points = [
        PointResult(value, config, relative_power(config).relative_units, [r for r in records if r.point_index == i])
        for i, (value, config) in enumerate(zip(spec.values, configs))
    ]
    return SweepResult(spec, points)


# -- comparison --------------------------------------------------------------------


@dataclass
class ComparisonResult:
    config_a: FilterbankConfig
    config_b: FilterbankConfig
    power_ratio: float
    a: PointResult
    b: PointResult

    @property
    def delta(self) -> float:
        """Mean accuracy of A minus mean accuracy of B."""
        return self.a.mean - self.b.mean

    def to_text(self, name_a: str = "A", name_b: str = "B") -> str:
        lines = []
        for name, p in ((name_a, self.a), (name_b, self.b)):
            c = p.config
            lo, hi = p.ci
            lines.append(
                f"{name}: N={c.n_filters} f_max={c.f_max_hz:g} Hz Q={c.q_filter:g}  relative power {p.relative_power:.6g}  "
                f"accuracy {100 * p.mean:.2f}% (95% CI {100 * lo:.2f}..{100 * hi:.2f}, {len(p.accuracies)}/{len(p.records)} trials)"
            )
        lines.append(f"power ratio {name_a}/{name_b}: {self.power_ratio:.2f}")
        lines.append(f"accuracy delta {name_a}-{name_b}: {100 * self.delta:+.2f} points")
        return "\n".join(lines) + "\n"

    def to_csv(self, name_a: str = "A", name_b: str = "B") -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["config", "n_filters", "f_max_hz", "q", "relative_power", "mean_accuracy", "ci_low", "ci_high", "trials_ok", "trials"])
        for name, p in ((name_a, self.a), (name_b, self.b)):
            c = p.config
            lo, hi = p.ci
            w.writerow([name, c.n_filters, _fmt(float(c.f_max_hz)), _fmt(float(c.q_filter)), _fmt(p.relative_power),
                        _fmt(p.mean), _fmt(lo), _fmt(hi), len(p.accuracies), len(p.records)])
        return buf.getvalue()


def compare_configs(
    a: FilterbankConfig,
    b: FilterbankConfig,
    dataset: DatasetSplits,
    trials: int = 5,
    *,
    base_seed: int = 0,
    train_config: classifier.TrainConfig = classifier.TRAIN_PRESETS["default"],
    settings: FeatureSettings = FeatureSettings(),
    cache_dir=None,
    workers: int = 1,
) -> ComparisonResult:
    """Train and test both configurations ``trials`` times; trial t uses the same seed for A and B."""
    if trials < 1:
        raise ArgumentError(f"trials must be >= 1, got {trials}")
    raws = _map(_extract_job, [(c, dataset, settings, cache_dir) for c in (a, b)], workers)
    jobs = []
    for i, (config, raw) in enumerate(zip((a, b), raws)):
        arrays, _ = prepare_arrays(raw, dataset, config, settings)
        for t in range(trials):
            jobs.append((i, float(i), t, trial_seed(base_seed, "compare", t), arrays, train_config))
    records = _map(_run_trial, jobs, workers)
    points = [
        PointResult(float(i), c, relative_power(c).relative_units, [r for r in records if r.point_index == i])
        for i, c in enumerate((a, b))
    ]
    return ComparisonResult(a, b, power_ratio(a, b), points[0], points[1])
