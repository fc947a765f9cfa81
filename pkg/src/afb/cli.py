"""``afb`` command-line entry point.

Exit status is 0 on success, 2 for configuration or argument problems and 1
for runtime failures (unreadable corpus, diverged training, I/O errors).
"""

from __future__ import annotations

import argparse
import configparser
import csv
import dataclasses
import io
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import classifier, experiments, plots
from .dataset import PRESETS as DATASET_PRESETS
from .dataset import LABELS, build_splits, load_waveform, read_manifest
from .envelope import EnvelopeConfig
from .errors import AfbError, ArgumentError, ConfigError
from .extractor import Normalizer, equalize_gain, extract_spectrogram, normalize, save_spectrograms
from .filterbank import PRESETS as FB_PRESETS
from .filterbank import FilterbankConfig, design_filterbank, measured_q
from .power import power_breakdown, power_ratio, relative_power

log = logging.getLogger("afb")

DATA_ROOT_ENV = "AFB_DATA_ROOT"

# accepted keys per config-file section
CONFIG_KEYS = {
    "filterbank": {"preset", "n_filters", "f_max_hz", "q", "f_min_hz"},
    "envelope": {"window_ms", "hop_ms"},
    "dataset": {"root", "preset", "seed"},
    "train": {"preset", "learning_rate", "momentum", "lr_decay", "epochs", "batch_size", "l2", "precision"},
    "sweep": {"parameter", "values", "trials"},
}


class UsageError(ArgumentError):
    """Bad flag combination or value detected after argparse."""


# -- configuration -----------------------------------------------------------------


def read_config_file(path) -> dict[str, dict[str, str]]:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path) as f:
            parser.read_file(f)
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc.strerror}") from exc
    except configparser.Error as exc:
        raise UsageError(f"{path}: {exc}") from exc
    out = {}
    for section in parser.sections():
        if section not in CONFIG_KEYS:
            raise UsageError(f"{path}: unknown section [{section}]")
        unknown = set(parser[section]) - CONFIG_KEYS[section]
        if unknown:
            raise UsageError(f"{path}: unknown key(s) in [{section}]: {', '.join(sorted(unknown))}")
        out[section] = dict(parser[section])
    return out


def _number(section: str, key: str, text: str, kind=float):
    try:
        return kind(text)
    except ValueError:
        raise UsageError(f"[{section}] {key}: expected {kind.__name__}, got {text!r}") from None


def _pick(cli_value, cfg: dict, section: str, key: str, kind=float, default=None):
    if cli_value is not None:
        return cli_value
    if key in cfg.get(section, {}):
        return _number(section, key, cfg[section][key], kind) if kind is not str else cfg[section][key]
    return default


def filterbank_config(args, cfg) -> FilterbankConfig:
    preset = _pick(getattr(args, "preset", None), cfg, "filterbank", "preset", str, "typical")
    if preset not in FB_PRESETS:
        raise UsageError(f"unknown filterbank preset {preset!r}; choose from {', '.join(FB_PRESETS)}")
    base = FB_PRESETS[preset]
    return FilterbankConfig(
        n_filters=_pick(args.n, cfg, "filterbank", "n_filters", int, base.n_filters),
        f_max_hz=_pick(args.fmax, cfg, "filterbank", "f_max_hz", float, base.f_max_hz),
        q_filter=_pick(args.q, cfg, "filterbank", "q", float, base.q_filter),
        f_min_hz=_pick(args.fmin, cfg, "filterbank", "f_min_hz", float, base.f_min_hz),
    )


def envelope_config(cfg) -> EnvelopeConfig:
    sec = cfg.get("envelope", {})
    return EnvelopeConfig(
        window_ms=_number("envelope", "window_ms", sec["window_ms"]) if "window_ms" in sec else 20.0,
        hop_ms=_number("envelope", "hop_ms", sec["hop_ms"]) if "hop_ms" in sec else 10.0,
    )


def feature_settings(args, cfg) -> experiments.FeatureSettings:
    return experiments.FeatureSettings(envelope_config(cfg), equalize_gain=not getattr(args, "no_equalize", False))


def train_config(args, cfg) -> classifier.TrainConfig:
    preset = _pick(args.train_preset, cfg, "train", "preset", str, "default")
    if preset not in classifier.TRAIN_PRESETS:
        raise UsageError(f"unknown training preset {preset!r}; choose from {', '.join(classifier.TRAIN_PRESETS)}")
    base = classifier.TRAIN_PRESETS[preset]
    fields = {}
    for key, kind in (("learning_rate", float), ("momentum", float), ("lr_decay", float), ("epochs", int),
                      ("batch_size", int), ("l2", float), ("precision", str)):
        cli = getattr(args, key, None)
        value = _pick(cli, cfg, "train", key, kind, None)
        if value is not None:
            fields[key] = value
    return dataclasses.replace(base, **fields)


def dataset_splits(args, cfg):
    if getattr(args, "manifest", None):
        root = _data_root(args, cfg)
        return read_manifest(args.manifest, root)
    root = _data_root(args, cfg)
    preset = _pick(args.dataset, cfg, "dataset", "preset", str, "small")
    if preset not in DATASET_PRESETS:
        raise UsageError(f"unknown dataset preset {preset!r}; choose from {', '.join(DATASET_PRESETS)}")
    seed = _pick(args.seed, cfg, "dataset", "seed", int, 0)
    return build_splits(root, preset, seed)


def _data_root(args, cfg) -> Path:
    root = _pick(args.root, cfg, "dataset", "root", str, None) or os.environ.get(DATA_ROOT_ENV)
    if not root:
        raise UsageError(f"no dataset root: pass --root, set [dataset] root, or export {DATA_ROOT_ENV}")
    return Path(root)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _parse_config_triplet(text: str) -> FilterbankConfig:
    if text in FB_PRESETS:
        return FB_PRESETS[text]
    parts = text.split(",")
    if len(parts) != 3:
        raise UsageError(f"expected a preset name ({', '.join(FB_PRESETS)}) or N,f_max_hz,q; got {text!r}")
    try:
        return FilterbankConfig(int(parts[0]), float(parts[1]), float(parts[2]))
    except ValueError:
        raise UsageError(f"cannot parse filterbank triplet {text!r}") from None


# -- subcommands -------------------------------------------------------------------


def cmd_design(args, cfg) -> int:
    config = filterbank_config(args, cfg)
    design = design_filterbank(config)
    for k, (fc, ch) in enumerate(zip(design.centers_hz, design.channels)):
        if ch.active:
            print(f"{k:3d}  {fc:10.2f} Hz  Q={measured_q(ch, config.sample_rate_hz):.3f}")
        else:
            print(f"{k:3d}  {fc:10.2f} Hz  inactive (above {0.95 * config.nyquist_hz:.0f} Hz)")
    if args.out:
        plots.plot_frequency_response(design, _out_dir(args) / "response.svg")
    return 0


def cmd_power(args, cfg) -> int:
    a = _parse_config_triplet(args.a)
    if args.b is None:
        print(f"relative power: {relative_power(a).relative_units:.6g}")
        return 0
    b = _parse_config_triplet(args.b)
    print(f"power ratio {args.a}/{args.b}: {power_ratio(a, b):.2f}")
    for name, factor in power_breakdown(a, b).items():
        print(f"  {name}: {factor:.2f}x")
    return 0


def cmd_extract(args, cfg) -> int:
    config = filterbank_config(args, cfg)
    env = envelope_config(cfg)
    design = design_filterbank(config)
    out = _out_dir(args)
    for path in args.input:
        spec = extract_spectrogram(design, env, load_waveform(path))
        stem = Path(path).stem
        save_spectrograms(out / f"{stem}.afbs", [spec])
        if args.svg:
            plots.plot_spectrogram(spec.values, out / f"{stem}.svg", centers_hz=spec.channel_centers_hz,
                                   hop_ms=spec.frame_hop_ms, title=stem)
        print(f"{path}: {spec.n_channels}x{spec.n_frames} -> {out / (stem + '.afbs')}")
    return 0


def cmd_splits(args, cfg) -> int:
    splits = dataset_splits(args, cfg)
    out = _out_dir(args)
    splits.write_manifest(out / "manifest.csv")
    for name in ("train", "validation", "test"):
        print(f"{name}: {len(splits.split(name))} examples, per class {splits.counts[name]}")
    print(f"manifest sha256 {splits.digest()}")
    return 0


def _history_csv(history) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["epoch", "learning_rate", "loss", "accuracy"])
    for h in history:
        w.writerow([h.epoch, repr(h.learning_rate), repr(h.loss), repr(h.accuracy)])
    return buf.getvalue()


def cmd_train(args, cfg) -> int:
    config = filterbank_config(args, cfg)
    settings = feature_settings(args, cfg)
    tc = train_config(args, cfg)
    splits = dataset_splits(args, cfg)
    out = _out_dir(args)
    raw = experiments.raw_features(config, splits, settings, args.cache)
    arrays, norm = experiments.prepare_arrays(raw, splits, config, settings)
    model, history = classifier.train(classifier.init_model(tc.seed), arrays["train"], tc)
    classifier.save_checkpoint(model, out / "model.afbm")
    meta = {
        "filterbank": dataclasses.asdict(config),
        "envelope": dataclasses.asdict(settings.envelope),
        "equalize_gain": settings.equalize_gain,
        "normalizer": norm.to_dict(),
        "train": dataclasses.asdict(tc),
    }
    (out / "features.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    (out / "history.csv").write_text(_history_csv(history))
    last = history[-1]
    print(f"trained {tc.epochs} epochs: final loss {last.loss:.4f}, train accuracy {100 * last.accuracy:.2f}%")
    return 0


def cmd_eval(args, cfg) -> int:
    model_dir = Path(args.model)
    try:
        meta = json.loads((model_dir / "features.json").read_text())
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read {model_dir / 'features.json'}: {exc}") from exc
    model = classifier.load_checkpoint(model_dir / "model.afbm")
    config = FilterbankConfig(**meta["filterbank"])
    env = EnvelopeConfig(**meta["envelope"])
    norm = Normalizer.from_dict(meta["normalizer"])
    design = design_filterbank(config)
    splits = dataset_splits(args, cfg)
    items = splits.split(args.split)
    xs = []
    for rel, _ in items:
        s = extract_spectrogram(design, env, load_waveform(splits.path(rel)))
        if meta.get("equalize_gain", False):
            s = equalize_gain(s, design.active_mask)
        xs.append(normalize(s, norm).values)
    result = classifier.evaluate(model, (np.stack(xs), np.array([lab for _, lab in items])))
    print(f"{args.split} accuracy: {100 * result.accuracy:.2f}% on {len(items)} examples")
    if args.out:
        out = _out_dir(args)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["true\\predicted", *LABELS])
        for label, row in zip(LABELS, result.confusion):
            w.writerow([label, *row.tolist()])
        (out / "confusion.csv").write_text(buf.getvalue())
        plots.plot_confusion(result.confusion, out / "confusion.svg", title=f"{args.split} accuracy {100 * result.accuracy:.1f}%")
    return 0


def _sweep_values(args, cfg, parameter):
    text = args.values
    if text is None and "values" in cfg.get("sweep", {}):
        text = cfg["sweep"]["values"]
    if text is None:
        return experiments.SWEEP_VALUES[parameter]
    try:
        values = [float(v) for v in text.replace(" ", "").split(",") if v]
    except ValueError:
        raise UsageError(f"sweep values must be comma-separated numbers, got {text!r}") from None
    return tuple(int(v) for v in values) if parameter == "n_filters" else tuple(values)


def cmd_sweep(args, cfg) -> int:
    base = filterbank_config(args, cfg)
    settings = feature_settings(args, cfg)
    tc = train_config(args, cfg)
    splits = dataset_splits(args, cfg)
    trials = _pick(args.trials, cfg, "sweep", "trials", int, 3)
    params = [_pick(args.param, cfg, "sweep", "parameter", str, None)]
    if params == [None] or params == ["all"]:
        params = list(experiments.SWEEP_VALUES)
    out = _out_dir(args)
    for parameter in params:
        if parameter not in experiments.SWEEP_VALUES:
            raise UsageError(f"unknown sweep parameter {parameter!r}; choose from {', '.join(experiments.SWEEP_VALUES)}")
        spec = experiments.SweepSpec(parameter, _sweep_values(args, cfg, parameter), base, trials, splits.preset, splits.seed)
        result = experiments.run_sweep(spec, splits, train_config=tc, settings=settings,
                                       cache_dir=args.cache or out / "cache", workers=args.workers)
        result.write_csv(out / f"sweep_{parameter}.csv")
        values = [p.value for p in result.points]
        ci = [p.ci for p in result.points]
        plots.plot_sweep(parameter, values, [p.mean for p in result.points], [c[0] for c in ci], [c[1] for c in ci],
                         out / f"sweep_{parameter}.svg")
        for p in result.points:
            lo, hi = p.ci
            flag = "" if p.complete else f"  ({p.n_failed} failed)"
            print(f"{parameter}={p.value:g}: {100 * p.mean:.2f}% [{100 * lo:.2f}, {100 * hi:.2f}]{flag}")
    return 0


def cmd_compare(args, cfg) -> int:
    a, b = _parse_config_triplet(args.a), _parse_config_triplet(args.b)
    settings = feature_settings(args, cfg)
    tc = train_config(args, cfg)
    splits = dataset_splits(args, cfg)
    out = _out_dir(args)
    result = experiments.compare_configs(a, b, splits, args.trials, base_seed=splits.seed, train_config=tc,
                                         settings=settings, cache_dir=args.cache or out / "cache", workers=args.workers)
    text = result.to_text(args.a, args.b)
    (out / "comparison.txt").write_text(text)
    (out / "comparison.csv").write_text(result.to_csv(args.a, args.b))
    plots.plot_comparison([args.a, args.b], [result.a.relative_power, result.b.relative_power],
                          [result.a.mean, result.b.mean], [result.a.ci[0], result.b.ci[0]],
                          [result.a.ci[1], result.b.ci[1]], out / "comparison.svg")
    sys.stdout.write(text)
    return 0


def cmd_plot(args, cfg) -> int:
    out = _out_dir(args)
    try:
        groups = experiments.read_results_csv(args.csv)
    except OSError as exc:
        raise UsageError(f"cannot read {args.csv}: {exc.strerror}") from exc
    for parameter, rows in groups.items():
        values, means, lows, highs = plots.sweep_series(rows)
        markers = None
        if parameter in experiments.CONFIG_FIELD:
            field = experiments.CONFIG_FIELD[parameter]
            markers = {"typical": getattr(FB_PRESETS["typical"], field), "tiny": getattr(FB_PRESETS["tiny"], field)}
        path = plots.plot_sweep(parameter, values, means, lows, highs, out / f"sweep_{parameter}.svg", markers=markers)
        print(path)
    return 0


def cmd_synth(args, cfg) -> int:
    from .synth import desk_corpus_counts, make_corpus

    per_keyword, unknown = DATASET_PRESETS[args.dataset or "desk"]
    root = args.root or os.environ.get(DATA_ROOT_ENV)
    if not root:
        raise UsageError(f"no output root: pass --root or export {DATA_ROOT_ENV}")
    root = Path(root)
    counts = desk_corpus_counts(per_keyword, unknown)
    make_corpus(root, counts, seed=args.seed if args.seed is not None else 0)
    print(f"wrote {sum(counts.values())} clips under {root}")
    return 0


# -- parser ------------------------------------------------------------------------


def _add_filterbank_flags(p):
    g = p.add_argument_group("filterbank")
    g.add_argument("--preset", choices=sorted(FB_PRESETS), help="named filterbank (default: typical)")
    g.add_argument("--n", type=int, help="number of filters (overrides preset)")
    g.add_argument("--fmax", type=float, help="center of the highest filter in Hz")
    g.add_argument("--q", type=float, help="quality factor shared by all filters")
    g.add_argument("--fmin", type=float, help="center of the lowest filter in Hz (default 100)")


def _add_dataset_flags(p):
    g = p.add_argument_group("dataset")
    g.add_argument("--root", help=f"corpus root with one folder per word (default: ${DATA_ROOT_ENV})")
    g.add_argument("--dataset", choices=sorted(DATASET_PRESETS), help="split sizes (default: small)")
    g.add_argument("--seed", type=int, help="split sampling seed (default 0)")
    g.add_argument("--manifest", help="reuse an exported manifest CSV instead of sampling splits")


def _add_train_flags(p):
    g = p.add_argument_group("training")
    g.add_argument("--train-preset", choices=sorted(classifier.TRAIN_PRESETS), help="hyperparameter preset (default: default)")
    g.add_argument("--learning-rate", dest="learning_rate", type=float, help="initial learning rate")
    g.add_argument("--epochs", type=int, help="number of epochs")
    g.add_argument("--batch-size", dest="batch_size", type=int, help="minibatch size")
    g.add_argument("--no-equalize", action="store_true", help="skip per-clip gain equalization of features")
    g.add_argument("--cache", help="feature cache directory (default: <out>/cache for sweeps)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="afb", description="Analog filterbank feature-extractor laboratory.")
    parser.add_argument("--config", help="INI run configuration; command-line flags take precedence")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("design", help="print center frequencies and measured Q of each channel")
    _add_filterbank_flags(p)
    p.add_argument("--out", help="also write response.svg into this directory")
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("power", help="relative power of one configuration or the ratio of two")
    p.add_argument("--a", required=True, help="preset name or N,f_max_hz,q")
    p.add_argument("--b", help="second configuration; prints the ratio a/b")
    p.set_defaults(func=cmd_power)

    p = sub.add_parser("extract", help="turn WAV clips into spectrogram files")
    _add_filterbank_flags(p)
    p.add_argument("input", nargs="+", help="PCM16 mono 16 kHz WAV files")
    p.add_argument("--out", required=True, help="output directory for .afbs files")
    p.add_argument("--svg", action="store_true", help="also render each spectrogram as SVG")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("splits", help="sample train/validation/test lists and export the manifest")
    _add_dataset_flags(p)
    p.add_argument("--out", required=True, help="directory for manifest.csv")
    p.set_defaults(func=cmd_splits)

    p = sub.add_parser("train", help="extract features and train one classifier")
    _add_filterbank_flags(p)
    _add_dataset_flags(p)
    _add_train_flags(p)
    p.add_argument("--out", required=True, help="directory for model.afbm, features.json, history.csv")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a trained model on one split")
    _add_dataset_flags(p)
    p.add_argument("--model", required=True, help="directory written by 'afb train'")
    p.add_argument("--split", default="test", choices=("train", "validation", "test"), help="split to score (default test)")
    p.add_argument("--out", help="directory for confusion.csv and confusion.svg")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="sweep one filterbank parameter with repeated trials")
    _add_filterbank_flags(p)
    _add_dataset_flags(p)
    _add_train_flags(p)
    p.add_argument("--param", choices=(*experiments.SWEEP_VALUES, "all"), help="parameter to sweep (default all)")
    p.add_argument("--values", help="comma-separated values overriding the standard list (f_max in Hz)")
    p.add_argument("--trials", type=int, help="trials per point (default 3)")
    p.add_argument("--workers", type=int, default=1, help="parallel worker processes (results do not depend on it)")
    p.add_argument("--out", required=True, help="directory for sweep_<param>.csv/.svg")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compare", help="compare two filterbanks in power and accuracy")
    _add_dataset_flags(p)
    _add_train_flags(p)
    p.add_argument("--a", default="typical", help="preset name or N,f_max_hz,q (default typical)")
    p.add_argument("--b", default="tiny", help="preset name or N,f_max_hz,q (default tiny)")
    p.add_argument("--trials", type=int, default=5, help="trials per configuration (default 5)")
    p.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    p.add_argument("--out", required=True, help="directory for comparison.txt/.csv/.svg")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("plot", help="render sweep CSV results as SVG line charts")
    p.add_argument("csv", help="results CSV written by 'afb sweep'")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("synth", help="write a synthetic corpus in the Speech Commands layout")
    p.add_argument("--root", help=f"output corpus root (default: ${DATA_ROOT_ENV})")
    p.add_argument("--dataset", choices=sorted(DATASET_PRESETS), help="size the corpus for this split preset (default desk)")
    p.add_argument("--seed", type=int, help="synthesis seed (default 0)")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        cfg = read_config_file(args.config) if args.config else {}
        return args.func(args, cfg)
    except (ConfigError, ArgumentError) as exc:
        print(f"afb: error: {exc}", file=sys.stderr)
        return 2
    except (AfbError, OSError) as exc:
        print(f"afb: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
