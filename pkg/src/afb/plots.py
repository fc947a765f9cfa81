"""SVG charts: sweep curves, spectrogram and confusion heatmaps, filter responses.

Figures are built with the object-oriented matplotlib API (no pyplot state)
and saved with a fixed hash salt and no date stamp, so reruns produce
byte-identical files.
"""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib
import numpy as np
from matplotlib.backends.backend_svg import FigureCanvasSVG
from matplotlib.figure import Figure

from .dataset import LABELS
from .filterbank import FilterbankDesign, frequency_response

LOG_X_PARAMS = {"f_max", "q"}
AXIS_LABELS = {
    "n_filters": "number of filters",
    "f_max": "highest center frequency (Hz)",
    "q": "filter quality factor Q",
}


def _save(fig: Figure, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    FigureCanvasSVG(fig)
    with matplotlib.rc_context({"svg.hashsalt": "afb", "svg.fonttype": "path"}):
        fig.savefig(path, format="svg", metadata={"Date": None})
    return path


def sweep_series(rows: list[dict]):
    """Collapse per-trial CSV rows into (values, means, ci_low, ci_high), ordered by value."""
    by_value: dict[float, list[dict]] = {}
    for row in rows:
        by_value.setdefault(row["point_value"], []).append(row)
    values = sorted(by_value)
    means, lows, highs = [], [], []
    for v in values:
        acc = [r["accuracy"] for r in by_value[v] if not math.isnan(r["accuracy"])]
        means.append(float(np.mean(acc)) if acc else float("nan"))
        lows.append(by_value[v][0]["ci_low"])
        highs.append(by_value[v][0]["ci_high"])
    return np.array(values), np.array(means), np.array(lows), np.array(highs)


def plot_sweep(parameter: str, values, means, ci_low, ci_high, path, *, markers: dict[str, float] | None = None) -> Path:
    """Accuracy (percent) against one swept parameter with a shaded confidence band.

    ``markers`` maps a legend label to an x position drawn as a vertical line,
    e.g. the typical and tiny settings.
    """
    fig = Figure(figsize=(6, 4))
    ax = fig.add_subplot()
    x = np.asarray(values, dtype=float)
    ax.plot(x, 100 * np.asarray(means), "o-", color="C0", label="mean accuracy")
    lo, hi = np.asarray(ci_low, dtype=float), np.asarray(ci_high, dtype=float)
    ok = np.isfinite(lo) & np.isfinite(hi)
    if ok.any():
        ax.fill_between(x[ok], 100 * lo[ok], 100 * hi[ok], color="C0", alpha=0.2, label="95% CI")
    for (label, xv), color in zip((markers or {}).items(), ("tab:red", "tab:green", "tab:gray")):
        ax.axvline(xv, color=color, linestyle="--", label=label)
    if parameter in LOG_X_PARAMS:
        ax.set_xscale("log")
    ax.set_xlabel(AXIS_LABELS.get(parameter, parameter))
    ax.set_ylabel("test accuracy (%)")
    ax.set_ylim(0, 100)
    ax.grid(True, alpha=0.3)
    ax.legend(loc="lower right")
    fig.tight_layout()
    return _save(fig, path)


def plot_spectrogram(values, path, *, centers_hz=None, hop_ms: float = 10.0, title: str = "") -> Path:
    v = np.asarray(values, dtype=float)
    fig = Figure(figsize=(6, 3.5))
    ax = fig.add_subplot()
    extent = (0, v.shape[1] * hop_ms, -0.5, v.shape[0] - 0.5)
    im = ax.imshow(v, origin="lower", aspect="auto", extent=extent, cmap="viridis", interpolation="nearest")
    fig.colorbar(im, ax=ax, label="log power")
    ax.set_xlabel("time (ms)")
    ax.set_ylabel("channel")
    if centers_hz is not None and len(centers_hz):
        ticks = np.unique(np.linspace(0, len(centers_hz) - 1, min(6, len(centers_hz))).round().astype(int))
        ax.set_yticks(ticks, [f"{centers_hz[t]:.0f} Hz" for t in ticks])
    if title:
        ax.set_title(title)
    fig.tight_layout()
    return _save(fig, path)


def plot_confusion(confusion, path, *, labels=LABELS, title: str = "") -> Path:
    c = np.asarray(confusion)
    fig = Figure(figsize=(6, 5.5))
    ax = fig.add_subplot()
    im = ax.imshow(c, cmap="Blues", interpolation="nearest")
    fig.colorbar(im, ax=ax, label="examples")
    ax.set_xticks(range(len(labels)), labels, rotation=60, ha="right")
    ax.set_yticks(range(len(labels)), labels)
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    threshold = c.max() / 2 if c.size else 0
    for i in range(c.shape[0]):
        for j in range(c.shape[1]):
            if c[i, j]:
                ax.text(j, i, str(c[i, j]), ha="center", va="center", fontsize=7,
                        color="white" if c[i, j] > threshold else "black")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    return _save(fig, path)


def plot_frequency_response(design: FilterbankDesign, path, n_points: int = 2048) -> Path:
    fs = design.config.sample_rate_hz
    f = np.geomspace(10.0, fs / 2, n_points)
    fig = Figure(figsize=(6, 3.5))
    ax = fig.add_subplot()
    for ch in design.channels:
        if ch.active:
            mag = np.abs(frequency_response(ch, f, fs))
            ax.plot(f, 20 * np.log10(np.maximum(mag, 1e-6)), linewidth=0.8)
    ax.set_xscale("log")
    ax.set_ylim(-40, 3)
    ax.set_xlabel("frequency (Hz)")
    ax.set_ylabel("gain (dB)")
    c = design.config
    ax.set_title(f"N={c.n_filters}, f_max={c.f_max_hz:g} Hz, Q={c.q_filter:g}")
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    return _save(fig, path)


def plot_comparison(names, relative_powers, means, ci_low, ci_high, path) -> Path:
    """Side-by-side bars of relative power (log scale) and accuracy with CI whiskers."""
    fig = Figure(figsize=(7, 3.5))
    ax_p, ax_a = fig.subplots(1, 2)
    x = np.arange(len(names))
    ax_p.bar(x, relative_powers, color=["tab:red", "tab:green"][: len(names)])
    ax_p.set_yscale("log")
    ax_p.set_xticks(x, names)
    ax_p.set_ylabel("relative power")
    m = 100 * np.asarray(means, dtype=float)
    err = np.vstack([m - 100 * np.asarray(ci_low, dtype=float), 100 * np.asarray(ci_high, dtype=float) - m])
    ax_a.bar(x, m, yerr=np.nan_to_num(err), capsize=6, color=["tab:red", "tab:green"][: len(names)])
    ax_a.set_xticks(x, names)
    ax_a.set_ylim(0, 100)
    ax_a.set_ylabel("test accuracy (%)")
    fig.tight_layout()
    return _save(fig, path)
