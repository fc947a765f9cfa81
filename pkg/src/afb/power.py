"""First-order relative power of a filterbank configuration.

Power scales linearly with each of the number of filters, the top center
frequency and the quality factor, so the estimate is their product. Units are
arbitrary; only ratios between configurations carry meaning.
"""

from __future__ import annotations

from dataclasses import dataclass

from .filterbank import FilterbankConfig, validate_config


@dataclass(frozen=True)
class PowerEstimate:
    relative_units: float


def relative_power(config: FilterbankConfig) -> PowerEstimate:
    validate_config(config)
    return PowerEstimate(float(config.n_filters) * float(config.f_max_hz) * float(config.q_filter))


def power_ratio(a: FilterbankConfig, b: FilterbankConfig) -> float:
    return relative_power(a).relative_units / relative_power(b).relative_units


def power_breakdown(a: FilterbankConfig, b: FilterbankConfig) -> dict[str, float]:
    """Per-parameter reduction factors whose product is ``power_ratio(a, b)``."""
    return {
        "n_filters": a.n_filters / b.n_filters,
        "f_max": a.f_max_hz / b.f_max_hz,
        "q": a.q_filter / b.q_filter,
    }
