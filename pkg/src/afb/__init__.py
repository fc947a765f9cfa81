"""Simulation laboratory for analog filterbank keyword-spotting front ends.

Modules: ``filterbank`` (biquad bank design), ``envelope`` (short-time power),
``extractor`` (log-power spectrograms and their container), ``power``
(first-order power model), ``dataset`` (corpus ingestion and splits),
``classifier`` (numpy CNN and trainer), ``experiments`` (sweeps and
comparisons), ``plots`` and ``cli``.
"""

from .envelope import EnvelopeConfig
from .filterbank import TINY, TYPICAL, FilterbankConfig, design_filterbank
from .power import power_ratio, relative_power

__version__ = "0.1.0"

__all__ = [
    "EnvelopeConfig",
    "FilterbankConfig",
    "TINY",
    "TYPICAL",
    "design_filterbank",
    "power_ratio",
    "relative_power",
]
