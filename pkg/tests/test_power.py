import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from afb.errors import ConfigError
from afb.filterbank import TINY, TYPICAL, FilterbankConfig
from afb.power import power_breakdown, power_ratio, relative_power


def test_typical_relative_power():
    assert relative_power(TYPICAL).relative_units == 1_344_000


def test_unit_config():
    assert relative_power(FilterbankConfig(1, 1.0, 1.0, f_min_hz=1.0)).relative_units == 1.0


def test_typical_over_tiny():
    assert power_ratio(TYPICAL, TINY) == pytest.approx(33.6, abs=1e-9)
    b = power_breakdown(TYPICAL, TINY)
    assert b == pytest.approx({"n_filters": 2.4, "f_max": 3.5, "q": 4.0}, abs=1e-12)


def test_doubling_filters_doubles_power():
    assert relative_power(FilterbankConfig(48, 7000.0, 8.0)).relative_units == 2 * relative_power(TYPICAL).relative_units


def test_identity_and_reciprocity():
    assert power_ratio(TYPICAL, TYPICAL) == 1.0
    assert power_ratio(TYPICAL, TINY) * power_ratio(TINY, TYPICAL) == pytest.approx(1.0, rel=1e-15)


def test_invalid_config_rejected():
    cfg = FilterbankConfig(4, 1000.0, 2.0)
    object.__setattr__(cfg, "n_filters", 0)  # bypass construction-time validation
    with pytest.raises(ConfigError, match="n_filters"):
        relative_power(cfg)


configs = st.builds(FilterbankConfig, st.integers(1, 64), st.floats(100.0, 20000.0), st.floats(0.2, 60.0))


@given(a=configs, b=configs, c=configs)
@settings(max_examples=200)
def test_ratios_are_multiplicative(a, b, c):
    assert power_ratio(a, c) == pytest.approx(power_ratio(a, b) * power_ratio(b, c), rel=1e-12)


@given(cfg=configs, alpha=st.floats(1.01, 3.0))
@settings(max_examples=200)
def test_single_parameter_scaling(cfg, alpha):
    scaled = FilterbankConfig(cfg.n_filters, cfg.f_max_hz, cfg.q_filter * alpha)
    assert power_ratio(scaled, cfg) == pytest.approx(alpha, rel=1e-12)
    scaled = FilterbankConfig(cfg.n_filters, cfg.f_max_hz * alpha, cfg.q_filter)
    assert power_ratio(scaled, cfg) == pytest.approx(alpha, rel=1e-12)
