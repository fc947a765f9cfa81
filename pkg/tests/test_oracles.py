"""Recompute the frozen reference constants used elsewhere in the suite with mpmath.

The other test modules hard-code these numbers so they run fast; this module
shows where each one comes from and fails if any of them drifts.
"""

import mpmath as mp
import pytest

from test_classifier import CI_90_91_92, LN11, T_975_2
from test_filterbank import ANALOG_EDGES_Q2, SECOND_CENTER_TYPICAL

mp.mp.dps = 40


def close(frozen, exact, rel=1e-15):
    return abs(mp.mpf(frozen) - exact) <= rel * abs(exact)


def test_second_typical_center():
    assert close(SECOND_CENTER_TYPICAL, 100 * mp.power(70, mp.mpf(1) / 23))


def test_analog_half_power_edges():
    fc, q = mp.mpf(1000), mp.mpf(2)
    root = mp.sqrt(1 + 1 / (4 * q**2))
    assert close(ANALOG_EDGES_Q2[0], fc * (root - 1 / (2 * q)))
    assert close(ANALOG_EDGES_Q2[1], fc * (root + 1 / (2 * q)))


def test_discrete_half_power_edges():
    fs, fc, q = mp.mpf(16000), mp.mpf(1000), mp.mpf(2)
    w0 = 2 * mp.pi * fc / fs
    alpha = mp.tan(2 * mp.pi * (fc / q) / fs / 2)

    def excess(f):
        z = mp.exp(-1j * 2 * mp.pi * f / fs)
        h = alpha * (1 - z**2) / ((1 + alpha) - 2 * mp.cos(w0) * z + (1 - alpha) * z**2)
        return abs(h) ** 2 - mp.mpf(1) / 2

    lo, hi = mp.findroot(excess, 780), mp.findroot(excess, 1280)
    assert lo == pytest.approx(779.1995494837467, rel=1e-13)
    assert hi == pytest.approx(1279.1995494837467, rel=1e-13)


def test_inactive_channels_at_20k():
    # a channel is inactive when its center reaches 0.95 of Nyquist (7600 Hz)
    inactive = [k for k in range(24) if 100 * mp.power(200, mp.mpf(k) / 23) >= 7600]
    assert inactive == [19, 20, 21, 22, 23]


def test_student_t_quantile_and_interval():
    nu = 2

    def cdf(t):
        return 1 - mp.betainc(mp.mpf(nu) / 2, mp.mpf(1) / 2, 0, nu / (nu + t**2), regularized=True) / 2

    t = mp.findroot(lambda t: cdf(t) - mp.mpf("0.975"), 4)
    assert close(T_975_2, t)
    half = t * 1 / mp.sqrt(3)  # sample std of {90, 91, 92} is 1
    assert close(CI_90_91_92[0], 91 - half) and close(CI_90_91_92[1], 91 + half)


def test_uniform_cross_entropy():
    assert close(LN11, mp.log(11))
