import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import least_squares

from qpolscope.analysis import (
    DIP_SLOPE_FACTOR,
    FitError,
    UndefinedSNRError,
    detect_dips,
    fit_gaussian_dip,
    fit_sinusoid,
    fit_sinusoid_free_period,
    gaussian_dip,
    max_sensitivity,
    metrics_table,
    normalized_contrast,
    sinusoid_dynamic_range,
    sinusoid_max_sensitivity,
    snr,
)
from qpolscope.analysis import DipFit
from qpolscope.scan import SweepTable

TRUE = (30.0, -28.0, 20.0, 21.0)
X = np.linspace(-40.0, 80.0, 50)


def pts(x, y):
    return np.column_stack([x, y])


def test_noiseless_dip_recovery():
    fit = fit_gaussian_dip(pts(X, gaussian_dip(X, *TRUE)))
    assert np.allclose(fit.params, TRUE, rtol=1e-6)
    assert fit.converged and fit.residual_std_pct < 1e-6


def test_noisy_dip_recovery_matches_scipy():
    for seed in range(20):
        rng = np.random.default_rng(seed)
        y = gaussian_dip(X, *TRUE)
        y = y * (1 + 0.03 * rng.standard_normal(X.size))
        fit = fit_gaussian_dip(pts(X, y))
        assert np.allclose(fit.params, TRUE, rtol=0.05)
        ref = least_squares(lambda p: gaussian_dip(X, *p) - y, x0=[25, -20, 15, 15]).x
        assert np.allclose(fit.params, ref, rtol=1e-5)


def test_fit_is_stationary():
    rng = np.random.default_rng(1)
    y = gaussian_dip(X, *TRUE) + rng.normal(0, 1.0, X.size)
    fit = fit_gaussian_dip(pts(X, y))

    def sse(p):
        r = gaussian_dip(X, *p) - y
        return float(r @ r)

    p = fit.params
    for k in range(4):
        h = 1e-5 * max(abs(p[k]), 1.0)
        e = np.zeros(4)
        e[k] = h
        grad = (sse(p + e) - sse(p - e)) / (2 * h)
        # dimensionless: relative change of the cost per relative parameter step
        assert abs(grad) * max(abs(p[k]), 1.0) < 1e-5 * sse(p)


def test_degenerate_data():
    with pytest.raises(FitError):
        fit_gaussian_dip(pts(X, np.full(X.size, 3.0)))
    with pytest.raises(FitError):
        fit_gaussian_dip(pts(X[:4], gaussian_dip(X[:4], *TRUE)))


def test_sinusoid_examples():
    th = np.arange(0, 181, 5.0)
    f = fit_sinusoid(pts(th, np.cos(np.radians(th)) ** 2))
    assert f.c0 == pytest.approx(0.5, abs=1e-9)
    assert f.c1 == pytest.approx(0.5, abs=1e-9)
    assert min(f.theta0_deg, 180 - f.theta0_deg) == pytest.approx(0.0, abs=1e-9)
    assert fit_sinusoid(pts(th, np.full(th.size, 2.0))).c1 == pytest.approx(0.0, abs=1e-12)


def test_free_period_recovers_period():
    th = np.arange(0, 221, 2.0)
    f = fit_sinusoid_free_period(pts(th, 3 + 2 * np.cos(np.radians(th - 40) * 360 / 170)))
    assert f.period_deg == pytest.approx(170.0, abs=1e-4)


def test_sinusoid_metrics_on_cos2():
    th = np.arange(0, 221, 2.0)
    f = fit_sinusoid(pts(th, 4e4 * np.cos(np.radians(th - 33)) ** 2))
    assert sinusoid_max_sensitivity(f, "peak") == pytest.approx(math.pi / 180, rel=1e-9)
    assert sinusoid_dynamic_range(f) == pytest.approx(90.0, rel=1e-9)


def test_max_sensitivity_example():
    fit = DipFit(0.0, -1.0, 0.0, 10.0)
    assert max_sensitivity(fit, "none") == pytest.approx(0.142823, rel=1e-4)
    wide = DipFit(0.0, -1.0, 0.0, 20.0)
    assert max_sensitivity(wide, "none") == pytest.approx(max_sensitivity(fit, "none") / 2, rel=1e-15)
    with pytest.raises(FitError):
        max_sensitivity(fit, "baseline")


@settings(max_examples=50, deadline=None)
@given(st.floats(-100, -0.1), st.floats(1, 60), st.floats(-90, 90))
def test_max_sensitivity_matches_numeric_derivative(a, fwhm, xc):
    x = xc + np.linspace(0, fwhm, 20001)
    slope = np.abs(np.gradient(gaussian_dip(x, 0, a, xc, fwhm), x)).max()
    assert abs(a) * DIP_SLOPE_FACTOR / fwhm == pytest.approx(slope, rel=1e-6)


def _sweep(ang, g2, t=1.0):
    ang = np.asarray(ang, float)
    z = np.zeros(ang.size, dtype=np.int64)
    return SweepTable(ang, np.zeros(ang.size), np.asarray(g2, float), z, z, z, t, 0)


def test_metrics_noiseless_sweep():
    ang = np.arange(0, 222, 2.0)
    g2 = gaussian_dip(ang, 60, -59, 20, 8) + gaussian_dip(ang, 0, -59, 200, 8)
    rows = metrics_table([_sweep(ang, g2)])
    assert [r.present for r in rows] == [True, True]
    assert all(r.residual_std_pct < 0.1 for r in rows)
    assert rows[0].fit.xc_deg == pytest.approx(20, abs=1e-3)


def test_missing_dip_flagged():
    ang = np.arange(0, 222, 2.0)
    rows = metrics_table([_sweep(ang, gaussian_dip(ang, 60, -59, 20, 8))])
    assert [r.present for r in rows] == [True, False]
    assert len(detect_dips(ang, np.full(ang.size, 5.0))) == 0


def test_snr_examples():
    assert snr([100, 102, 98], [50, 49, 51]) == pytest.approx(22.3607, abs=1e-4)
    rng = np.random.default_rng(0)
    same = [snr(rng.normal(5, 1, 20), rng.normal(5, 1, 20)) for _ in range(200)]
    assert np.mean(same) < 0.5
    with pytest.raises(UndefinedSNRError):
        snr([1, 1], [2, 2])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=20),
       st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=20))
def test_snr_symmetric_and_nonnegative(a, b):
    try:
        v = snr(a, b)
    except UndefinedSNRError:
        return
    assert v >= 0 and v == pytest.approx(snr(b, a))


def test_normalized_contrast():
    plane = np.array([[0.0, 10.0], [5.0, np.nan]])
    assert normalized_contrast([2.0, 7.0], plane) == pytest.approx(0.5)
    assert normalized_contrast([1.0], np.ones((2, 2))) == 0.0
