"""Curve fits and figures of merit for analyzer sweeps and images.

The dip model is a Gaussian in analyzer angle::

    y = y0 + a * exp(-4 ln2 * ((x - xc) / fwhm)**2)

fitted by damped Gauss-Newton (Levenberg-Marquardt) with an analytic Jacobian.
Coincidence-rate curves are fitted with ``c0 + c1 * cos(2 (theta - theta0))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Optional, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

FOUR_LN2 = 4.0 * math.log(2.0)
# max |dy/dx| of the unit dip, times fwhm: sqrt(8 ln2) * exp(-1/2)
DIP_SLOPE_FACTOR = math.sqrt(8.0 * math.log(2.0)) * math.exp(-0.5)


class FitError(ValueError):
    """Data cannot support the requested fit."""


def gaussian_dip(x, y0, a, xc, fwhm):
    x = np.asarray(x, dtype=float)
    return y0 + a * np.exp(-FOUR_LN2 * ((x - xc) / fwhm) ** 2)


def _dip_jacobian(x, p):
    y0, a, xc, fwhm = p
    u = (x - xc) / fwhm
    e = np.exp(-FOUR_LN2 * u * u)
    J = np.empty((x.size, 4))
    J[:, 0] = 1.0
    J[:, 1] = e
    J[:, 2] = a * e * 2.0 * FOUR_LN2 * u / fwhm
    J[:, 3] = a * e * 2.0 * FOUR_LN2 * u * u / fwhm
    return J


@dataclass(frozen=True)
class DipFit:
    y0: float
    a: float
    xc_deg: float
    fwhm_deg: float
    residual_std_pct: float = 0.0
    converged: bool = True
    iterations: int = 0
    covariance: Optional[np.ndarray] = field(default=None, compare=False, repr=False)
    n_points: int = 0

    @property
    def params(self) -> np.ndarray:
        return np.array([self.y0, self.a, self.xc_deg, self.fwhm_deg])

    def __call__(self, x):
        return gaussian_dip(x, self.y0, self.a, self.xc_deg, self.fwhm_deg)

    @property
    def stderr(self) -> np.ndarray:
        if self.covariance is None:
            return np.full(4, np.nan)
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))


def _as_points(points) -> tuple[np.ndarray, np.ndarray]:
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise FitError("points must be an (n, 2) array of (angle, value)")
    ok = np.all(np.isfinite(pts), axis=1)
    pts = pts[ok]
    order = np.argsort(pts[:, 0], kind="stable")
    return pts[order, 0], pts[order, 1]


def _auto_init(x, y) -> np.ndarray:
    i0 = int(np.argmin(y))
    top = np.sort(y)[-max(1, y.size // 4):]
    y0 = float(np.median(top))
    a = float(y[i0] - y0)
    level = y0 + a / 2.0
    left, right = x[0], x[-1]
    for i in range(i0, 0, -1):
        if y[i - 1] >= level > y[i]:
            left = x[i - 1] + (y[i - 1] - level) * (x[i] - x[i - 1]) / (y[i - 1] - y[i])
            break
    for i in range(i0, y.size - 1):
        if y[i + 1] >= level > y[i]:
            right = x[i] + (level - y[i]) * (x[i + 1] - x[i]) / (y[i + 1] - y[i])
            break
    fwhm = max(right - left, float(np.min(np.diff(x))) if x.size > 1 else 1.0)
    return np.array([y0, a, float(x[i0]), fwhm])


def _lm(x, y, p0, max_iter=200, rtol=1e-8):
    """Levenberg-Marquardt on the dip model. Returns (params, converged, iterations)."""
    p = p0.astype(float).copy()
    r = y - gaussian_dip(x, *p)
    cost = float(r @ r)
    lam = 1e-3
    yscale = max(float(np.ptp(y)), 1e-300)
    scale = np.array([yscale, yscale, 1.0, 1.0])
    for it in range(1, max_iter + 1):
        J = _dip_jacobian(x, p)
        A = J.T @ J
        g = J.T @ r
        if cost == 0.0:
            return p, True, it
        accepted = False
        while lam < 1e16:
            M = A + lam * np.diag(np.maximum(np.diag(A), 1e-12))
            try:
                step = np.linalg.solve(M, g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            pn = p + step
            if pn[3] == 0.0:
                lam *= 10.0
                continue
            rn = y - gaussian_dip(x, *pn)
            cn = float(rn @ rn)
            if cn <= cost:
                accepted = True
                break
            lam *= 10.0
        if not accepted:
            # even a vanishing step cannot lower the cost: already at the optimum
            return p, True, it
        rel = np.max(np.abs(step) / np.maximum(np.abs(p), scale * 1e-6))
        p, r, cost = pn, rn, cn
        lam = max(lam / 10.0, 1e-12)
        if rel < rtol:
            return p, True, it
    return p, False, max_iter


def _grid_start(x, y, p_init):
    """Coarse search over (xc, fwhm), solving (y0, a) linearly at each node."""
    span = x[-1] - x[0]
    best = (math.inf, p_init)
    for xc in np.linspace(x[0], x[-1], 41):
        for fwhm in np.geomspace(max(span / 200.0, 1e-6), span, 30):
            e = np.exp(-FOUR_LN2 * ((x - xc) / fwhm) ** 2)
            B = np.column_stack([np.ones_like(x), e])
            coef, *_ = np.linalg.lstsq(B, y, rcond=None)
            res = y - B @ coef
            c = float(res @ res)
            if c < best[0]:
                best = (c, np.array([coef[0], coef[1], xc, fwhm]))
    return best[1]


def _finish(x, y, p, converged, iterations) -> DipFit:
    y0, a, xc, fwhm = p
    fwhm = abs(fwhm)
    res = y - gaussian_dip(x, y0, a, xc, fwhm)
    std_pct = 100.0 * float(np.std(res)) / abs(a) if a != 0 else math.inf
    cov = None
    dof = x.size - 4
    if dof > 0:
        J = _dip_jacobian(x, np.array([y0, a, xc, fwhm]))
        try:
            cov = np.linalg.inv(J.T @ J) * float(res @ res) / dof
        except np.linalg.LinAlgError:
            cov = None
    return DipFit(float(y0), float(a), float(xc), float(fwhm), std_pct, bool(converged), iterations, cov, x.size)


def fit_gaussian_dip(points, init: Optional[DipFit] = None) -> DipFit:
    """Least-squares Gaussian dip fit to ``(angle_deg, value)`` points."""
    x, y = _as_points(points)
    if x.size < 5:
        raise FitError("need at least 5 finite points to fit a dip")
    if np.ptp(y) <= 1e-12 * max(1.0, float(np.max(np.abs(y)))):
        raise FitError("constant data: no dip to fit")
    p0 = init.params if init is not None else _auto_init(x, y)
    p, ok, it = _lm(x, y, p0)
    if not ok:
        p2, ok2, it2 = _lm(x, y, _grid_start(x, y, p0))
        c1 = np.sum((y - gaussian_dip(x, *p)) ** 2)
        c2 = np.sum((y - gaussian_dip(x, *p2)) ** 2)
        if ok2 or c2 < c1:
            p, ok, it = p2, ok2, it + it2
    return _finish(x, y, p, ok, it)


# --- sinusoids -------------------------------------------------------------


@dataclass(frozen=True)
class SinusoidFit:
    """``c0 + c1 * cos(2 pi (theta - theta0) / period)``; period 180 deg by default."""

    c0: float
    c1: float
    theta0_deg: float
    period_deg: float = 180.0
    rel_residual: float = 0.0

    def __call__(self, theta_deg):
        t = np.asarray(theta_deg, dtype=float)
        return self.c0 + self.c1 * np.cos(2.0 * np.pi * (t - self.theta0_deg) / self.period_deg)

    @property
    def minimum_deg(self) -> float:
        return (self.theta0_deg + self.period_deg / 2.0) % self.period_deg


def _sinusoid_lstsq(x, y, period):
    w = 2.0 * np.pi * x / period
    B = np.column_stack([np.ones_like(x), np.cos(w), np.sin(w)])
    coef, *_ = np.linalg.lstsq(B, y, rcond=None)
    res = y - B @ coef
    return coef, res


def fit_sinusoid(points, period_deg: float = 180.0) -> SinusoidFit:
    """Linear least squares in {1, cos, sin} of the given period."""
    x, y = _as_points(points)
    if x.size < 5 or x[-1] - x[0] < period_deg / 2.0:
        raise FitError("sinusoid fit needs >= 5 points spanning at least half a period")
    (c0, b, c), res = _sinusoid_lstsq(x, y, period_deg)
    c1 = math.hypot(b, c)
    theta0 = math.degrees(math.atan2(c, b)) * period_deg / 360.0 % period_deg if c1 > 0 else 0.0
    norm = float(np.sqrt(np.mean(y * y)))
    rel = float(np.sqrt(np.mean(res * res))) / norm if norm > 0 else 0.0
    return SinusoidFit(float(c0), float(c1), float(theta0), float(period_deg), rel)


def fit_sinusoid_free_period(points, bounds_deg=(90.0, 360.0)) -> SinusoidFit:
    """Sinusoid fit with the period as a free parameter (1-D search, then linear solve)."""
    x, y = _as_points(points)

    def sse(period):
        _, res = _sinusoid_lstsq(x, y, period)
        return float(res @ res)

    grid = np.linspace(bounds_deg[0], bounds_deg[1], 271)
    k = int(np.argmin([sse(p) for p in grid]))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]
    best = minimize_scalar(sse, bounds=(lo, hi), method="bounded", options={"xatol": 1e-6})
    return fit_sinusoid(points, float(best.x))


# --- figures of merit ------------------------------------------------------

Normalization = Literal["baseline", "none"]


def max_sensitivity(fit: DipFit, normalization: Normalization = "baseline") -> float:
    """Largest |dy/dx| of the fitted dip, per degree."""
    value = abs(fit.a) * DIP_SLOPE_FACTOR / fit.fwhm_deg
    if normalization == "baseline":
        if fit.y0 == 0:
            raise FitError("baseline normalization with zero baseline")
        return value / abs(fit.y0)
    if normalization == "none":
        return value
    raise ValueError(f"unknown normalization {normalization!r}")


def sinusoid_max_sensitivity(fit: SinusoidFit, normalization: Literal["peak", "none"] = "peak") -> float:
    """Largest |dy/dtheta| per degree; ``peak`` divides by the curve maximum."""
    value = fit.c1 * 2.0 * math.pi / fit.period_deg
    if normalization == "peak":
        return value / (fit.c0 + fit.c1)
    if normalization == "none":
        return value
    raise ValueError(f"unknown normalization {normalization!r}")


def sinusoid_dynamic_range(fit: SinusoidFit) -> float:
    """Full width of one lobe at half its peak value (zero-referenced), degrees."""
    peak = fit.c0 + fit.c1
    if fit.c1 <= 0 or peak <= 0:
        raise FitError("flat or non-positive sinusoid has no lobe")
    cos_half = (peak / 2.0 - fit.c0) / fit.c1
    if cos_half <= -1.0:
        return fit.period_deg
    return fit.period_deg / math.pi * math.acos(min(cos_half, 1.0))


@dataclass(frozen=True)
class DipWindow:
    center_deg: float
    width_deg: float
    lo_deg: float
    hi_deg: float


def detect_dips(
    angles_deg, values, threshold: float = 0.5, min_separation_deg: float = 30.0
) -> list[DipWindow]:
    """Runs of points below ``threshold * flat level`` (flat level = median).

    Runs closer than ``min_separation_deg`` are merged into one dip.
    """
    x = np.asarray(angles_deg, dtype=float)
    y = np.asarray(values, dtype=float)
    ok = np.isfinite(y)
    x, y = x[ok], y[ok]
    if x.size == 0:
        return []
    flat = float(np.median(y))
    below = y < threshold * flat
    runs: list[list[int]] = []
    for i in np.flatnonzero(below):
        if runs and x[i] - x[runs[-1][-1]] < min_separation_deg:
            runs[-1].append(i)
        else:
            runs.append([i])
    step = float(np.median(np.diff(x))) if x.size > 1 else 1.0
    dips = []
    for run in runs:
        lo, hi = x[run[0]], x[run[-1]]
        width = max(hi - lo + step, step)
        dips.append(DipWindow(0.5 * (lo + hi), width, lo, hi))
    return dips


def fit_dip_window(angles_deg, values, dip: DipWindow, half_widths: float = 1.5, min_points: int = 7) -> DipFit:
    """Fit one dip on ``center +- half_widths * estimated FWHM``, widened to ``min_points``."""
    x = np.asarray(angles_deg, dtype=float)
    y = np.asarray(values, dtype=float)
    ok = np.isfinite(y)
    x, y = x[ok], y[ok]
    half = half_widths * dip.width_deg
    sel = np.abs(x - dip.center_deg) <= half
    if sel.sum() < min_points:
        nearest = np.argsort(np.abs(x - dip.center_deg), kind="stable")[:min_points]
        sel = np.zeros_like(sel)
        sel[nearest] = True
    return fit_gaussian_dip(np.column_stack([x[sel], y[sel]]))


@dataclass(frozen=True)
class MetricsRow:
    integration_time_s: float
    dip_index: int
    present: bool
    residual_std_pct: float = math.nan
    max_sensitivity_per_deg: float = math.nan
    max_sensitivity_raw_per_deg: float = math.nan
    dynamic_range_deg: float = math.nan
    fit: Optional[DipFit] = None

    def as_dict(self) -> dict:
        d = {
            "integration_time_s": self.integration_time_s,
            "dip_index": self.dip_index,
            "present": self.present,
            "residual_std_pct": self.residual_std_pct,
            "max_sensitivity_per_deg": self.max_sensitivity_per_deg,
            "max_sensitivity_raw_per_deg": self.max_sensitivity_raw_per_deg,
            "dynamic_range_deg": self.dynamic_range_deg,
        }
        if self.fit is not None:
            d.update(
                y0=self.fit.y0, a=self.fit.a, xc_deg=self.fit.xc_deg,
                fwhm_deg=self.fit.fwhm_deg, converged=self.fit.converged,
            )
        return d


def metrics_table(sweeps: Sequence, expected_dips: int = 2) -> list[MetricsRow]:
    """Table of per-dip fit metrics for sweeps taken at different integration times.

    ``sweeps`` are :class:`~qpolscope.scan.SweepTable` objects (anything with
    ``angles_deg``, ``g2_zero`` and ``integration_time_s``). Missing dips, up to
    ``expected_dips``, are returned as rows with ``present=False``.
    """
    rows: list[MetricsRow] = []
    for sw in sweeps:
        x, y = np.asarray(sw.angles_deg), np.asarray(sw.g2_zero)
        dips = detect_dips(x, y)
        n = max(expected_dips, len(dips))
        for k in range(n):
            if k >= len(dips):
                rows.append(MetricsRow(sw.integration_time_s, k, False))
                continue
            try:
                fit = fit_dip_window(x, y, dips[k])
            except FitError:
                rows.append(MetricsRow(sw.integration_time_s, k, False))
                continue
            rows.append(
                MetricsRow(
                    integration_time_s=sw.integration_time_s,
                    dip_index=k,
                    present=True,
                    residual_std_pct=fit.residual_std_pct,
                    max_sensitivity_per_deg=max_sensitivity(fit, "baseline"),
                    max_sensitivity_raw_per_deg=max_sensitivity(fit, "none"),
                    dynamic_range_deg=fit.fwhm_deg,
                    fit=fit,
                )
            )
    return rows


class UndefinedSNRError(ArithmeticError):
    pass


def snr(s_in, s_out) -> float:
    """|mean(s_in) - mean(s_out)| / sqrt(var(s_in) + var(s_out)), n-1 variances."""
    s_in = np.asarray(s_in, dtype=float)
    s_out = np.asarray(s_out, dtype=float)
    if s_in.size < 2 or s_out.size < 2:
        raise ValueError("snr needs at least two samples on each side")
    var = float(np.var(s_in, ddof=1) + np.var(s_out, ddof=1))
    if not var > 0:
        raise UndefinedSNRError("zero combined variance")
    return abs(float(np.mean(s_in) - np.mean(s_out))) / math.sqrt(var)


def normalized_contrast(profile_values, plane) -> float:
    """Peak-to-valley along a profile relative to the whole plane's range."""
    v = np.asarray(profile_values, dtype=float)
    p = np.asarray(plane, dtype=float)
    v, p = v[np.isfinite(v)], p[np.isfinite(p)]
    span = float(np.max(p) - np.min(p)) if p.size else 0.0
    if v.size == 0 or span <= 0:
        return 0.0
    return float(np.max(v) - np.min(v)) / span
