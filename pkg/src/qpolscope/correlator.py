"""Coincidence counting, delay histograms and the zero-delay g2 estimator."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from ._kernels import delay_histogram, greedy_coincidences
from .scenario import PS_PER_S
from .source import TimeTagStream


class UndefinedResultError(ArithmeticError):
    """An estimator's denominator vanished (no events, zero window, ...)."""


def count_coincidences(
    a: TimeTagStream, b: TimeTagStream, window_ps: float, delay_ps: float = 0
) -> int:
    """Greedy one-to-one matches with ``|t_a - (t_b + delay)| <= window/2``.

    Each A event, in time order, takes the earliest unmatched B event inside the
    window. Single merge pass over both streams.
    """
    return _count(a, b, window_ps, delay_ps)[0]


def _count(a, b, window_ps, delay_ps):
    if not window_ps > 0:
        raise ValueError("window_ps must be > 0")
    if len(a) == 0 or len(b) == 0:
        return 0, 0
    # integer offsets: |d| <= w/2  <=>  2|d| <= 2*floor(w/2)
    w2 = 2 * math.floor(window_ps / 2.0)
    n, steps = greedy_coincidences(
        a.timestamps_ps, b.timestamps_ps, np.int64(w2), np.int64(round(delay_ps))
    )
    return int(n), int(steps)


def comparison_count(a: TimeTagStream, b: TimeTagStream, window_ps: float, delay_ps: float = 0) -> int:
    """Merge-loop iterations used by :func:`count_coincidences` (<= |A| + |B|)."""
    return _count(a, b, window_ps, delay_ps)[1]


def g2_zero(r_a_hz: float, r_b_hz: float, r_ab_hz: float, window_ps: float) -> float:
    """g2(0) = R_AB / (R_A * R_B * window)."""
    denom = r_a_hz * r_b_hz * (window_ps / PS_PER_S)
    if not denom > 0:
        raise UndefinedResultError(
            f"g2(0) undefined: R_A={r_a_hz}, R_B={r_b_hz}, window={window_ps} ps"
        )
    return r_ab_hz / denom


@dataclass(frozen=True)
class CorrelationResult:
    n_a: int
    n_b: int
    n_ab: int
    duration_ps: int
    window_ps: float
    delay_ps: float = 0.0
    mode: str = "greedy"

    @property
    def duration_s(self) -> float:
        return self.duration_ps / PS_PER_S

    @property
    def r_a_hz(self) -> float:
        return self.n_a / self.duration_s

    @property
    def r_b_hz(self) -> float:
        return self.n_b / self.duration_s

    @property
    def r_ab_hz(self) -> float:
        return self.n_ab / self.duration_s

    @property
    def g2_defined(self) -> bool:
        return self.n_a > 0 and self.n_b > 0

    @property
    def g2_zero(self) -> float:
        """NaN when undefined; use :func:`g2_zero` directly to get the error."""
        if not self.g2_defined:
            return math.nan
        return g2_zero(self.r_a_hz, self.r_b_hz, self.r_ab_hz, self.window_ps)

    @property
    def g2_sigma(self) -> float:
        """Poisson error on g2(0) from the three counts."""
        if not self.g2_defined or self.n_ab == 0:
            return math.nan
        return self.g2_zero * math.sqrt(1 / self.n_ab + 1 / self.n_a + 1 / self.n_b)


def count_all_pairs(a: TimeTagStream, b: TimeTagStream, window_ps: float, delay_ps: float = 0) -> int:
    """Every (a, b) pair with ``|t_a - (t_b + delay)| <= window/2`` (not one-to-one)."""
    if len(a) == 0 or len(b) == 0:
        return 0
    ta = a.timestamps_ps
    tb = b.timestamps_ps + np.int64(round(delay_ps))
    h = math.floor(window_ps / 2.0)
    lo = np.searchsorted(tb, ta - h, side="left")
    hi = np.searchsorted(tb, ta + h, side="right")
    return int(np.sum(hi - lo))


def correlate(
    a: TimeTagStream,
    b: TimeTagStream,
    window_ps: float,
    delay_ps: float = 0,
    duration_ps: int | None = None,
    mode: Literal["greedy", "all_pairs"] = "greedy",
) -> CorrelationResult:
    """Singles, coincidences and g2(0) for one pair of channels."""
    if duration_ps is None:
        duration_ps = max(a.duration_ps, b.duration_ps)
    if not duration_ps > 0:
        raise ValueError("duration_ps must be > 0")
    if mode == "greedy":
        n_ab = count_coincidences(a, b, window_ps, delay_ps)
    elif mode == "all_pairs":
        n_ab = count_all_pairs(a, b, window_ps, delay_ps)
    else:
        raise ValueError(f"unknown coincidence mode {mode!r}")
    return CorrelationResult(len(a), len(b), n_ab, int(duration_ps), float(window_ps), float(delay_ps), mode)


@dataclass(frozen=True)
class G2Histogram:
    bin_width_ps: int
    delays_ps: np.ndarray
    counts: np.ndarray
    g2: np.ndarray
    duration_ps: int
    defined: bool = True

    @property
    def baseline(self) -> float:
        """Mean g2 over the far wings."""
        return float(np.mean(self.g2[self._wing_mask()])) if self.defined else math.nan

    def _wing_mask(self, width_ps: float | None = None) -> np.ndarray:
        tau = np.abs(self.delays_ps)
        edge = tau.max()
        mask = tau >= 0.75 * edge
        if width_ps is not None and math.isfinite(width_ps):
            far = tau > 5.0 * width_ps
            if far.sum() >= 8:
                mask = far
        return mask

    @property
    def peak_fwhm_ps(self) -> float:
        """Peak width at half height above the wing baseline (NaN if no peak)."""
        if not self.defined:
            return math.nan
        tau, g2 = self.delays_ps, self.g2
        base = float(np.mean(g2[self._wing_mask()]))
        width = math.nan
        for _ in range(3):
            i0 = int(np.argmax(g2))
            if not g2[i0] > base:
                return math.nan
            left, right = _half_crossings(tau, g2, base + 0.5 * (g2[i0] - base), i0)
            width = right - left
            if not math.isfinite(width):
                return math.nan
            base = float(np.mean(g2[self._wing_mask(width)]))
        return float(width)

    def around(self, half_width_ps: float) -> float:
        """Mean g2 over bins with |tau| <= half_width_ps."""
        if not self.defined:
            return math.nan
        sel = np.abs(self.delays_ps) <= half_width_ps
        return float(np.mean(self.g2[sel]))

    @property
    def peak_value(self) -> float:
        return float(self.g2[np.argmin(np.abs(self.delays_ps))]) if self.defined else math.nan


def _half_crossings(x, y, level, i0):
    """Linear-interpolated crossings of ``level`` left and right of index ``i0``."""
    left = right = math.nan
    for i in range(i0, 0, -1):
        if y[i - 1] < level <= y[i]:
            left = x[i - 1] + (level - y[i - 1]) * (x[i] - x[i - 1]) / (y[i] - y[i - 1])
            break
    for i in range(i0, len(y) - 1):
        if y[i + 1] < level <= y[i]:
            right = x[i] + (y[i] - level) * (x[i + 1] - x[i]) / (y[i] - y[i + 1])
            break
    return left, right


def g2_histogram(
    a: TimeTagStream,
    b: TimeTagStream,
    bin_width_ps: int,
    max_delay_ps: int,
    duration_ps: int | None = None,
) -> G2Histogram:
    """Normalized cross-correlation g2(tau), tau = t_b - t_a, from all pairs in range."""
    bin_width_ps, max_delay_ps = int(bin_width_ps), int(max_delay_ps)
    if bin_width_ps <= 0:
        raise ValueError("bin_width_ps must be > 0")
    if max_delay_ps < 0 or max_delay_ps % bin_width_ps:
        raise ValueError("max_delay_ps must be a non-negative multiple of bin_width_ps")
    if duration_ps is None:
        duration_ps = max(a.duration_ps, b.duration_ps)
    half = max_delay_ps // bin_width_ps
    nbins = 2 * half + 1
    delays = (np.arange(nbins, dtype=np.int64) - half) * bin_width_ps
    if len(a) == 0 or len(b) == 0:
        zeros = np.zeros(nbins)
        return G2Histogram(bin_width_ps, delays, zeros.astype(np.int64), zeros, int(duration_ps), False)
    counts = delay_histogram(
        a.timestamps_ps, b.timestamps_ps, np.int64(max_delay_ps), np.int64(bin_width_ps), nbins
    )
    t_s = duration_ps / PS_PER_S
    r_a, r_b = len(a) / t_s, len(b) / t_s
    g2 = counts / (r_a * r_b * (bin_width_ps / PS_PER_S) * t_s)
    return G2Histogram(bin_width_ps, delays, counts, g2, int(duration_ps), True)
