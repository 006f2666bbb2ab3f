"""Analyzer sweeps, raster scans and the closed-form rate model."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .correlator import CorrelationResult, correlate
from .optics import SpiralRetarderSample
from .scenario import PS_PER_S, Scenario
from .seeding import child_seed
from .source import synthesize_channels


@dataclass(frozen=True)
class ExpectedRates:
    r_a_hz: float
    r_b_hz: float
    r_ab_hz: float
    g2_zero: float
    true_rate_hz: float
    accidental_rate_hz: float


def window_fraction(scenario: Scenario) -> float:
    """Fraction of true pairs whose arrival difference falls inside the window."""
    sigma = math.sqrt(
        scenario.source.pair_jitter_sigma_ps**2
        + scenario.det_a.jitter_sigma_ps**2
        + scenario.det_b.jitter_sigma_ps**2
    )
    if sigma == 0.0:
        return 1.0
    return math.erf(scenario.window_ps / 2.0 / (sigma * math.sqrt(2.0)))


def expected_rates(scenario: Scenario) -> ExpectedRates:
    """Closed-form singles, coincidence and g2(0) rates (dead time neglected)."""
    src, da, db = scenario.source, scenario.det_a, scenario.det_b
    t_a, t_b = scenario.arm_transmissions()
    r_a = da.efficiency * (src.pair_rate_hz * t_a + src.stray_rate_hz) + da.dark_rate_hz
    r_b = db.efficiency * (src.pair_rate_hz * t_b + src.stray_rate_hz) + db.dark_rate_hz
    true = src.pair_rate_hz * t_a * t_b * da.efficiency * db.efficiency * window_fraction(scenario)
    acc = r_a * r_b * scenario.window_ps / PS_PER_S
    g2 = 1.0 + true / acc if acc > 0 else math.nan
    return ExpectedRates(r_a, r_b, true + acc, g2, true, acc)


def run_point(scenario: Scenario, seed: int) -> CorrelationResult:
    a, b = synthesize_channels(scenario, seed)
    return correlate(a, b, scenario.window_ps, 0, scenario.duration_ps)


def _map(fn: Callable, items: Sequence, workers: int) -> list:
    if workers <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# --- analyzer sweeps -------------------------------------------------------


@dataclass(frozen=True)
class SweepTable:
    angles_deg: np.ndarray
    r_ab_hz: np.ndarray
    g2_zero: np.ndarray
    n_a: np.ndarray
    n_b: np.ndarray
    n_ab: np.ndarray
    integration_time_s: float
    seed: int

    def __post_init__(self):
        if np.any(np.diff(self.angles_deg) <= 0):
            raise ValueError("sweep angles must be strictly increasing")

    def __len__(self) -> int:
        return int(self.angles_deg.size)

    def rows(self):
        for i in range(len(self)):
            yield (
                float(self.angles_deg[i]),
                float(self.r_ab_hz[i]),
                float(self.g2_zero[i]),
                int(self.n_a[i]),
                int(self.n_b[i]),
                int(self.n_ab[i]),
            )

    @property
    def points_g2(self) -> np.ndarray:
        ok = np.isfinite(self.g2_zero)
        return np.column_stack([self.angles_deg[ok], self.g2_zero[ok]])

    @property
    def points_rate(self) -> np.ndarray:
        return np.column_stack([self.angles_deg, self.r_ab_hz])


def angle_key(angle_deg: float) -> int:
    """Seed index for an analyzer angle (millidegree resolution)."""
    return int(round(angle_deg * 1000.0)) % (2**63)


def sweep_analyzer(
    scenario: Scenario, angles: Iterable[float], seed: int, workers: int = 1
) -> SweepTable:
    """Rotate the channel-A analyzer through ``angles`` and measure each point."""
    angles = np.asarray(sorted(float(a) for a in angles), dtype=float)
    if angles.size < 2:
        raise ValueError("a sweep needs at least two angles")

    def one(angle):
        sc = scenario.with_(rotating_analyzer_deg=angle)
        return run_point(sc, child_seed(seed, "sweep", angle_key(angle)))

    results = _map(one, list(angles), workers)
    return SweepTable(
        angles_deg=angles,
        r_ab_hz=np.array([r.r_ab_hz for r in results]),
        g2_zero=np.array([r.g2_zero for r in results]),
        n_a=np.array([r.n_a for r in results], dtype=np.int64),
        n_b=np.array([r.n_b for r in results], dtype=np.int64),
        n_ab=np.array([r.n_ab for r in results], dtype=np.int64),
        integration_time_s=scenario.integration_time_s,
        seed=int(seed),
    )


# --- raster images ---------------------------------------------------------


@dataclass(frozen=True)
class ScanGrid:
    """Pixel centres at ``origin_mm + (ix, iy) * pitch_mm``."""

    width_px: int = 30
    height_px: int = 30
    pitch_mm: float = 1.0
    origin_mm: tuple[float, float] = (-14.5, -14.5)

    def __post_init__(self):
        if self.width_px < 1 or self.height_px < 1 or not self.pitch_mm > 0:
            raise ValueError("scan grid must have at least one pixel and positive pitch")

    def center_mm(self, ix: int, iy: int) -> tuple[float, float]:
        return (self.origin_mm[0] + ix * self.pitch_mm, self.origin_mm[1] + iy * self.pitch_mm)

    def pixels(self):
        for iy in range(self.height_px):
            for ix in range(self.width_px):
                yield ix, iy


@dataclass(frozen=True)
class ScanImage:
    """Per-pixel planes indexed ``[iy, ix]``; undefined g2 pixels are NaN and masked."""

    grid: ScanGrid
    coincidence_rate_hz: np.ndarray
    g2_zero: np.ndarray
    g2_valid: np.ndarray
    n_a: np.ndarray
    n_b: np.ndarray
    n_ab: np.ndarray
    seed: int
    integration_time_s: float
    window_ps: float
    metadata: dict = field(default_factory=dict)

    @property
    def width_px(self) -> int:
        return self.grid.width_px

    @property
    def height_px(self) -> int:
        return self.grid.height_px

    @property
    def pitch_mm(self) -> float:
        return self.grid.pitch_mm

    def same_pixels(self, other: "ScanImage") -> bool:
        return all(
            np.array_equal(getattr(self, k), getattr(other, k), equal_nan=k == "g2_zero")
            for k in ("coincidence_rate_hz", "g2_zero", "n_a", "n_b", "n_ab")
        )


def scan_image(
    scenario: Scenario,
    grid: ScanGrid,
    seed: int,
    workers: int = 1,
    order: Optional[Iterable[tuple[int, int]]] = None,
) -> ScanImage:
    """Raster the beam over ``grid``; each pixel is seeded by its own index."""
    pixels = list(grid.pixels() if order is None else order)
    shape = (grid.height_px, grid.width_px)

    def one(px):
        ix, iy = px
        sc = scenario.with_(beam_position_mm=grid.center_mm(ix, iy))
        return px, run_point(sc, child_seed(seed, "pixel", ix, iy))

    coinc = np.zeros(shape)
    g2 = np.full(shape, np.nan)
    n_a = np.zeros(shape, dtype=np.int64)
    n_b = np.zeros(shape, dtype=np.int64)
    n_ab = np.zeros(shape, dtype=np.int64)
    for (ix, iy), r in _map(one, pixels, workers):
        coinc[iy, ix] = r.r_ab_hz
        g2[iy, ix] = r.g2_zero
        n_a[iy, ix], n_b[iy, ix], n_ab[iy, ix] = r.n_a, r.n_b, r.n_ab
    return ScanImage(
        grid=grid,
        coincidence_rate_hz=coinc,
        g2_zero=g2,
        g2_valid=np.isfinite(g2),
        n_a=n_a,
        n_b=n_b,
        n_ab=n_ab,
        seed=int(seed),
        integration_time_s=scenario.integration_time_s,
        window_ps=scenario.window_ps,
    )


@dataclass(frozen=True)
class LineProfile:
    distance_mm: np.ndarray
    ix: np.ndarray
    iy: np.ndarray
    coincidence_rate_hz: np.ndarray
    g2_zero: np.ndarray

    def __len__(self) -> int:
        return int(self.distance_mm.size)

    def rows(self):
        for i in range(len(self)):
            yield float(self.distance_mm[i]), float(self.coincidence_rate_hz[i]), float(self.g2_zero[i])


def line_profile(
    image: ScanImage, start_px: tuple[int, int], end_px: tuple[int, int]
) -> LineProfile:
    """Nearest-pixel samples along the segment ``start_px -> end_px`` (``(ix, iy)``)."""
    for x, y in (start_px, end_px):
        if not (0 <= x < image.width_px and 0 <= y < image.height_px):
            raise IndexError(f"profile endpoint {(x, y)} outside {image.width_px}x{image.height_px} image")
    (x0, y0), (x1, y1) = start_px, end_px
    n = max(abs(x1 - x0), abs(y1 - y0)) + 1
    s = np.linspace(0.0, 1.0, n) if n > 1 else np.zeros(1)
    ix = np.rint(x0 + s * (x1 - x0)).astype(int)
    iy = np.rint(y0 + s * (y1 - y0)).astype(int)
    dist = np.hypot(ix - x0, iy - y0) * image.pitch_mm
    return LineProfile(
        distance_mm=dist,
        ix=ix,
        iy=iy,
        coincidence_rate_hz=image.coincidence_rate_hz[iy, ix],
        g2_zero=image.g2_zero[iy, ix],
    )


def pixel_of(grid: ScanGrid, position_mm: tuple[float, float]) -> tuple[int, int]:
    """Nearest pixel index ``(ix, iy)`` to a stage position, clipped to the grid."""
    ix = int(round((position_mm[0] - grid.origin_mm[0]) / grid.pitch_mm))
    iy = int(round((position_mm[1] - grid.origin_mm[1]) / grid.pitch_mm))
    return min(max(ix, 0), grid.width_px - 1), min(max(iy, 0), grid.height_px - 1)


def tangential_segment(
    grid: ScanGrid,
    center_mm: tuple[float, float],
    radius_mm: float,
    azimuth_deg: float,
    half_length_mm: float,
) -> tuple[tuple[int, int], tuple[int, int]]:
    """Pixel endpoints of a short segment tangent to the circle at ``azimuth_deg``."""
    phi = math.radians(azimuth_deg)
    px = center_mm[0] + radius_mm * math.cos(phi)
    py = center_mm[1] + radius_mm * math.sin(phi)
    tx, ty = -math.sin(phi), math.cos(phi)
    start = pixel_of(grid, (px - half_length_mm * tx, py - half_length_mm * ty))
    end = pixel_of(grid, (px + half_length_mm * tx, py + half_length_mm * ty))
    return start, end


def suggested_profile_lines(scenario: Scenario, grid: ScanGrid) -> dict[str, tuple]:
    """Two tangential lines over a spiral sample: one across a dark (crossed) sector,
    one across a mid-slope sector of the coincidence pattern.

    For V input through the m=1 half-wave spiral the transmitted light is linear at
    ``azimuth - 90``, so the rotating analyzer is crossed at ``azimuth = analyzer``.
    """
    sample = scenario.sample
    if not isinstance(sample, SpiralRetarderSample):
        raise TypeError("suggested profile lines need a spiral sample")
    theta = scenario.rotating_analyzer_deg
    r = 0.6 * sample.radius_mm
    half = 0.25 * sample.radius_mm
    return {
        "dip": tangential_segment(grid, sample.center_mm, r, theta, half),
        "slope": tangential_segment(grid, sample.center_mm, r, theta + 45.0, half),
    }
