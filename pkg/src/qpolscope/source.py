"""Synthetic time-tag generation: pair emission, analyzer thinning, detectors."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._kernels import dead_time_mask
from .scenario import PS_PER_S, DetectorModel, Scenario, SourceModel
from .seeding import child_seed


class StreamOrderError(ValueError):
    """Time tags are not sorted or fall outside the run."""


@dataclass(frozen=True, eq=False)
class TimeTagStream:
    """Sorted integer-picosecond detection times for one channel."""

    timestamps_ps: np.ndarray
    duration_ps: int

    def __post_init__(self):
        t = np.ascontiguousarray(self.timestamps_ps, dtype=np.int64)
        t.setflags(write=False)
        object.__setattr__(self, "timestamps_ps", t)
        object.__setattr__(self, "duration_ps", int(self.duration_ps))
        if self.duration_ps < 0:
            raise StreamOrderError("duration_ps must be >= 0")
        if t.size:
            if np.any(np.diff(t) < 0):
                raise StreamOrderError("timestamps must be non-decreasing")
            if t[0] < 0 or t[-1] > self.duration_ps:
                raise StreamOrderError("timestamps must lie within [0, duration_ps]")

    def __len__(self) -> int:
        return int(self.timestamps_ps.size)

    def __eq__(self, other):
        if not isinstance(other, TimeTagStream):
            return NotImplemented
        return self.duration_ps == other.duration_ps and np.array_equal(
            self.timestamps_ps, other.timestamps_ps
        )

    @property
    def rate_hz(self) -> float:
        return len(self) / (self.duration_ps / PS_PER_S) if self.duration_ps else 0.0

    @classmethod
    def empty(cls, duration_ps: int) -> "TimeTagStream":
        return cls(np.empty(0, dtype=np.int64), duration_ps)


def _rng(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


def _gauss_ps(rng: np.random.Generator, sigma_ps: float, n: int) -> np.ndarray:
    return np.rint(rng.normal(0.0, sigma_ps, n)).astype(np.int64)


def _occupied_cells(rng: np.random.Generator, n_cells: int, p_occupied: float) -> np.ndarray:
    # Occupied cells form a Bernoulli process, so the gaps between them are geometric.
    expected = n_cells * p_occupied
    idx = np.empty(0, dtype=np.int64)
    last = -1
    while last < n_cells:
        chunk = int(expected - (last + 1) * p_occupied + 6.0 * math.sqrt(expected + 1.0) + 64)
        gaps = rng.geometric(p_occupied, size=max(chunk, 64))
        more = last + np.cumsum(gaps)
        idx = np.concatenate([idx, more])
        last = int(more[-1])
    return idx[idx < n_cells]


def generate_raw_pairs(
    source: SourceModel, duration_ps: int, rng_seed
) -> tuple[TimeTagStream, TimeTagStream]:
    """Emit (signal, idler) streams with Bose-Einstein pair number per coherence cell.

    The run is split into cells of ``coherence_time_ps``; each cell holds ``k``
    pairs with ``P(k) = nbar**k / (1 + nbar)**(k + 1)``. Pairs sit uniformly in
    their cell and the idler trails the signal by a Gaussian delay.
    """
    duration_ps = int(duration_ps)
    tc = float(source.coherence_time_ps)
    if duration_ps < tc:
        raise ValueError("duration must cover at least one coherence cell")
    nbar = source.mean_pairs_per_cell
    if nbar >= 1.0:
        raise ValueError(f"mean pairs per coherence cell must be < 1 (got {nbar:.3g})")
    if nbar == 0.0:
        return TimeTagStream.empty(duration_ps), TimeTagStream.empty(duration_ps)

    rng = _rng(rng_seed)
    n_cells = int(math.ceil(duration_ps / tc))
    cells = _occupied_cells(rng, n_cells, nbar / (1.0 + nbar))
    # memorylessness: k given k >= 1 is 1 + Geometric0
    k = rng.geometric(1.0 / (1.0 + nbar), size=cells.size)
    cells = np.repeat(cells, k)
    signal = np.floor((cells + rng.random(cells.size)) * tc).astype(np.int64)
    inside = signal <= duration_ps
    signal = signal[inside]
    idler = signal + _gauss_ps(rng, source.pair_jitter_sigma_ps, signal.size)
    np.clip(idler, 0, duration_ps, out=idler)
    signal.sort(kind="stable")
    idler.sort(kind="stable")
    return TimeTagStream(signal, duration_ps), TimeTagStream(idler, duration_ps)


def thin_stream(stream: TimeTagStream, transmission_probability: float, rng_seed) -> TimeTagStream:
    p = float(transmission_probability)
    if not 0.0 <= p <= 1.0:
        raise ValueError("transmission probability must lie in [0, 1]")
    if p == 1.0:
        return stream
    keep = _rng(rng_seed).random(len(stream)) < p
    return TimeTagStream(stream.timestamps_ps[keep], stream.duration_ps)


def poisson_stream(rate_hz: float, duration_ps: int, rng_seed) -> TimeTagStream:
    """Uniform (Poisson-process) events over ``[0, duration_ps]``."""
    rng = _rng(rng_seed)
    n = rng.poisson(rate_hz * duration_ps / PS_PER_S) if rate_hz > 0 else 0
    t = np.sort(rng.integers(0, int(duration_ps) + 1, size=n, dtype=np.int64))
    return TimeTagStream(t, duration_ps)


def merge_streams(*streams: TimeTagStream) -> TimeTagStream:
    duration = max(s.duration_ps for s in streams)
    t = np.concatenate([s.timestamps_ps for s in streams])
    t.sort(kind="stable")
    return TimeTagStream(t, duration)


def detect(stream: TimeTagStream, det: DetectorModel, duration_ps: int, rng_seed) -> TimeTagStream:
    """Efficiency loss, dark counts, timing jitter, then non-paralyzable dead time."""
    duration_ps = int(duration_ps)
    rng = _rng(rng_seed)
    t = stream.timestamps_ps
    if det.efficiency < 1.0:
        t = t[rng.random(t.size) < det.efficiency]
    if det.dark_rate_hz > 0:
        n_dark = rng.poisson(det.dark_rate_hz * duration_ps / PS_PER_S)
        t = np.concatenate([t, rng.integers(0, duration_ps + 1, size=n_dark, dtype=np.int64)])
        t.sort(kind="stable")
    if det.jitter_sigma_ps > 0 and t.size:
        t = t + _gauss_ps(rng, det.jitter_sigma_ps, t.size)
        t.sort(kind="stable")
        np.clip(t, 0, duration_ps, out=t)
    if det.dead_time_ps > 0 and t.size:
        t = t[dead_time_mask(t, np.int64(math.ceil(det.dead_time_ps)))]
    return TimeTagStream(t, duration_ps)


def synthesize_channels(scenario: Scenario, rng_seed: int) -> tuple[TimeTagStream, TimeTagStream]:
    """Full chain: pairs -> sample -> analyzers -> stray light -> detectors.

    Channel A is the rotating-analyzer (signal) arm, channel B the fixed-analyzer
    (idler) arm.
    """
    duration = scenario.duration_ps
    t_a, t_b = scenario.arm_transmissions()
    signal, idler = generate_raw_pairs(scenario.source, duration, child_seed(rng_seed, "pairs"))
    arm_a = thin_stream(signal, t_a, child_seed(rng_seed, "analyzer", 0))
    arm_b = thin_stream(idler, t_b, child_seed(rng_seed, "analyzer", 1))
    stray = scenario.source.stray_rate_hz
    if stray > 0:
        arm_a = merge_streams(arm_a, poisson_stream(stray, duration, child_seed(rng_seed, "stray", 0)))
        arm_b = merge_streams(arm_b, poisson_stream(stray, duration, child_seed(rng_seed, "stray", 1)))
    ch_a = detect(arm_a, scenario.det_a, duration, child_seed(rng_seed, "detector", 0))
    ch_b = detect(arm_b, scenario.det_b, duration, child_seed(rng_seed, "detector", 1))
    return ch_a, ch_b
