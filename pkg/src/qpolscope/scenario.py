"""Experiment description shared by the source and scan layers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Literal, Optional

from .optics import (
    H,
    V,
    PolarizationState,
    Position,
    Sample,
    SpiralRetarderSample,
    analyzer_project,
    apply_element,
)

PS_PER_S = 1e12

# Default beam spot: inside the spiral aperture at 20 deg azimuth, which puts the
# transmitted signal polarization at 110 deg (analyzer 110 aligned, 20 crossed).
DEFAULT_BEAM_RADIUS_MM = 6.0
DEFAULT_BEAM_AZIMUTH_DEG = 20.0
DEFAULT_BEAM_POSITION_MM: Position = (
    DEFAULT_BEAM_RADIUS_MM * math.cos(math.radians(DEFAULT_BEAM_AZIMUTH_DEG)),
    DEFAULT_BEAM_RADIUS_MM * math.sin(math.radians(DEFAULT_BEAM_AZIMUTH_DEG)),
)


@dataclass(frozen=True)
class SourceModel:
    """Type-II pair source with thermal pair-number statistics per coherence cell."""

    pair_rate_hz: float = 450e3
    coherence_time_ps: float = 1000.0
    pair_jitter_sigma_ps: float = 12_700.0
    stray_rate_hz: float = 500.0  # per arm

    def __post_init__(self):
        if self.pair_rate_hz < 0:
            raise ValueError("pair_rate_hz must be >= 0")
        if not self.coherence_time_ps > 0:
            raise ValueError("coherence_time_ps must be > 0")
        if self.pair_jitter_sigma_ps < 0 or self.stray_rate_hz < 0:
            raise ValueError("jitter and stray rate must be >= 0")

    @property
    def mean_pairs_per_cell(self) -> float:
        return self.pair_rate_hz * self.coherence_time_ps / PS_PER_S


@dataclass(frozen=True)
class DetectorModel:
    """Single-photon avalanche detector: loss, dark counts, jitter, dead time."""

    efficiency: float = 0.5
    dark_rate_hz: float = 500.0
    dead_time_ps: float = 50_000.0
    jitter_sigma_ps: float = 350.0

    def __post_init__(self):
        if not 0.0 <= self.efficiency <= 1.0:
            raise ValueError("efficiency must lie in [0, 1]")
        if self.dark_rate_hz < 0 or self.dead_time_ps < 0 or self.jitter_sigma_ps < 0:
            raise ValueError("detector rates and times must be >= 0")

    @classmethod
    def ideal(cls) -> "DetectorModel":
        return cls(efficiency=1.0, dark_rate_hz=0.0, dead_time_ps=0.0, jitter_sigma_ps=0.0)


ArmName = Literal["A", "B"]

# Arm A carries the signal (V) photon to the rotating analyzer, arm B the idler
# (H) photon to the fixed analyzer.
ARM_INPUT: dict[str, PolarizationState] = {"A": V, "B": H}


@dataclass(frozen=True)
class Scenario:
    source: SourceModel = field(default_factory=SourceModel)
    det_a: DetectorModel = field(default_factory=DetectorModel)
    det_b: DetectorModel = field(default_factory=DetectorModel)
    sample: Optional[Sample] = field(default_factory=SpiralRetarderSample)
    sample_arm: ArmName = "A"
    fixed_analyzer_deg: float = 0.0
    rotating_analyzer_deg: float = 110.0
    beam_position_mm: Position = DEFAULT_BEAM_POSITION_MM
    window_ps: float = 15_000.0
    integration_time_s: float = 0.02

    def __post_init__(self):
        if not self.integration_time_s > 0:
            raise ValueError("integration_time_s must be > 0")
        if not self.window_ps > 0:
            raise ValueError("window_ps must be > 0")
        if not (math.isfinite(self.fixed_analyzer_deg) and math.isfinite(self.rotating_analyzer_deg)):
            raise ValueError("analyzer angles must be finite")
        if self.sample_arm not in ("A", "B"):
            raise ValueError("sample_arm must be 'A' or 'B'")

    @property
    def duration_ps(self) -> int:
        return int(round(self.integration_time_s * PS_PER_S))

    def with_(self, **changes) -> "Scenario":
        return replace(self, **changes)

    def arm_state(self, arm: ArmName) -> PolarizationState:
        """Polarization reaching the analyzer of ``arm``."""
        state = ARM_INPUT[arm]
        if self.sample is not None and arm == self.sample_arm:
            state = apply_element(self.sample.element_at(self.beam_position_mm), state)
        return state

    def arm_transmissions(self) -> tuple[float, float]:
        """Per-photon transmission (T_A, T_B) through sample and analyzers."""
        t_a, _ = analyzer_project(self.arm_state("A"), self.rotating_analyzer_deg)
        t_b, _ = analyzer_project(self.arm_state("B"), self.fixed_analyzer_deg)
        return min(max(t_a, 0.0), 1.0), min(max(t_b, 0.0), 1.0)
