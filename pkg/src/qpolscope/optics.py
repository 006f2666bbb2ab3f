"""Jones-calculus polarization optics.

Conventions used throughout the package:

* angles are in degrees at every public boundary;
* 0 deg is horizontal (H), angles increase counter-clockwise looking into the beam;
* the signal photon is V (90 deg), the idler photon is H (0 deg);
* a retarder delays the slow axis by ``retardance`` relative to the fast axis,
  i.e. ``R(theta) @ diag(1, exp(-i delta)) @ R(-theta)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Protocol, Union

import numpy as np

Position = tuple[float, float]


@dataclass(frozen=True)
class PolarizationState:
    """Jones vector; amplitudes below unit norm encode passive loss."""

    e_h: complex = 1.0 + 0j
    e_v: complex = 0.0 + 0j

    @classmethod
    def linear(cls, angle_deg: float, amplitude: float = 1.0) -> "PolarizationState":
        t = math.radians(angle_deg)
        return cls(complex(amplitude * math.cos(t)), complex(amplitude * math.sin(t)))

    @classmethod
    def from_array(cls, v) -> "PolarizationState":
        return cls(complex(v[0]), complex(v[1]))

    @property
    def intensity(self) -> float:
        return abs(self.e_h) ** 2 + abs(self.e_v) ** 2

    def as_array(self) -> np.ndarray:
        return np.array([self.e_h, self.e_v], dtype=complex)

    def overlap(self, other: "PolarizationState") -> float:
        """|<other|self>|^2."""
        return abs(np.vdot(other.as_array(), self.as_array())) ** 2


H = PolarizationState(1.0 + 0j, 0j)
V = PolarizationState(0j, 1.0 + 0j)
DARK = PolarizationState(0j, 0j)


@dataclass(frozen=True)
class JonesMatrix:
    m: np.ndarray = field(default_factory=lambda: np.eye(2, dtype=complex))

    def __matmul__(self, other):
        if isinstance(other, JonesMatrix):
            return JonesMatrix(self.m @ other.m)
        if isinstance(other, PolarizationState):
            return PolarizationState.from_array(self.m @ other.as_array())
        return NotImplemented

    def singular_values(self) -> np.ndarray:
        return np.linalg.svd(self.m, compute_uv=False)

    def is_passive(self, tol: float = 1e-12) -> bool:
        return bool(np.all(self.singular_values() <= 1.0 + tol))


def _rotation(theta_rad: float) -> np.ndarray:
    c, s = math.cos(theta_rad), math.sin(theta_rad)
    return np.array([[c, -s], [s, c]], dtype=complex)


def waveplate_matrix(retardance_deg: float, fast_axis_deg: float) -> JonesMatrix:
    """Rotated linear retarder. Always unitary."""
    t = math.radians(fast_axis_deg)
    d = math.radians(retardance_deg)
    core = np.diag([1.0 + 0j, complex(math.cos(d), -math.sin(d))])
    return JonesMatrix(_rotation(t) @ core @ _rotation(-t))


def analyzer_project(
    state: PolarizationState, analyzer_angle_deg: float
) -> tuple[float, PolarizationState]:
    """Project onto a linear analyzer; returns (transmission, transmitted state)."""
    t = math.radians(analyzer_angle_deg)
    c, s = math.cos(t), math.sin(t)
    amp = c * state.e_h + s * state.e_v
    p = abs(amp) ** 2
    return p, PolarizationState(amp * c, amp * s)


# --- sample elements -------------------------------------------------------


@dataclass(frozen=True)
class Clear:
    pass


@dataclass(frozen=True)
class Opaque:
    pass


@dataclass(frozen=True)
class Retarder:
    retardance_deg: float
    fast_axis_deg: float

    def __post_init__(self):
        object.__setattr__(self, "retardance_deg", float(self.retardance_deg) % 360.0)
        object.__setattr__(self, "fast_axis_deg", float(self.fast_axis_deg) % 180.0)

    @property
    def matrix(self) -> JonesMatrix:
        return waveplate_matrix(self.retardance_deg, self.fast_axis_deg)


SampleElement = Union[Clear, Opaque, Retarder]


def apply_element(element: SampleElement, state: PolarizationState) -> PolarizationState:
    match element:
        case Clear():
            return state
        case Opaque():
            return DARK
        case Retarder():
            return element.matrix @ state
    raise TypeError(f"not a sample element: {element!r}")


class Sample(Protocol):
    def element_at(self, position_mm: Position) -> SampleElement: ...


@dataclass(frozen=True)
class UniformSample:
    """The same element at every position (a bare mount, an empty stage, ...)."""

    element: SampleElement = Clear()

    def element_at(self, position_mm: Position) -> SampleElement:
        return self.element


@dataclass(frozen=True)
class SpiralRetarderSample:
    """Spiral retarder of order ``m``: fast axis at ``m * azimuth / 2``.

    Positions outside ``radius_mm`` of ``center_mm`` see ``outside`` (the mount).
    """

    order_m: int = 1
    retardance_deg: float = 180.0
    center_mm: Position = (0.0, 0.0)
    radius_mm: float = 12.7
    outside: SampleElement = Opaque()

    def __post_init__(self):
        if self.order_m < 1:
            raise ValueError("order_m must be >= 1")
        if not self.radius_mm > 0:
            raise ValueError("radius_mm must be positive")
        if not 0.0 <= self.retardance_deg < 360.0:
            raise ValueError("retardance_deg must lie in [0, 360)")

    def azimuth_deg(self, position_mm: Position) -> float:
        dx = position_mm[0] - self.center_mm[0]
        dy = position_mm[1] - self.center_mm[1]
        return math.degrees(math.atan2(dy, dx)) % 360.0

    def element_at(self, position_mm: Position) -> SampleElement:
        return spiral_element_at(self, position_mm)


def spiral_element_at(sample: SpiralRetarderSample, position_mm: Position) -> SampleElement:
    dx = position_mm[0] - sample.center_mm[0]
    dy = position_mm[1] - sample.center_mm[1]
    if math.hypot(dx, dy) > sample.radius_mm:
        return sample.outside
    phi = sample.azimuth_deg(position_mm)
    return Retarder(sample.retardance_deg, sample.order_m * phi / 2.0)


def linear_angle_deg(state: PolarizationState) -> float:
    """Orientation in [0, 180) of a (possibly phase-rotated) linear state."""
    v = state.as_array()
    k = int(np.argmax(np.abs(v)))
    v = v * np.exp(-1j * np.angle(v[k]))
    return math.degrees(math.atan2(v[1].real, v[0].real)) % 180.0
