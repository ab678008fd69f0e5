"""Directions, array layouts, quadrature grids and steering factors.

Angles are in degrees.  Azimuth is measured from the positive x-axis in the
x-y plane, elevation from the positive z-axis (polar angle), so the unit
vector of ``(az, el)`` is ``(sin el cos az, sin el sin az, cos el)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "ArrayGeometry",
    "DesignGrid",
    "Direction",
    "SteeringError",
    "SteeringState",
    "angular_distance",
    "interpolation_factors",
    "linear_array",
    "make_design_grid",
    "make_pld_grid",
    "spherical_cap_array",
    "unit_vectors",
]


class SteeringError(ValueError):
    """A steering request falls outside the interpolation domain."""


@dataclass(frozen=True)
class Direction:
    az: float
    el: float

    def __post_init__(self):
        az = float(self.az)
        el = float(self.el)
        if not (np.isfinite(az) and np.isfinite(el)):
            raise ValueError(f"non-finite direction ({az}, {el})")
        if el < 0.0 or el > 180.0:
            raise ValueError(f"elevation {el} outside [0, 180]")
        az = az % 360.0
        if az == 360.0:  # -tiny % 360 rounds up
            az = 0.0
        object.__setattr__(self, "az", az)
        object.__setattr__(self, "el", el)

    @property
    def unit(self) -> np.ndarray:
        return unit_vectors(self.az, self.el)

    def __iter__(self):
        yield self.az
        yield self.el

    def __str__(self):
        return f"({self.az:g}, {self.el:g})"


def unit_vectors(az, el) -> np.ndarray:
    """Unit vectors for azimuth/elevation arrays (degrees); shape ``(..., 3)``."""
    az = np.deg2rad(np.asarray(az, dtype=float))
    el = np.deg2rad(np.asarray(el, dtype=float))
    s = np.sin(el)
    return np.stack([s * np.cos(az), s * np.sin(az), np.cos(el)], axis=-1)


def angular_distance(a: Direction, b: Direction) -> float:
    """Great-circle angle between two directions in degrees."""
    return float(_angle_between(a.unit, b.unit))


def _angle_between(u, v):
    # atan2 form stays accurate for nearly (anti)parallel vectors
    cross = np.linalg.norm(np.cross(u, v), axis=-1)
    dot = np.sum(u * v, axis=-1)
    return np.rad2deg(np.arctan2(cross, dot))


@dataclass(frozen=True)
class ArrayGeometry:
    """Microphone positions in meters, shape ``(N, 3)``."""

    positions: np.ndarray
    labels: tuple = ()

    def __post_init__(self):
        pos = np.atleast_2d(np.asarray(self.positions, dtype=float))
        if pos.ndim != 2 or pos.shape[1] != 3 or pos.shape[0] < 1:
            raise ValueError(f"positions must be an (N, 3) array, got {pos.shape}")
        if not np.all(np.isfinite(pos)):
            raise ValueError("microphone positions must be finite")
        diff = pos[:, None, :] - pos[None, :, :]
        dist = np.linalg.norm(diff, axis=-1) + np.eye(pos.shape[0])
        if np.any(dist <= 1e-9):
            raise ValueError("two microphones share the same position")
        labels = tuple(self.labels) or tuple(f"mic{n}" for n in range(pos.shape[0]))
        if len(labels) != pos.shape[0]:
            raise ValueError("one label per microphone required")
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "labels", labels)

    @property
    def n_mics(self) -> int:
        return self.positions.shape[0]

    def to_dict(self) -> dict:
        return {"positions": self.positions.tolist(), "labels": list(self.labels)}


def spherical_cap_array(n: int = 12, radius: float = 0.09, cap_deg: float = 75.0,
                        front: Direction = Direction(90.0, 90.0)) -> ArrayGeometry:
    """``n`` microphones spread over a spherical cap facing ``front``.

    Points follow a golden-angle spiral with equal-area spacing in the cap,
    which mimics a head-mounted array looking at the frontal hemisphere.
    """
    if n < 1:
        raise ValueError("need at least one microphone")
    k = np.arange(n) + 0.5
    cosang = 1.0 - (1.0 - np.cos(np.deg2rad(cap_deg))) * k / n
    polar = np.arccos(cosang)
    spin = np.pi * (3.0 - np.sqrt(5.0)) * np.arange(n)
    local = np.stack([np.sin(polar) * np.cos(spin), np.sin(polar) * np.sin(spin), np.cos(polar)], -1)
    # rotate local +z onto the front axis
    axis = front.unit
    ref = np.array([0.0, 0.0, 1.0]) if abs(axis[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    e1 = np.cross(ref, axis)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(axis, e1)
    rot = np.stack([e1, e2, axis], axis=1)
    pos = radius * local @ rot.T
    return ArrayGeometry(pos, tuple(f"cap{i}" for i in range(n)))


def linear_array(n: int, spacing: float, axis: int = 0) -> ArrayGeometry:
    """Uniform line array centered on the origin along coordinate ``axis``."""
    pos = np.zeros((n, 3))
    pos[:, axis] = (np.arange(n) - (n - 1) / 2.0) * spacing
    return ArrayGeometry(pos)


@dataclass(frozen=True)
class DesignGrid:
    """Directions with solid-angle quadrature weights summing to 4*pi."""

    az: np.ndarray
    el: np.ndarray
    weights: np.ndarray
    step: float | None = None
    _units: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        az = np.asarray(self.az, dtype=float).reshape(-1) % 360.0
        el = np.asarray(self.el, dtype=float).reshape(-1)
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if not (az.size == el.size == w.size) or az.size < 1:
            raise ValueError("grid arrays must be non-empty and of equal length")
        if np.any(w <= 0):
            raise ValueError("quadrature weights must be positive")
        if abs(w.sum() - 4 * np.pi) > 1e-9 * 4 * np.pi:
            raise ValueError(f"quadrature weights sum to {w.sum()}, expected 4*pi")
        if np.any((el < 0) | (el > 180)):
            raise ValueError("grid elevations outside [0, 180]")
        for name, arr in (("az", az), ("el", el), ("weights", w)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        units = unit_vectors(az, el)
        units.setflags(write=False)
        object.__setattr__(self, "_units", units)

    def __len__(self):
        return self.az.size

    @property
    def units(self) -> np.ndarray:
        return self._units

    @property
    def directions(self) -> list[Direction]:
        return [Direction(a, e) for a, e in zip(self.az, self.el)]

    def distances(self, look: Direction) -> np.ndarray:
        """Great-circle distance (degrees) from ``look`` to every grid point."""
        return _angle_between(self._units, look.unit[None, :])

    def nearest(self, look: Direction) -> int:
        return int(np.argmin(self.distances(look)))

    def integrate(self, values) -> float:
        return float(np.sum(self.weights * np.asarray(values)))


def make_design_grid(step_deg: float) -> DesignGrid:
    """Equiangular sphere grid with single-point poles.

    Rings at elevations ``step .. 180 - step`` carry ``360 / step`` azimuths
    each; the poles carry spherical-cap weights.  Ordering is elevation-major.
    """
    step = float(step_deg)
    if step <= 0 or not float(180.0 / step).is_integer() or not float(360.0 / step).is_integer():
        raise ValueError(f"grid step {step_deg} must divide 180 degrees")
    n_ring = int(round(180.0 / step)) - 1
    n_az = int(round(360.0 / step))
    h = np.deg2rad(step)
    az = [0.0]
    el = [0.0]
    w = [2 * np.pi * (1 - np.cos(h / 2))]
    ring_az = np.arange(n_az) * step
    for i in range(1, n_ring + 1):
        e = i * step
        az.extend(ring_az)
        el.extend([e] * n_az)
        w.extend([np.sin(np.deg2rad(e)) * h * h] * n_az)
    az.append(0.0)
    el.append(180.0)
    w.append(w[0])
    w = np.asarray(w)
    w *= 4 * np.pi / w.sum()
    return DesignGrid(np.asarray(az), np.asarray(el), w, step)


@dataclass(frozen=True)
class SteeringState:
    """Polynomial interpolation variables ``(d_phi, d_theta)`` in [-1, 1]."""

    d_phi: float = 0.0
    d_theta: float = 0.0

    def __post_init__(self):
        for name in ("d_phi", "d_theta"):
            v = float(getattr(self, name))
            if not np.isfinite(v):
                raise SteeringError(f"{name} is not finite")
            if v < -1.0 - 1e-12 or v > 1.0 + 1e-12:
                raise SteeringError(f"{name}={v} outside [-1, 1]; extrapolation is not supported")
            object.__setattr__(self, name, min(1.0, max(-1.0, v)))

    def direction(self) -> Direction:
        return Direction(90.0 + 90.0 * self.d_phi, 90.0 + 90.0 * self.d_theta)

    def monomials(self, P: int, R: int) -> np.ndarray:
        """Row ``[d_theta^r d_phi^p]`` ordered r-major, p-minor (length (P+1)(R+1))."""
        return np.kron(self.d_theta ** np.arange(R + 1), self.d_phi ** np.arange(P + 1))


def interpolation_factors(direction: Direction) -> SteeringState:
    """Map a frontal-hemisphere direction to ``((az-90)/90, (el-90)/90)``."""
    az, el = direction.az, direction.el
    if az > 180.0:
        raise SteeringError(f"azimuth {az} outside the steering range [0, 180]")
    return SteeringState((az - 90.0) / 90.0, (el - 90.0) / 90.0)


def _samples(lo, hi, step, what):
    lo, hi = float(lo), float(hi)
    if hi < lo:
        raise ValueError(f"empty {what} range [{lo}, {hi}]")
    if lo < 0 or hi > 180:
        raise ValueError(f"{what} range [{lo}, {hi}] outside [0, 180]")
    span = hi - lo
    if span == 0:
        return np.array([lo])
    count = span / step
    if abs(count - round(count)) > 1e-9:
        raise ValueError(f"step {step} does not divide the {what} span {span}")
    return lo + step * np.arange(int(round(count)) + 1)


def make_pld_grid(az_range: Sequence[float], el_range: Sequence[float], step: float) -> list[Direction]:
    """Tensor grid of prototype look directions, elevation outer, azimuth inner."""
    if step <= 0:
        raise ValueError("step must be positive")
    azs = _samples(*az_range, step, "azimuth")
    els = _samples(*el_range, step, "elevation")
    return [Direction(a, e) for e in els for a in azs]


def directions_from_pairs(pairs: Iterable[Sequence[float]]) -> list[Direction]:
    return [Direction(float(a), float(e)) for a, e in pairs]
