"""Sensor response models g_n(omega, direction).

Time convention is ``exp(+j omega t)``: a signal arriving ``tau`` seconds
later than at the origin carries the phase ``-omega tau``.  A plane wave from
direction ``u`` reaches a microphone at ``p`` earlier by ``<u, p> / c``, so
the free-field response is ``exp(+j omega <u, p> / c)``.  Measured impulse
responses follow the same convention through the DFT kernel
``exp(-j omega n / fs)``, which keeps analytic and measured models
interchangeable.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import special

from .geometry import ArrayGeometry, Direction, unit_vectors

__all__ = [
    "FreeFieldModel",
    "IRSet",
    "IRSetError",
    "MeasuredModel",
    "NumericFailure",
    "RigidSphereModel",
    "freefield_steering",
    "impulse_responses",
    "load_ir_set",
    "measured_steering",
    "model_from_dict",
    "save_ir_set",
    "sphere_steering",
]

SOUND_SPEED = 343.0


class NumericFailure(RuntimeError):
    pass


class IRSetError(ValueError):
    pass


def _as_angles(directions):
    if isinstance(directions, Direction):
        directions = [directions]
    if hasattr(directions, "az") and hasattr(directions, "weights"):
        return np.asarray(directions.az), np.asarray(directions.el)
    az = np.array([d.az for d in directions], dtype=float)
    el = np.array([d.el for d in directions], dtype=float)
    return az, el


class FreeFieldModel:
    """Plane-wave propagation to point microphones in free space."""

    kind = "free_field"

    def __init__(self, geometry: ArrayGeometry, sound_speed: float = SOUND_SPEED):
        if sound_speed <= 0:
            raise ValueError("sound speed must be positive")
        self.geometry = geometry
        self.sound_speed = float(sound_speed)

    @property
    def n_mics(self) -> int:
        return self.geometry.n_mics

    def response(self, omega: float, directions) -> np.ndarray:
        """Steering matrix of shape ``(len(directions), N)``."""
        if omega < 0:
            raise ValueError("omega must be non-negative")
        az, el = _as_angles(directions)
        proj = unit_vectors(az, el) @ self.geometry.positions.T
        return np.exp(1j * (omega / self.sound_speed) * proj)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "sound_speed": self.sound_speed, **self.geometry.to_dict()}


class RigidSphereModel:
    """Surface pressure of a plane wave scattered by a rigid sphere.

    Microphones sit on the sphere of radius ``radius`` at ``mic_dirs``; the
    response is normalized to the free-field pressure at the sphere center.
    """

    kind = "rigid_sphere"

    def __init__(self, radius: float, mic_dirs, sound_speed: float = SOUND_SPEED,
                 rel_tol: float = 1e-8):
        if radius <= 0:
            raise ValueError("sphere radius must be positive")
        az, el = _as_angles(mic_dirs)
        self.radius = float(radius)
        self.mic_az = az
        self.mic_el = el
        self.mic_units = unit_vectors(az, el)
        self.sound_speed = float(sound_speed)
        self.rel_tol = rel_tol
        self.geometry = ArrayGeometry(self.radius * self.mic_units)

    @classmethod
    def from_geometry(cls, geometry: ArrayGeometry, sound_speed: float = SOUND_SPEED):
        """Use an array whose microphones all lie on a common sphere."""
        r = np.linalg.norm(geometry.positions, axis=1)
        if np.ptp(r) > 1e-6 * r.max() or r.min() <= 0:
            raise ValueError("microphones are not on a sphere centered at the origin")
        u = geometry.positions / r[:, None]
        az = np.rad2deg(np.arctan2(u[:, 1], u[:, 0])) % 360.0
        el = np.rad2deg(np.arccos(np.clip(u[:, 2], -1, 1)))
        return cls(float(r.mean()), [Direction(a, e) for a, e in zip(az, el)], sound_speed)

    @property
    def n_mics(self) -> int:
        return self.mic_units.shape[0]

    def response(self, omega: float, directions) -> np.ndarray:
        if omega < 0:
            raise ValueError("omega must be non-negative")
        az, el = _as_angles(directions)
        cos_t = np.clip(unit_vectors(az, el) @ self.mic_units.T, -1.0, 1.0)
        ka = omega * self.radius / self.sound_speed
        return sphere_series(ka, cos_t, self.rel_tol)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "sound_speed": self.sound_speed,
            "radius": self.radius,
            "mic_dirs": [[float(a), float(e)] for a, e in zip(self.mic_az, self.mic_el)],
        }


def _hankel2_derivative(m: int, x: float) -> complex:
    return special.spherical_jn(m, x, derivative=True) - 1j * special.spherical_yn(m, x, derivative=True)


def sphere_series(ka: float, cos_t, rel_tol: float = 1e-8, max_order: int | None = None):
    """Rigid-sphere surface response ``-j/(ka)^2 sum (2m+1) j^m P_m(cos) / h_m'(ka)``.

    Terms are added until the bound ``(2m+1)/|h_m'(ka)|`` on the next term
    drops below ``rel_tol`` times the smallest partial-sum magnitude (checked
    only once ``m >= ka``, since ``P_m`` may vanish for isolated angles).
    """
    cos_t = np.asarray(cos_t, dtype=float)
    if ka == 0.0:
        return np.ones(cos_t.shape, dtype=complex)
    cap = math.ceil(math.e * ka) + 20 if max_order is None else max_order
    p_prev = np.ones_like(cos_t)
    p_cur = cos_t.copy()
    total = np.zeros(cos_t.shape, dtype=complex)
    with np.errstate(over="ignore", invalid="ignore"):
        for m in range(cap + 1):
            if m == 0:
                pm = p_prev
            elif m == 1:
                pm = p_cur
            else:
                p_next = ((2 * m - 1) * cos_t * p_cur - (m - 1) * p_prev) / m
                p_prev, p_cur = p_cur, p_next
                pm = p_cur
            hp = _hankel2_derivative(m, ka)
            if not np.isfinite(hp):
                break
            coef = (2 * m + 1) * (1j ** m) / hp
            total += coef * pm
            if max_order is None and m >= ka:
                bound = abs(coef) / (ka * ka)
                if bound <= rel_tol * np.min(np.abs(total)) / (ka * ka):
                    break
        else:
            if max_order is None:
                raise NumericFailure(
                    f"rigid-sphere series did not converge within order {cap} (ka={ka:.4g})"
                )
    return (-1j / (ka * ka)) * total


@dataclass
class IRSet:
    """Measured multichannel impulse responses on a set of directions."""

    fs: float
    directions: list
    responses: np.ndarray  # (D, N, L)

    def __post_init__(self):
        self.responses = np.asarray(self.responses, dtype=float)
        if self.fs <= 0:
            raise IRSetError("fs must be positive")
        if self.responses.ndim != 3 or self.responses.shape[0] != len(self.directions):
            raise IRSetError("responses must be (directions, channels, taps)")
        seen = set()
        for d in self.directions:
            key = (round(d.az, 9), round(d.el, 9))
            if key in seen:
                raise IRSetError(f"duplicate direction {d}")
            seen.add(key)
        self._az = np.array([d.az for d in self.directions])
        self._el = np.array([d.el for d in self.directions])
        self._units = unit_vectors(self._az, self._el)

    @property
    def n_mics(self) -> int:
        return self.responses.shape[1]

    @property
    def ir_length(self) -> int:
        return self.responses.shape[2]

    def index(self, direction: Direction, nearest: bool = False) -> int:
        daz = np.abs((self._az - direction.az + 180.0) % 360.0 - 180.0)
        hit = np.flatnonzero((daz < 1e-9) & (np.abs(self._el - direction.el) < 1e-9))
        if hit.size:
            return int(hit[0])
        # poles: azimuth is irrelevant
        if direction.el in (0.0, 180.0):
            hit = np.flatnonzero(np.abs(self._el - direction.el) < 1e-9)
            if hit.size:
                return int(hit[0])
        if nearest:
            return int(np.argmax(self._units @ direction.unit))
        raise IRSetError(f"no measured response for direction {direction}")


def save_ir_set(irset: IRSet, path) -> None:
    """Write ``manifest.json`` plus one raw float32 LE file per direction."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, d in enumerate(irset.directions):
        name = f"ir_{i:05d}.f32"
        # channel-interleaved: sample-major, channel-minor
        irset.responses[i].T.astype("<f4").tofile(path / name)
        entries.append({"az": d.az, "el": d.el, "data_file": name})
    manifest = {
        "format": "polybeam-irset",
        "version": 1,
        "fs": irset.fs,
        "n_mics": irset.n_mics,
        "ir_length": irset.ir_length,
        "entries": entries,
    }
    (path / "manifest.json").write_text(json.dumps(manifest, indent=1))


def load_ir_set(path) -> IRSet:
    path = Path(path)
    mpath = path / "manifest.json"
    if not mpath.is_file():
        raise IRSetError(f"manifest not found in {path}")
    try:
        manifest = json.loads(mpath.read_text())
        fs = float(manifest["fs"])
        n = int(manifest["n_mics"])
        length = int(manifest["ir_length"])
        entries = manifest["entries"]
    except (KeyError, TypeError, ValueError) as exc:
        raise IRSetError(f"malformed manifest: {exc}") from exc
    dirs = []
    data = []
    for e in entries:
        if "fs" in e and float(e["fs"]) != fs:
            raise IRSetError(f"fs mismatch: entry {e.get('data_file')} has {e['fs']}, set has {fs}")
        d = Direction(float(e["az"]), float(e["el"]))
        f = path / e["data_file"]
        if not f.is_file():
            raise IRSetError(f"missing response for direction {d}: {f.name} not found")
        raw = np.fromfile(f, dtype="<f4")
        if raw.size != n * length:
            raise IRSetError(
                f"{f.name}: expected {n}x{length} samples, found {raw.size}"
            )
        dirs.append(d)
        data.append(raw.reshape(length, n).T.astype(float))
    return IRSet(fs, dirs, np.stack(data) if data else np.zeros((0, n, length)))


def measured_steering(irset: IRSet, omega: float, direction: Direction,
                      nearest: bool = False) -> np.ndarray:
    """DTFT of the impulse responses measured for ``direction`` at ``omega`` (rad/s)."""
    h = irset.responses[irset.index(direction, nearest)]
    n = np.arange(irset.ir_length)
    return h @ np.exp(-1j * omega * n / irset.fs)


class MeasuredModel:
    kind = "measured"

    def __init__(self, irset: IRSet, nearest: bool = False, source: str | None = None):
        self.irset = irset
        self.nearest = nearest
        self.source = source

    @property
    def n_mics(self) -> int:
        return self.irset.n_mics

    def response(self, omega: float, directions) -> np.ndarray:
        az, el = _as_angles(directions)
        idx = [self.irset.index(Direction(a, e), self.nearest) for a, e in zip(az, el)]
        n = np.arange(self.irset.ir_length)
        kern = np.exp(-1j * omega * n / self.irset.fs)
        return self.irset.responses[idx] @ kern

    def to_dict(self) -> dict:
        return {"kind": self.kind, "path": self.source, "nearest": self.nearest}


def freefield_steering(model: FreeFieldModel, omega: float, direction: Direction) -> np.ndarray:
    return model.response(omega, [direction])[0]


def sphere_steering(model: RigidSphereModel, omega: float, direction: Direction) -> np.ndarray:
    return model.response(omega, [direction])[0]


def impulse_responses(model, direction: Direction, length: int, fs: float):
    """Causal IRs ``(N, length)`` realizing ``model`` toward ``direction``.

    Built by frequency sampling on the ``length``-point DFT grid with a bulk
    delay of ``length // 2`` samples, so the DFT of each IR equals the model
    response times ``exp(-j omega bulk / fs)`` at every bin below Nyquist.
    Returns ``(irs, bulk_delay)``.
    """
    if length < 1:
        raise ValueError("IR length must be at least one sample")
    bulk = length // 2
    k = np.arange(length // 2 + 1)
    omega = 2 * np.pi * k * fs / length
    spec = np.empty((k.size, model.n_mics), dtype=complex)
    for i, w in enumerate(omega):
        spec[i] = model.response(w, [direction])[0] * np.exp(-1j * w * bulk / fs)
    if length % 2 == 0:
        spec[-1] = spec[-1].real
    irs = np.fft.irfft(spec, n=length, axis=0).T
    return np.ascontiguousarray(irs), bulk


def model_from_dict(cfg: dict, base_dir: Path | None = None):
    """Build a steering model from its config dictionary."""
    kind = cfg.get("kind", "free_field")
    c = float(cfg.get("sound_speed", SOUND_SPEED))
    if kind == "free_field":
        return FreeFieldModel(ArrayGeometry(cfg["positions"], tuple(cfg.get("labels", ()))), c)
    if kind == "rigid_sphere":
        if "mic_dirs" in cfg:
            dirs = [Direction(a, e) for a, e in cfg["mic_dirs"]]
            return RigidSphereModel(float(cfg["radius"]), dirs, c)
        return RigidSphereModel.from_geometry(ArrayGeometry(cfg["positions"]), c)
    if kind == "measured":
        p = Path(cfg["path"])
        if base_dir is not None and not p.is_absolute():
            p = base_dir / p
        return MeasuredModel(load_ir_set(p), bool(cfg.get("nearest", False)), str(cfg["path"]))
    raise ValueError(f"unknown steering model kind {kind!r}")
