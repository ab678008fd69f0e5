"""Per-frequency robust least-squares design of polynomial beamformers.

For every design frequency the stacked weight vector ``w`` (length
``N (P+1)(R+1)``, ordered mic-major, then elevation order, then azimuth
order) minimizes::

    sum_i || G D_i w - b_i ||^2

subject to, for each prototype look direction (PLD) ``i``::

    a_i^T D_i w = 1                 (distortionless, plain transpose)
    || D_i w ||^2 <= 1 / gamma      (white noise gain, unit numerator)

``D_i = I_N kron [theta_i^r phi_i^p]`` picks the polynomial evaluated at the
PLD's interpolation factors.  With ``P = R = 0`` and one PLD this is the
fixed (non-polynomial) robust least-squares design.
"""

from __future__ import annotations

import hashlib
import json
import logging
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import solver
from .geometry import (
    DesignGrid,
    Direction,
    SteeringState,
    interpolation_factors,
    make_design_grid,
)

__all__ = [
    "DesignError",
    "DesignSpec",
    "FreqWeights",
    "InfeasibleDesign",
    "build_interpolation_matrix",
    "build_steering_matrix",
    "design_beamformer",
    "design_rlsfi",
    "desired_response",
    "load_weights",
    "mainlobe_radius",
    "save_weights",
]

log = logging.getLogger(__name__)


class DesignError(RuntimeError):
    pass


class InfeasibleDesign(DesignError):
    def __init__(self, message, freq=None, pld=None):
        super().__init__(message)
        self.freq = freq
        self.pld = pld


def mainlobe_radius(beamwidth_3db: float) -> float:
    """Support radius of the raised-cosine-squared main lobe (degrees).

    Chosen so that the response equals 2**-0.5 at half the 3-dB beamwidth.
    """
    if beamwidth_3db <= 0:
        raise ValueError("beamwidth must be positive")
    return np.pi * beamwidth_3db / (4.0 * np.arccos(2.0 ** -0.25))


def desired_response(look: Direction, grid: DesignGrid, beamwidth_3db: float) -> np.ndarray:
    """Real desired response on ``grid``: ``cos^2(pi d / 2 d0)`` inside radius ``d0``, else 0."""
    d0 = mainlobe_radius(beamwidth_3db)
    dist = grid.distances(look)
    out = np.cos(np.pi * dist / (2.0 * d0)) ** 2
    out[dist >= d0] = 0.0
    return out


def build_interpolation_matrix(n_mics: int, P: int, R: int, state: SteeringState) -> np.ndarray:
    """``D = (I_N kron [d_theta^0..d_theta^R]) kron [d_phi^0..d_phi^P]``."""
    if P < 0 or R < 0:
        raise ValueError("polynomial orders must be non-negative")
    return np.kron(np.eye(n_mics), state.monomials(P, R)[None, :])


def build_steering_matrix(model, grid, omega: float) -> np.ndarray:
    """``G[m, n] = g_n(omega, grid[m])``."""
    return model.response(omega, grid)


@dataclass
class DesignSpec:
    model: object
    fs: float = 16000.0
    fir_length: int = 128
    num_freqs: int | None = None
    P: int = 0
    R: int = 0
    plds: list = field(default_factory=lambda: [Direction(90.0, 90.0)])
    gamma: float = 0.01
    beamwidth_3db: float = 20.0
    grid_step: float = 10.0
    tol: float = 1e-9
    max_iter: int = 200

    def __post_init__(self):
        if self.num_freqs is None:
            self.num_freqs = self.fir_length // 2 + 1
        self.plds = [d if isinstance(d, Direction) else Direction(*d) for d in self.plds]
        self.validate()
        self._grid = None

    @property
    def n_mics(self) -> int:
        return self.model.n_mics

    @property
    def n_coeffs(self) -> int:
        return (self.P + 1) * (self.R + 1)

    @property
    def grid(self) -> DesignGrid:
        if self._grid is None:
            self._grid = make_design_grid(self.grid_step)
        return self._grid

    @property
    def freqs(self) -> np.ndarray:
        q = np.arange(self.num_freqs)
        return q * self.fs / (2.0 * (self.num_freqs - 1))

    @property
    def states(self) -> list[SteeringState]:
        return [interpolation_factors(d) for d in self.plds]

    def validate(self):
        n = self.model.n_mics
        if not self.gamma > 0:
            raise ValueError("WNG bound gamma must be positive")
        if self.gamma > n:
            raise ValueError(f"WNG bound {self.gamma} exceeds the number of microphones {n}")
        if self.P < 0 or self.R < 0:
            raise ValueError("polynomial orders must be non-negative")
        if len(self.plds) < 1:
            raise ValueError("at least one prototype look direction is required")
        if self.P == 0 and self.R == 0 and len(self.plds) != 1:
            raise ValueError("a non-polynomial design (P = R = 0) takes exactly one look direction")
        if self.num_freqs < 2:
            raise ValueError("need at least two design frequencies")
        if self.fir_length < 2 or self.fir_length % 2:
            raise ValueError("FIR length must be even")
        if self.fs <= 0:
            raise ValueError("fs must be positive")
        for d in self.plds:
            interpolation_factors(d)  # raises outside the steering domain
        V = np.array([s.monomials(self.P, self.R) for s in (interpolation_factors(d) for d in self.plds)])
        if np.linalg.matrix_rank(V, tol=1e-10) < self.n_coeffs:
            raise ValueError(
                f"the {len(self.plds)} look directions do not determine a polynomial with "
                f"{self.n_coeffs} coefficients; add directions or lower P/R"
            )

    def to_dict(self) -> dict:
        return {
            "model": self.model.to_dict(),
            "fs": self.fs,
            "fir_length": self.fir_length,
            "num_freqs": self.num_freqs,
            "P": self.P,
            "R": self.R,
            "plds": [[d.az, d.el] for d in self.plds],
            "gamma": self.gamma,
            "beamwidth_3db": self.beamwidth_3db,
            "grid_step": self.grid_step,
            "tol": self.tol,
            "max_iter": self.max_iter,
        }

    def spec_hash(self) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


@dataclass
class FreqWeights:
    """Optimal stacked weights per design frequency, shape ``(Q, N (P+1)(R+1))``."""

    freqs: np.ndarray
    weights: np.ndarray
    n_mics: int
    P: int
    R: int
    fs: float
    status: list
    objective: np.ndarray
    eq_residual: np.ndarray
    min_wng: np.ndarray
    iterations: np.ndarray
    spec_hash: str = ""

    @property
    def coefficients(self) -> np.ndarray:
        """Weights reshaped to ``(Q, N, R+1, P+1)``."""
        return self.weights.reshape(len(self.freqs), self.n_mics, self.R + 1, self.P + 1)

    def effective(self, state: SteeringState) -> np.ndarray:
        """Per-mic weights ``(Q, N)`` for a steering state."""
        m = state.monomials(self.P, self.R)
        return self.weights.reshape(len(self.freqs), self.n_mics, -1) @ m


def _frequency_problem(G, desired, steer, monos, gamma, real):
    """Assemble the lifted cone problem for one frequency."""
    N = G.shape[1]
    K = monos.shape[1]
    n = N * K
    GhG = G.conj().T @ G
    H = np.kron(GhG, monos.T @ monos)
    f = np.zeros(n, dtype=complex)
    r = 0.0
    C = np.empty((len(desired), n), dtype=complex)
    cones = []
    for i, (b, a, m) in enumerate(zip(desired, steer, monos)):
        f += np.kron(G.conj().T @ b, m)
        r += float(np.vdot(b, b).real)
        C[i] = np.kron(a, m)
        cones.append((np.kron(np.eye(N), m[None, :]), 1.0 / np.sqrt(gamma)))
    lifted = solver.lift_complex(solver.ComplexProblem(H, f, r, C, np.ones(len(desired)), tuple(cones)))
    if not real:
        return lifted
    # real-valued weights: keep the u-block and drop rows that vanish identically
    Cr = lifted.C[:, :n]
    dr = lifted.d
    keep = np.linalg.norm(Cr, axis=1) > 1e-12 * max(1.0, np.linalg.norm(Cr))
    if np.any(np.abs(dr[~keep]) > 0):
        raise InfeasibleDesign("real-valued weights cannot satisfy the distortionless constraint")
    cones_r = []
    for F, rho in lifted.cones:
        Fr = F[:, :n]
        cones_r.append((Fr[np.linalg.norm(Fr, axis=1) > 0], rho))
    return solver.ConicProblem(lifted.H[:n, :n], lifted.f[:n], lifted.r, Cr[keep], dr[keep], tuple(cones_r))


def _solve_frequency(model, grid, freq, fs, desired, plds, monos, gamma, tol, max_iter):
    omega = 2 * np.pi * freq
    G = build_steering_matrix(model, grid, omega)
    steer = model.response(omega, plds)
    real = freq == 0.0 or np.isclose(freq, fs / 2.0, rtol=0, atol=1e-9 * fs)
    problem = _frequency_problem(G, desired, steer, monos, gamma, real)
    res = solver.solve(problem, tol=tol, max_iter=max_iter)
    n = G.shape[1] * monos.shape[1]
    w = res.x[:n].astype(complex)
    if not real:
        w = solver.unlift(res.x)
    return w, res, steer


def design_beamformer(spec: DesignSpec, desired=None, freqs=None, workers: int = 1) -> FreqWeights:
    """Solve the constrained least-squares problem at every design frequency.

    ``desired`` holds one response vector per PLD (default: main lobes of
    ``spec.beamwidth_3db`` centered on each PLD).  ``freqs`` overrides the
    uniform grid, e.g. to evaluate the optimum between design points.
    """
    grid = spec.grid
    if desired is None:
        desired = [desired_response(d, grid, spec.beamwidth_3db) for d in spec.plds]
    desired = [np.asarray(b, dtype=complex) for b in desired]
    if len(desired) != len(spec.plds) or any(b.shape != (len(grid),) for b in desired):
        raise ValueError("need one desired response of grid length per look direction")
    monos = np.array([s.monomials(spec.P, spec.R) for s in spec.states])
    freqs = spec.freqs if freqs is None else np.asarray(freqs, dtype=float)

    def job(f):
        return _solve_frequency(spec.model, grid, f, spec.fs, desired, spec.plds, monos,
                                spec.gamma, spec.tol, spec.max_iter)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(job, freqs))
    else:
        results = [job(f) for f in freqs]

    n = spec.n_mics * spec.n_coeffs
    W = np.zeros((len(freqs), n), dtype=complex)
    status, obj, eqr, wng, iters = [], [], [], [], []
    for q, (f, (w, res, steer)) in enumerate(zip(freqs, results)):
        if res.status == solver.INFEASIBLE:
            pld = res.violated_cone
            raise InfeasibleDesign(
                f"design infeasible at {f:.2f} Hz: WNG bound {10 * np.log10(spec.gamma):.2f} dB "
                f"cannot be met at look direction {spec.plds[pld]} ({res.message})",
                freq=float(f), pld=pld,
            )
        if res.status != solver.OPTIMAL:
            raise DesignError(
                f"solver failed at {f:.2f} Hz after {res.iterations} iterations: {res.message} "
                f"(equality residual {res.eq_residual:.2e}, cone violation {res.cone_violation:.2e})"
            )
        Dw = w.reshape(spec.n_mics, -1) @ monos.T  # (N, I)
        resp = np.einsum("in,ni->i", steer, Dw)
        W[q] = w
        status.append(res.status)
        obj.append(res.objective)
        eqr.append(float(np.max(np.abs(resp - 1.0))))
        wng.append(float(np.min(1.0 / np.sum(np.abs(Dw) ** 2, axis=0))))
        iters.append(res.iterations)
        log.debug("f=%.1f Hz: %d iterations, objective %.6g", f, res.iterations, res.objective)
    return FreqWeights(
        freqs=np.asarray(freqs, dtype=float),
        weights=W,
        n_mics=spec.n_mics,
        P=spec.P,
        R=spec.R,
        fs=spec.fs,
        status=status,
        objective=np.asarray(obj),
        eq_residual=np.asarray(eqr),
        min_wng=np.asarray(wng),
        iterations=np.asarray(iters),
        spec_hash=spec.spec_hash(),
    )


def design_rlsfi(model, look: Direction, grid: DesignGrid, freqs, fs: float, gamma: float,
                 beamwidth_3db: float = 20.0, desired=None, tol: float = 1e-9,
                 max_iter: int = 200) -> np.ndarray:
    """Fixed-look robust LS design, assembled without interpolation matrices.

    Returns weights of shape ``(Q, N)``.  Serves as the reference the
    polynomial design is compared against.
    """
    b = desired_response(look, grid, beamwidth_3db) if desired is None else np.asarray(desired)
    b = b.astype(complex)
    out = np.zeros((len(freqs), model.n_mics), dtype=complex)
    rho = 1.0 / np.sqrt(gamma)
    for q, f in enumerate(freqs):
        omega = 2 * np.pi * f
        G = model.response(omega, grid)
        a = model.response(omega, [look])[0]
        N = G.shape[1]
        cp = solver.ComplexProblem.from_least_squares(G, b, a[None, :], [1.0], ((np.eye(N), rho),))
        prob = solver.lift_complex(cp)
        real = f == 0.0 or np.isclose(f, fs / 2.0, rtol=0, atol=1e-9 * fs)
        if real:
            Cr = prob.C[:, :N]
            keep = np.linalg.norm(Cr, axis=1) > 1e-12 * max(1.0, np.linalg.norm(Cr))
            prob = solver.ConicProblem(prob.H[:N, :N], prob.f[:N], prob.r, Cr[keep], prob.d[keep],
                                       ((np.eye(N), rho),))
        res = solver.solve(prob, tol=tol, max_iter=max_iter)
        if res.status == solver.INFEASIBLE:
            raise InfeasibleDesign(f"fixed design infeasible at {f:.2f} Hz", freq=float(f), pld=0)
        if res.status != solver.OPTIMAL:
            raise DesignError(f"solver failed at {f:.2f} Hz: {res.message}")
        out[q] = res.x[:N] if real else solver.unlift(res.x)
    return out


_FW_MAGIC = b"PBFW"
_FW_VERSION = 1


def save_weights(fw: FreqWeights, path) -> None:
    """Binary weights file: magic, u16 version, u32 header length, JSON header,
    then ``Q * N(P+1)(R+1)`` little-endian complex128 weights (frequency-major)."""
    header = {
        "freqs": [float(f) for f in fw.freqs],
        "n_mics": fw.n_mics,
        "P": fw.P,
        "R": fw.R,
        "fs": float(fw.fs),
        "status": list(fw.status),
        "objective": [float(v) for v in fw.objective],
        "eq_residual": [float(v) for v in fw.eq_residual],
        "min_wng": [float(v) for v in fw.min_wng],
        "iterations": [int(v) for v in fw.iterations],
        "spec_hash": fw.spec_hash,
        "shape": list(fw.weights.shape),
    }
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    with open(Path(path), "wb") as fh:
        fh.write(_FW_MAGIC + struct.pack("<HI", _FW_VERSION, len(head)) + head)
        fh.write(np.ascontiguousarray(fw.weights, dtype="<c16").tobytes())


def load_weights(path) -> FreqWeights:
    data = Path(path).read_bytes()
    if not data.startswith(_FW_MAGIC):
        raise ValueError(f"{path}: not a weights file")
    version, hlen = struct.unpack_from("<HI", data, 4)
    if version != _FW_VERSION:
        raise ValueError(f"{path}: unsupported weights version {version}")
    off = 4 + struct.calcsize("<HI")
    h = json.loads(data[off:off + hlen])
    off += hlen
    shape = tuple(h["shape"])
    if len(data) - off != 16 * int(np.prod(shape)):
        raise ValueError(f"{path}: weight block has the wrong size")
    W = np.frombuffer(data, dtype="<c16", offset=off).reshape(shape).astype(complex)
    return FreqWeights(
        freqs=np.asarray(h["freqs"]), weights=W, n_mics=h["n_mics"], P=h["P"], R=h["R"],
        fs=h["fs"], status=h["status"], objective=np.asarray(h["objective"]),
        eq_residual=np.asarray(h["eq_residual"]), min_wng=np.asarray(h["min_wng"]),
        iterations=np.asarray(h["iterations"]), spec_hash=h["spec_hash"],
    )
