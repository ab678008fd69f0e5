"""Deterministic convex solver for least squares with norm-ball constraints.

The problems handled here have the form::

    minimize    ||A x - b||^2
    subject to  C x = d
                ||F_k x|| <= rho_k,   k = 1..K

The objective is carried in Gram form (``H = A^T A``, ``f = A^T b``,
``r = b^T b``) so that large stacked design matrices never have to be
materialized.  Each norm ball is written as the second-order cone constraint
``(rho_k, F_k x) in SOC`` and the resulting cone QP is solved with a
primal-dual interior-point method using Nesterov-Todd scaling and a Mehrotra
predictor-corrector step.

Complex problems are mapped onto real ones with :func:`lift_complex`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg as la

__all__ = [
    "ComplexProblem",
    "ConicProblem",
    "SolveResult",
    "dump_problem",
    "lift_complex",
    "solve",
]

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
MAX_ITER = "max_iter"

_RANK_TOL = 1e-10
_FEAS_TOL = 1e-8
_PHASE1_TOL = 1e-6


class ProblemError(ValueError):
    """Raised for structurally invalid problems (bad shapes, dependent rows)."""


@dataclass(frozen=True)
class ConicProblem:
    """Real least-squares problem with equality and norm-ball constraints.

    The objective is ``x^T H x - 2 f^T x + r`` which equals ``||A x - b||^2``
    when built by :meth:`from_least_squares`.
    """

    H: np.ndarray
    f: np.ndarray
    r: float = 0.0
    C: np.ndarray | None = None
    d: np.ndarray | None = None
    cones: tuple = ()

    def __post_init__(self):
        H = np.atleast_2d(np.asarray(self.H, dtype=float))
        n = H.shape[0]
        if H.shape != (n, n):
            raise ProblemError(f"H must be square, got {H.shape}")
        f = np.asarray(self.f, dtype=float).reshape(-1)
        if f.shape != (n,):
            raise ProblemError(f"f must have length {n}, got {f.shape}")
        if self.C is None:
            C = np.zeros((0, n))
            d = np.zeros(0)
        else:
            C = np.atleast_2d(np.asarray(self.C, dtype=float))
            d = np.asarray(self.d, dtype=float).reshape(-1)
        if C.shape[1] != n or C.shape[0] != d.shape[0]:
            raise ProblemError(f"equality block has shape {C.shape}, rhs {d.shape}")
        cones = []
        for F, rho in self.cones:
            F = np.atleast_2d(np.asarray(F, dtype=float))
            if F.shape[1] != n:
                raise ProblemError(f"cone matrix has {F.shape[1]} columns, expected {n}")
            if not rho > 0:
                raise ProblemError(f"cone radius must be positive, got {rho}")
            cones.append((F, float(rho)))
        for name, arr in (("H", H), ("f", f), ("C", C), ("d", d)):
            if not np.all(np.isfinite(arr)):
                raise ProblemError(f"{name} contains non-finite values")
        object.__setattr__(self, "H", 0.5 * (H + H.T))
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "r", float(self.r))
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "cones", tuple(cones))

    @classmethod
    def from_least_squares(cls, A, b, C=None, d=None, cones=()):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        b = np.asarray(b, dtype=float).reshape(-1)
        return cls(A.T @ A, A.T @ b, float(b @ b), C, d, tuple(cones))

    @property
    def n(self) -> int:
        return self.H.shape[0]

    def objective(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(x @ self.H @ x - 2.0 * self.f @ x + self.r)

    def equality_residual(self, x) -> float:
        if self.C.shape[0] == 0:
            return 0.0
        return float(np.max(np.abs(self.C @ x - self.d)))

    def cone_violations(self, x) -> np.ndarray:
        """Relative violation ``max(0, ||F_k x|| - rho_k) / rho_k`` per cone."""
        return np.array(
            [max(0.0, np.linalg.norm(F @ x) - rho) / rho for F, rho in self.cones]
        )

    def check_rank(self) -> None:
        """Reject linearly dependent equality rows."""
        if self.C.shape[0] == 0:
            return
        sv = np.linalg.svd(self.C, compute_uv=False)
        if self.C.shape[0] > self.C.shape[1] or sv[-1] <= _RANK_TOL * sv[0]:
            raise ProblemError(
                "equality constraints are linearly dependent "
                f"(smallest/largest singular value {sv[-1] / sv[0]:.3e}); "
                "duplicate look directions?"
            )


@dataclass(frozen=True)
class ComplexProblem:
    """Complex counterpart of :class:`ConicProblem`.

    Objective ``w^H H w - 2 Re(w^H f) + r``; equalities ``C w = d`` use the
    plain (non-conjugated) product; balls ``||F_k w|| <= rho_k``.
    """

    H: np.ndarray
    f: np.ndarray
    r: float = 0.0
    C: np.ndarray | None = None
    d: np.ndarray | None = None
    cones: tuple = ()

    @classmethod
    def from_least_squares(cls, A, b, C=None, d=None, cones=()):
        A = np.atleast_2d(np.asarray(A, dtype=complex))
        b = np.asarray(b, dtype=complex).reshape(-1)
        return cls(A.conj().T @ A, A.conj().T @ b, float(np.vdot(b, b).real), C, d, tuple(cones))

    @property
    def n(self) -> int:
        return np.shape(self.H)[0]

    def objective(self, w) -> float:
        w = np.asarray(w, dtype=complex)
        H = np.asarray(self.H)
        return float((np.vdot(w, H @ w) - 2.0 * np.vdot(w, self.f)).real + self.r)


def lift_complex(problem: ComplexProblem) -> ConicProblem:
    """Embed a complex problem in R^{2n} via ``w = u + j v -> x = [u, v]``.

    The equality ``c^T w = d`` becomes the pair ``Re(c^T w) = Re d`` and
    ``Im(c^T w) = Im d``; norms are preserved exactly.
    """
    H = np.asarray(problem.H, dtype=complex)
    f = np.asarray(problem.f, dtype=complex).reshape(-1)
    n = H.shape[0]
    HL = np.block([[H.real, -H.imag], [H.imag, H.real]])
    fL = np.concatenate([f.real, f.imag])
    if problem.C is None:
        CL, dL = None, None
    else:
        C = np.atleast_2d(np.asarray(problem.C, dtype=complex))
        d = np.asarray(problem.d, dtype=complex).reshape(-1)
        CL = np.empty((2 * C.shape[0], 2 * n))
        CL[0::2] = np.hstack([C.real, -C.imag])
        CL[1::2] = np.hstack([C.imag, C.real])
        dL = np.empty(2 * d.shape[0])
        dL[0::2] = d.real
        dL[1::2] = d.imag
    cones = []
    for F, rho in problem.cones:
        F = np.atleast_2d(np.asarray(F, dtype=complex))
        cones.append((np.block([[F.real, -F.imag], [F.imag, F.real]]), rho))
    return ConicProblem(HL, fL, problem.r, CL, dL, tuple(cones))


def unlift(x: np.ndarray) -> np.ndarray:
    """Inverse of the real embedding used by :func:`lift_complex`."""
    n = x.shape[0] // 2
    return x[:n] + 1j * x[n:]


@dataclass
class SolveResult:
    x: np.ndarray
    objective: float
    status: str
    eq_residual: float
    cone_violation: float
    iterations: int
    stationarity: float = np.nan
    gap: float = np.nan
    violated_cone: int | None = None
    message: str = ""
    history: list = field(default_factory=list, repr=False)

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL


# --------------------------------------------------------------------------
# Second-order cone algebra.  Each cone block is a vector u = (u0, u1).
# --------------------------------------------------------------------------


def _jdot(u):
    """u^T J u computed as a product of factors to limit cancellation."""
    n1 = np.linalg.norm(u[1:])
    return (u[0] - n1) * (u[0] + n1)


def _jprod(u, v):
    return np.concatenate([[u @ v], u[0] * v[1:] + v[0] * u[1:]])


def _jdiv(lmb, r):
    """Solve ``lmb o u = r`` for u."""
    det = _jdot(lmb)
    u0 = (lmb[0] * r[0] - lmb[1:] @ r[1:]) / det
    u1 = (r[1:] - lmb[1:] * u0) / lmb[0]
    return np.concatenate([[u0], u1])


class _NTScaling:
    """Nesterov-Todd scaling ``W = beta (2 v v^T - J)`` of one cone block.

    Satisfies ``W z = W^{-1} s = lambda``.
    """

    __slots__ = ("beta", "v", "Jv")

    def __init__(self, s, z):
        sn = np.sqrt(_jdot(s))
        zn = np.sqrt(_jdot(z))
        sb = s / sn
        zb = z / zn
        gam = np.sqrt(0.5 * (1.0 + sb @ zb))
        wb = sb.copy()
        wb[0] += zb[0]
        wb[1:] -= zb[1:]
        wb /= 2.0 * gam
        v = wb.copy()
        v[0] += 1.0
        v /= np.sqrt(2.0 * (wb[0] + 1.0))
        self.beta = np.sqrt(sn / zn)
        self.v = v
        Jv = v.copy()
        Jv[1:] *= -1.0
        self.Jv = Jv

    def apply(self, u):
        out = 2.0 * self.v * (self.v @ u)
        out[0] -= u[0]
        out[1:] += u[1:]
        return self.beta * out

    def apply_inv(self, u):
        out = 2.0 * self.Jv * (self.Jv @ u)
        out[0] -= u[0]
        out[1:] += u[1:]
        return out / self.beta

    def apply_inv_mat(self, M):
        out = 2.0 * np.outer(self.Jv, self.Jv @ M)
        out[0] -= M[0]
        out[1:] += M[1:]
        return out / self.beta


def _max_step(lmb, d):
    """Largest alpha >= 0 with ``lmb + alpha d`` in the cone (lmb interior)."""
    n1 = np.linalg.norm(d[1:])
    a = (d[0] - n1) * (d[0] + n1)
    b = 2.0 * (lmb[0] * d[0] - lmb[1:] @ d[1:])
    c = _jdot(lmb)
    if a == 0.0:
        return -c / b if b < 0.0 else np.inf
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        return np.inf
    sq = np.sqrt(disc)
    qq = -0.5 * (b + np.copysign(sq, b))
    roots = [qq / a]
    if qq != 0.0:
        roots.append(c / qq)
    pos = [t for t in roots if t > 0.0]
    if not pos:
        return np.inf
    return min(pos) if a > 0.0 else max(pos)


def _blocks(u, slices):
    return [u[sl] for sl in slices]


# --------------------------------------------------------------------------
# Interior-point core
# --------------------------------------------------------------------------


def _coneqp(P, q, C, d, G, h, slices, tol, max_iter, feas_check=None):
    """Primal-dual IPM for ``min 1/2 x'Px + q'x  s.t. Cx = d, Gx + s = h, s in K``."""
    n = P.shape[0]
    p = C.shape[0]
    ncones = len(slices)
    e = np.zeros(G.shape[0])
    for sl in slices:
        e[sl.start] = 1.0

    def kkt_factor(Gs):
        K = np.zeros((n + p, n + p))
        K[:n, :n] = P + Gs.T @ Gs
        K[:n, n:] = C.T
        K[n:, :n] = C
        return K, la.lu_factor(K, check_finite=False)

    def kkt_solve(K, fac, rhs):
        sol = la.lu_solve(fac, rhs, check_finite=False)
        # one step of iterative refinement
        sol += la.lu_solve(fac, rhs - K @ sol, check_finite=False)
        return sol

    # initial point: least-norm slack solution shifted into the cone
    K0, fac0 = kkt_factor(G)
    sol = kkt_solve(K0, fac0, np.concatenate([-q + G.T @ h, d]))
    x = sol[:n]
    y = sol[n:]
    z = G @ x - h
    s = -z.copy()
    for u in (s, z):
        shift = max(np.linalg.norm(u[sl][1:]) - u[sl][0] for sl in slices)
        if shift >= 0.0:
            u += (1.0 + shift) * e

    nrm_q = max(1.0, np.linalg.norm(q))
    nrm_d = max(1.0, np.linalg.norm(d)) if p else 1.0
    nrm_h = max(1.0, np.linalg.norm(h))
    history = []
    status = MAX_ITER
    message = "iteration limit reached"
    it = 0
    for it in range(max_iter + 1):
        rx = P @ x + q + C.T @ y + G.T @ z
        ry = C @ x - d
        rz = G @ x + s - h
        gap = float(s @ z)
        pcost = 0.5 * x @ P @ x + q @ x
        pres = max(np.linalg.norm(ry) / nrm_d if p else 0.0, np.linalg.norm(rz) / nrm_h)
        dres = np.linalg.norm(rx) / nrm_q
        history.append((it, pcost, pres, dres, gap))
        if not (np.isfinite(pcost) and np.isfinite(gap)):
            status, message = "failed", "non-finite iterate"
            break
        if pres <= tol and dres <= tol and gap <= tol * max(1.0, abs(pcost)):
            if feas_check is None or feas_check(x):
                status, message = OPTIMAL, "converged"
                break
        if it == max_iter:
            break
        if np.linalg.norm(x) > 1e12 * (1.0 + np.linalg.norm(h)):
            status, message = "failed", "iterates diverging"
            break

        sb = _blocks(s, slices)
        zb = _blocks(z, slices)
        try:
            scal = [_NTScaling(si, zi) for si, zi in zip(sb, zb)]
        except FloatingPointError:
            status, message = "failed", "scaling breakdown"
            break
        lmb = [W.apply(zi) for W, zi in zip(scal, zb)]
        Gs = np.vstack([W.apply_inv_mat(G[sl]) for W, sl in zip(scal, slices)])
        try:
            K, fac = kkt_factor(Gs)
        except (la.LinAlgError, ValueError) as exc:
            status, message = "failed", f"KKT factorization failed: {exc}"
            break
        mu = gap / ncones

        def direction(rs_blocks):
            u = [_jdiv(l, r) for l, r in zip(lmb, rs_blocks)]
            # rz - W u, then scaled by W^{-1}
            t = np.concatenate(
                [W.apply_inv(rz[sl] - W.apply(ui)) for W, sl, ui in zip(scal, slices, u)]
            )
            rhs = np.concatenate([-rx - Gs.T @ t, -ry])
            sol = kkt_solve(K, fac, rhs)
            dx, dy = sol[:n], sol[n:]
            # W dz = W^{-1}(G dx + rz - W u)
            wdz = Gs @ dx + t
            dzt = _blocks(wdz, slices)
            dst = [-ui - wi for ui, wi in zip(u, dzt)]
            dz = np.concatenate([W.apply_inv(wi) for W, wi in zip(scal, dzt)])
            ds = np.concatenate([W.apply(si) for W, si in zip(scal, dst)])
            return dx, dy, dz, ds, dst, dzt

        def step_to_boundary(dst, dzt):
            t = np.inf
            for l, a, b in zip(lmb, dst, dzt):
                t = min(t, _max_step(l, a), _max_step(l, b))
            return t

        # predictor
        rs_aff = [_jprod(l, l) for l in lmb]
        _, _, _, _, dst_a, dzt_a = direction(rs_aff)
        alpha_aff = min(1.0, step_to_boundary(dst_a, dzt_a))
        sigma = (1.0 - alpha_aff) ** 3
        # corrector
        rs = []
        for l, a, b in zip(lmb, dst_a, dzt_a):
            r = _jprod(l, l) + _jprod(a, b)
            r[0] -= sigma * mu
            rs.append(r)
        dx, dy, dz, ds, dst, dzt = direction(rs)
        alpha = min(1.0, 0.99 * step_to_boundary(dst, dzt))
        if not np.isfinite(alpha) or alpha <= 0.0:
            status, message = "failed", "zero step length"
            break
        x = x + alpha * dx
        y = y + alpha * dy
        z = z + alpha * dz
        s = s + alpha * ds
    return x, status, message, it, history, dres, gap


def _cone_matrices(problem: ConicProblem):
    rows = []
    h = []
    slices = []
    start = 0
    n = problem.n
    for F, rho in problem.cones:
        blk = np.zeros((F.shape[0] + 1, n))
        blk[1:] = -F
        rows.append(blk)
        hk = np.zeros(F.shape[0] + 1)
        hk[0] = rho
        h.append(hk)
        slices.append(slice(start, start + F.shape[0] + 1))
        start += F.shape[0] + 1
    return rows, h, slices


def _objective_scale(problem: ConicProblem) -> float:
    # proportional to the objective, so scaling (H, f) leaves the iterates unchanged
    k = max(float(np.max(np.abs(problem.H))), float(np.max(np.abs(problem.f), initial=0.0)))
    return k if k > 0.0 else 1.0


def _phase_one(problem: ConicProblem, tol, max_iter):
    """Minimize the largest relative ball radius needed for feasibility.

    Returns ``(t, x, status)`` where ``t <= 1`` certifies feasibility of the balls.
    """
    n = problem.n
    rows, _, slices = _cone_matrices(problem)
    G = np.zeros((sum(r.shape[0] for r in rows), n + 1))
    for (F, rho), sl, blk in zip(problem.cones, slices, rows):
        G[sl, :n] = blk
        G[sl.start, n] = -rho
    h = np.zeros(G.shape[0])
    P = np.zeros((n + 1, n + 1))
    P[:n, :n] = 1e-10 * np.eye(n)
    q = np.zeros(n + 1)
    q[n] = 1.0
    C = np.hstack([problem.C, np.zeros((problem.C.shape[0], 1))])
    x, status, _, _, history, _, _ = _coneqp(P, q, C, problem.d, G, h, slices, tol, max_iter)
    if status != OPTIMAL and history:
        # t is only compared with 1 using a 1e-6 margin, so a stalled but
        # nearly converged iterate is accurate enough for the certificate
        _, pcost, pres, dres, gap = history[-1]
        if max(pres, dres, gap / max(1.0, abs(pcost))) <= _PHASE1_TOL:
            status = OPTIMAL
    return x[n], x[:n], status


def solve(problem: ConicProblem, tol: float = 1e-9, max_iter: int = 200) -> SolveResult:
    """Solve ``problem`` to a KKT-certified optimum.

    Raises :class:`ProblemError` for dependent equality rows.  Infeasible ball
    constraints are reported with ``status == "infeasible"`` and the index of
    the ball that cannot be met in ``violated_cone``.
    """
    problem.check_rank()
    n = problem.n
    if not problem.cones:
        return _solve_equality_only(problem)

    kappa = _objective_scale(problem)
    P = 2.0 * problem.H / kappa
    q = -2.0 * problem.f / kappa
    rows, h, slices = _cone_matrices(problem)
    G = np.vstack(rows)
    h = np.concatenate(h)
    d_inf = float(np.max(np.abs(problem.d), initial=0.0))
    rhos = np.array([rho for _, rho in problem.cones])

    def feasible(x):
        if problem.equality_residual(x) > _FEAS_TOL * (1.0 + d_inf):
            return False
        return bool(np.all(problem.cone_violations(x) <= _FEAS_TOL))

    with np.errstate(invalid="raise", divide="raise", over="raise"):
        try:
            x, status, message, it, history, dres, gap = _coneqp(
                P, q, problem.C, problem.d, G, h, slices, tol, max_iter, feasible
            )
        except FloatingPointError as exc:
            x, status, message, it, history, dres, gap = (
                np.zeros(n), "failed", f"floating point error: {exc}", 0, [], np.nan, np.nan
            )

    violated = None
    if status != OPTIMAL:
        t, x1, st1 = _phase_one(problem, tol, max_iter)
        if st1 == OPTIMAL and t > 1.0 + 1e-6:
            status = INFEASIBLE
            ratios = np.array([np.linalg.norm(F @ x1) / rho for F, rho in problem.cones])
            violated = int(np.argmax(ratios))
            message = (
                f"norm-ball constraints cannot be met: smallest common radius "
                f"scale is {t:.6g} (> 1), tightest ball index {violated}"
            )
            x = x1
        elif st1 == OPTIMAL and t > 1.0 - 1e-6:
            # feasible set without interior (e.g. WNG bound equal to N): re-solve
            # with balls inflated well inside the feasibility tolerance
            x, status, message = _solve_thin(problem, t, x1, tol, max_iter, feasible)
        else:
            status = MAX_ITER
    viol = problem.cone_violations(x)
    return SolveResult(
        x=x,
        objective=problem.objective(x),
        status=status,
        eq_residual=problem.equality_residual(x),
        cone_violation=float(np.max(viol * rhos)) if viol.size else 0.0,
        iterations=it,
        stationarity=float(dres),
        gap=float(gap),
        violated_cone=violated,
        message=message,
        history=history,
    )


def _solve_thin(problem, t, x1, tol, max_iter, feasible):
    scale = max(t, 1.0) * (1.0 + 2e-9)
    inflated = ConicProblem(problem.H, problem.f, problem.r, problem.C, problem.d,
                            tuple((F, rho * scale) for F, rho in problem.cones))
    kappa = _objective_scale(problem)
    rows, h, slices = _cone_matrices(inflated)
    try:
        with np.errstate(invalid="raise", divide="raise", over="raise"):
            x, status, *_ = _coneqp(2.0 * problem.H / kappa, -2.0 * problem.f / kappa, problem.C,
                                    problem.d, np.vstack(rows), np.concatenate(h), slices,
                                    tol, max_iter)
    except FloatingPointError:
        status = "failed"
    if status == OPTIMAL and feasible(x):
        return x, OPTIMAL, "converged on a feasible set without interior"
    if feasible(x1):
        return x1, OPTIMAL, "feasible set without interior; returned the phase-I point"
    return x1, MAX_ITER, "feasible set without interior; no certified point"


def _solve_equality_only(problem: ConicProblem) -> SolveResult:
    n = problem.n
    p = problem.C.shape[0]
    K = np.zeros((n + p, n + p))
    K[:n, :n] = problem.H
    K[:n, n:] = problem.C.T
    K[n:, :n] = problem.C
    rhs = np.concatenate([problem.f, problem.d])
    sol = la.solve(K, rhs)
    x = sol[:n]
    return SolveResult(
        x=x,
        objective=problem.objective(x),
        status=OPTIMAL,
        eq_residual=problem.equality_residual(x),
        cone_violation=0.0,
        iterations=1,
        stationarity=float(np.linalg.norm(problem.H @ x + problem.C.T @ sol[n:] - problem.f)),
        gap=0.0,
        message="solved KKT system directly",
    )


def dump_problem(problem: ConicProblem, path) -> None:
    """Write ``problem`` as JSON text for cross-checking with external solvers.

    Keys: ``H``, ``f``, ``r``, ``C``, ``d`` (nested lists) and ``cones``, a
    list of ``{"F": [[...]], "rho": float}``.  Objective is
    ``x'Hx - 2 f'x + r``.
    """
    doc = {
        "format": "polybeam-conic-problem",
        "version": 1,
        "H": problem.H.tolist(),
        "f": problem.f.tolist(),
        "r": problem.r,
        "C": problem.C.tolist(),
        "d": problem.d.tolist(),
        "cones": [{"F": F.tolist(), "rho": rho} for F, rho in problem.cones],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_problem(path) -> ConicProblem:
    with open(path) as fh:
        doc = json.load(fh)
    cones = tuple((np.array(c["F"]), c["rho"]) for c in doc["cones"])
    C = np.array(doc["C"]).reshape(-1, len(doc["f"]))
    return ConicProblem(np.array(doc["H"]), np.array(doc["f"]), doc["r"], C, np.array(doc["d"]), cones)


def stack_cones(blocks: Sequence[np.ndarray], rho: float):
    """Convenience: one ball of radius ``rho`` per matrix in ``blocks``."""
    return tuple((B, rho) for B in blocks)
