"""Log-barrier interior-point solvers for the three penalized regressions.

The central path starts at ``t0`` and multiplies ``t`` by ``t_mult`` until
``t_max``, warm-starting each stage from the previous one.  Each stage runs
damped Newton with Armijo backtracking (sufficient decrease 1e-4, shrink 0.5)
capped by a fraction-to-boundary rule (0.99) that keeps iterates strictly
interior.  After ``t_max`` the path extends further only if the barrier
suboptimality bound (barrier degree / t) still exceeds
``gap_tol * (1 + objective)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from ._barrier import make_barrier
from .errors import ConvergenceError, InteriorViolationError
from .model import Dataset, ModelSpec

__all__ = [
    "BarrierConfig",
    "SolverSolution",
    "solve_lasso",
    "solve_group_lasso",
    "solve_sparse_group_lasso",
    "solve_model",
    "kkt_residual",
    "lambda_max",
    "penalized_objective",
]

ARMIJO_C = 1e-4
BACKTRACK = 0.5
BOUNDARY_FRACTION = 0.99
RIDGE_EPS = 1e-10
T_HARD_CAP = 1e14
MAX_BACKTRACKS = 60
DECREMENT_FLOOR = 1e-13


@dataclass(frozen=True)
class BarrierConfig:
    """Central-path schedule and inner Newton tolerances."""

    t0: float = 1.0
    t_mult: float = 10.0
    t_max: float = 1e8
    newton_tol: float = 1e-6
    max_newton: int = 60
    gap_tol: float = 1e-6

    def __post_init__(self):
        if self.t0 <= 0:
            raise ValueError("t0 must be > 0")
        if self.t_mult <= 1:
            raise ValueError("t_mult must be > 1")
        if self.t_max < self.t0:
            raise ValueError("t_max must be >= t0")
        if self.newton_tol <= 0:
            raise ValueError("newton_tol must be > 0")
        if self.max_newton < 1:
            raise ValueError("max_newton must be >= 1")
        if self.gap_tol <= 0:
            raise ValueError("gap_tol must be > 0")


def _readonly(a):
    if a is None:
        return None
    out = np.array(a, dtype=np.float64, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class SolverSolution:
    """Barrier solution: primal ``beta`` plus the auxiliary slack variables.

    ``u`` is present for lasso and sparse group, ``alpha`` for the group
    variants.  ``kkt_norm`` is the Euclidean norm of the stacked barrier
    stationarity equations at ``t_final``; ``path`` records
    ``(t, true objective)`` per stage; ``gap_bound`` is barrier degree over
    ``t_final``.
    """

    beta: np.ndarray
    u: np.ndarray | None
    alpha: np.ndarray | None
    t_final: float
    kkt_norm: float
    objective: float
    gap_bound: float
    path: tuple[tuple[float, float], ...]
    newton_iters: int

    def __post_init__(self):
        object.__setattr__(self, "beta", _readonly(self.beta))
        object.__setattr__(self, "u", _readonly(self.u))
        object.__setattr__(self, "alpha", _readonly(self.alpha))


class _NewtonStall(Exception):
    def __init__(self, z, t, gnorm):
        self.z = z
        self.t = t
        self.gnorm = gnorm


def _solve_spd(J: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Cholesky solve with escalating ridge fallback on factorization failure."""
    ridge = 0.0
    for _ in range(5):
        try:
            A = J if ridge == 0.0 else J + ridge * np.eye(J.shape[0])
            c = cho_factor(A, lower=True, check_finite=False)
            return cho_solve(c, rhs, check_finite=False)
        except np.linalg.LinAlgError:
            ridge = RIDGE_EPS if ridge == 0.0 else ridge * 100.0
    raise np.linalg.LinAlgError("Hessian factorization failed beyond ridge fallback")


def _newton_stage(barrier, z, t, tol, max_newton):
    """Minimize the barrier at fixed t; returns (z, iterations)."""
    fval = barrier.value(z, t)
    if not np.isfinite(fval):
        raise InteriorViolationError("initial point is not strictly interior")
    for k in range(max_newton):
        g = barrier.grad(z, t)
        gnorm = float(np.linalg.norm(g))
        if gnorm <= tol:
            return z, k
        dz = _solve_spd(barrier.hess(z, t), -g)
        gdz = float(g @ dz)
        if gdz >= 0.0:
            dz = -g
            gdz = -(gnorm * gnorm)
        # the squared Newton decrement -gdz bounds twice the attainable
        # decrease; below the float resolution of the objective Armijo can
        # no longer certify progress, so take pure Newton steps guarded by
        # the gradient norm instead, stopping at the machine floor
        if -gdz <= DECREMENT_FLOOR * (1.0 + abs(fval)):
            znew = z + barrier.max_step(z, dz, BOUNDARY_FRACTION) * dz
            fnew = barrier.value(znew, t)
            if not np.isfinite(fnew):
                return z, k
            gnnew = float(np.linalg.norm(barrier.grad(znew, t)))
            if gnnew >= gnorm:
                return z, k
            z = znew
            fval = fnew
            continue
        step = barrier.max_step(z, dz, BOUNDARY_FRACTION)
        for _ in range(MAX_BACKTRACKS):
            znew = z + step * dz
            fnew = barrier.value(znew, t)
            if np.isfinite(fnew) and fnew <= fval + ARMIJO_C * step * gdz:
                break
            step *= BACKTRACK
        else:
            raise _NewtonStall(z, t, gnorm)
        z = znew
        fval = fnew
    g = barrier.grad(z, t)
    gnorm = float(np.linalg.norm(g))
    if gnorm <= tol:
        return z, max_newton
    raise _NewtonStall(z, t, gnorm)


def _package(barrier, z, t, total_iters, path) -> SolverSolution:
    beta, alpha, u = barrier.split(z)
    obj = barrier.true_objective(z)
    return SolverSolution(
        beta=beta,
        u=u,
        alpha=alpha,
        t_final=t,
        kkt_norm=float(np.linalg.norm(barrier.grad(z, t))),
        objective=obj,
        gap_bound=barrier.nu_barrier / t,
        path=tuple(path),
        newton_iters=total_iters,
    )


def _follow_path(barrier, cfg: BarrierConfig, init=None) -> SolverSolution:
    scale = 1.0 + float(np.max(np.abs(barrier.Xty2))) if barrier.m else 1.0
    tol = cfg.newton_tol * scale
    if init is not None:
        z = barrier.pack(init.beta, init.alpha, init.u)
        if not barrier.feasible(z):
            raise InteriorViolationError("warm-start point is not strictly interior")
    else:
        z = barrier.init_point()
    t = cfg.t0
    path = []
    total = 0
    try:
        while True:
            z, iters = _newton_stage(barrier, z, t, tol, cfg.max_newton)
            total += iters
            obj = barrier.true_objective(z)
            path.append((t, obj))
            gap = barrier.nu_barrier / t
            if t >= cfg.t_max and gap <= cfg.gap_tol * (1.0 + abs(obj)):
                break
            if t >= T_HARD_CAP:
                raise _NewtonStall(z, t, gap)
            t *= cfg.t_mult
    except _NewtonStall as stall:
        partial = _package(barrier, stall.z, stall.t, total, path)
        raise ConvergenceError(
            f"barrier path stalled at t={stall.t:g} (residual {stall.gnorm:g})",
            solution=partial,
        ) from None
    sol = _package(barrier, z, t, total, path)
    if sol.kkt_norm > tol:
        raise ConvergenceError(
            f"final stationarity {sol.kkt_norm:g} exceeds tolerance {tol:g}",
            solution=sol,
        )
    return sol


def solve_lasso(
    d: Dataset, lam: float, cfg: BarrierConfig | None = None, init: SolverSolution | None = None
) -> SolverSolution:
    """Solve ``min ||y - X beta||^2 + lam ||beta||_1`` along the central path."""
    if lam <= 0:
        raise ValueError("lam must be > 0")
    return _follow_path(make_barrier(ModelSpec.lasso_spec(lam), d), cfg or BarrierConfig(), init)


def solve_group_lasso(
    d: Dataset, model: ModelSpec, cfg: BarrierConfig | None = None, init: SolverSolution | None = None
) -> SolverSolution:
    """Solve the group-penalized regression along the central path."""
    if model.kind != "group":
        raise ValueError(f"expected a group model, got {model.kind}")
    return _follow_path(make_barrier(model, d), cfg or BarrierConfig(), init)


def solve_sparse_group_lasso(
    d: Dataset, model: ModelSpec, cfg: BarrierConfig | None = None, init: SolverSolution | None = None
) -> SolverSolution:
    """Solve the sparse-group-penalized regression along the central path."""
    if model.kind != "sparse_group":
        raise ValueError(f"expected a sparse_group model, got {model.kind}")
    return _follow_path(make_barrier(model, d), cfg or BarrierConfig(), init)


def solve_model(
    model: ModelSpec, d: Dataset, cfg: BarrierConfig | None = None, init: SolverSolution | None = None
) -> SolverSolution:
    """Dispatch to the solver matching ``model.kind``."""
    if model.kind == "lasso":
        return solve_lasso(d, model.lam, cfg, init)
    if model.kind == "group":
        return solve_group_lasso(d, model, cfg, init)
    return solve_sparse_group_lasso(d, model, cfg, init)


def kkt_residual(model: ModelSpec, d: Dataset, s: SolverSolution) -> float:
    """Euclidean norm of the stacked barrier stationarity equations at ``t_final``.

    Raises :class:`InteriorViolationError` when the iterate is not strictly
    interior.
    """
    barrier = make_barrier(model, d)
    z = barrier.pack(s.beta, s.alpha, s.u)
    if not barrier.feasible(z):
        raise InteriorViolationError("solution is not strictly interior")
    return float(np.linalg.norm(barrier.grad(z, s.t_final)))


def lambda_max(d: Dataset) -> float:
    """Smallest penalty that forces the all-zero lasso solution: 2 ||X'y||_inf."""
    return 2.0 * float(np.max(np.abs(d.X.T @ d.y)))


def penalized_objective(model: ModelSpec, d: Dataset, beta) -> float:
    """True (non-barrier) objective of a model at given coefficients."""
    barrier = make_barrier(model, d)
    beta = np.asarray(beta, dtype=np.float64)
    z = barrier.init_point()
    z[barrier.beta_slice] = beta
    return barrier.true_objective(z)
