"""Sensitivities of the penalized solutions with respect to the data.

The solver's stationarity system g(z; y, X) = 0 is smooth inside the barrier
domain, so the implicit function theorem gives dz/dy = -J^{-1} dg/dy and
dz/dX = -J^{-1} dg/dX, where J is the barrier Hessian at the final barrier
parameter.  Only the beta rows of those products are exposed.  The attack
objective f(beta) = 0.5 (beta - nu)' H (beta - nu) then pulls back onto the
data through the chain rule.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, get_lapack_funcs

from ._barrier import make_barrier
from .errors import InteriorViolationError, SensitivityError
from .model import AttackObjective, Dataset, ModelSpec
from .solvers import SolverSolution

__all__ = [
    "KktJacobian",
    "SolutionSensitivity",
    "assemble_jacobian",
    "grad_beta_wrt_y",
    "grad_beta_wrt_X",
    "solution_sensitivity",
    "grad_attack_objective",
    "attack_gradients",
]

JACOBIAN_RIDGE = 1e-10
CONDITION_WARN = 1e12


@dataclass(frozen=True)
class KktJacobian:
    """Barrier-KKT Jacobian with row-block descriptors."""

    J: np.ndarray
    t: float
    beta_rows: slice
    alpha_rows: slice
    u_rows: slice

    @property
    def dim(self) -> int:
        return self.J.shape[0]

    @property
    def m(self) -> int:
        return self.beta_rows.stop - self.beta_rows.start


@dataclass(frozen=True)
class SolutionSensitivity:
    """Dense sensitivities of beta; dbeta_dX column (k, l) sits at k*m + l."""

    dbeta_dy: np.ndarray
    dbeta_dX: np.ndarray | None = None

    def __post_init__(self):
        if not np.all(np.isfinite(self.dbeta_dy)):
            raise ValueError("dbeta_dy has non-finite entries")
        if self.dbeta_dX is not None and not np.all(np.isfinite(self.dbeta_dX)):
            raise ValueError("dbeta_dX has non-finite entries")


def _interior_point(model: ModelSpec, d: Dataset, s: SolverSolution):
    barrier = make_barrier(model, d)
    z = barrier.pack(s.beta, s.alpha, s.u)
    if s.t_final <= 0:
        raise InteriorViolationError("t_final must be > 0")
    if not barrier.feasible(z):
        raise InteriorViolationError("solution is not strictly interior")
    return barrier, z


def assemble_jacobian(model: ModelSpec, d: Dataset, s: SolverSolution) -> KktJacobian:
    """Barrier Hessian at (s, t_final) with beta/alpha/u row descriptors."""
    barrier, z = _interior_point(model, d, s)
    return KktJacobian(
        J=barrier.hess(z, s.t_final),
        t=s.t_final,
        beta_rows=barrier.beta_slice,
        alpha_rows=barrier.alpha_slice,
        u_rows=barrier.u_slice,
    )


def _factor(jac: KktJacobian):
    """Cholesky of the ridge-stabilized Jacobian plus a condition estimate."""
    J = jac.J + JACOBIAN_RIDGE * np.eye(jac.dim)
    anorm = float(np.linalg.norm(J, 1))
    try:
        cho = cho_factor(J, lower=False)
    except np.linalg.LinAlgError as exc:
        raise SensitivityError(
            f"KKT Jacobian is singular beyond the ridge tolerance: {exc}",
            condition=float("inf"),
        ) from None
    pocon = get_lapack_funcs(("pocon",), (cho[0],))[0]
    rcond, info = pocon(cho[0], anorm)
    if info != 0 or rcond == 0.0:
        raise SensitivityError(
            "condition estimation of the KKT Jacobian failed",
            condition=float("inf"),
        )
    cond = 1.0 / float(rcond)
    if cond > CONDITION_WARN:
        warnings.warn(
            f"KKT Jacobian condition estimate {cond:.3e} exceeds {CONDITION_WARN:g}",
            RuntimeWarning,
            stacklevel=3,
        )
    return cho


def _solve_beta_rows(jac: KktJacobian, cho, rhs_beta: np.ndarray) -> np.ndarray:
    """Beta rows of J^{-1} B for a right-hand side supported on the beta rows."""
    B = np.zeros((jac.dim,) + rhs_beta.shape[1:])
    B[jac.beta_rows] = rhs_beta
    return cho_solve(cho, B)[jac.beta_rows]


def grad_beta_wrt_y(model: ModelSpec, d: Dataset, s: SolverSolution) -> np.ndarray:
    """d beta / d y as an m-by-n matrix.

    The stationarity rows differentiate to dg_beta/dy = -2 X', zero in the
    alpha and u rows, so the matrix is the beta rows of J^{-1} (2 X').
    """
    jac = assemble_jacobian(model, d, s)
    cho = _factor(jac)
    return _solve_beta_rows(jac, cho, 2.0 * d.X.T)


def _dg_dX_block(d: Dataset, beta: np.ndarray, resid: np.ndarray, k: int) -> np.ndarray:
    """Beta rows of dg/dX for the columns (k, 0..m-1), an m-by-m block."""
    m = d.m
    block = 2.0 * np.outer(d.X[k, :], beta)
    block[np.arange(m), np.arange(m)] += 2.0 * resid[k]
    return block


def grad_beta_wrt_X(model: ModelSpec, d: Dataset, s: SolverSolution) -> np.ndarray:
    """d beta / d X as an m-by-(n*m) matrix, column k*m + l for X[k, l].

    Entry (i, (k, l)) of dg/dX is 2*delta_{li}*(X beta - y)_k + 2*X_{ki}*beta_l
    on the beta rows and zero elsewhere; the product -J^{-1} dg/dX is solved
    one row-of-X block (m columns) at a time.
    """
    jac = assemble_jacobian(model, d, s)
    cho = _factor(jac)
    resid = d.X @ s.beta - d.y
    out = np.empty((jac.m, d.n, jac.m))
    for k in range(d.n):
        out[:, k, :] = -_solve_beta_rows(jac, cho, _dg_dX_block(d, s.beta, resid, k))
    return out.reshape(jac.m, d.n * jac.m)


def solution_sensitivity(
    model: ModelSpec, d: Dataset, s: SolverSolution, with_X: bool = True
) -> SolutionSensitivity:
    """Bundle d beta/d y (and optionally d beta/d X) with one factorization."""
    jac = assemble_jacobian(model, d, s)
    cho = _factor(jac)
    dbeta_dy = _solve_beta_rows(jac, cho, 2.0 * d.X.T)
    if not with_X:
        return SolutionSensitivity(dbeta_dy=dbeta_dy)
    resid = d.X @ s.beta - d.y
    dX = np.empty((jac.m, d.n, jac.m))
    for k in range(d.n):
        dX[:, k, :] = -_solve_beta_rows(jac, cho, _dg_dX_block(d, s.beta, resid, k))
    return SolutionSensitivity(dbeta_dy=dbeta_dy, dbeta_dX=dX.reshape(jac.m, d.n * jac.m))


def grad_attack_objective(
    obj: AttackObjective, sens: SolutionSensitivity, s: SolverSolution
) -> tuple[np.ndarray, np.ndarray]:
    """Chain-rule gradients of the attack objective at the solved beta.

    Returns (grad_y, grad_X) with grad_y of length n and grad_X of shape
    n-by-m; grad_X requires sens.dbeta_dX.
    """
    m = s.beta.shape[0]
    if obj.h.shape[0] != m or sens.dbeta_dy.shape[0] != m:
        raise ValueError("objective, sensitivity, and solution dimensions disagree")
    pull = obj.h * (s.beta - obj.nu)
    grad_y = sens.dbeta_dy.T @ pull
    if sens.dbeta_dX is None:
        raise ValueError("sensitivity was built without dbeta_dX")
    n = sens.dbeta_dy.shape[1]
    if sens.dbeta_dX.shape != (m, n * m):
        raise ValueError("dbeta_dX has inconsistent shape")
    grad_X = (sens.dbeta_dX.T @ pull).reshape(n, m)
    return grad_y, grad_X


def attack_gradients(
    obj: AttackObjective, model: ModelSpec, d: Dataset, s: SolverSolution
) -> tuple[np.ndarray, np.ndarray]:
    """Fused (grad_y, grad_X) of the attack objective via one Jacobian solve.

    With K the beta-by-beta block of J^{-1} and w = K H (beta - nu), the
    chain rule collapses to grad_y = 2 X w and
    grad_X = -2 (outer(X beta - y, w) + outer(X w, beta)), avoiding the
    m-by-(n*m) sensitivity altogether.
    """
    jac = assemble_jacobian(model, d, s)
    cho = _factor(jac)
    pull = obj.h * (s.beta - obj.nu)
    if pull.shape[0] != jac.m:
        raise ValueError("objective and solution dimensions disagree")
    w = _solve_beta_rows(jac, cho, pull)
    resid = d.X @ s.beta - d.y
    grad_y = 2.0 * (d.X @ w)
    grad_X = -2.0 * (np.outer(resid, w) + np.outer(d.X @ w, s.beta))
    return grad_y, grad_X
