"""Reference solvers and oracles that cross-check the interior-point path.

These implementations share no code with the barrier solvers: lasso is solved
by cyclic coordinate descent on the gram matrix, group lasso by block
coordinate descent with exact block minimization, and sparse group lasso by
FISTA with the closed-form two-stage prox.  ``project_l1_sort`` is the
sort-based l1-ball projection used as the exact oracle for the pivot method.

All tolerances refer to the largest coordinate move per sweep relative to
``1 + ||beta||_inf``.
"""

from __future__ import annotations

import numpy as np

from ._kernels import get_kernel
from .errors import ConvergenceError
from .model import GroupPartition

__all__ = [
    "cd_lasso",
    "bcd_group_lasso",
    "fista_sparse_group",
    "project_l1_sort",
]


def _gram(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    return X.T @ X, X.T @ y


def cd_lasso(
    X,
    y,
    lam: float,
    tol: float = 1e-11,
    max_sweeps: int = 200_000,
    impl: str | None = None,
) -> np.ndarray:
    """Minimize ``||y - X beta||^2 + lam ||beta||_1`` by coordinate descent."""
    if lam <= 0:
        raise ValueError("lam must be > 0")
    G, q = _gram(X, y)
    beta = np.zeros(G.shape[0])
    kernel = get_kernel("cd_lasso", impl)
    sweeps = kernel(G, q, float(lam), beta, float(tol), int(max_sweeps))
    if sweeps >= max_sweeps:
        raise ConvergenceError(f"coordinate descent hit the sweep cap {max_sweeps}")
    return beta


def _padded_eigh(G: np.ndarray, partition: GroupPartition):
    """Per-block eigendecompositions padded to the largest group size."""
    slices = partition.slices()
    pmax = max(partition.sizes)
    L = partition.L
    Q = np.zeros((L, pmax, pmax))
    ev = np.zeros((L, pmax))
    for l, sl in enumerate(slices):
        w, v = np.linalg.eigh(G[sl, sl])
        p = sl.stop - sl.start
        # tiny negative eigenvalues from rounding would break the root bracket
        ev[l, :p] = np.maximum(w, 0.0)
        Q[l, :p, :p] = v
    return Q, ev


def bcd_group_lasso(
    X,
    y,
    lam: float,
    partition: GroupPartition,
    tol: float = 1e-11,
    max_sweeps: int = 100_000,
    impl: str | None = None,
) -> np.ndarray:
    """Minimize ``||y - X beta||^2 + lam sum_l sqrt(p_l) ||beta_l||_2``.

    Block coordinate descent; each block update is the exact minimizer via an
    eigendecomposition of the block gram matrix and a bisection on the norm
    equation.
    """
    if lam <= 0:
        raise ValueError("lam must be > 0")
    G, q = _gram(X, y)
    partition.require_total(G.shape[0])
    lamg = lam * np.sqrt(np.asarray(partition.sizes, dtype=np.float64))
    offs = partition.offsets().astype(np.int64)
    Q, ev = _padded_eigh(G, partition)
    beta = np.zeros(G.shape[0])
    kernel = get_kernel("bcd_group", impl)
    sweeps = kernel(G, q, offs, lamg, Q, ev, beta, float(tol), int(max_sweeps))
    if sweeps >= max_sweeps:
        raise ConvergenceError(f"block descent hit the sweep cap {max_sweeps}")
    return beta


def fista_sparse_group(
    X,
    y,
    lam1: float,
    lam2: float,
    partition: GroupPartition,
    tol: float = 1e-12,
    max_iter: int = 500_000,
    impl: str | None = None,
) -> np.ndarray:
    """Minimize the sparse-group objective by accelerated proximal gradient.

    ``||y - X beta||^2 + lam1 sum_l sqrt(p_l) ||beta_l||_2 + lam2 ||beta||_1``
    with gradient step ``tau = 0.999 / (2 sigma_max(X)^2)`` and the closed-form
    prox (soft threshold, then group shrink).
    """
    if lam1 <= 0 or lam2 <= 0:
        raise ValueError("lam1 and lam2 must be > 0")
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    partition.require_total(X.shape[1])
    sigma = float(np.linalg.norm(X, 2))
    beta = np.zeros(X.shape[1])
    if sigma == 0.0:
        return beta
    tau = 0.999 / (2.0 * sigma * sigma)
    lamg = lam1 * np.sqrt(np.asarray(partition.sizes, dtype=np.float64))
    offs = partition.offsets().astype(np.int64)
    kernel = get_kernel("fista_sparse_group", impl)
    iters = kernel(
        X, y, offs, lamg, float(lam2), tau, beta, float(tol), int(max_iter)
    )
    if iters >= max_iter:
        raise ConvergenceError(f"proximal gradient hit the iteration cap {max_iter}")
    return beta


def project_l1_sort(x, eta: float) -> np.ndarray:
    """Sort-based l1-ball projection (descending sort + cumulative sums).

    Oracle twin of :func:`l1poison.projections.project_l1`; the pivot method
    must reproduce its output bit for bit.
    """
    if eta < 0:
        raise ValueError(f"ball radius must be non-negative, got {eta}")
    x = np.asarray(x, dtype=np.float64)
    if eta == 0.0:
        return np.zeros_like(x)
    a = np.abs(x).ravel()
    if float(np.sum(a)) <= eta:
        return x.copy()
    u = np.sort(a)[::-1]
    cssv = np.cumsum(u)
    j = np.arange(1, a.size + 1)
    mask = u > (cssv - eta) / j
    rho = int(np.nonzero(mask)[0][-1]) + 1
    theta = (float(cssv[rho - 1]) - eta) / rho
    return np.sign(x) * np.maximum(np.abs(x) - theta, 0.0)
