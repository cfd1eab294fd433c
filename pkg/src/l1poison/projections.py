"""Exact Euclidean projections onto l1 / l2 / linf balls, centered anywhere.

Matrix arguments are projected via their vectorization: the ball constrains
the norm of ``x.ravel()`` and the result keeps the input's shape.  Translated
balls are handled by ``project_ball`` as ``center + project(x - center)``.

The l1 projection runs an expected-linear pivot search for the support size
and then forms the threshold canonically (descending sequential sum of the
top-rho magnitudes), which makes it agree bitwise with the sort-based oracle
in :func:`l1poison.reference.project_l1_sort`.
"""

from __future__ import annotations

import numpy as np

from ._kernels import get_kernel

__all__ = [
    "project_l1",
    "project_l2",
    "project_linf",
    "project_ball",
    "norm_value",
]


def _validated(x, eta: float) -> np.ndarray:
    if eta < 0:
        raise ValueError(f"ball radius must be non-negative, got {eta}")
    x = np.asarray(x, dtype=np.float64)
    if not np.isfinite(x).all():
        raise ValueError("projection input must be finite")
    return x


def l1_threshold(magnitudes: np.ndarray, rho: int, eta: float) -> float:
    """Shrink threshold given the support size: (sum of top-rho - eta) / rho.

    The top-rho magnitudes are summed sequentially in descending order so the
    result is bit-identical to a cumulative sum over a fully sorted array.
    """
    a = magnitudes
    top = np.partition(a, a.size - rho)[a.size - rho:]
    top = np.sort(top)[::-1]
    return (float(np.cumsum(top)[-1]) - eta) / rho


def project_l1(x, eta: float, impl: str | None = None) -> np.ndarray:
    """Project onto {z : ||vec(z)||_1 <= eta}.

    ``impl`` forces the "numba" or "numpy" pivot kernel (None = configured
    default); both produce identical output.
    """
    x = _validated(x, eta)
    if eta == 0.0:
        return np.zeros_like(x)
    a = np.abs(x).ravel()
    if float(np.sum(a)) <= eta:
        return x.copy()
    kernel = get_kernel("l1_support_size", impl)
    rho = int(kernel(a.copy(), float(eta)))
    if rho < 1:
        rho = 1
    theta = l1_threshold(a, rho, eta)
    return np.sign(x) * np.maximum(np.abs(x) - theta, 0.0)


def project_l2(x, eta: float) -> np.ndarray:
    """Project onto {z : ||vec(z)||_2 <= eta} by rescaling."""
    x = _validated(x, eta)
    nrm = float(np.linalg.norm(x.ravel()))
    if nrm <= eta:
        return x.copy()
    return x * (eta / nrm)


def project_linf(x, eta: float) -> np.ndarray:
    """Project onto {z : ||vec(z)||_inf <= eta} by clamping to [-eta, eta]."""
    x = _validated(x, eta)
    return np.clip(x, -eta, eta)


_PROJECTIONS = {"l1": project_l1, "l2": project_l2, "linf": project_linf}


def project_ball(center, norm: str, eta: float, x) -> np.ndarray:
    """Project ``x`` onto the ``norm`` ball of radius ``eta`` around ``center``."""
    if norm not in _PROJECTIONS:
        raise ValueError(f"unknown norm tag {norm!r}")
    center = np.asarray(center, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if center.shape != x.shape:
        raise ValueError(f"center shape {center.shape} != x shape {x.shape}")
    return center + _PROJECTIONS[norm](x - center, eta)


def norm_value(x, norm: str) -> float:
    """Norm of the vectorization of ``x`` under a norm tag."""
    v = np.asarray(x, dtype=np.float64).ravel()
    if norm == "l1":
        return float(np.sum(np.abs(v)))
    if norm == "l2":
        return float(np.linalg.norm(v))
    if norm == "linf":
        return float(np.max(np.abs(v))) if v.size else 0.0
    raise ValueError(f"unknown norm tag {norm!r}")
