"""Barrier objective/gradient/Hessian assembly for the three model families.

Each barrier class owns the layout of the stacked variable ``z`` and exposes
the callbacks the Newton path follows:

* lasso:        ``z = [beta (m), u (m)]``,            barrier degree 2m
* group:        ``z = [beta (m), alpha (L)]``,        barrier degree 2L
* sparse group: ``z = [beta (m), alpha (L), u (m)]``, barrier degree 2L + 2m

Slacks are always formed as products of the linear factors, e.g.
``(u - beta) * (u + beta)`` rather than ``u**2 - beta**2``, which stays
accurate near the boundary the central path approaches.
"""

from __future__ import annotations

import numpy as np

from .model import Dataset, ModelSpec


def _smallest_positive_root(A: float, B: float, C: float) -> float:
    """Smallest positive root of A s^2 + B s + C = 0 given C > 0, or inf."""
    if A == 0.0:
        return C / -B if B < 0.0 else np.inf
    disc = B * B - 4.0 * A * C
    if disc <= 0.0:
        return np.inf
    sq = np.sqrt(disc)
    qq = -0.5 * (B + np.copysign(sq, B if B != 0.0 else 1.0))
    roots = []
    if qq != 0.0:
        roots.append(qq / A)
        roots.append(C / qq)
    else:
        roots.append(sq / (2.0 * A))
        roots.append(-sq / (2.0 * A))
    pos = [r for r in roots if r > 0.0]
    return min(pos) if pos else np.inf


class LassoBarrier:
    """``||y - X beta||^2 + lam sum u_i - (1/t) sum log(u_i^2 - beta_i^2)``."""

    def __init__(self, d: Dataset, lam: float):
        self.X = d.X
        self.y = d.y
        self.lam = float(lam)
        self.m = d.m
        self.dim = 2 * d.m
        self.nu_barrier = 2 * d.m
        self.XtX2 = 2.0 * (d.X.T @ d.X)
        self.Xty2 = 2.0 * (d.X.T @ d.y)
        self.beta_slice = slice(0, d.m)
        self.alpha_slice = None
        self.u_slice = slice(d.m, 2 * d.m)

    def init_point(self) -> np.ndarray:
        z = np.zeros(self.dim)
        z[self.u_slice] = 1.0
        return z

    def pack(self, beta, alpha, u) -> np.ndarray:
        return np.concatenate([beta, u])

    def split(self, z):
        return z[self.beta_slice], None, z[self.u_slice]

    def slacks(self, z) -> np.ndarray:
        beta, _, u = self.split(z)
        return (u - beta) * (u + beta)

    def feasible(self, z) -> bool:
        beta, _, u = self.split(z)
        return bool(np.all(u - beta > 0.0) and np.all(u + beta > 0.0))

    def value(self, z, t: float) -> float:
        if not self.feasible(z):
            return np.inf
        beta, _, u = self.split(z)
        r = self.X @ beta - self.y
        s = self.slacks(z)
        return float(r @ r + self.lam * np.sum(u) - np.sum(np.log(s)) / t)

    def grad(self, z, t: float) -> np.ndarray:
        beta, _, u = self.split(z)
        s = self.slacks(z)
        g = np.empty(self.dim)
        g[self.beta_slice] = self.XtX2 @ beta - self.Xty2 + (2.0 / t) * beta / s
        g[self.u_slice] = self.lam - (2.0 / t) * u / s
        return g

    def hess(self, z, t: float) -> np.ndarray:
        beta, _, u = self.split(z)
        s = self.slacks(z)
        d1 = (2.0 / t) * (u * u + beta * beta) / (s * s)
        d2 = (-4.0 / t) * u * beta / (s * s)
        J = np.zeros((self.dim, self.dim))
        J[self.beta_slice, self.beta_slice] = self.XtX2
        idx = np.arange(self.m)
        J[idx, idx] += d1
        J[idx, self.m + idx] = d2
        J[self.m + idx, idx] = d2
        J[self.m + idx, self.m + idx] = d1
        return J

    def max_step(self, z, dz, fraction: float = 0.99) -> float:
        beta, _, u = self.split(z)
        db = dz[self.beta_slice]
        du = dz[self.u_slice]
        bound = np.inf
        for a, da in ((u - beta, du - db), (u + beta, du + db)):
            neg = da < 0.0
            if np.any(neg):
                bound = min(bound, float(np.min(a[neg] / -da[neg])))
        return min(1.0, fraction * bound)

    def true_objective(self, z) -> float:
        beta = z[self.beta_slice]
        r = self.y - self.X @ beta
        return float(r @ r + self.lam * np.sum(np.abs(beta)))


class GroupBarrier:
    """``||y - X beta||^2 + sum_l lamg_l alpha_l - (1/t) sum log(alpha_l^2 - ||beta_l||^2)``."""

    def __init__(self, d: Dataset, lamg: np.ndarray, slices: list[slice]):
        self.X = d.X
        self.y = d.y
        self.lamg = np.asarray(lamg, dtype=np.float64)
        self.group_slices = slices
        self.m = d.m
        self.L = len(slices)
        self.dim = d.m + self.L
        self.nu_barrier = 2 * self.L
        self.XtX2 = 2.0 * (d.X.T @ d.X)
        self.Xty2 = 2.0 * (d.X.T @ d.y)
        self.beta_slice = slice(0, d.m)
        self.alpha_slice = slice(d.m, d.m + self.L)
        self.u_slice = None

    def init_point(self) -> np.ndarray:
        z = np.zeros(self.dim)
        z[self.alpha_slice] = 1.0
        return z

    def pack(self, beta, alpha, u) -> np.ndarray:
        return np.concatenate([beta, alpha])

    def split(self, z):
        return z[self.beta_slice], z[self.alpha_slice], None

    def _norms(self, beta) -> np.ndarray:
        return np.array([float(np.linalg.norm(beta[sl])) for sl in self.group_slices])

    def slacks(self, z) -> np.ndarray:
        beta, alpha, _ = self.split(z)
        nb = self._norms(beta)
        return (alpha - nb) * (alpha + nb)

    def feasible(self, z) -> bool:
        beta, alpha, _ = self.split(z)
        nb = self._norms(beta)
        return bool(np.all(alpha - nb > 0.0))

    def value(self, z, t: float) -> float:
        if not self.feasible(z):
            return np.inf
        beta, alpha, _ = self.split(z)
        r = self.X @ beta - self.y
        s = self.slacks(z)
        return float(r @ r + self.lamg @ alpha - np.sum(np.log(s)) / t)

    def grad(self, z, t: float) -> np.ndarray:
        beta, alpha, _ = self.split(z)
        s = self.slacks(z)
        g = np.empty(self.dim)
        gb = self.XtX2 @ beta - self.Xty2
        for l, sl in enumerate(self.group_slices):
            gb[sl] += (2.0 / t) * beta[sl] / s[l]
        g[self.beta_slice] = gb
        g[self.alpha_slice] = self.lamg - (2.0 / t) * alpha / s
        return g

    def hess(self, z, t: float) -> np.ndarray:
        beta, alpha, _ = self.split(z)
        s = self.slacks(z)
        J = np.zeros((self.dim, self.dim))
        J[self.beta_slice, self.beta_slice] = self.XtX2
        for l, sl in enumerate(self.group_slices):
            bl = beta[sl]
            sl2 = s[l] * s[l]
            block = (4.0 / t) * np.outer(bl, bl) / sl2
            p = sl.stop - sl.start
            block[np.arange(p), np.arange(p)] += (2.0 / t) / s[l]
            J[sl, sl] += block
            col = (-4.0 / t) * alpha[l] * bl / sl2
            J[sl, self.m + l] = col
            J[self.m + l, sl] = col
            J[self.m + l, self.m + l] = (2.0 / t) * (alpha[l] * alpha[l] + bl @ bl) / sl2
        return J

    def max_step(self, z, dz, fraction: float = 0.99) -> float:
        beta, alpha, _ = self.split(z)
        db = dz[self.beta_slice]
        da = dz[self.alpha_slice]
        bound = np.inf
        for l, sl in enumerate(self.group_slices):
            bl, dbl = beta[sl], db[sl]
            A = da[l] * da[l] - float(dbl @ dbl)
            B = 2.0 * (alpha[l] * da[l] - float(bl @ dbl))
            C = alpha[l] * alpha[l] - float(bl @ bl)
            bound = min(bound, _smallest_positive_root(A, B, C))
        return min(1.0, fraction * bound)

    def true_objective(self, z) -> float:
        beta = z[self.beta_slice]
        r = self.y - self.X @ beta
        nb = self._norms(beta)
        return float(r @ r + self.lamg @ nb)


class SparseGroupBarrier:
    """Group barrier plus elementwise box barrier and ``lam2 sum u_i``."""

    def __init__(self, d: Dataset, lamg: np.ndarray, lam2: float, slices: list[slice]):
        self.X = d.X
        self.y = d.y
        self.lamg = np.asarray(lamg, dtype=np.float64)
        self.lam2 = float(lam2)
        self.group_slices = slices
        self.m = d.m
        self.L = len(slices)
        self.dim = 2 * d.m + self.L
        self.nu_barrier = 2 * self.L + 2 * d.m
        self.XtX2 = 2.0 * (d.X.T @ d.X)
        self.Xty2 = 2.0 * (d.X.T @ d.y)
        self.beta_slice = slice(0, d.m)
        self.alpha_slice = slice(d.m, d.m + self.L)
        self.u_slice = slice(d.m + self.L, 2 * d.m + self.L)

    def init_point(self) -> np.ndarray:
        z = np.zeros(self.dim)
        z[self.alpha_slice] = 1.0
        z[self.u_slice] = 1.0
        return z

    def pack(self, beta, alpha, u) -> np.ndarray:
        return np.concatenate([beta, alpha, u])

    def split(self, z):
        return z[self.beta_slice], z[self.alpha_slice], z[self.u_slice]

    def _norms(self, beta) -> np.ndarray:
        return np.array([float(np.linalg.norm(beta[sl])) for sl in self.group_slices])

    def group_slacks(self, z) -> np.ndarray:
        beta, alpha, _ = self.split(z)
        nb = self._norms(beta)
        return (alpha - nb) * (alpha + nb)

    def box_slacks(self, z) -> np.ndarray:
        beta, _, u = self.split(z)
        return (u - beta) * (u + beta)

    def feasible(self, z) -> bool:
        beta, alpha, u = self.split(z)
        nb = self._norms(beta)
        return bool(
            np.all(alpha - nb > 0.0)
            and np.all(u - beta > 0.0)
            and np.all(u + beta > 0.0)
        )

    def value(self, z, t: float) -> float:
        if not self.feasible(z):
            return np.inf
        beta, alpha, u = self.split(z)
        r = self.X @ beta - self.y
        s = self.group_slacks(z)
        w = self.box_slacks(z)
        return float(
            r @ r
            + self.lamg @ alpha
            + self.lam2 * np.sum(u)
            - (np.sum(np.log(s)) + np.sum(np.log(w))) / t
        )

    def grad(self, z, t: float) -> np.ndarray:
        beta, alpha, u = self.split(z)
        s = self.group_slacks(z)
        w = self.box_slacks(z)
        g = np.empty(self.dim)
        gb = self.XtX2 @ beta - self.Xty2 + (2.0 / t) * beta / w
        for l, sl in enumerate(self.group_slices):
            gb[sl] += (2.0 / t) * beta[sl] / s[l]
        g[self.beta_slice] = gb
        g[self.alpha_slice] = self.lamg - (2.0 / t) * alpha / s
        g[self.u_slice] = self.lam2 - (2.0 / t) * u / w
        return g

    def hess(self, z, t: float) -> np.ndarray:
        beta, alpha, u = self.split(z)
        s = self.group_slacks(z)
        w = self.box_slacks(z)
        J = np.zeros((self.dim, self.dim))
        J[self.beta_slice, self.beta_slice] = self.XtX2
        idx = np.arange(self.m)
        w2 = w * w
        d1 = (2.0 / t) * (u * u + beta * beta) / w2
        d2 = (-4.0 / t) * u * beta / w2
        J[idx, idx] += d1
        uoff = self.m + self.L
        J[idx, uoff + idx] = d2
        J[uoff + idx, idx] = d2
        J[uoff + idx, uoff + idx] = d1
        for l, sl in enumerate(self.group_slices):
            bl = beta[sl]
            sl2 = s[l] * s[l]
            block = (4.0 / t) * np.outer(bl, bl) / sl2
            p = sl.stop - sl.start
            block[np.arange(p), np.arange(p)] += (2.0 / t) / s[l]
            J[sl, sl] += block
            col = (-4.0 / t) * alpha[l] * bl / sl2
            J[sl, self.m + l] = col
            J[self.m + l, sl] = col
            J[self.m + l, self.m + l] = (2.0 / t) * (alpha[l] * alpha[l] + bl @ bl) / sl2
        return J

    def max_step(self, z, dz, fraction: float = 0.99) -> float:
        beta, alpha, u = self.split(z)
        db = dz[self.beta_slice]
        da = dz[self.alpha_slice]
        du = dz[self.u_slice]
        bound = np.inf
        for a, dd in ((u - beta, du - db), (u + beta, du + db)):
            neg = dd < 0.0
            if np.any(neg):
                bound = min(bound, float(np.min(a[neg] / -dd[neg])))
        for l, sl in enumerate(self.group_slices):
            bl, dbl = beta[sl], db[sl]
            A = da[l] * da[l] - float(dbl @ dbl)
            B = 2.0 * (alpha[l] * da[l] - float(bl @ dbl))
            C = alpha[l] * alpha[l] - float(bl @ bl)
            bound = min(bound, _smallest_positive_root(A, B, C))
        return min(1.0, fraction * bound)

    def true_objective(self, z) -> float:
        beta = z[self.beta_slice]
        r = self.y - self.X @ beta
        nb = self._norms(beta)
        return float(
            r @ r + self.lamg @ nb + self.lam2 * np.sum(np.abs(beta))
        )


def make_barrier(model: ModelSpec, d: Dataset):
    """Build the barrier object for a model spec on a dataset."""
    model.validate_against(d.m)
    if model.kind == "lasso":
        return LassoBarrier(d, model.lam)
    slices = model.partition.slices()
    if model.kind == "group":
        return GroupBarrier(d, model.group_weights(), slices)
    return SparseGroupBarrier(d, model.group_weights(), model.lam2, slices)
