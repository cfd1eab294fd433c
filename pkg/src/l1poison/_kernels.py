"""Hot numerical kernels, each with a numba-jitted and a pure-numpy twin.

The jitted path is used when numba imports successfully and the environment
variable ``L1POISON_DISABLE_NUMBA`` is not ``"1"``.  Both twins of every kernel
remain importable (``<name>_numba`` is None when numba is unavailable) so the
benchmark suite and the parity tests can compare them directly.

Kernels mutate their ``beta`` / scratch arguments in place and return an
iteration count; the wrappers in :mod:`l1poison.reference` and
:mod:`l1poison.projections` own all setup and validation.
"""

from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - CI always has numba; flag covers the path
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap


NUMBA_ENABLED = HAS_NUMBA and os.environ.get("L1POISON_DISABLE_NUMBA", "") != "1"


# ---------------------------------------------------------------------------
# cyclic coordinate descent for ||y - X beta||^2 + lam ||beta||_1
# ---------------------------------------------------------------------------

def _cd_lasso_loops(G, q, lam, beta, tol, max_sweeps):
    """Gram-matrix coordinate descent; soft threshold at lam/2."""
    m = q.shape[0]
    half = 0.5 * lam
    s = np.dot(G, beta)
    for sweep in range(max_sweeps):
        delta = 0.0
        bmax = 0.0
        for i in range(m):
            gii = G[i, i]
            if gii > 0.0:
                z = q[i] - s[i] + gii * beta[i]
                if z > half:
                    new = (z - half) / gii
                elif z < -half:
                    new = (z + half) / gii
                else:
                    new = 0.0
            else:
                new = 0.0
            d = new - beta[i]
            if d != 0.0:
                for k in range(m):
                    s[k] += G[k, i] * d
                beta[i] = new
                if abs(d) > delta:
                    delta = abs(d)
            if abs(new) > bmax:
                bmax = abs(new)
        if delta <= tol * (1.0 + bmax):
            return sweep + 1
    return max_sweeps


cd_lasso_numba = njit(cache=True)(_cd_lasso_loops) if HAS_NUMBA else None


def cd_lasso_numpy(G, q, lam, beta, tol, max_sweeps):
    """Pure-numpy twin of the coordinate-descent kernel."""
    m = q.shape[0]
    half = 0.5 * lam
    s = G @ beta
    for sweep in range(max_sweeps):
        delta = 0.0
        for i in range(m):
            gii = G[i, i]
            if gii > 0.0:
                z = q[i] - s[i] + gii * beta[i]
                if z > half:
                    new = (z - half) / gii
                elif z < -half:
                    new = (z + half) / gii
                else:
                    new = 0.0
            else:
                new = 0.0
            d = new - beta[i]
            if d != 0.0:
                s += G[:, i] * d
                beta[i] = new
                delta = max(delta, abs(d))
        if delta <= tol * (1.0 + float(np.max(np.abs(beta)))):
            return sweep + 1
    return max_sweeps


# ---------------------------------------------------------------------------
# block coordinate descent for ||y - X beta||^2 + sum_l lamg_l ||beta_l||_2
# ---------------------------------------------------------------------------
#
# Block subproblem: with b = X_l' (y - X_{-l} beta_{-l}) the block is zero iff
# ||2 b|| <= lamg_l; otherwise beta_l solves (2 G_l + lamg_l / c) beta_l = 2 b
# with c = ||beta_l||.  In the eigenbasis G_l = Q diag(ev) Q' the norm equation
# becomes phi(c) = sum_j qt_j^2 / (2 ev_j c + lamg_l)^2 = 1 with qt = 2 Q' b,
# which is strictly decreasing from phi(0) > 1, so bisection finds the root.

def _phi_group_loops(qt, ev, lam_l, c, p):
    acc = 0.0
    for j in range(p):
        den = 2.0 * ev[j] * c + lam_l
        acc += (qt[j] / den) * (qt[j] / den)
    return acc


_phi_group_numba = njit(cache=True)(_phi_group_loops) if HAS_NUMBA else None


def _bcd_group_template(phi):
    def kernel(G, q, offs, lamg, Q, ev, beta, tol, max_sweeps):
        m = q.shape[0]
        L = lamg.shape[0]
        s = np.dot(G, beta)
        new = np.empty(m)
        for sweep in range(max_sweeps):
            delta = 0.0
            bmax = 0.0
            for l in range(L):
                a = offs[l]
                e = offs[l + 1]
                p = e - a
                lam_l = lamg[l]
                bvec = np.empty(p)
                for j in range(p):
                    acc = q[a + j] - s[a + j]
                    for k in range(p):
                        acc += G[a + j, a + k] * beta[a + k]
                    bvec[j] = acc
                nb2 = 0.0
                for j in range(p):
                    nb2 += bvec[j] * bvec[j]
                if 2.0 * np.sqrt(nb2) <= lam_l:
                    for j in range(p):
                        new[a + j] = 0.0
                else:
                    qt = np.empty(p)
                    for j in range(p):
                        acc = 0.0
                        for k in range(p):
                            acc += Q[l, k, j] * bvec[k]
                        qt[j] = 2.0 * acc
                    chi = 1.0
                    guard = 0
                    while phi(qt, ev[l], lam_l, chi, p) >= 1.0 and guard < 400:
                        chi *= 2.0
                        guard += 1
                    clo = 0.0
                    for _ in range(200):
                        cmid = 0.5 * (clo + chi)
                        if phi(qt, ev[l], lam_l, cmid, p) >= 1.0:
                            clo = cmid
                        else:
                            chi = cmid
                    c = 0.5 * (clo + chi)
                    for k in range(p):
                        acc = 0.0
                        for j in range(p):
                            acc += Q[l, k, j] * (qt[j] * c / (2.0 * ev[l, j] * c + lam_l))
                        new[a + k] = acc
                for j in range(p):
                    d = new[a + j] - beta[a + j]
                    if d != 0.0:
                        for k in range(m):
                            s[k] += G[k, a + j] * d
                        beta[a + j] = new[a + j]
                        if abs(d) > delta:
                            delta = abs(d)
            for j in range(m):
                if abs(beta[j]) > bmax:
                    bmax = abs(beta[j])
            if delta <= tol * (1.0 + bmax):
                return sweep + 1
        return max_sweeps

    return kernel


bcd_group_numba = (
    njit(cache=True)(_bcd_group_template(_phi_group_numba)) if HAS_NUMBA else None
)


def bcd_group_numpy(G, q, offs, lamg, Q, ev, beta, tol, max_sweeps):
    """Pure-numpy twin of the block-coordinate-descent kernel."""
    L = lamg.shape[0]
    s = G @ beta
    for sweep in range(max_sweeps):
        delta = 0.0
        for l in range(L):
            a, e = int(offs[l]), int(offs[l + 1])
            p = e - a
            lam_l = lamg[l]
            bvec = q[a:e] - s[a:e] + G[a:e, a:e] @ beta[a:e]
            if 2.0 * float(np.linalg.norm(bvec)) <= lam_l:
                new = np.zeros(p)
            else:
                Ql = Q[l, :p, :p]
                evl = ev[l, :p]
                qt = 2.0 * (Ql.T @ bvec)

                def phi(c):
                    return float(np.sum((qt / (2.0 * evl * c + lam_l)) ** 2))

                chi = 1.0
                guard = 0
                while phi(chi) >= 1.0 and guard < 400:
                    chi *= 2.0
                    guard += 1
                clo = 0.0
                for _ in range(200):
                    cmid = 0.5 * (clo + chi)
                    if phi(cmid) >= 1.0:
                        clo = cmid
                    else:
                        chi = cmid
                c = 0.5 * (clo + chi)
                new = Ql @ (qt * c / (2.0 * evl * c + lam_l))
            diff = new - beta[a:e]
            if np.any(diff != 0.0):
                s += G[:, a:e] @ diff
                beta[a:e] = new
                delta = max(delta, float(np.max(np.abs(diff))))
        if delta <= tol * (1.0 + float(np.max(np.abs(beta)))):
            return sweep + 1
    return max_sweeps


# ---------------------------------------------------------------------------
# FISTA for ||y - X beta||^2 + sum_l lamg_l ||beta_l||_2 + lam2 ||beta||_1
# ---------------------------------------------------------------------------
#
# Proximal map of the summed penalty is the two-stage closed form: elementwise
# soft threshold at tau*lam2, then groupwise shrink by tau*lamg_l.  Momentum
# restarts on the gradient test (z - beta_new) . (beta_new - beta_prev) > 0.

def _fista_sparse_group_loops(X, y, offs, lamg, lam2, tau, beta, tol, max_iter):
    n, m = X.shape
    L = lamg.shape[0]
    bprev = beta.copy()
    bnew = np.empty(m)
    z = beta.copy()
    tk = 1.0
    thr = tau * lam2
    for it in range(max_iter):
        r = np.dot(X, z) - y
        gvec = np.dot(X.T, r)
        for l in range(L):
            a = offs[l]
            e = offs[l + 1]
            nrm2 = 0.0
            for j in range(a, e):
                v = z[j] - 2.0 * tau * gvec[j]
                if v > thr:
                    w = v - thr
                elif v < -thr:
                    w = v + thr
                else:
                    w = 0.0
                bnew[j] = w
                nrm2 += w * w
            glam = tau * lamg[l]
            nrm = np.sqrt(nrm2)
            if nrm <= glam:
                for j in range(a, e):
                    bnew[j] = 0.0
            else:
                scale = 1.0 - glam / nrm
                for j in range(a, e):
                    bnew[j] *= scale
        dot = 0.0
        for j in range(m):
            dot += (z[j] - bnew[j]) * (bnew[j] - bprev[j])
        if dot > 0.0:
            tk = 1.0
            for j in range(m):
                z[j] = bnew[j]
        else:
            tnext = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * tk * tk))
            mom = (tk - 1.0) / tnext
            for j in range(m):
                z[j] = bnew[j] + mom * (bnew[j] - bprev[j])
            tk = tnext
        delta = 0.0
        bmax = 0.0
        for j in range(m):
            d = abs(bnew[j] - bprev[j])
            if d > delta:
                delta = d
            if abs(bnew[j]) > bmax:
                bmax = abs(bnew[j])
            bprev[j] = bnew[j]
        if delta <= tol * (1.0 + bmax):
            for j in range(m):
                beta[j] = bnew[j]
            return it + 1
    for j in range(m):
        beta[j] = bprev[j]
    return max_iter


fista_sparse_group_numba = (
    njit(cache=True)(_fista_sparse_group_loops) if HAS_NUMBA else None
)


def fista_sparse_group_numpy(X, y, offs, lamg, lam2, tau, beta, tol, max_iter):
    """Pure-numpy twin of the FISTA kernel (vectorized with reduceat)."""
    m = X.shape[1]
    starts = offs[:-1]
    sizes = np.diff(offs)
    bprev = beta.copy()
    z = beta.copy()
    tk = 1.0
    thr = tau * lam2
    glam = tau * lamg
    for it in range(max_iter):
        v = z - 2.0 * tau * (X.T @ (X @ z - y))
        w = np.sign(v) * np.maximum(np.abs(v) - thr, 0.0)
        nrm = np.sqrt(np.add.reduceat(w * w, starts))
        scale = np.where(nrm > glam, 1.0 - glam / np.maximum(nrm, 1e-300), 0.0)
        bnew = w * np.repeat(scale, sizes)
        if float(np.dot(z - bnew, bnew - bprev)) > 0.0:
            tk = 1.0
            z = bnew.copy()
        else:
            tnext = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * tk * tk))
            z = bnew + ((tk - 1.0) / tnext) * (bnew - bprev)
            tk = tnext
        delta = float(np.max(np.abs(bnew - bprev)))
        bprev = bnew
        if delta <= tol * (1.0 + float(np.max(np.abs(bnew)))):
            beta[:] = bnew
            return it + 1
    beta[:] = bprev
    return max_iter


# ---------------------------------------------------------------------------
# support size of the l1-ball projection (expected-linear pivot search)
# ---------------------------------------------------------------------------
#
# Given magnitudes a with sum(a) > eta > 0, returns rho = #\{i : a_i > theta\}
# where theta solves sum_i max(a_i - theta, 0) = eta.  Quickselect-style: pick
# a pivot v from the active window, three-way partition in place, and test
# g(v) = sum_{u >= v} (u - v) against eta to decide which side holds theta.

def _l1_support_size_loops(a, eta):
    lo = 0
    hi = a.shape[0]
    s_conf = 0.0
    k_conf = 0
    while hi > lo:
        v = a[(lo + hi) // 2]
        gt = lo
        eq = lo
        lt = hi
        while eq < lt:
            x = a[eq]
            if x > v:
                a[eq] = a[gt]
                a[gt] = x
                gt += 1
                eq += 1
            elif x == v:
                eq += 1
            else:
                lt -= 1
                a[eq] = a[lt]
                a[lt] = x
        s_ge = 0.0
        for j in range(lo, eq):
            s_ge += a[j]
        k_ge = eq - lo
        if (s_conf + s_ge) - (k_conf + k_ge) * v < eta:
            s_conf += s_ge
            k_conf += k_ge
            lo = eq
        else:
            hi = gt
    return k_conf


l1_support_size_numba = njit(cache=True)(_l1_support_size_loops) if HAS_NUMBA else None


def l1_support_size_numpy(a, eta):
    """Pure-numpy twin of the pivot support-size search (mask based)."""
    active = np.asarray(a)
    s_conf = 0.0
    k_conf = 0
    while active.size:
        v = active[active.size // 2]
        ge = active >= v
        s_ge = float(np.sum(active[ge]))
        k_ge = int(np.count_nonzero(ge))
        if (s_conf + s_ge) - (k_conf + k_ge) * v < eta:
            s_conf += s_ge
            k_conf += k_ge
            active = active[~ge]
        else:
            active = active[active > v]
    return k_conf


# ---------------------------------------------------------------------------
# selection table
# ---------------------------------------------------------------------------

_KERNELS = {
    "cd_lasso": {"numba": cd_lasso_numba, "numpy": cd_lasso_numpy},
    "bcd_group": {"numba": bcd_group_numba, "numpy": bcd_group_numpy},
    "fista_sparse_group": {
        "numba": fista_sparse_group_numba,
        "numpy": fista_sparse_group_numpy,
    },
    "l1_support_size": {"numba": l1_support_size_numba, "numpy": l1_support_size_numpy},
}


def get_kernel(name: str, impl: str | None = None):
    """Return a kernel by name; ``impl`` forces "numba" or "numpy"."""
    table = _KERNELS[name]
    if impl is None:
        impl = "numba" if NUMBA_ENABLED else "numpy"
    fn = table[impl]
    if fn is None:
        raise RuntimeError(f"kernel {name}: numba requested but unavailable")
    return fn
