"""Hot loops for fiberwise polynomial iteration.

Polynomials are packed as a complex table ``C[v, :deg[v] + 1]`` holding the
coefficients of fiber ``v`` from the leading term down, ``deg[v]`` its degree
and ``sig[v]`` the fiber it maps to.  Each kernel exists twice: a numba
version and a plain numpy/Python version.  Set ``ARTIFACT_NO_NUMBA=1`` to
force the fallback.
"""

from __future__ import annotations

import math
import os

import numpy as np

_DISABLED = os.environ.get("ARTIFACT_NO_NUMBA", "").strip().lower() not in ("", "0", "false", "no")

try:
    if _DISABLED:
        raise ImportError("disabled by ARTIFACT_NO_NUMBA")
    from numba import njit
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

NEWTON_OK = 0
NEWTON_MAXITER = 1
NEWTON_BLOWUP = 2
NEWTON_STALLED = 3

# steps this small are accepted once the line search stops reducing the residual
STALL = 1e-7


# ---------------------------------------------------------------- pure python / numpy


def _horner(row, n, z):
    p = row[0]
    dp = 0j
    for i in range(1, n + 1):
        dp = dp * z + p
        p = p * z + row[i]
    return p, dp


def _escape_time_py(C, deg, sig, v0, zs, max_iter, R, smooth):
    z = zs.astype(np.complex128).copy()
    out = np.full(z.shape, -1.0)
    alive = np.ones(z.shape, dtype=bool)
    v = np.full(z.shape, v0, dtype=np.int64)
    logR = math.log(R)
    for it in range(max_iter):
        idx = np.nonzero(alive)[0]
        if idx.size == 0:
            break
        zi = z[idx]
        vi = v[idx]
        acc = C[vi, 0].copy()
        for j in range(1, C.shape[1]):
            live = j <= deg[vi]
            acc = np.where(live, acc * zi + C[vi, j], acc)
        z[idx] = acc
        dnext = deg[vi]
        v[idx] = sig[vi]
        mag = np.abs(acc)
        gone = mag > R
        if np.any(gone):
            g = idx[gone]
            if smooth:
                lz = np.log(mag[gone])
                frac = np.log(np.maximum(lz / logR, 1.0)) / np.log(dnext[gone].astype(float))
                out[g] = it + 1 - frac
            else:
                out[g] = it + 1
            alive[g] = False
    return out


def _green_py(C, deg, sig, v0, zs, max_iter, bailout):
    z = zs.astype(np.complex128).copy()
    out = np.zeros(z.shape)
    alive = np.ones(z.shape, dtype=bool)
    v = np.full(z.shape, v0, dtype=np.int64)
    scale = np.ones(z.shape)
    mag0 = np.abs(z)
    done0 = mag0 > bailout
    out[done0] = np.log(mag0[done0])
    alive[done0] = False
    for _ in range(max_iter):
        idx = np.nonzero(alive)[0]
        if idx.size == 0:
            break
        zi = z[idx]
        vi = v[idx]
        acc = C[vi, 0].copy()
        for j in range(1, C.shape[1]):
            live = j <= deg[vi]
            acc = np.where(live, acc * zi + C[vi, j], acc)
        z[idx] = acc
        scale[idx] *= deg[vi]
        v[idx] = sig[vi]
        mag = np.abs(acc)
        gone = mag > bailout
        if np.any(gone):
            g = idx[gone]
            out[g] = np.log(mag[gone]) / scale[g]
            alive[g] = False
    return out


def _newton_py(C, deg, sig, v0, z, n, w, tol, maxit, blowup):
    rows = [list(C[v]) for v in range(C.shape[0])]
    degs = [int(x) for x in deg]
    sigs = [int(x) for x in sig]
    z = complex(z)
    w = complex(w)

    def residual(z):
        v = v0
        d = 1 + 0j
        for _ in range(n):
            p, dp = _horner(rows[v], degs[v], z)
            d *= dp
            z = p
            v = sigs[v]
        return z - w, d

    F, dF = residual(z)
    for it in range(maxit):
        if abs(F) <= tol * max(1.0, abs(w)):
            return z, NEWTON_OK, it
        if dF == 0:
            return z, NEWTON_MAXITER, it
        step = F / dF
        if abs(step) <= tol * max(1.0, abs(z)):
            return z - step, NEWTON_OK, it
        lam = 1.0
        improved = False
        for _ in range(30):
            cand = z - lam * step
            if abs(cand) > blowup:
                lam *= 0.5
                continue
            F2, dF2 = residual(cand)
            if abs(F2) < abs(F):
                improved = True
                break
            if lam < 1e-6:
                break
            lam *= 0.5
        if not improved and abs(step) <= STALL * max(1.0, abs(z)):
            # residual is at its rounding floor
            return z, NEWTON_STALLED, it
        z, F, dF = cand, F2, dF2
        if abs(z) > blowup:
            return z, NEWTON_BLOWUP, it
    if abs(F) <= tol * max(1.0, abs(w)):
        return z, NEWTON_OK, maxit
    return z, NEWTON_MAXITER, maxit


# ---------------------------------------------------------------- numba

if HAVE_NUMBA:

    @njit(cache=True, nogil=True, inline="always")
    def _horner_nb(C, v, n, z):
        p = C[v, 0]
        dp = 0j
        for i in range(1, n + 1):
            dp = dp * z + p
            p = p * z + C[v, i]
        return p, dp

    @njit(cache=True, nogil=True)
    def _escape_time_nb(C, deg, sig, v0, zs, max_iter, R, smooth):
        out = np.empty(zs.shape[0])
        logR = math.log(R)
        for k in range(zs.shape[0]):
            z = zs[k]
            v = v0
            out[k] = -1.0
            for it in range(max_iter):
                p, _ = _horner_nb(C, v, deg[v], z)
                dn = deg[v]
                z = p
                v = sig[v]
                m = abs(z)
                if m > R:
                    if smooth:
                        lz = math.log(m)
                        r = lz / logR
                        if r < 1.0:
                            r = 1.0
                        out[k] = it + 1 - math.log(r) / math.log(dn)
                    else:
                        out[k] = it + 1
                    break
        return out

    @njit(cache=True, nogil=True)
    def _green_nb(C, deg, sig, v0, zs, max_iter, bailout):
        out = np.zeros(zs.shape[0])
        for k in range(zs.shape[0]):
            z = zs[k]
            if abs(z) > bailout:
                out[k] = math.log(abs(z))
                continue
            v = v0
            scale = 1.0
            for _ in range(max_iter):
                p, _ = _horner_nb(C, v, deg[v], z)
                scale *= deg[v]
                z = p
                v = sig[v]
                if abs(z) > bailout:
                    out[k] = math.log(abs(z)) / scale
                    break
        return out

    @njit(cache=True, nogil=True)
    def _residual_nb(C, deg, sig, v0, z, n, w):
        v = v0
        d = 1.0 + 0j
        for _ in range(n):
            p, dp = _horner_nb(C, v, deg[v], z)
            d *= dp
            z = p
            v = sig[v]
        return z - w, d

    @njit(cache=True, nogil=True)
    def _newton_nb(C, deg, sig, v0, z, n, w, tol, maxit, blowup):
        F, dF = _residual_nb(C, deg, sig, v0, z, n, w)
        scale = max(1.0, abs(w))
        for it in range(maxit):
            if abs(F) <= tol * scale:
                return z, 0, it
            if dF == 0:
                return z, 1, it
            step = F / dF
            if abs(step) <= tol * max(1.0, abs(z)):
                return z - step, 0, it
            lam = 1.0
            cand = z
            F2 = F
            dF2 = dF
            improved = False
            for _ in range(30):
                cand = z - lam * step
                if abs(cand) > blowup:
                    lam *= 0.5
                    continue
                F2, dF2 = _residual_nb(C, deg, sig, v0, cand, n, w)
                if abs(F2) < abs(F):
                    improved = True
                    break
                if lam < 1e-6:
                    break
                lam *= 0.5
            if not improved and abs(step) <= STALL * max(1.0, abs(z)):
                return z, 3, it
            z = cand
            F = F2
            dF = dF2
            if abs(z) > blowup:
                return z, 2, it
        if abs(F) <= tol * scale:
            return z, 0, maxit
        return z, 1, maxit


# ---------------------------------------------------------------- dispatch


def escape_time(C, deg, sig, v0, zs, max_iter, R, smooth=True, use_numba=None):
    """Escape iteration count per point, -1 for points that never leave radius R."""
    zs = np.ascontiguousarray(zs, dtype=np.complex128).ravel()
    if _pick(use_numba):
        return _escape_time_nb(C, deg, sig, int(v0), zs, int(max_iter), float(R), bool(smooth))
    return _escape_time_py(C, deg, sig, int(v0), zs, int(max_iter), float(R), bool(smooth))


def green(C, deg, sig, v0, zs, max_iter, bailout, use_numba=None):
    """Green potential log|z_n| / (product of degrees), 0 for non-escaping points."""
    zs = np.ascontiguousarray(zs, dtype=np.complex128).ravel()
    if _pick(use_numba):
        return _green_nb(C, deg, sig, int(v0), zs, int(max_iter), float(bailout))
    return _green_py(C, deg, sig, int(v0), zs, int(max_iter), float(bailout))


def newton(C, deg, sig, v0, z, n, w, tol, maxit, blowup, use_numba=None):
    """Damped Newton for f^n(z) = w along the fiber path from v0."""
    if _pick(use_numba):
        z, st, it = _newton_nb(C, deg, sig, int(v0), complex(z), int(n), complex(w),
                               float(tol), int(maxit), float(blowup))
        return complex(z), int(st), int(it)
    return _newton_py(C, deg, sig, int(v0), z, int(n), w, float(tol), int(maxit), float(blowup))


def _pick(use_numba):
    if use_numba is None:
        return HAVE_NUMBA
    if use_numba and not HAVE_NUMBA:
        raise RuntimeError("numba path requested but unavailable")
    return bool(use_numba)
