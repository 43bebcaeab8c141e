"""Hot loops: batched logrank sweeps and AR(1) recursions.

Every kernel exists twice, a numba ``@njit`` version and a pure-numpy
version with the same signature. The dispatch names at the bottom pick one
at import time. Set ``RANDLOGRANK_NUMBA=0`` to force the numpy path (numba
is also skipped automatically when it cannot be imported).
"""
from __future__ import annotations

import math
import os

import numpy as np
from scipy.signal import lfilter

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None


def _env_flag(name: str, default: bool) -> bool:
    raw = os.environ.get(name)
    if raw is None:
        return default
    return raw.strip().lower() not in ("0", "false", "no", "off", "")


USE_NUMBA = numba is not None and _env_flag("RANDLOGRANK_NUMBA", True)


# -- numpy implementations ---------------------------------------------------


def logrank_rows_numpy(W, delta, Z):
    """Observed-minus-expected sum L and variance sum U for each row.

    W, delta, Z are (R, n) arrays: time at risk, event flag, treatment flag.
    Tied times are grouped by exact equality.
    """
    W = np.asarray(W, dtype=np.float64)
    R, n = W.shape
    if n == 0:
        return np.zeros(R), np.zeros(R)
    order = np.argsort(W, axis=1, kind="stable")
    w = np.take_along_axis(W, order, axis=1)
    e = np.take_along_axis(np.asarray(delta, dtype=np.int64), order, axis=1)
    z = np.take_along_axis(np.asarray(Z, dtype=np.int64), order, axis=1)

    pos = np.broadcast_to(np.arange(n), (R, n))
    is_first = np.ones((R, n), dtype=bool)
    is_first[:, 1:] = w[:, 1:] != w[:, :-1]
    is_last = np.ones((R, n), dtype=bool)
    is_last[:, :-1] = is_first[:, 1:]
    first = np.maximum.accumulate(np.where(is_first, pos, 0), axis=1)

    zero = np.zeros((R, 1), dtype=np.int64)
    ce = np.concatenate((zero, np.cumsum(e, axis=1)), axis=1)
    cz = np.concatenate((zero, np.cumsum(z, axis=1)), axis=1)
    cze = np.concatenate((zero, np.cumsum(z * e, axis=1)), axis=1)

    # group statistics read off at the last member of each tie group
    N = (n - first).astype(np.float64)
    N1 = (cz[:, -1:] - np.take_along_axis(cz, first, axis=1)).astype(np.float64)
    D = (ce[:, 1:] - np.take_along_axis(ce, first, axis=1)).astype(np.float64)
    D1 = (cze[:, 1:] - np.take_along_axis(cze, first, axis=1)).astype(np.float64)

    keep = is_last & (D > 0)
    mean = D * N1 / N
    with np.errstate(divide="ignore", invalid="ignore"):
        var = np.where(N > 1, D * (N - D) * N1 * (N - N1) / (N * N * (N - 1.0)), 0.0)
    L = np.where(keep, D1 - mean, 0.0).sum(axis=1)
    U = np.where(keep, var, 0.0).sum(axis=1)
    return L, U


def ar1_rows_numpy(zeta, rho):
    """eps_1 = zeta_1, eps_i = rho * eps_{i-1} + sqrt(1 - rho^2) * zeta_i, per row."""
    zeta = np.asarray(zeta, dtype=np.float64)
    out = np.empty_like(zeta)
    if zeta.shape[-1] == 0:
        return out
    c = math.sqrt(1.0 - rho * rho)
    out[..., 0] = zeta[..., 0]
    if zeta.shape[-1] > 1:
        zi = (rho * zeta[..., :1])
        out[..., 1:], _ = lfilter([c], [1.0, -rho], zeta[..., 1:], axis=-1, zi=zi)
    return out


# -- numba implementations ---------------------------------------------------

if numba is not None:

    @numba.njit(cache=True, nogil=True)
    def logrank_rows_numba(W, delta, Z):
        R, n = W.shape
        L = np.zeros(R)
        U = np.zeros(R)
        for r in range(R):
            w = W[r]
            order = np.argsort(w, kind="mergesort")
            at_risk = 0
            at_risk1 = 0
            lsum = 0.0
            usum = 0.0
            j = n - 1
            while j >= 0:
                t = w[order[j]]
                d = 0
                d1 = 0
                while j >= 0 and w[order[j]] == t:
                    i = order[j]
                    at_risk += 1
                    if Z[r, i]:
                        at_risk1 += 1
                    if delta[r, i]:
                        d += 1
                        if Z[r, i]:
                            d1 += 1
                    j -= 1
                if d > 0:
                    N = float(at_risk)
                    N1 = float(at_risk1)
                    D = float(d)
                    lsum += d1 - D * N1 / N
                    if at_risk > 1:
                        usum += D * (N - D) * N1 * (N - N1) / (N * N * (N - 1.0))
            L[r] = lsum
            U[r] = usum
        return L, U

    @numba.njit(cache=True, nogil=True)
    def ar1_rows_numba(zeta, rho):
        R, n = zeta.shape
        out = np.empty_like(zeta)
        c = math.sqrt(1.0 - rho * rho)
        for r in range(R):
            if n == 0:
                continue
            prev = zeta[r, 0]
            out[r, 0] = prev
            for i in range(1, n):
                prev = c * zeta[r, i] + rho * prev
                out[r, i] = prev
        return out

else:  # pragma: no cover
    logrank_rows_numba = None
    ar1_rows_numba = None


def _as_rows(a, dtype):
    a = np.ascontiguousarray(a, dtype=dtype)
    return a.reshape(1, -1) if a.ndim == 1 else a


if USE_NUMBA:

    def logrank_rows(W, delta, Z):
        return logrank_rows_numba(
            _as_rows(W, np.float64), _as_rows(delta, np.bool_), _as_rows(Z, np.bool_)
        )

    def ar1_rows(zeta, rho):
        z = np.asarray(zeta, dtype=np.float64)
        out = ar1_rows_numba(_as_rows(z, np.float64), float(rho))
        return out.reshape(z.shape)

else:

    def logrank_rows(W, delta, Z):
        return logrank_rows_numpy(_as_rows(W, np.float64), _as_rows(delta, np.bool_), _as_rows(Z, np.bool_))

    ar1_rows = ar1_rows_numpy

BACKEND = "numba" if USE_NUMBA else "numpy"
