"""Monte Carlo kernel for the four- and five-fold iterated integrals.

Random numbers come from a counter-based generator: the SplitMix64 finalizer
applied to a per-node key plus the (sample, dimension) counter. Each node is
therefore an independent, reproducible stream, and the parallel loop over
nodes gives bit-identical results for any number of threads.
"""
from __future__ import annotations

import math
import os

# Allow up to 8 worker threads even on small machines so that the
# thread-count invariance can be exercised anywhere; the default stays at
# the CPU count.
os.environ.setdefault("NUMBA_NUM_THREADS", str(max(8, os.cpu_count() or 1)))

import numba
import numpy as np
from numba import njit, prange

# The workqueue layer is always available and keeps start-up quiet.
numba.config.THREADING_LAYER = "workqueue"
_DEFAULT_THREADS = max(1, min(os.cpu_count() or 1, numba.config.NUMBA_NUM_THREADS))

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0
_MAXDIM = np.uint64(8)


@njit(cache=True, inline="always")
def _mix(z):
    z = z + _GOLDEN
    z = (z ^ (z >> _S30)) * _MIX1
    z = (z ^ (z >> _S27)) * _MIX2
    return z ^ (z >> _S31)


@njit(cache=True, inline="always")
def _uniform(base, sample, dim):
    z = _mix(base + np.uint64(sample) * _MAXDIM + np.uint64(dim))
    return np.float64(z >> _S11) * _INV53


@njit(cache=True, inline="always")
def _interp(R, L, row, x, M):
    # piecewise linear between nodes, using the left limit at a cell's right end
    u = x * M
    c = int(u)
    if c >= M:
        c = M - 1
    if c < 0:
        c = 0
    t = u - c
    return (1.0 - t) * R[row, c] + t * L[row, c + 1]


@njit(cache=True, inline="always")
def _simplex2(u1, u2, r):
    # uniform point of {d1, d2 >= 0, d1 + d2 <= r} from two uniforms
    a = u1
    b = u2
    if a > b:
        a, b = b, a
    return r * a, r * (b - a)


@njit(cache=True, parallel=True)
def _kernel(R, L, n, n_samples, seed):
    M = R.shape[1] - 1
    val = np.zeros(M + 1, dtype=np.complex128)
    err = np.zeros(M + 1, dtype=np.float64)
    key = _mix(np.uint64(seed) ^ np.uint64(0x5EED5EED))
    k1 = n // 2          # number of odd-numbered gaps: ceil((n - 1) / 2)
    k2 = (n - 1) // 2    # number of even-numbered gaps
    fk1 = math.gamma(k1 + 1.0)
    fk2 = math.gamma(k2 + 1.0)
    for node in prange(M + 1):
        s = node / M
        vol = (1.0 - s) ** k1 * s ** k2 / (fk1 * fk2)
        if vol == 0.0:
            continue
        base = _mix(key ^ _mix(np.uint64(node)))
        sr = 0.0
        si = 0.0
        sq = 0.0
        for j in range(n_samples):
            # stratify the first coordinate
            u0 = (j + _uniform(base, j, 0)) / n_samples
            u1 = _uniform(base, j, 1)
            u2 = _uniform(base, j, 2)
            u3 = _uniform(base, j, 3)
            # gaps d1..d4: odd ones in the (1 - s) simplex, even ones in the s simplex
            if n == 4:
                d1, d3 = _simplex2(u0, u1, 1.0 - s)
                d2 = s * u2
                d4 = 0.0
            else:
                d1, d3 = _simplex2(u0, u1, 1.0 - s)
                d2, d4 = _simplex2(u2, u3, s)
            if n == 4:
                y3 = d3
                y2 = y3 + d2
                y1 = y2 + d1
                arg = s + d1 + d3
                v = (_interp(R, L, 0, min(arg, 1.0), M) * _interp(R, L, 1, y1, M)
                     * _interp(R, L, 2, y2, M) * _interp(R, L, 3, y3, M))
            else:
                y4 = d4
                y3 = y4 + d3
                y2 = y3 + d2
                y1 = y2 + d1
                arg = s + d1 + d3
                v = (_interp(R, L, 0, min(arg, 1.0), M) * _interp(R, L, 1, y1, M)
                     * _interp(R, L, 2, y2, M) * _interp(R, L, 3, y3, M)
                     * _interp(R, L, 4, y4, M))
            sr += v.real
            si += v.imag
            sq += v.real * v.real + v.imag * v.imag
        mr = sr / n_samples
        mi = si / n_samples
        var = sq / n_samples - (mr * mr + mi * mi)
        if var < 0.0:
            var = 0.0
        val[node] = vol * (mr + 1j * mi)
        err[node] = vol * math.sqrt(var / max(n_samples - 1, 1))
    return val, err


def simplex_product_mc(R: np.ndarray, L: np.ndarray, n: int, n_samples: int,
                       seed: int, workers: int | None = None):
    """Estimate ``I_n`` at every node; returns (values, standard errors)."""
    if n not in (4, 5):
        raise ValueError("Monte Carlo kernel handles n = 4 and n = 5 only")
    if n_samples < 2:
        raise ValueError("need at least two samples per node")
    R = np.ascontiguousarray(R, dtype=np.complex128)
    L = np.ascontiguousarray(L, dtype=np.complex128)
    threads = _DEFAULT_THREADS if workers is None else int(workers)
    threads = max(1, min(threads, numba.config.NUMBA_NUM_THREADS))
    previous = numba.get_num_threads()
    numba.set_num_threads(threads)
    try:
        return _kernel(R, L, n, n_samples, seed & 0xFFFFFFFFFFFFFFFF)
    finally:
        numba.set_num_threads(previous)
