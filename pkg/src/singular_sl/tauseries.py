"""Iterated-integral functions ``tau_n`` and the series form of the
characteristic functions.

For the ``tau``-form system the characteristic functions are

    c(1, lambda) = cos(lambda) + int_0^1 tau_plus(s) cos(lambda (1 - 2s)) ds
    s(1, lambda) = sin(lambda)/lambda + int_0^1 tau_minus(s) sin(lambda (1 - 2s))/lambda ds

with ``tau_plus/minus = sum_n (+-1)^n tau_n``. Here ``tau_1 = tau`` and
``tau_n = I_n(tau, ..., tau)``; ``||tau_n|| <= ||tau||^n / sqrt((n-1)! n!)``,
which gives a rigorous bound for the truncated tail. The Volterra iterates
of the Cauchy matrix provide an independent check.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .gridfun import (GridFunction, iterated_integral_In, l2_norm, quadrature,
                      running_integral_samples, trig_moments)
from .propagator import free_exponential

MAX_TERMS = 5
MAX_VOLTERRA = 12
_SMALL_LAMBDA = 0.1


def term_bound(norm: float, n: int) -> float:
    """``norm^n / sqrt((n-1)! n!)``."""
    if norm == 0.0:
        return 0.0
    return math.exp(n * math.log(norm) - 0.5 * (math.lgamma(n) + math.lgamma(n + 1)))


def tail_bound(norm: float, n_terms: int) -> float:
    """``sum_{n > n_terms} norm^n / sqrt((n-1)! n!)`` to machine precision."""
    if norm == 0.0:
        return 0.0
    total = 0.0
    n = n_terms + 1
    while True:
        t = term_bound(norm, n)
        total += t
        # terms decrease faster than geometrically once n > norm^2
        if n > norm * norm + 2 and t <= 1e-17 * total:
            return total
        n += 1


@dataclass(frozen=True)
class TauSeries:
    """Truncated series data for one ``tau``.

    Attributes:
        tau_n: ``tau_1, ..., tau_N``.
        tau_plus: ``sum (+1)^n tau_n``.
        tau_minus: ``sum (-1)^n tau_n``.
        N_terms: Number of terms ``N``.
        tail_bound: Bound on the L2 norm of the omitted part.
        tau_norm: ``||tau||_{L2}``.
        stderr: Per-node Monte Carlo standard errors of every ``tau_n``.
    """

    tau_n: list
    tau_plus: GridFunction
    tau_minus: GridFunction
    N_terms: int
    tail_bound: float
    tau_norm: float
    stderr: list = field(default_factory=list)

    def mc_error_bound(self) -> float:
        """Root-sum-square of the largest MC standard errors over the terms."""
        return math.sqrt(sum(float(np.max(e)) ** 2 for e in self.stderr))

    def to_csv(self, prefix: str) -> list[str]:
        paths = []
        items = [(f"tau_{n + 1}", f) for n, f in enumerate(self.tau_n)]
        items += [("tau_plus", self.tau_plus), ("tau_minus", self.tau_minus)]
        for name, f in items:
            path = f"{prefix}_{name}.csv"
            f.to_csv(path, header={"function": name, "N_terms": self.N_terms,
                                   "tail_bound": repr(self.tail_bound)})
            paths.append(path)
        return paths


def compute_tau_n_with_error(tau: GridFunction, n: int, n_samples: int = 200_000,
                             seed: int = 0, workers: int | None = None):
    """``tau_n`` together with its per-node standard error."""
    if not 1 <= n <= MAX_TERMS:
        raise ValueError(f"tau_n is available for 1 <= n <= {MAX_TERMS}, got {n}")
    if n == 1:
        return tau, np.zeros(tau.M + 1)
    # distinct streams for distinct n
    return iterated_integral_In([tau] * n, n_samples=n_samples, seed=seed * 8 + n,
                                workers=workers)


def compute_tau_n(tau: GridFunction, n: int, n_samples: int = 200_000,
                  seed: int = 0, workers: int | None = None) -> GridFunction:
    """``tau_n = I_n(tau, ..., tau)`` (``tau_1 = tau``)."""
    return compute_tau_n_with_error(tau, n, n_samples, seed, workers)[0]


def build_series(tau: GridFunction, N_terms: int = MAX_TERMS, n_samples: int = 200_000,
                 seed: int = 0, workers: int | None = None) -> TauSeries:
    """Partial sums ``tau_plus``, ``tau_minus`` with ``N_terms`` terms."""
    if not 1 <= N_terms <= MAX_TERMS:
        raise ValueError(f"N_terms must lie in 1..{MAX_TERMS}, got {N_terms}")
    terms, errs = [], []
    for n in range(1, N_terms + 1):
        t, e = compute_tau_n_with_error(tau, n, n_samples, seed, workers)
        terms.append(t)
        errs.append(e)
    plus = GridFunction.zeros(tau.M)
    minus = GridFunction.zeros(tau.M)
    for n, t in enumerate(terms, start=1):
        plus = plus + t
        minus = minus + t if n % 2 == 0 else minus - t
    # tau_plus uses (+1)^n, tau_minus uses (-1)^n
    norm = l2_norm(tau)
    return TauSeries(terms, plus, minus, N_terms, tail_bound(norm, N_terms), norm, errs)


def _cos_moment(f: GridFunction, lam: np.ndarray) -> np.ndarray:
    """``int f(s) cos(lambda (1 - 2s)) ds``."""
    m = trig_moments(f, np.concatenate([-2.0 * lam, 2.0 * lam]))
    k = lam.size
    return 0.5 * (np.exp(1j * lam) * m[:k] + np.exp(-1j * lam) * m[k:])


def _sin_over_lambda_moment(f: GridFunction, lam: np.ndarray) -> np.ndarray:
    """``int f(s) sin(lambda (1 - 2s)) / lambda ds`` with a series near 0."""
    out = np.empty(lam.shape, dtype=complex)
    small = np.abs(lam) < _SMALL_LAMBDA
    big = ~small
    if np.any(big):
        lb = lam[big]
        m = trig_moments(f, np.concatenate([-2.0 * lb, 2.0 * lb]))
        k = lb.size
        out[big] = (np.exp(1j * lb) * m[:k] - np.exp(-1j * lb) * m[k:]) / (2j * lb)
    if np.any(small):
        # sin(z w)/z = sum_j (-1)^j z^{2j} w^{2j+1} / (2j+1)!,  w = 1 - 2s
        w = 1.0 - 2.0 * f.x
        moments = [quadrature(f * GridFunction(w ** (2 * j + 1))) for j in range(6)]
        z2 = lam[small] ** 2
        acc = np.zeros(z2.shape, dtype=complex)
        for j in reversed(range(6)):
            acc = acc * (-z2) + moments[j] / math.factorial(2 * j + 1)
        out[small] = acc
    return out


def _sinc(lam: np.ndarray) -> np.ndarray:
    out = np.empty(lam.shape, dtype=complex)
    small = np.abs(lam) < _SMALL_LAMBDA
    z2 = lam[small] ** 2
    out[small] = 1.0 - z2 / 6.0 + z2 * z2 / 120.0 - z2 ** 3 / 5040.0 + z2 ** 4 / 362880.0
    out[~small] = np.sin(lam[~small]) / lam[~small]
    return out


def series_char(series: TauSeries, lam, bc: str = "dirichlet"):
    """Characteristic function from the truncated series.

    ``lam`` may be a scalar or an array.
    """
    scalar = np.ndim(lam) == 0
    lam = np.atleast_1d(np.asarray(lam, dtype=complex))
    M = series.tau_plus.M
    if lam.size and np.max(np.abs(lam)) > 0.5 * M:
        from .errors import ResolutionError
        raise ResolutionError(f"|lambda| exceeds the sampling guard 0.5*M = {0.5 * M:g}")
    if bc == "neumann":
        val = np.cos(lam) + _cos_moment(series.tau_plus, lam)
    elif bc == "dirichlet":
        val = _sinc(lam) + _sin_over_lambda_moment(series.tau_minus, lam)
    else:
        raise ValueError(f"bc must be 'dirichlet' or 'neumann', got {bc!r}")
    return complex(val[0]) if scalar else val


def volterra_iterates(tau: GridFunction, lam: complex, N: int = 8) -> list[np.ndarray]:
    """``U_n(1, lambda)`` for ``n = 0..N`` from the successive approximations

        U_0(x) = exp(x A),   U_{n+1}(x) = int_0^x exp((x - t) A) tau(t) J U_n(t) dt.

    Each step is a running integral on the grid of
    ``exp(-t A) tau(t) J U_n(t)`` followed by multiplication with ``exp(x A)``.
    """
    if not 0 <= N <= MAX_VOLTERRA:
        raise ValueError(f"N must lie in 0..{MAX_VOLTERRA}")
    lam = complex(lam)
    if abs(lam) > 0.5 * tau.M:
        from .errors import ResolutionError
        raise ResolutionError("lambda exceeds the sampling guard")
    x = tau.x
    E = free_exponential(lam, x)           # exp(x A)
    Einv = free_exponential(lam, -x)       # exp(-x A)
    J = np.array([1.0, -1.0])
    U = E.copy()
    out = [U[-1].copy()]
    for _ in range(N):
        JU = U * J[None, :, None]
        base = np.einsum("kij,kjl->kil", Einv, JU)
        W_R = base * tau.right[:, None, None]
        W_L = base * tau.left[:, None, None]
        integral = running_integral_samples(W_R, W_L, tau.breakpoints)
        U = np.einsum("kij,kjl->kil", E, integral)
        out.append(U[-1].copy())
    return out
