"""Predicted eigenvalue asymptotics and their measured remainders.

For ``sigma`` in ``W_2^alpha`` the square roots of the eigenvalues satisfy

    lambda_n = pi n - s_2n(sigma) + (smaller)                       (leading)
    lambda_n = pi n + s_2n(sigma_minus) - s_2n(sigma) c_2n(V sigma)  (refined)
    mu_n     = pi (n - 1/2) + s_{2n-1}(sigma) + (smaller)
    mu_n     = pi (n - 1/2) + s_{2n-1}(sigma_plus) - s_{2n-1}(sigma) c_{2n-1}(V sigma)

with ``sigma_pm = +-sigma -+ int_0^x sigma^2 + int_0^{1-x} sigma(x+t) sigma(t) dt``.
The refined remainder is the sine coefficient sequence of a function in
``W_2^gamma``, ``gamma = min(3 alpha, 1 + alpha)``. This module measures
both remainders and fits their decay.

The same two-term expansion holds for the zeros of the model functions

    F_c(lambda) = cos(lambda) + int f(x) cos(lambda (1 - 2x)) dx
    F_s(lambda) = sin(lambda)/lambda + int f(x) sin(lambda (1 - 2x))/lambda dx,

whose zeros ``xi_k = pi k / 2 + xi~_k`` (odd ``k`` for ``F_c``, even ``k``
for ``F_s``) obey ``xi~_k = s_k(f) - s_k(f) c_k(V f) + s_k(g)`` with a
smoother ``g``; see :func:`generic_zero_asymptotics`.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .coeffseq import CoeffSeq, DecayEstimate, estimate_decay
from .gridfun import (GridFunction, apply_V, correlate, cumulative, fourier_coeffs,
                      trig_moments)
from .spectrum import SpectralSequence, find_complex_zeros, find_real_zeros, _layout
from .tauseries import _cos_moment, _sin_over_lambda_moment, _sinc

LEVELS = ("leading", "refined")
FIT_START = 8
MIN_NMAX = 32


def gamma_of(alpha: float) -> float:
    """``gamma = min(3 alpha, 1 + alpha)``."""
    return min(3.0 * alpha, 1.0 + alpha)


def sigma_pm(sigma: GridFunction) -> tuple[GridFunction, GridFunction]:
    """``(sigma_plus, sigma_minus)``."""
    sq = cumulative(sigma * sigma)
    corr = correlate(sigma, sigma)
    plus = sigma - sq + corr
    minus = -sigma + sq + corr
    return plus, minus


def _indices(n: np.ndarray, bc: str) -> np.ndarray:
    if bc == "dirichlet":
        return 2 * n
    if bc == "neumann":
        return 2 * n - 1
    raise ValueError(f"bc must be 'dirichlet' or 'neumann', got {bc!r}")


def _base(n: np.ndarray, bc: str) -> np.ndarray:
    return math.pi * n if bc == "dirichlet" else math.pi * (n - 0.5)


def predictions(sigma: GridFunction, n_max: int, bc: str, level: str,
                pm: tuple[GridFunction, GridFunction] | None = None) -> CoeffSeq:
    """Predicted ``lambda_n`` or ``mu_n`` for ``n = 1..n_max``.

    Raises:
        ResolutionError: if ``2 n_max > M/4``.
    """
    n = np.arange(1, n_max + 1)
    k = _indices(n, bc)
    base = _base(n, bc)
    s_sigma = fourier_coeffs(sigma, k, "sine")
    if level == "leading":
        sign = -1.0 if bc == "dirichlet" else 1.0
        return CoeffSeq("plain", base + sign * s_sigma, 1)
    if level != "refined":
        raise ValueError(f"level must be one of {LEVELS}, got {level!r}")
    plus, minus = pm if pm is not None else sigma_pm(sigma)
    first = fourier_coeffs(minus if bc == "dirichlet" else plus, k, "sine")
    c_v = fourier_coeffs(apply_V(sigma), k, "cosine")
    return CoeffSeq("plain", base + first - s_sigma * c_v, 1)


def predicted(sigma: GridFunction, n: int, bc: str = "dirichlet", level: str = "refined") -> complex:
    """Single predicted value (see :func:`predictions`)."""
    return predictions(sigma, n, bc, level)[n]


@dataclass
class AsymptoticsReport:
    """Measured remainders and their fitted decay exponents.

    Dictionaries are keyed by boundary condition (``"dirichlet"``,
    ``"neumann"``); ``fitted_exponents`` uses keys such as
    ``"refined_dirichlet"``.
    """

    alpha: float | None
    gamma: float | None
    n_max: int
    predicted_leading: dict
    predicted_refined: dict
    residual_leading: dict
    residual_refined: dict
    fitted_exponents: dict
    sigma_plus: GridFunction
    sigma_minus: GridFunction

    def to_dict(self) -> dict:
        def fit(v: DecayEstimate):
            return {"exponent": None if math.isinf(v) else float(v), "capped": bool(v.capped)}

        return {
            "alpha": self.alpha,
            "gamma": self.gamma,
            "n_max": self.n_max,
            "fitted_exponents": {k: fit(v) for k, v in self.fitted_exponents.items()},
            "residual_l2": {f"{lvl}_{bc}": float(np.linalg.norm(getattr(self, f"residual_{lvl}")[bc].values))
                            for lvl in LEVELS for bc in self.residual_leading},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def write_tables(self, prefix: str) -> list[str]:
        paths = []
        for lvl in LEVELS:
            for bc, seq in getattr(self, f"residual_{lvl}").items():
                path = f"{prefix}_residual_{lvl}_{bc}.csv"
                seq.to_csv(path)
                paths.append(path)
        return paths


def analyze(sigma: GridFunction, spectra, alpha: float | None = None,
            fit_start: int = FIT_START) -> AsymptoticsReport:
    """Compare computed spectra with both predictions and fit remainder decay.

    Args:
        sigma: The (unshifted) potential primitive.
        spectra: Unshifted :class:`SpectralSequence` objects (one or both
            boundary conditions) of equal length.
        alpha: Nominal smoothness; sets ``gamma`` in the report.

    Raises:
        ValueError: if a spectrum is shifted or shorter than 32 entries.
    """
    if isinstance(spectra, SpectralSequence):
        spectra = [spectra]
    pm = sigma_pm(sigma)
    out = {k: {} for k in ("pl", "pr", "rl", "rr")}
    fits = {}
    n_max = None
    for seq in spectra:
        if seq.shift_C != 0:
            raise ValueError("analyze needs unshifted spectra")
        if len(seq) < MIN_NMAX:
            raise ValueError(f"need at least {MIN_NMAX} eigenvalues for a decay fit, got {len(seq)}")
        if n_max is not None and len(seq) != n_max:
            raise ValueError("spectra must have equal length")
        n_max = len(seq)
        bc = seq.bc
        lam = CoeffSeq("plain", seq.values, 1)
        pl = predictions(sigma, n_max, bc, "leading")
        pr = predictions(sigma, n_max, bc, "refined", pm)
        out["pl"][bc], out["pr"][bc] = pl, pr
        out["rl"][bc], out["rr"][bc] = lam - pl, lam - pr
        fits[f"leading_{bc}"] = estimate_decay(lam - pl, fit_start, n_max)
        fits[f"refined_{bc}"] = estimate_decay(lam - pr, fit_start, n_max)
    g = gamma_of(alpha) if alpha is not None else None
    return AsymptoticsReport(alpha, g, n_max, out["pl"], out["pr"], out["rl"], out["rr"],
                             fits, pm[0], pm[1])


# ---------------------------------------------------------------------------
# Zeros of the model functions F_c and F_s
# ---------------------------------------------------------------------------
def model_function(f: GridFunction, kind: str):
    """Vectorized ``F_c`` or ``F_s`` built from ``f``."""
    if kind == "Fc":
        return lambda lam: np.cos(np.asarray(lam, complex)) + _cos_moment(f, np.asarray(lam, complex))
    if kind == "Fs":
        return lambda lam: (_sinc(np.asarray(lam, complex))
                            + _sin_over_lambda_moment(f, np.asarray(lam, complex)))
    raise ValueError(f"kind must be 'Fc' or 'Fs', got {kind!r}")


def _zero_indices(kind: str, count: int) -> np.ndarray:
    n = np.arange(1, count + 1)
    return 2 * n - 1 if kind == "Fc" else 2 * n


def model_zeros(f: GridFunction, kind: str, n_max: int) -> SpectralSequence:
    """First ``n_max`` zeros of ``F_c`` (near ``pi (n - 1/2)``) or ``F_s`` (near ``pi n``)."""
    fun = model_function(f, kind)
    bc = "neumann" if kind == "Fc" else "dirichlet"
    t_end, edges = _layout(bc, n_max)
    if f.is_real:
        seq = find_real_zeros(fun, n_max, t_end, f.max_abs() + 1.0, label=kind)
    else:
        seq = find_complex_zeros(fun, n_max, edges, H0=max(2.0, f.max_abs() + 1.0), label=kind)
    return seq


def generic_zero_asymptotics(f: GridFunction, kind: str = "both", n_max: int = 64):
    """Zeros of ``F_c``/``F_s`` and their remainder after the two-term prediction.

    Args:
        f: Kernel function.
        kind: ``"Fc"`` (odd ``k``), ``"Fs"`` (even ``k``) or ``"both"``.
        n_max: Number of zeros per function.

    Returns:
        ``(xi, residual)``: the zeros as a :class:`SpectralSequence` labelled
        with ``kind``, and the plain sequence
        ``xi~_k - (s_k(f) - s_k(f) c_k(V f))``. For ``"both"`` the entries
        are merged by ``k = 1..2 n_max``; otherwise entry ``n`` belongs to
        ``k = 2n - 1`` (``F_c``) or ``k = 2n`` (``F_s``).
    """
    if kind == "both":
        xc, rc = generic_zero_asymptotics(f, "Fc", n_max)
        xs, rs = generic_zero_asymptotics(f, "Fs", n_max)
        vals = np.empty(2 * n_max, dtype=complex)
        vals[0::2], vals[1::2] = xc.values, xs.values
        res = np.empty(2 * n_max)
        res[0::2], res[1::2] = xc.residuals, xs.residuals
        rem = np.empty(2 * n_max, dtype=complex)
        rem[0::2], rem[1::2] = rc.values, rs.values
        return SpectralSequence("both", vals, 0.0, res), CoeffSeq("plain", rem, 1)
    xi = model_zeros(f, kind, n_max)
    k = _zero_indices(kind, n_max)
    tilde = xi.values - 0.5 * math.pi * k
    s_f = fourier_coeffs(f, k, "sine")
    c_vf = fourier_coeffs(apply_V(f), k, "cosine")
    return xi, CoeffSeq("plain", tilde - (s_f - s_f * c_vf), 1)


def fixed_point_residual(f: GridFunction, xi: SpectralSequence) -> CoeffSeq:
    """``sin xi~_k + int f(x) sin(xi~_k (1 - 2x) - pi k x) dx`` for every zero.

    ``xi`` must carry the label produced by :func:`generic_zero_asymptotics`
    (``"Fc"``, ``"Fs"`` or ``"both"``) so that every entry knows its ``k``.
    """
    count = len(xi)
    if xi.bc == "both":
        k = np.arange(1, count + 1)
    elif xi.bc in ("Fc", "Fs"):
        k = _zero_indices(xi.bc, count)
    else:
        raise ValueError(f"unknown zero family {xi.bc!r}")
    tilde = xi.values - 0.5 * math.pi * k
    b = 2.0 * tilde + math.pi * k
    m = trig_moments(f, np.concatenate([-b, b]))
    integral = (np.exp(1j * tilde) * m[:count] - np.exp(-1j * tilde) * m[count:]) / 2j
    return CoeffSeq("plain", np.sin(tilde) + integral, 1)
