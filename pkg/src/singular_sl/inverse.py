"""Reconstruction from two spectra and jump detection.

Given the remainders ``lambda~_n = lambda_n - pi n`` and
``mu~_n = mu_n - pi (n - 1/2)``, the sine series

    sigma*(t) = 2 sum_n ( mu~_n sin((2n - 1) pi t) - lambda~_n sin(2 pi n t) )

differs from ``sigma`` by a function that is smoother than ``sigma``
itself. In particular ``sigma*`` carries the jumps of ``sigma``; they are
located here from a Lanczos-smoothed copy of the truncated series.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .coeffseq import CoeffSeq, DecayEstimate, DECAY_CAP, estimate_decay
from .gridfun import GridFunction, fourier_coeffs, nodes, synthesize
from .spectrum import SpectralSequence, remainders, unshift

#: Candidates need a derivative peak this many times the median.
PEAK_FACTOR = 5.0
#: ... and a windowed jump this many times the median windowed difference.
SIGNIFICANCE_FACTOR = 5.0
#: Inner and outer window offsets in units of 1/N.
WINDOW = (2.0, 10.0)
#: Narrower window used for the two-scale consistency check.
INNER_WINDOW = (2.0, 5.0)
#: Allowed relative disagreement between the two window scales.
CONSISTENCY_TOL = 0.15


@dataclass
class ReconstructionResult:
    """Output of :func:`reconstruct`."""

    sigma_star: GridFunction
    n_used: int
    detected_jumps: list = field(default_factory=list)
    smoothness_gain: DecayEstimate | None = None

    def to_dict(self) -> dict:
        gain = self.smoothness_gain
        return {
            "n_used": self.n_used,
            "detected_jumps": [{"position": p, "size": [s.real, s.imag]} for p, s in self.detected_jumps],
            "smoothness_gain": None if gain is None else
            {"value": None if math.isinf(gain) else float(gain), "capped": bool(gain.capped)},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def star_coefficients(lam_rem: CoeffSeq, mu_rem: CoeffSeq) -> CoeffSeq:
    """Sine coefficients of ``sigma*`` indexed ``k = 1..2N``."""
    if len(lam_rem) != len(mu_rem) or lam_rem.start_index != 1 or mu_rem.start_index != 1:
        raise ValueError("remainder sequences must both run over n = 1..N")
    N = len(lam_rem)
    a = np.empty(2 * N, dtype=complex)
    a[0::2] = 2.0 * mu_rem.values
    a[1::2] = -2.0 * lam_rem.values
    return CoeffSeq("sine", a, 1)


def sigma_star(lam_rem: CoeffSeq, mu_rem: CoeffSeq, M: int) -> GridFunction:
    """Truncated series ``2 sum (mu~_n sin((2n-1) pi t) - lambda~_n sin(2 pi n t))``.

    Raises:
        ResolutionError: if ``N > M/8``.
    """
    return synthesize(star_coefficients(lam_rem, mu_rem), M)


def smoothness_gain(sigma_star: GridFunction, sigma: GridFunction, n_used: int | None = None,
                    fit_start: int = 8) -> DecayEstimate:
    """Decay of ``s_k(sigma* - sigma)`` minus decay of ``s_k(sigma)``.

    Both fits run over ``k in [fit_start, 2 n_used]`` (default ``M/4``).
    If ``sigma* = sigma`` on that range, or ``sigma`` has no coefficients
    there, the gain is reported as capped.
    """
    k_max = int(sigma.M // 4 if n_used is None else 2 * n_used)
    diff = CoeffSeq("sine", fourier_coeffs(sigma_star - sigma, np.arange(1, k_max + 1), "sine"))
    base = CoeffSeq("sine", fourier_coeffs(sigma, np.arange(1, k_max + 1), "sine"))
    d = estimate_decay(diff, fit_start, k_max)
    b = estimate_decay(base, fit_start, k_max)
    if d.capped or b.capped:
        return DecayEstimate(DECAY_CAP, capped=True, blocks=min(d.blocks, b.blocks))
    return DecayEstimate(float(d) - float(b), capped=False, blocks=min(d.blocks, b.blocks))


def lanczos_factors(K: int) -> np.ndarray:
    """Weights for ``k = 1..K``: 1 on the lower half, Lanczos sinc on the top octave."""
    k = np.arange(1, K + 1, dtype=float)
    half = K / 2.0
    t = np.clip((k - half) / (half + 1.0), 0.0, None)
    return np.sinc(t)


def _window_means(values: np.ndarray, M: int, N: int, window=WINDOW):
    """Means over ``[x+w0/N, x+w1/N]`` and ``[x-w1/N, x-w0/N]`` at every node."""
    lo = int(round(window[0] * M / N))
    hi = int(round(window[1] * M / N))
    cs = np.concatenate([[0.0], np.cumsum(values)])
    k = np.arange(M + 1)
    valid = (k - hi >= 0) & (k + hi <= M)
    right = np.full(M + 1, np.nan, dtype=complex)
    left = np.full(M + 1, np.nan, dtype=complex)
    kv = k[valid]
    width = hi - lo + 1
    right[valid] = (cs[kv + hi + 1] - cs[kv + lo]) / width
    left[valid] = (cs[kv - lo + 1] - cs[kv - hi]) / width
    return left, right, valid


def detect_jumps(sigma_star: GridFunction, N_used: int) -> list[tuple[float, complex]]:
    """Locate jumps of ``sigma*`` (positions on the grid, sizes from window means).

    The truncated series is recomputed from its sine coefficients with the
    top octave tapered by Lanczos factors; the derivative is evaluated from
    the same coefficients. A node is a candidate when ``|derivative|`` has a
    local maximum there exceeding 5 times its median, the two one-sided
    windows fit inside (0, 1), and the windowed jump exceeds 5 times the
    median windowed difference (this rejects ripples of rough but
    continuous functions). Survivors of non-maximum suppression must also
    give the same windowed difference, within 15%, when the outer window
    offset shrinks from 10/N to 5/N: a jump does not care about the window,
    while a steep continuous descent grows with it.

    Returns:
        ``[(position, size), ...]`` ordered by position.
    """
    if N_used < 64:
        raise ValueError("jump detection needs at least 64 eigenvalue pairs")
    M = sigma_star.M
    K = 2 * N_used
    k = np.arange(1, K + 1)
    a = 2.0 * fourier_coeffs(sigma_star, k, "sine") * lanczos_factors(K)
    x = nodes(M)
    arg = math.pi * np.outer(k, x)
    smooth = a @ np.sin(arg)
    deriv = np.abs((a * math.pi * k) @ np.cos(arg))
    left, right, valid = _window_means(smooth, M, N_used)
    D = np.abs(right - left)
    med_deriv = np.median(deriv)
    med_D = np.median(D[valid])
    is_peak = np.zeros(M + 1, dtype=bool)
    is_peak[1:-1] = (deriv[1:-1] >= deriv[:-2]) & (deriv[1:-1] > deriv[2:])
    cand = np.nonzero(is_peak & valid & (deriv > PEAK_FACTOR * med_deriv)
                      & (D > SIGNIFICANCE_FACTOR * med_D))[0]
    # non-maximum suppression within the outer window
    radius = int(round(WINDOW[1] * M / N_used))
    chosen: list[int] = []
    for c in sorted(cand, key=lambda j: -deriv[j]):
        if all(abs(c - j) > radius for j in chosen):
            chosen.append(int(c))
    inner_left, inner_right, _ = _window_means(smooth, M, N_used, INNER_WINDOW)
    full = right - left
    narrow = inner_right - inner_left
    chosen = sorted(c for c in chosen
                    if abs(narrow[c] - full[c]) <= CONSISTENCY_TOL * abs(full[c]))
    return [(float(x[c]), complex(right[c] - left[c])) for c in chosen]


def reconstruct(lam: SpectralSequence, mu: SpectralSequence, M: int,
                sigma: GridFunction | None = None, detect: bool = True) -> ReconstructionResult:
    """Full pipeline: remainders, ``sigma*``, jumps and (if ``sigma`` is known) the gain."""
    lam_rem = remainders(unshift(lam))
    mu_rem = remainders(unshift(mu))
    N = min(len(lam_rem), len(mu_rem))
    lam_rem, mu_rem = lam_rem.restrict(1, N), mu_rem.restrict(1, N)
    star = sigma_star(lam_rem, mu_rem, M)
    jumps = detect_jumps(star, N) if detect and N >= 64 else []
    gain = smoothness_gain(star, sigma, N) if sigma is not None else None
    return ReconstructionResult(star, N, jumps, gain)
