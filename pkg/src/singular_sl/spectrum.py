"""Eigenvalue square roots in the sector Omega.

The eigenvalues ``lambda^2`` of the Dirichlet problem are the squares of
the zeros of ``s(1, lambda)``; those of the Neumann-Dirichlet problem come
from ``c(1, lambda)``. Both functions are even and entire, so each
eigenvalue is represented by the square root in

    Omega = {z : -pi/2 < arg z <= pi/2} U {0}.

Real potentials are handled by a sign-change scan along the real and the
imaginary axis. Complex potentials use the argument principle on a row of
rectangles followed by recursive subdivision. Both paths finish with Newton
steps and are available for arbitrary even entire functions through
:func:`find_real_zeros` and :func:`find_complex_zeros`.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .coeffseq import CoeffSeq
from .errors import BracketingError, ContourError
from .gridfun import GridFunction
from .propagator import ShootingSystem

Fun = Callable[[np.ndarray], np.ndarray]

NEWTON_TOL = 1e-12
NEWTON_MAXIT = 30
TIE_TOL = 1e-9
SCAN_STEP = math.pi / 32


@dataclass(frozen=True)
class SpectralSequence:
    """Ordered square roots of eigenvalues (or zeros of a model function).

    Attributes:
        bc: ``"dirichlet"``, ``"neumann"`` or a free label for generic zeros.
        values: Ordered complex values in Omega.
        shift_C: Shift still contained in the values (``lambda^2 + C``).
        residuals: ``|F(value)|`` for the function whose zeros these are.
        multiplicities: Multiplicity of every entry (1 for simple roots).
    """

    bc: str
    values: np.ndarray
    shift_C: float = 0.0
    residuals: np.ndarray | None = None
    multiplicities: np.ndarray | None = None

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        object.__setattr__(self, "values", vals)
        if self.residuals is None:
            object.__setattr__(self, "residuals", np.zeros(vals.size))
        if self.multiplicities is None:
            object.__setattr__(self, "multiplicities", np.ones(vals.size, dtype=int))

    @property
    def count(self) -> int:
        """Number of roots counted with multiplicity."""
        return int(np.sum(self.multiplicities))

    def __len__(self) -> int:
        return self.values.size

    def __getitem__(self, n: int) -> complex:
        """1-based access: ``seq[n]`` is ``lambda_n``."""
        if not 1 <= n <= self.values.size:
            raise IndexError(n)
        return complex(self.values[n - 1])

    def head(self, n: int) -> "SpectralSequence":
        """The first ``n`` entries."""
        return replace(self, values=self.values[:n], residuals=self.residuals[:n],
                       multiplicities=self.multiplicities[:n])

    def to_csv(self, path=None) -> str:
        """``n,re,im,residual`` rows (1-based ``n``)."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "re", "im", "residual"])
        for n, (v, r) in enumerate(zip(self.values, self.residuals), start=1):
            w.writerow([n, repr(float(v.real)), repr(float(v.imag)), repr(float(r))])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text)
        return text


# ---------------------------------------------------------------------------
# Small helpers
# ---------------------------------------------------------------------------
def normalize_to_Omega(z):
    """Return ``z`` or ``-z``, whichever lies in Omega (``0 -> 0``).

    Works on scalars and arrays.
    """
    arr = np.asarray(z, dtype=complex)
    flip = (arr.real < 0) | ((arr.real == 0) & (arr.imag < 0))
    out = np.where(flip, -arr, arr)
    return complex(out) if out.ndim == 0 else out


def order_values(values, tol: float = TIE_TOL) -> np.ndarray:
    """Permutation sorting by real part, ties (within ``tol``) by imaginary part."""
    values = np.asarray(values, dtype=complex)
    idx = sorted(range(values.size), key=lambda i: (values[i].real, values[i].imag))
    # merge runs whose real parts agree within tol, then sort each run by imag
    out, run = [], []
    for i in idx:
        if run and values[i].real - values[run[0]].real > tol:
            out.extend(sorted(run, key=lambda j: values[j].imag))
            run = []
        run.append(i)
    out.extend(sorted(run, key=lambda j: values[j].imag))
    return np.array(out, dtype=int)


def unshift(seq: SpectralSequence) -> SpectralSequence:
    """Undo an accretivity shift: ``lambda = sqrt(lambda_hat^2 - C)`` in Omega."""
    if seq.shift_C == 0:
        return seq
    vals = normalize_to_Omega(np.sqrt(seq.values.astype(complex) ** 2 - seq.shift_C))
    vals = np.atleast_1d(vals)
    perm = order_values(vals)
    return SpectralSequence(seq.bc, vals[perm], 0.0, seq.residuals[perm], seq.multiplicities[perm])


def remainders(seq: SpectralSequence) -> CoeffSeq:
    """``lambda_n - pi n`` (Dirichlet) or ``mu_n - pi (n - 1/2)`` (Neumann)."""
    if seq.shift_C != 0:
        raise ValueError("remainders need an unshifted sequence; call unshift first")
    n = np.arange(1, len(seq) + 1)
    if seq.bc == "dirichlet":
        base = math.pi * n
    elif seq.bc == "neumann":
        base = math.pi * (n - 0.5)
    else:
        raise ValueError(f"remainders need a dirichlet or neumann sequence, got {seq.bc!r}")
    return CoeffSeq("plain", seq.values - base, 1)


def _newton(fun: Fun, z0: np.ndarray, dfun: Fun | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized Newton iteration with central-difference derivatives."""
    z = np.array(z0, dtype=complex)
    active = np.ones(z.size, dtype=bool)
    for _ in range(NEWTON_MAXIT):
        if not np.any(active):
            break
        za = z[active]
        if dfun is None:
            d = 1e-6 * np.maximum(1.0, np.abs(za))
            vals = fun(np.concatenate([za, za + d, za - d]))
            k = za.size
            f, df = vals[:k], (vals[k:2 * k] - vals[2 * k:]) / (2 * d)
        else:
            f, df = fun(za), dfun(za)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(df != 0, f / df, 0.0)
        step = np.where(np.isfinite(step), step, 0.0)
        z[active] = za - step
        done = np.abs(step) <= NEWTON_TOL * (1.0 + np.abs(za))
        ai = np.nonzero(active)[0]
        active[ai[done]] = False
    return z, ~active


# ---------------------------------------------------------------------------
# Real scan
# ---------------------------------------------------------------------------
def _bracket_refine(g: Callable[[np.ndarray], np.ndarray], lo, hi, glo, ghi, iters: int = 12):
    """Vectorized bisection on real brackets with sign change."""
    lo, hi, glo = lo.copy(), hi.copy(), glo.copy()
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        gm = g(mid)
        left = np.sign(gm) == np.sign(glo)
        lo = np.where(left, mid, lo)
        glo = np.where(left, gm, glo)
        hi = np.where(left, hi, mid)
    return lo, hi


def _sign_change_roots(g, grid):
    vals = g(grid)
    s = np.sign(vals)
    exact = np.nonzero(s == 0)[0]
    change = np.nonzero(s[:-1] * s[1:] < 0)[0]
    return vals, change, exact


def _real_line_zeros(fun: Fun, t_max: float, step: float, on_imag_axis: bool):
    """Zeros of ``fun`` on ``(0, t_max]`` of the real or imaginary axis."""
    unit = 1j if on_imag_axis else 1.0

    def g(t):
        return fun(unit * np.asarray(t, dtype=float)).real

    n = max(int(math.ceil(t_max / step)), 2)
    grid = np.linspace(0.0, t_max, n + 1)
    vals, change, exact = _sign_change_roots(g, grid)
    exact = exact[exact > 0]
    lo, hi = grid[change], grid[change + 1]
    if lo.size:
        lo, hi = _bracket_refine(g, lo, hi, vals[change], vals[change + 1])
    lo = np.concatenate([lo, grid[exact]])
    hi = np.concatenate([hi, grid[exact]])
    roots = 0.5 * (lo + hi)
    return roots, lo, hi, np.column_stack([grid, vals])


def find_real_zeros(fun: Fun, n_expected: int, t_end: float, kappa_max: float,
                    step: float = SCAN_STEP, label: str = "generic",
                    refinements: int = 3) -> SpectralSequence:
    """Zeros in Omega of a real-on-axes even function by sign-change scans.

    Scans ``(0, t_end]`` on the real axis and ``(0, kappa_max]`` on the
    imaginary axis (where even real functions are real as well), checks
    ``lambda = 0``, bisects every sign change and polishes with Newton.

    Raises:
        BracketingError: if the count differs from ``n_expected`` after
            ``refinements`` halvings of the scan step.
    """
    last_scan = None
    for attempt in range(refinements + 1):
        h = step / 2 ** attempt
        r_real, lo, hi, scan = _real_line_zeros(fun, t_end, h, False)
        roots = [r_real.astype(complex)]
        brackets = [(lo, hi, False)]
        if kappa_max > 0:
            r_im, lo_i, hi_i, scan_i = _real_line_zeros(fun, kappa_max, min(h, kappa_max / 8), True)
            roots.append(1j * r_im)
            brackets.append((lo_i, hi_i, True))
            scan = np.vstack([scan_i[::-1] * np.array([1j, 1]), scan])
        zero_val = fun(np.array([0.0 + 0.0j]))[0]
        scale = max(1.0, float(np.max(np.abs(scan[:, 1]))))
        at_zero = abs(zero_val) <= 1e-14 * scale
        allr = np.concatenate(roots + ([np.zeros(1, dtype=complex)] if at_zero else []))
        last_scan = scan
        if allr.size == n_expected:
            break
    else:
        raise BracketingError(
            f"found {allr.size} roots where {n_expected} were expected", scan=last_scan)
    polished, ok = _newton(fun, allr)
    # keep bisection midpoints when Newton wandered off the real/imaginary axis bracket
    lo_all = np.concatenate([b[0] for b in brackets] + ([np.zeros(1)] if at_zero else []))
    hi_all = np.concatenate([b[1] for b in brackets] + ([np.zeros(1)] if at_zero else []))
    axis = np.concatenate([np.full(b[0].size, b[2]) for b in brackets]
                          + ([np.zeros(1, dtype=bool)] if at_zero else []))
    coord = np.where(axis, polished.imag, polished.real)
    off = np.where(axis, np.abs(polished.real), np.abs(polished.imag))
    bad = (~ok) | (coord < lo_all - 1e-9) | (coord > hi_all + 1e-9) | (off > 1e-6 * (1 + np.abs(polished)))
    polished = np.where(bad, allr, polished)
    # the scan is on the axes: drop rounding-level off-axis parts
    polished = np.where(axis, 1j * polished.imag, polished.real + 0j)
    vals = normalize_to_Omega(polished)
    perm = order_values(vals)
    vals = vals[perm]
    res = np.abs(fun(vals))
    return SpectralSequence(label, vals, 0.0, res)


# ---------------------------------------------------------------------------
# Argument principle
# ---------------------------------------------------------------------------
_ARG_STEP = math.pi / 4
_MAX_REFINE = 14
_LOG_STEP = 0.5


def _edge_phase(fun: Fun, a: complex, b: complex, density: float) -> float:
    """Change of ``arg fun`` along the segment ``a -> b`` (adaptive)."""
    n = max(int(math.ceil(abs(b - a) * density)), 4)
    t = np.linspace(0.0, 1.0, n + 1)
    z = a + (b - a) * t
    f = fun(z)
    for _ in range(_MAX_REFINE):
        if np.any(f == 0) or not np.all(np.isfinite(f)):
            raise ContourError("contour passes through a root")
        ratio = f[1:] / f[:-1]
        d = np.angle(ratio)
        # a fast change of |f| means the edge passes close to a root, where
        # the phase may wrap between samples
        bad = (np.abs(d) > _ARG_STEP) | (np.abs(np.log(np.abs(ratio))) > _LOG_STEP)
        if not np.any(bad):
            return float(np.sum(d))
        idx = np.nonzero(bad)[0]
        tm = 0.5 * (t[idx] + t[idx + 1])
        fm = fun(a + (b - a) * tm)
        t = np.insert(t, idx + 1, tm)
        f = np.insert(f, idx + 1, fm)
    scale = np.median(np.abs(f))
    if np.min(np.abs(f)) < 1e-10 * scale:
        raise ContourError("contour passes (nearly) through a root")
    d = np.angle(f[1:] / f[:-1])
    return float(np.sum(d))


def _winding(fun: Fun, x0: float, x1: float, y0: float, y1: float, density: float) -> int:
    corners = [complex(x0, y0), complex(x1, y0), complex(x1, y1), complex(x0, y1)]
    total = sum(_edge_phase(fun, corners[i], corners[(i + 1) % 4], density) for i in range(4))
    w = total / (2 * math.pi)
    k = int(round(w))
    if abs(w - k) > 0.1:
        raise ContourError(f"winding number {w:.3f} is not close to an integer")
    return k


def _solve_box(fun: Fun, box, count: int, density: float, depth: int = 0):
    """Roots (with multiplicity) inside a box known to contain ``count``."""
    if count <= 0:
        return []
    x0, x1, y0, y1 = box
    cx, cy = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
    diam = math.hypot(x1 - x0, y1 - y0)
    if count == 1 or diam < 1e-6 or depth > 60:
        z, ok = _newton(fun, np.array([complex(cx, cy)]))
        z0 = z[0]
        pad = 1e-9 * (1 + abs(z0))
        inside = (x0 - pad <= z0.real <= x1 + pad) and (y0 - pad <= z0.imag <= y1 + pad)
        if (ok[0] and inside) or diam < 1e-6 or depth > 60:
            return [(z0, count)]
    # split the longer side off-centre: a symmetric box split at its middle
    # would put an edge right next to every root on the real axis
    for frac in (0.5 + 0.0731, 0.5 - 0.0517, 0.37, 0.63):
        if (x1 - x0) >= (y1 - y0):
            xm = x0 + frac * (x1 - x0)
            halves = [(x0, xm, y0, y1), (xm, x1, y0, y1)]
        else:
            ym = y0 + frac * (y1 - y0)
            halves = [(x0, x1, y0, ym), (x0, x1, ym, y1)]
        try:
            counts = [_winding(fun, *b, density) for b in halves]
        except ContourError:
            continue
        if sum(counts) == count:
            break
    else:
        raise ContourError(f"could not split a box holding {count} roots consistently")
    out = []
    for b, c in zip(halves, counts):
        out.extend(_solve_box(fun, b, c, density, depth + 1))
    return out


def find_complex_zeros(fun: Fun, n_expected: int, edges: np.ndarray, H0: float = 2.0,
                       H_max: float = 256.0, density: float = 8 / math.pi,
                       label: str = "generic") -> SpectralSequence:
    """Zeros in Omega of an even entire function by the argument principle.

    Args:
        fun: Vectorized function of complex ``lambda``.
        n_expected: Number of roots (with multiplicity) expected in Omega
            between the first and last vertical edge.
        edges: Real parts of the vertical edges; the first must be slightly
            negative so that the imaginary axis lies inside the first box.
        H0, H_max: Initial and largest half-height of the rectangles; the
            height doubles until the enclosed count stabilizes.
        density: Initial samples per unit length on every edge.

    Raises:
        ContourError: if every dilation of the contour still hits a root.
        BracketingError: if the count differs from ``n_expected``.
    """
    edges = np.asarray(edges, dtype=float)
    last_err = None
    for attempt in range(5):
        dil = 1.0 + 0.0137 * attempt
        e = edges.copy()
        if attempt:
            e[1:-1] += 0.011 * attempt * math.pi
        try:
            H = H0 * dil
            total = _winding(fun, e[0], e[-1], -H, H, density)
            while H < H_max:
                nxt = _winding(fun, e[0], e[-1], -2 * H, 2 * H, density)
                H *= 2
                if nxt == total:
                    break
                total = nxt
            counts = [_winding(fun, a, b, -H, H, density) for a, b in zip(e[:-1], e[1:])]
            if sum(counts) != total:
                raise ContourError("box counts do not add up to the enclosing count")
            found = []
            for a, b, c in zip(e[:-1], e[1:], counts):
                found.extend(_solve_box(fun, (a, b, -H, H), c, density))
            break
        except ContourError as exc:
            last_err = exc
    else:
        raise ContourError(f"argument principle failed after dilation: {last_err}")
    vals = np.array([z for z, _ in found], dtype=complex)
    mult = np.array([m for _, m in found], dtype=int)
    # keep the Omega representative of every +/- pair
    tol = 1e-9 * (1 + np.abs(vals))
    keep = (vals.real > tol) | ((np.abs(vals.real) <= tol) & (vals.imag > tol))
    zero = np.abs(vals) <= 1e-9
    if np.any(zero):
        zmult = int(mult[zero].sum())
        vals = np.concatenate([vals[keep & ~zero], [0.0]])
        mult = np.concatenate([mult[keep & ~zero], [zmult // 2]])
    else:
        vals, mult = vals[keep], mult[keep]
    vals = np.where(np.abs(vals.real) <= 1e-9 * (1 + np.abs(vals)), 1j * vals.imag, vals)
    # merge duplicates produced by boxes sharing an edge
    perm = order_values(vals)
    vals, mult = vals[perm], mult[perm]
    if vals.size > 1:
        dup = np.abs(np.diff(vals)) <= 1e-8 * (1 + np.abs(vals[1:]))
        if np.any(dup):
            keep_idx = np.concatenate([[True], ~dup])
            vals, mult = vals[keep_idx], mult[keep_idx]
    if int(mult.sum()) != n_expected:
        raise BracketingError(f"argument principle found {int(mult.sum())} roots, expected {n_expected}")
    res = np.abs(fun(vals))
    return SpectralSequence(label, vals, 0.0, res, mult)


# ---------------------------------------------------------------------------
# Eigenvalue drivers
# ---------------------------------------------------------------------------
def _layout(bc: str, n_max: int):
    """Scan end and vertical edges for the given boundary condition."""
    if bc == "dirichlet":
        t_end = math.pi * (n_max + 0.5)
        edges = np.concatenate([[-0.25], math.pi * (np.arange(n_max + 1) + 0.5)])
    elif bc == "neumann":
        t_end = math.pi * n_max
        edges = np.concatenate([[-0.25], math.pi * np.arange(1, n_max + 1)])
    else:
        raise ValueError(f"bc must be 'dirichlet' or 'neumann', got {bc!r}")
    return t_end, edges


def locate_real(coeff: GridFunction, form: str = "sigma_form", bc: str = "dirichlet",
                n_max: int = 64, shift_C: float = 0.0) -> SpectralSequence:
    """First ``n_max`` roots of the characteristic function for real coefficients.

    Negative eigenvalues (``lambda`` on the positive imaginary axis) are
    found by scanning ``kappa`` up to ``max|coeff| + 1``, which bounds
    ``sqrt(-lambda^2)`` by the quadratic-form estimate.

    Args:
        shift_C: Recorded in the result when ``coeff`` is a shifted potential.
    """
    if not coeff.is_real:
        raise ValueError("locate_real needs a real coefficient; use locate_complex")
    system = ShootingSystem(coeff, form)
    t_end, _ = _layout(bc, n_max)

    def fun(lams):
        return system.char(lams, bc)

    kappa_max = coeff.max_abs() + 1.0
    seq = find_real_zeros(fun, n_max, t_end, kappa_max, label=bc)
    return replace(seq, shift_C=float(shift_C))


def locate_complex(coeff: GridFunction, form: str = "sigma_form", bc: str = "dirichlet",
                   n_max: int = 64, shift_C: float = 0.0) -> SpectralSequence:
    """First ``n_max`` roots via the argument principle (any coefficient)."""
    system = ShootingSystem(coeff, form)
    _, edges = _layout(bc, n_max)

    def fun(lams):
        return system.char(lams, bc)

    H0 = max(2.0, coeff.max_abs() + 1.0)
    seq = find_complex_zeros(fun, n_max, edges, H0=H0, label=bc)
    return replace(seq, shift_C=float(shift_C))


def locate(coeff: GridFunction, form: str = "sigma_form", bc: str = "dirichlet",
           n_max: int = 64, shift_C: float = 0.0) -> SpectralSequence:
    """:func:`locate_real` for real coefficients, else :func:`locate_complex`."""
    if coeff.is_real:
        return locate_real(coeff, form, bc, n_max, shift_C)
    return locate_complex(coeff, form, bc, n_max, shift_C)
