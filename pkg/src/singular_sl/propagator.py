"""First-order systems, the Cauchy matrix and characteristic functions.

Two equivalent systems describe ``l(f) = lambda^2 f``:

* ``sigma_form``: ``u' = [[sigma, 1], [-lambda^2 - sigma^2, -sigma]] u`` with
  ``u = (f, f' - sigma f)`` (the quasi-derivative);
* ``tau_form``:   ``u' = [[tau, 1], [-lambda^2, -tau]] u = (A + tau J) u``.

Both generators are trace-free, so ``det U = 1``. The Cauchy matrix ``U`` is
the product of one matrix exponential per grid cell. Each cell uses the
fourth-order Magnus step built from the coefficient at the two Gauss points,
interpolated inside the smooth piece that contains the cell. For piecewise
constant coefficients with jumps on the grid the step is exact.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ResolutionError
from .gridfun import GridFunction, gauss_values

FORMS = ("sigma_form", "tau_form")
BCS = ("dirichlet", "neumann")

_TAYLOR_Z2 = 1e-8          # |omega h|^2 below which Taylor series are used
_SQRT3_12 = math.sqrt(3.0) / 12.0
_CHUNK = 64                # lambdas per vectorized block


@dataclass(frozen=True)
class CauchyMatrix:
    """``U(x, lambda)``: maps initial data at 0 to the solution at ``x``."""

    entries: np.ndarray
    x: float
    lam: complex

    @property
    def det(self) -> complex:
        e = self.entries
        return complex(e[0, 0] * e[1, 1] - e[0, 1] * e[1, 0])

    def __getitem__(self, ij):
        return complex(self.entries[ij])


def _check_form(form: str) -> None:
    if form not in FORMS:
        raise ValueError(f"form must be one of {FORMS}, got {form!r}")


def _expm_tracefree(P, Q, R):
    """Entries of ``exp([[P, Q], [R, -P]])`` (broadcast over arrays)."""
    z2 = P * P + Q * R
    z = np.sqrt(z2)
    small = np.abs(z2) < _TAYLOR_Z2
    with np.errstate(invalid="ignore", divide="ignore"):
        ch = np.where(small, 1.0 + z2 / 2.0 + z2 * z2 / 24.0, np.cosh(z))
        sh = np.where(small, 1.0 + z2 / 6.0 + z2 * z2 / 120.0, np.sinh(z) / np.where(small, 1.0, z))
    return ch + sh * P, sh * Q, sh * R, ch - sh * P


def step_exponential(B, h: float = 1.0) -> np.ndarray:
    """``exp(h B)`` for a trace-free 2x2 matrix (or a stack of them).

    Uses ``cosh(w h) I + sinh(w h)/w B`` with ``w^2 = -det B``, switching to
    Taylor series when ``|w h| < 1e-4``.

    Raises:
        ValueError: if ``trace(B)`` exceeds ``1e-12`` (relative to the entries).
    """
    B = np.asarray(B, dtype=complex)
    if B.shape[-2:] != (2, 2):
        raise ValueError("B must have shape (..., 2, 2)")
    tr = B[..., 0, 0] + B[..., 1, 1]
    scale = np.maximum(1.0, np.max(np.abs(B), axis=(-2, -1)))
    if np.any(np.abs(tr) > 1e-12 * scale):
        raise ValueError("step_exponential needs a trace-free matrix")
    P = 0.5 * (B[..., 0, 0] - B[..., 1, 1]) * h
    e00, e01, e10, e11 = _expm_tracefree(P, B[..., 0, 1] * h, B[..., 1, 0] * h)
    out = np.empty(B.shape, dtype=complex)
    out[..., 0, 0], out[..., 0, 1], out[..., 1, 0], out[..., 1, 1] = e00, e01, e10, e11
    return out


def free_exponential(lam, x) -> np.ndarray:
    """``exp(x A)`` with ``A = [[0, 1], [-lambda^2, 0]]`` in closed form."""
    lam = np.asarray(lam, dtype=complex)
    x = np.asarray(x, dtype=float)
    lx = lam * x
    c = np.cos(lx)
    with np.errstate(invalid="ignore", divide="ignore"):
        sinc = np.where(np.abs(lx) < 1e-8, x * (1.0 - lx * lx / 6.0), np.sin(lx) / np.where(lam == 0, 1.0, lam))
    out = np.empty(np.broadcast(lam, x).shape + (2, 2), dtype=complex)
    out[..., 0, 0] = c
    out[..., 0, 1] = sinc
    out[..., 1, 0] = -lam * np.sin(lx)
    out[..., 1, 1] = c
    return out


def _mul(A, B):
    """Batched 2x2 product with a fixed evaluation order."""
    out = np.empty(np.broadcast_shapes(A.shape, B.shape), dtype=complex)
    out[..., 0, 0] = A[..., 0, 0] * B[..., 0, 0] + A[..., 0, 1] * B[..., 1, 0]
    out[..., 0, 1] = A[..., 0, 0] * B[..., 0, 1] + A[..., 0, 1] * B[..., 1, 1]
    out[..., 1, 0] = A[..., 1, 0] * B[..., 0, 0] + A[..., 1, 1] * B[..., 1, 0]
    out[..., 1, 1] = A[..., 1, 0] * B[..., 0, 1] + A[..., 1, 1] * B[..., 1, 1]
    return out


def _ordered_product(E: np.ndarray) -> np.ndarray:
    """``E[..., m-1, :, :] @ ... @ E[..., 0, :, :]`` by pairwise reduction."""
    while E.shape[-3] > 1:
        m = E.shape[-3]
        if m % 2:
            eye = np.zeros(E.shape[:-3] + (1, 2, 2), dtype=complex)
            eye[..., 0, 0] = eye[..., 1, 1] = 1.0
            E = np.concatenate([E, eye], axis=-3)
        E = _mul(E[..., 1::2, :, :], E[..., 0::2, :, :])
    return E[..., 0, :, :]


class ShootingSystem:
    """Precomputed cell data for repeated propagation of one coefficient.

    Args:
        coeff: ``sigma`` (for ``sigma_form``) or ``tau`` (for ``tau_form``).
        form: ``"sigma_form"`` or ``"tau_form"``.
    """

    def __init__(self, coeff: GridFunction, form: str = "sigma_form"):
        _check_form(form)
        self.coeff = coeff
        self.form = form
        self.M = coeff.M
        self.h = coeff.h
        self.g1, self.g2 = gauss_values(coeff)

    def check_lambda(self, lams) -> None:
        lams = np.asarray(lams)
        if lams.size and np.max(np.abs(lams)) > 0.5 * self.M:
            raise ResolutionError(
                f"|lambda| = {np.max(np.abs(lams)):.4g} exceeds the sampling guard 0.5*M = {0.5 * self.M:g}")

    def cell_matrices(self, lams) -> np.ndarray:
        """Per-cell propagators, shape ``(K, M, 2, 2)``."""
        lams = np.atleast_1d(np.asarray(lams, dtype=complex))
        self.check_lambda(lams)
        h = self.h
        k = _SQRT3_12 * h * h
        l2 = (lams * lams)[:, None]
        a1, a2 = self.g1[None, :], self.g2[None, :]
        if self.form == "sigma_form":
            c1, c2 = -l2 - a1 * a1, -l2 - a2 * a2
        else:
            c1 = c2 = -l2
        # Omega = h/2 (B1 + B2) + k [B2, B1]
        P = 0.5 * h * (a1 + a2) + k * (c1 - c2)
        Q = h + 2.0 * k * (a2 - a1) + 0.0 * l2
        R = 0.5 * h * (c1 + c2) + 2.0 * k * (c2 * a1 - a2 * c1)
        e00, e01, e10, e11 = _expm_tracefree(P, Q, R)
        E = np.empty(P.shape + (2, 2), dtype=complex)
        E[..., 0, 0], E[..., 0, 1], E[..., 1, 0], E[..., 1, 1] = e00, e01, e10, e11
        return E

    def cauchy(self, lams) -> np.ndarray:
        """``U(1, lambda)`` for every lambda, shape ``(K, 2, 2)``."""
        lams = np.atleast_1d(np.asarray(lams, dtype=complex))
        out = np.empty((lams.size, 2, 2), dtype=complex)
        for i in range(0, lams.size, _CHUNK):
            out[i:i + _CHUNK] = _ordered_product(self.cell_matrices(lams[i:i + _CHUNK]))
        return out

    def char(self, lams, bc: str) -> np.ndarray:
        """``s(1, lambda)`` (Dirichlet) or ``c(1, lambda)`` (Neumann-Dirichlet)."""
        U = self.cauchy(lams)
        if bc == "dirichlet":
            return U[:, 0, 1]
        if bc == "neumann":
            return U[:, 0, 0]
        raise ValueError(f"bc must be one of {BCS}, got {bc!r}")

    def char_derivative(self, lams, bc: str) -> np.ndarray:
        """Central difference with step ``1e-6 * max(1, |lambda|)``."""
        lams = np.atleast_1d(np.asarray(lams, dtype=complex))
        d = 1e-6 * np.maximum(1.0, np.abs(lams))
        vals = self.char(np.concatenate([lams + d, lams - d]), bc)
        return (vals[:lams.size] - vals[lams.size:]) / (2.0 * d)

    def trajectory(self, lam: complex, init) -> np.ndarray:
        """Solution vector at every node, shape ``(M + 1, 2)``."""
        E = self.cell_matrices([lam])[0]
        out = np.empty((self.M + 1, 2), dtype=complex)
        u0, u1 = complex(init[0]), complex(init[1])
        out[0] = u0, u1
        e = E.tolist()
        for c in range(self.M):
            (a, b), (cc, d) = e[c]
            u0, u1 = a * u0 + b * u1, cc * u0 + d * u1
            out[c + 1] = u0, u1
        return out


def propagate(coeff: GridFunction, lam: complex, form: str = "sigma_form") -> CauchyMatrix:
    """Cauchy matrix ``U(1, lambda)``.

    Raises:
        ResolutionError: if ``|lambda| > 0.5 M``.
    """
    U = ShootingSystem(coeff, form).cauchy([lam])[0]
    return CauchyMatrix(U, 1.0, complex(lam))


def char_value(coeff: GridFunction, lam: complex, form: str = "sigma_form",
               bc: str = "dirichlet") -> complex:
    """``s(1, lambda) = U_12`` (Dirichlet) or ``c(1, lambda) = U_11`` (Neumann)."""
    return complex(ShootingSystem(coeff, form).char([lam], bc)[0])


def char_values(coeff: GridFunction, lams, form: str = "sigma_form",
                bc: str = "dirichlet") -> np.ndarray:
    """Vectorized :func:`char_value`."""
    return ShootingSystem(coeff, form).char(lams, bc)


def char_derivative(coeff: GridFunction, lam: complex, form: str = "sigma_form",
                    bc: str = "dirichlet") -> complex:
    """Derivative of the characteristic function in ``lambda``."""
    return complex(ShootingSystem(coeff, form).char_derivative([lam], bc)[0])


def solution_profile(coeff: GridFunction, lam: complex, form: str = "sigma_form",
                     init: str = "c_type") -> GridFunction:
    """First solution component along the grid.

    ``c_type`` starts from ``(1, 0)`` and ``s_type`` from ``(0, 1)``.
    """
    if init == "c_type":
        v0 = (1.0, 0.0)
    elif init == "s_type":
        v0 = (0.0, 1.0)
    else:
        raise ValueError(f"init must be 'c_type' or 's_type', got {init!r}")
    sys_ = ShootingSystem(coeff, form)
    sys_.check_lambda([lam])
    return GridFunction(sys_.trajectory(lam, v0)[:, 0])
