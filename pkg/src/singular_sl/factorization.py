"""Factorization ``l_sigma = m_tau`` through the zero-energy solution.

Let ``u`` solve ``l_sigma(u) = 0`` with ``u(0) = 1`` and ``u^[1](0) = 0``.
When ``u`` has no zeros, ``phi = u^[1] / u`` satisfies the Riccati equation
``phi' = -(phi + sigma)^2`` with ``phi(0) = 0``, and ``tau = phi + sigma``
gives the same operator written as ``m_tau``. If ``u`` vanishes somewhere,
the potential is first shifted by a constant ``C`` (``sigma -> sigma + C x``),
which moves every ``lambda^2`` by ``C``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FactorizationError
from .gridfun import GridFunction, cumulative, nodes
from .propagator import ShootingSystem

#: Smallest admissible ``min |u|`` on the grid.
U_FLOOR = 1e-3
#: Largest shift tried before giving up.
MAX_SHIFT = 2 ** 16
#: Default bound on the Riccati residual.
RICCATI_TOL = 1e-6


@dataclass(frozen=True)
class FactorizationResult:
    """Output of :func:`factorize`.

    Attributes:
        u: Zero-energy solution for the shifted potential.
        phi: ``u^[1] / u``.
        tau: ``phi + sigma_hat``.
        tilde_phi: ``tau - sigma_hat + int_0^x sigma_hat^2``.
        shift_C: Shift applied to ``q`` (``lambda^2 -> lambda^2 + C``).
        shifted_sigma: ``sigma_hat = sigma + C x``.
        riccati_residual: Max over nodes of the integrated Riccati defect.
    """

    u: GridFunction
    phi: GridFunction
    tau: GridFunction
    tilde_phi: GridFunction
    shift_C: float
    shifted_sigma: GridFunction
    riccati_residual: float

    def to_csv(self, prefix: str) -> list[str]:
        """Write ``u``, ``phi``, ``tau`` and ``tilde_phi`` next to ``prefix``."""
        paths = []
        for name in ("u", "phi", "tau", "tilde_phi"):
            path = f"{prefix}_{name}.csv"
            getattr(self, name).to_csv(path, header={"function": name, "shift_C": self.shift_C})
            paths.append(path)
        return paths


def _neutral_trajectory(sigma: GridFunction) -> np.ndarray:
    return ShootingSystem(sigma, "sigma_form").trajectory(0.0, (1.0, 0.0))


def solve_neutral(sigma: GridFunction) -> GridFunction:
    """``u`` with ``l_sigma(u) = 0``, ``u(0) = 1``, ``u^[1](0) = 0``."""
    return GridFunction(_neutral_trajectory(sigma)[:, 0])


def shift_sigma(sigma: GridFunction, C: float) -> GridFunction:
    """``sigma + C x`` (the primitive of ``q + C``)."""
    if C == 0:
        return sigma
    return sigma + GridFunction(C * nodes(sigma.M))


def min_abs_between_nodes(u: np.ndarray) -> float:
    """Smallest ``|u|`` on the piecewise-linear interpolant of the samples.

    Node values alone miss a zero crossing that falls between two nodes.
    """
    a, b = u[:-1], u[1:]
    d = b - a
    dd = np.abs(d) ** 2
    with np.errstate(invalid="ignore", divide="ignore"):
        t = np.where(dd > 0, -np.real(np.conj(a) * d) / np.where(dd > 0, dd, 1.0), 0.0)
    t = np.clip(t, 0.0, 1.0)
    return float(np.min(np.abs(a + t * d)))


def accretive_shift(sigma: GridFunction, floor: float = U_FLOOR) -> tuple[float, GridFunction]:
    """Smallest ``C`` in ``{0, 1, 2, 4, ..., 2^16}`` with ``min |u| >= floor``.

    The minimum is taken along the piecewise-linear interpolant of ``u``.

    Raises:
        FactorizationError: if no shift up to ``2^16`` works.
    """
    ladder = [0.0] + [float(2 ** j) for j in range(17)]
    worst = {}
    for C in ladder:
        sh = shift_sigma(sigma, C)
        m = min_abs_between_nodes(_neutral_trajectory(sh)[:, 0])
        worst[C] = m
        if m >= floor:
            return C, sh
    raise FactorizationError(
        f"no accretivity shift up to {MAX_SHIFT} makes the zero-energy solution non-vanishing",
        {"min_abs_u": worst})


def riccati_residual(phi: GridFunction, sigma_hat: GridFunction) -> float:
    """``max |phi + int phi^2 + 2 int phi sigma + int sigma^2|`` over the nodes."""
    defect = phi + cumulative((phi + sigma_hat) * (phi + sigma_hat))
    return float(np.max(np.abs(defect.values)))


def factorize(sigma: GridFunction, tol: float = RICCATI_TOL, floor: float = U_FLOOR) -> FactorizationResult:
    """Find ``tau`` with ``l_sigma_hat = m_tau`` (shift applied as needed).

    Raises:
        FactorizationError: if no shift works or the Riccati residual
            exceeds ``tol`` (diagnostics are attached).
    """
    C, sh = accretive_shift(sigma, floor)
    traj = _neutral_trajectory(sh)
    u = GridFunction(traj[:, 0])
    phi = GridFunction(traj[:, 1] / traj[:, 0])
    tau = phi + sh
    tilde_phi = phi + cumulative(sh * sh)
    res = riccati_residual(phi, sh)
    if not res <= tol:
        raise FactorizationError(
            f"Riccati residual {res:.3g} exceeds tolerance {tol:.3g}",
            {"riccati_residual": res, "shift_C": C,
             "min_abs_u": float(np.min(np.abs(u.values)))})
    return FactorizationResult(u, phi, tau, tilde_phi, C, sh, res)
