"""Declarative test potentials.

Every potential is given through its primitive ``sigma`` (so ``q = sigma'``
may be a distribution). The additive constant of the primitive is kept
explicitly as ``h_offset`` because it sets the Robin parameter of the
Neumann-Dirichlet problem while leaving the Dirichlet spectrum unchanged.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Any

import numpy as np

from .gridfun import GridFunction, nodes

VARIANTS = ("zero", "constant", "linear", "step", "fourier_random",
            "log_singularity", "from_file")

#: Smoothness reported for jump potentials (they lie in W^a for every a < 1/2).
STEP_ALPHA = 0.49
#: Extra decay added to ``n^{-alpha}`` in the random Fourier generator.
DECAY_MARGIN = 0.55


@dataclass(frozen=True)
class PotentialSpec:
    """Description of a primitive ``sigma``.

    Use the class-method constructors rather than filling ``params`` by
    hand; they validate the parameters.

    Attributes:
        variant: One of :data:`VARIANTS`.
        params: Variant parameters (see the constructors).
        h_offset: Additive constant of the primitive.
        nominal_alpha: Sobolev smoothness index used in reports.
    """

    variant: str
    params: tuple = ()
    h_offset: complex = 0.0
    nominal_alpha: float | None = None

    # -- constructors --------------------------------------------------
    @classmethod
    def zero(cls) -> "PotentialSpec":
        return cls("zero", (), 0.0, None)

    @classmethod
    def constant(cls, c: complex) -> "PotentialSpec":
        """``sigma = c`` (so ``q = 0`` with Robin parameter ``c``)."""
        return cls("constant", (), complex(c), 1.0)

    @classmethod
    def linear(cls, slope: complex, h: complex = 0.0) -> "PotentialSpec":
        """``sigma = h + slope x``, i.e. the constant potential ``q = slope``."""
        return cls("linear", (complex(slope),), complex(h), 1.0)

    @classmethod
    def step(cls, jumps, h: complex = 0.0) -> "PotentialSpec":
        """Jumps ``[(position, size), ...]``: ``q`` is a sum of point masses."""
        jumps = tuple((float(p), complex(s)) for p, s in jumps)
        if not jumps:
            raise ValueError("a step potential needs at least one jump")
        pos = [p for p, _ in jumps]
        if any(not 0.0 < p < 1.0 for p in pos):
            raise ValueError("jump positions must lie strictly inside (0, 1)")
        if any(b <= a for a, b in zip(pos, pos[1:])):
            raise ValueError("jump positions must be strictly increasing")
        return cls("step", jumps, complex(h), STEP_ALPHA)

    @classmethod
    def fourier_random(cls, alpha: float, n_modes: int = 256, seed: int = 0,
                       amplitude: float = 1.0, h: complex = 0.0) -> "PotentialSpec":
        """Random trigonometric sum with coefficients ``n^{-alpha-0.55}``."""
        if not 0.0 <= alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if n_modes < 1:
            raise ValueError("n_modes must be positive")
        return cls("fourier_random", (float(alpha), int(n_modes), int(seed), float(amplitude)),
                   complex(h), float(alpha))

    @classmethod
    def log_singularity(cls, strength: complex = 1.0, clip_epsilon: float | None = None,
                        h: complex = 0.0) -> "PotentialSpec":
        """``sigma = h + strength ln x``, clipped below ``clip_epsilon``.

        This is the primitive of a Coulomb-type ``q = strength / x``.
        """
        if clip_epsilon is not None and not 0.0 < clip_epsilon < 1.0:
            raise ValueError("clip_epsilon must lie in (0, 1)")
        return cls("log_singularity", (complex(strength), clip_epsilon), complex(h), STEP_ALPHA)

    @classmethod
    def from_file(cls, path: str, nominal_alpha: float | None = None) -> "PotentialSpec":
        """Samples read from a grid-function CSV file."""
        return cls("from_file", (str(path),), 0.0, nominal_alpha)

    def with_offset(self, h: complex) -> "PotentialSpec":
        """Same potential with a different additive constant."""
        if self.variant in ("zero", "from_file"):
            raise ValueError(f"variant {self.variant!r} has no adjustable offset")
        return PotentialSpec(self.variant, self.params, complex(h), self.nominal_alpha)


def _snap(position: float, M: int, tol: float | None) -> int:
    k = int(round(position * M))
    off = abs(position - k / M)
    limit = 0.5 / M if tol is None else tol
    if off > limit + 1e-15:
        raise ValueError(f"jump at {position} is {off:.3g} away from the grid (tolerance {limit:.3g})")
    if not 0 < k < M:
        raise ValueError(f"jump at {position} snaps to the boundary of a {M}-cell grid")
    if off > 1e-12:
        warnings.warn(f"jump at {position} snapped to node {k}/{M} (moved by {off:.3g})",
                      stacklevel=3)
    return k


def fourier_random_coefficients(alpha: float, n_modes: int, seed: int, amplitude: float):
    """Amplitudes ``(a_n, b_n)`` of ``cos(2 pi n x)`` and ``sin(2 pi n x)``."""
    rng = np.random.default_rng(seed)
    signs = rng.choice(np.array([-1.0, 1.0]), size=(2, n_modes))
    n = np.arange(1, n_modes + 1, dtype=float)
    w = amplitude * n ** (-alpha - DECAY_MARGIN)
    return w * signs[0], w * signs[1]


def realize(spec: PotentialSpec, M: int, snap_tol: float | None = None) -> GridFunction:
    """Sample ``sigma`` on the ``M``-cell grid.

    Step jumps are snapped to the nearest node (a warning is issued when a
    jump actually moves) and recorded as breakpoints.

    Raises:
        ValueError: for unknown variants, off-grid jumps or a file whose
            grid does not match ``M``.
    """
    x = nodes(M)
    h = spec.h_offset
    v = spec.variant
    if v == "zero":
        return GridFunction.zeros(M)
    if v == "constant":
        return GridFunction.constant(h, M)
    if v == "linear":
        (slope,) = spec.params
        return GridFunction(h + slope * x)
    if v == "step":
        right = np.full(M + 1, h, dtype=complex)
        left = right.copy()
        bps = []
        for pos, size in spec.params:
            k = _snap(pos, M, snap_tol)
            if k in bps:
                raise ValueError(f"two jumps snap to node {k}")
            bps.append(k)
            right[k:] += size
            left[k + 1:] += size
        return GridFunction(right, bps, left)
    if v == "fourier_random":
        alpha, n_modes, seed, amp = spec.params
        if 2 * n_modes > M / 4:
            raise ValueError(f"n_modes={n_modes} needs M >= {8 * n_modes} to stay resolved")
        a, b = fourier_random_coefficients(alpha, n_modes, seed, amp)
        arg = 2.0 * math.pi * np.outer(np.arange(1, n_modes + 1), x)
        return GridFunction(h + a @ np.cos(arg) + b @ np.sin(arg))
    if v == "log_singularity":
        strength, eps = spec.params
        eps = 1.0 / M if eps is None else eps
        return GridFunction(h + strength * np.log(np.maximum(x, eps)))
    if v == "from_file":
        f, _ = GridFunction.from_csv(spec.params[0])
        if f.M != M:
            raise ValueError(f"{spec.params[0]} holds a {f.M}-cell grid, requested M={M}")
        return f
    raise ValueError(f"unknown potential variant {v!r}")


def describe(spec: PotentialSpec) -> dict[str, Any]:
    """Summary used in reports (JSON friendly)."""
    out: dict[str, Any] = {
        "variant": spec.variant,
        "h_offset": [spec.h_offset.real, spec.h_offset.imag],
        "alpha": spec.nominal_alpha,
        "alpha_irrelevant": spec.variant == "zero",
    }
    if spec.variant == "step":
        out["jumps"] = [[p, [s.real, s.imag]] for p, s in spec.params]
        out["alpha_note"] = "proxy: jump functions lie in W^a for all a < 1/2"
    elif spec.variant == "fourier_random":
        alpha, n_modes, seed, amp = spec.params
        out.update(n_modes=n_modes, seed=seed, amplitude=amp)
    elif spec.variant == "linear":
        out["slope"] = [spec.params[0].real, spec.params[0].imag]
    elif spec.variant == "log_singularity":
        s, eps = spec.params
        out.update(strength=[s.real, s.imag], clip_epsilon=eps)
    elif spec.variant == "from_file":
        out["path"] = spec.params[0]
        _, meta = GridFunction.from_csv(spec.params[0])
        out["header"] = meta
    return out


def parse_potential(text: str, h: complex = 0.0) -> PotentialSpec:
    """Parse the ``variant:arg:arg`` grammar used in run configurations.

    Forms::

        zero
        constant:c
        linear:slope
        step:pos:jump[:pos:jump ...]
        fourier_random:alpha[:n_modes[:seed[:amplitude]]]
        log:strength[:clip_epsilon]
        file:path

    Numbers may be complex (Python syntax, e.g. ``1j``). ``h`` sets the
    additive constant where the variant allows one.
    """
    parts = [p.strip() for p in text.strip().split(":")]
    name, args = parts[0], parts[1:]

    def num(s: str) -> complex:
        return complex(s.replace(" ", ""))

    def real(s: str) -> float:
        z = num(s)
        if z.imag:
            raise ValueError(f"expected a real number, got {s!r}")
        return z.real

    try:
        if name == "zero" and not args:
            return PotentialSpec.zero()
        if name == "constant" and len(args) == 1:
            return PotentialSpec.constant(num(args[0]))
        if name == "linear" and len(args) == 1:
            return PotentialSpec.linear(num(args[0]), h)
        if name == "step" and args and len(args) % 2 == 0:
            pairs = [(real(args[i]), num(args[i + 1])) for i in range(0, len(args), 2)]
            return PotentialSpec.step(pairs, h)
        if name == "fourier_random" and 1 <= len(args) <= 4:
            alpha = real(args[0])
            n_modes = int(args[1]) if len(args) > 1 else 256
            seed = int(args[2]) if len(args) > 2 else 0
            amp = real(args[3]) if len(args) > 3 else 1.0
            return PotentialSpec.fourier_random(alpha, n_modes, seed, amp, h)
        if name in ("log", "log_singularity") and 1 <= len(args) <= 2:
            eps = real(args[1]) if len(args) > 1 else None
            return PotentialSpec.log_singularity(num(args[0]), eps, h)
        if name in ("file", "from_file") and len(args) >= 1:
            return PotentialSpec.from_file(":".join(args))
    except ValueError as exc:
        raise ValueError(f"bad potential {text!r}: {exc}") from None
    raise ValueError(f"bad potential {text!r}: unknown variant or wrong number of arguments")
