"""Acceptance suite: eleven end-to-end checks with fixed tolerances.

Every check returns a :class:`CheckResult` carrying the measured
quantities, the thresholds and a verdict. The same functions back the
``selftest`` command and ``tests/test_acceptance.py``.

Oracles are independent of the shooting code: closed forms, scalar
transcendental equations solved with :func:`scipy.optimize.brentq`, and an
explicit transfer-matrix model for point interactions.
"""
from __future__ import annotations

import math
import tempfile
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .asymptotics import analyze, fixed_point_residual, gamma_of, generic_zero_asymptotics
from .coeffseq import estimate_decay, weighted_norm
from .factorization import factorize
from .gridfun import (GridFunction, fourier_coeffs, l2_norm, nodes, product_identity_h,
                      quadrature)
from .inverse import reconstruct
from .potentials import PotentialSpec, realize
from .propagator import ShootingSystem
from .spectrum import SpectralSequence, locate, locate_real, unshift
from .tauseries import build_series, series_char, volterra_iterates

M_DEFAULT = 2048
#: Grid for the point-interaction checks: 0.4 * 2560 = 1024 is a node.
M_DELTA = 2560
#: Monte Carlo samples per node used by the series checks.
MC_SAMPLES = 20_000


@dataclass
class CheckResult:
    """Outcome of one acceptance criterion."""

    number: int
    title: str
    passed: bool
    measured: dict = field(default_factory=dict)
    thresholds: dict = field(default_factory=dict)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        parts = ", ".join(f"{k}={_fmt(v)}" for k, v in self.measured.items())
        limits = ", ".join(f"{k}={_fmt(v)}" for k, v in self.thresholds.items())
        return f"[{status}] criterion {self.number:2d} {self.title}: {parts} (limits: {limits})"

    def to_dict(self) -> dict:
        return {"number": self.number, "title": self.title, "passed": bool(self.passed),
                "measured": _plain(self.measured), "thresholds": _plain(self.thresholds)}


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.3g}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(u) for u in v) + "]"
    return str(v)


def _plain(d):
    if isinstance(d, dict):
        return {k: _plain(v) for k, v in d.items()}
    if isinstance(d, (list, tuple)):
        return [_plain(v) for v in d]
    if isinstance(d, (np.floating, np.integer, np.bool_)):
        return d.item()
    return d


# ---------------------------------------------------------------------------
# Independent oracles
# ---------------------------------------------------------------------------
def _scan_roots(g: Callable[[float], float], count: int, t_max: float,
                per_unit: int = 40) -> np.ndarray:
    """First ``count`` sign changes of ``g`` on ``(0, t_max]``, refined by brentq."""
    grid = np.linspace(1e-6, t_max, int(per_unit * t_max) + 2)
    vals = np.array([g(t) for t in grid])
    roots = []
    for i in np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]:
        roots.append(brentq(g, grid[i], grid[i + 1], xtol=1e-15, rtol=1e-15))
        if len(roots) == count:
            break
    return np.array(roots)


def point_interaction_char(lam: float, kicks, bc: str, h: float = 0.0) -> float:
    """Characteristic function of ``-y'' + sum a_j delta(x - p_j) y`` by transfer matrices.

    The state ``(y, y')`` is carried across free segments in closed form and
    ``y'`` jumps by ``a_j y`` at every point ``p_j``. Dirichlet starts from
    ``(0, 1)``; the Neumann-Dirichlet problem starts from ``(1, h)``.
    Returns ``y(1)``.
    """
    y, dy = (0.0, 1.0) if bc == "dirichlet" else (1.0, h)
    x = 0.0
    for p, a in list(kicks) + [(1.0, 0.0)]:
        d = p - x
        c, s = math.cos(lam * d), math.sin(lam * d)
        y, dy = c * y + s / lam * dy, -lam * s * y + c * dy
        dy += a * y
        x = p
    return y


def point_interaction_roots(kicks, bc: str, count: int, h: float = 0.0) -> np.ndarray:
    return _scan_roots(lambda t: point_interaction_char(t, kicks, bc, h), count,
                       math.pi * (count + 1))


# ---------------------------------------------------------------------------
# Criteria
# ---------------------------------------------------------------------------
def check_free_case() -> CheckResult:
    sigma = realize(PotentialSpec.zero(), M_DEFAULT)
    n = np.arange(1, 101)
    lam = locate_real(sigma, "sigma_form", "dirichlet", 100).values
    mu = locate_real(sigma, "sigma_form", "neumann", 100).values
    err_d = float(np.max(np.abs(lam - math.pi * n)))
    err_n = float(np.max(np.abs(mu - math.pi * (n - 0.5))))
    tol = 1e-9
    return CheckResult(1, "free case", max(err_d, err_n) <= tol,
                       {"dirichlet_err": err_d, "neumann_err": err_n}, {"abs_err": tol})


def check_constant_potential() -> CheckResult:
    sigma = realize(PotentialSpec.linear(1.0), M_DEFAULT)
    n = np.arange(1, 51)
    lam = locate_real(sigma, "sigma_form", "dirichlet", 50).values
    mu = locate_real(sigma, "sigma_form", "neumann", 50).values
    exact = np.sqrt(math.pi ** 2 * n ** 2 + 1.0)
    # y(0) = 1, y'(0) = sigma(0) y(0) = 0 gives y = cos(w x), w^2 = lambda^2 - 1
    oracle = _scan_roots(lambda t: np.cos(np.sqrt(complex(t * t - 1.0))).real, 50,
                         math.pi * 51)
    err_d = float(np.max(np.abs(lam - exact)))
    err_n = float(np.max(np.abs(mu - oracle)))
    tol = 1e-8
    return CheckResult(2, "constant potential", max(err_d, err_n) <= tol,
                       {"dirichlet_err": err_d, "neumann_err": err_n}, {"abs_err": tol})


def check_delta_potential() -> CheckResult:
    sigma = realize(PotentialSpec.step([(0.4, 1.0)]), M_DELTA)
    lam = locate_real(sigma, "sigma_form", "dirichlet", 50).values

    def g(t):
        return math.sin(t) + math.sin(0.4 * t) * math.sin(0.6 * t) / t

    oracle = _scan_roots(g, 50, math.pi * 51)
    err = float(np.max(np.abs(lam - oracle)))
    tol = 1e-8
    return CheckResult(3, "delta potential", err <= tol, {"dirichlet_err": err, "M": M_DELTA},
                       {"abs_err": tol})


FACTORIZATION_CASES = [  # (alpha, seed, h)
    (0.0, 1, 0.0), (0.5, 2, 0.0), (1.0, 3, 0.0), (0.0, 4, -2.0), (0.5, 5, -2.0),
]
FACTORIZATION_MODES = 64


def check_factorization() -> CheckResult:
    n_max = 64
    form_gap = unshift_gap = riccati = 0.0
    shifts = []
    for alpha, seed, h in FACTORIZATION_CASES:
        spec = PotentialSpec.fourier_random(alpha, FACTORIZATION_MODES, seed, 1.0, h)
        sigma = realize(spec, M_DEFAULT)
        fr = factorize(sigma)
        shifts.append(fr.shift_C)
        riccati = max(riccati, fr.riccati_residual)
        for bc in ("dirichlet", "neumann"):
            via_sigma = locate(fr.shifted_sigma, "sigma_form", bc, n_max, fr.shift_C)
            via_tau = locate(fr.tau, "tau_form", bc, n_max, fr.shift_C)
            direct = locate(sigma, "sigma_form", bc, n_max)
            form_gap = max(form_gap, float(np.max(np.abs(via_sigma.values - via_tau.values))))
            unshift_gap = max(unshift_gap,
                              float(np.max(np.abs(unshift(via_tau).values - direct.values))))
    ok = form_gap <= 1e-7 and unshift_gap <= 1e-7 and riccati <= 1e-6
    return CheckResult(4, "factorization equivalence", ok,
                       {"form_gap": form_gap, "unshift_gap": unshift_gap,
                        "riccati_residual": riccati, "shifts": shifts},
                       {"spectra": 1e-7, "riccati": 1e-6})


SERIES_CASES = [(1.0, 32, 1, 0.5), (1.0, 32, 4, 0.8)]  # fourier_random arguments


def check_series_char() -> CheckResult:
    lams = np.linspace(0.0, 40.0, 81)
    series_excess = -math.inf
    norms = []
    env_ratio = 0.0
    for alpha, modes, seed, amp in SERIES_CASES:
        sigma = realize(PotentialSpec.fourier_random(alpha, modes, seed, amp), M_DEFAULT)
        fr = factorize(sigma)
        tau = fr.tau
        norm = l2_norm(tau)
        norms.append(norm)
        series = build_series(tau, 5, MC_SAMPLES, seed=seed)
        shoot = ShootingSystem(tau, "tau_form")
        for bc in ("dirichlet", "neumann"):
            gap = np.max(np.abs(series_char(series, lams, bc) - shoot.char(lams, bc)))
            series_excess = max(series_excess, float(gap) - (series.tail_bound + 1e-5))
        tau_l1 = float(quadrature(tau.map(np.abs)).real)
        for lam in (0.0, 1.0, math.pi, 10.0):
            U = volterra_iterates(tau, lam, 8)
            u1 = np.linalg.norm(U[1], 2)
            for n in range(2, len(U)):
                envelope = 3.0 * u1 * tau_l1 ** (n - 1) / math.factorial(n - 1)
                env_ratio = max(env_ratio, float(np.linalg.norm(U[n], 2) / envelope))
    ok = series_excess <= 0.0 and env_ratio <= 1.0 and max(norms) <= 1.5
    return CheckResult(5, "series characteristic function", ok,
                       {"gap_minus_allowance": series_excess, "volterra_envelope_ratio": env_ratio,
                        "tau_norms": norms},
                       {"gap_minus_allowance": 0.0, "volterra_envelope_ratio": 1.0,
                        "tau_norm": 1.5})


LADDER_CASES = [(0, 0.5), (1, 1.0), (2, 2.0), (3, 1.0), (4, 0.5)]  # (seed, target norm)


def check_norm_ladder() -> CheckResult:
    worst = 0.0
    for seed, target in LADDER_CASES:
        base = realize(PotentialSpec.fourier_random(1.0, 32, seed), M_DEFAULT)
        tau = base * (target / l2_norm(base))
        series = build_series(tau, 5, MC_SAMPLES, seed=seed)
        t = series.tau_norm
        for n, tn in enumerate(series.tau_n, start=1):
            bound = t ** n / math.sqrt(math.factorial(n - 1) * math.factorial(n))
            worst = max(worst, l2_norm(tn) / bound)
    return CheckResult(6, "tau_n norm ladder", worst <= 1.05,
                       {"max_norm_over_bound": worst}, {"max_norm_over_bound": 1.05})


ASYMPTOTIC_ALPHAS = (0.25, 0.5, 0.75, 1.0)
ASYMPTOTIC_MODES = 256
ASYMPTOTIC_SEED = 11


def _both_spectra(sigma: GridFunction, n_max: int):
    return [locate(sigma, "sigma_form", bc, n_max) for bc in ("dirichlet", "neumann")]


def check_asymptotic_decay() -> CheckResult:
    margins = {}
    for alpha in ASYMPTOTIC_ALPHAS:
        spec = PotentialSpec.fourier_random(alpha, ASYMPTOTIC_MODES, ASYMPTOTIC_SEED)
        sigma = realize(spec, M_DEFAULT)
        report = analyze(sigma, _both_spectra(sigma, 128), alpha)
        g = gamma_of(alpha)
        need = {"refined": g - 0.2, "leading": min(2 * alpha, g) - 0.2}
        for key, fit in report.fitted_exponents.items():
            level = key.split("_")[0]
            margins[f"{alpha}_{key}"] = float(fit) - need[level]
    sigma0 = realize(PotentialSpec.fourier_random(0.0, ASYMPTOTIC_MODES, ASYMPTOTIC_SEED),
                     M_DEFAULT)
    growth = 0.0
    for bc in ("dirichlet", "neumann"):
        norms = []
        for n_max in (64, 128):
            rep = analyze(sigma0, [locate(sigma0, "sigma_form", bc, n_max)], 0.0)
            norms.append(weighted_norm(rep.residual_leading[bc], 2, 0))
        growth = max(growth, abs(norms[1] / norms[0] - 1.0))
    worst = min(margins.values())
    ok = worst >= 0.0 and growth <= 0.05
    return CheckResult(7, "asymptotic decay", ok,
                       {"min_exponent_margin": worst, "alpha0_l2_growth": growth},
                       {"min_exponent_margin": 0.0, "alpha0_l2_growth": 0.05})


def check_generic_zeros() -> CheckResult:
    f = realize(PotentialSpec.fourier_random(0.5, 256, 7), M_DEFAULT)
    xi, residual = generic_zero_asymptotics(f, "both", 128)
    fit = float(estimate_decay(residual, 8, len(residual)))
    fp = fixed_point_residual(f, xi)
    rel = float(np.max(np.abs(fp.values) / (1.0 + np.abs(xi.values))))
    ok = fit >= 1.3 and rel <= 1e-8
    return CheckResult(8, "generic zeros", ok, {"residual_exponent": fit, "fixed_point": rel},
                       {"residual_exponent": 1.3, "fixed_point": 1e-8})


def _random_smooth_pair(rng: np.random.Generator, M: int):
    k = np.arange(1, 33)
    x = nodes(M)
    out = []
    for _ in range(2):
        a = rng.standard_normal(32) * k ** -3.0
        b = rng.standard_normal(32) * k ** -3.0
        v = rng.standard_normal() + a @ np.cos(2 * np.pi * np.outer(k, x)) \
            + b @ np.sin(np.pi * np.outer(k, x))
        out.append(GridFunction(v))
    return out


def _identity_error(f: GridFunction, g: GridFunction, n_top: int) -> float:
    n = np.arange(1, n_top + 1)
    cf, cg = fourier_coeffs(f, n, "cosine"), fourier_coeffs(g, n, "cosine")
    sf, sg = fourier_coeffs(f, n, "sine"), fourier_coeffs(g, n, "sine")
    e1 = cf * cg - fourier_coeffs(product_identity_h(f, g, "h1"), n, "cosine")
    e2 = sf * sg - fourier_coeffs(product_identity_h(f, g, "h2"), n, "cosine")
    e3 = sf * cg - fourier_coeffs(product_identity_h(f, g, "h3"), n, "sine")
    return float(max(np.max(np.abs(e1)), np.max(np.abs(e2)), np.max(np.abs(e3))))


def check_structural() -> CheckResult:
    M = M_DEFAULT
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        potentials = {
            "zero": realize(PotentialSpec.zero(), M),
            "linear": realize(PotentialSpec.linear(1.0), M),
            "step": realize(PotentialSpec.step([(0.3, 1.0), (0.7, -0.5)]), M),
            "rough": realize(PotentialSpec.fourier_random(0.5, 256, 7), M),
            "complex": realize(PotentialSpec.linear(1j), M),
            "log": realize(PotentialSpec.log_singularity(1.0), M),
        }
    lams = np.linspace(0.0, 100.0, 201)
    wronskian = evenness = 0.0
    for sigma in potentials.values():
        system = ShootingSystem(sigma, "sigma_form")
        U = system.cauchy(lams)
        det = U[:, 0, 0] * U[:, 1, 1] - U[:, 0, 1] * U[:, 1, 0]
        wronskian = max(wronskian, float(np.max(np.abs(det - 1.0))))
        for bc in ("dirichlet", "neumann"):
            plus, minus = system.char(lams, bc), system.char(-lams, bc)
            evenness = max(evenness, float(np.max(np.abs(plus - minus)
                                                  / np.maximum(1.0, np.abs(plus)))))
    # interlacing of squares for real potentials
    interlace_ok = True
    for name in ("rough", "step", "log"):
        lam, mu = _both_spectra(potentials[name], 64)
        l2, m2 = (lam.values ** 2).real, (mu.values ** 2).real
        interlace_ok &= bool(np.all(m2[:63] < l2[:63]) and np.all(l2[:63] < m2[1:64]))
    # Dirichlet spectrum ignores the additive constant, the Neumann one does not
    rough = potentials["rough"]
    shifted = rough + GridFunction.constant(1.0, M)
    d0 = locate(rough, "sigma_form", "dirichlet", 64).values
    d1 = locate(shifted, "sigma_form", "dirichlet", 64).values
    n0 = locate(rough, "sigma_form", "neumann", 1).values
    n1 = locate(shifted, "sigma_form", "neumann", 1).values
    offset_gap = float(np.max(np.abs(d0 - d1)))
    robin_move = float(abs(n0[0] - n1[0]))
    rng = np.random.default_rng(2024)
    identity = max(_identity_error(*_random_smooth_pair(rng, M), M // 8) for _ in range(20))
    ok = (wronskian <= 1e-9 and evenness <= 1e-10 and interlace_ok and offset_gap <= 1e-8
          and robin_move > 1e-3 and identity <= 1e-7)
    return CheckResult(9, "structural invariants", ok,
                       {"wronskian": wronskian, "evenness": evenness, "interlacing": interlace_ok,
                        "dirichlet_offset_gap": offset_gap, "neumann_offset_move": robin_move,
                        "product_identities": identity},
                       {"wronskian": 1e-9, "evenness": 1e-10, "dirichlet_offset_gap": 1e-8,
                        "neumann_offset_move": 1e-3, "product_identities": 1e-7})


def check_inverse() -> CheckResult:
    sigma = realize(PotentialSpec.step([(0.4, 1.0)]), M_DELTA)
    lam, mu = _both_spectra(sigma, 200)
    rec = reconstruct(lam, mu, M_DELTA)
    jumps = rec.detected_jumps
    pos_err = size_err = math.inf
    if len(jumps) == 1:
        pos_err = abs(jumps[0][0] - 0.4)
        size_err = abs(jumps[0][1] - 1.0)
    rough = realize(PotentialSpec.fourier_random(0.5, 256, 7), M_DEFAULT)
    lam_r, mu_r = _both_spectra(rough, 200)
    rec_r = reconstruct(lam_r, mu_r, M_DEFAULT, sigma=rough)
    gain = float(rec_r.smoothness_gain)
    ok = (len(jumps) == 1 and pos_err <= 0.005 and size_err <= 0.05 and gain >= 0.3
          and not rec_r.detected_jumps)
    return CheckResult(10, "inverse reconstruction", ok,
                       {"jumps_found": len(jumps), "position_err": pos_err, "size_err": size_err,
                        "smoothness_gain": gain, "rough_false_jumps": len(rec_r.detected_jumps)},
                       {"position_err": 0.005, "size_err": 0.05, "smoothness_gain": 0.3})


REPRO_CONFIG = """\
command=charfn
potential=fourier_random:1:32:5:0.5
M=1024
n_max=16
form=tau_form
n_samples=4000
seed=3
"""


def check_reproducibility() -> CheckResult:
    from .cli import parse_config, run

    digests = {}
    with tempfile.TemporaryDirectory() as tmp:
        for workers in (1, 4, 8):
            out = Path(tmp) / f"w{workers}"
            cfg = parse_config(REPRO_CONFIG, overrides=[("output_dir", str(out)),
                                                        ("workers", str(workers))])
            code = run(cfg, quiet=True)
            if code != 0:
                return CheckResult(11, "reproducibility", False, {"exit_code": code}, {})
            digests[workers] = {p.name: p.read_bytes() for p in sorted(out.iterdir())}
    names = sorted(digests[1])
    same = all(digests[w] == digests[1] for w in (4, 8))
    return CheckResult(11, "reproducibility", same and len(names) > 2,
                       {"files_compared": len(names), "identical": same}, {"identical": True})


CHECKS: dict[int, Callable[[], CheckResult]] = {
    1: check_free_case,
    2: check_constant_potential,
    3: check_delta_potential,
    4: check_factorization,
    5: check_series_char,
    6: check_norm_ladder,
    7: check_asymptotic_decay,
    8: check_generic_zeros,
    9: check_structural,
    10: check_inverse,
    11: check_reproducibility,
}


def run_checks(numbers=None, echo: Callable[[str], None] | None = print) -> list[CheckResult]:
    """Run the selected criteria (all by default), printing one line each."""
    results = []
    for number in sorted(CHECKS if numbers is None else numbers):
        res = CHECKS[number]()
        if echo is not None:
            echo(res.line())
        results.append(res)
    return results
