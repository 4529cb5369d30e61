import math

import numpy as np
import pytest
from scipy.optimize import brentq

from singular_sl.asymptotics import (analyze, fixed_point_residual, gamma_of,
                                     generic_zero_asymptotics, model_zeros, predicted,
                                     predictions, sigma_pm)
from singular_sl.coeffseq import CoeffSeq, estimate_decay
from singular_sl.factorization import factorize
from singular_sl.gridfun import GridFunction, correlate, nodes
from singular_sl.potentials import PotentialSpec, realize
from singular_sl.spectrum import SpectralSequence, locate, unshift
from singular_sl.tauseries import build_series, series_char

M = 1024


def test_gamma():
    assert gamma_of(0.25) == 0.75 and gamma_of(0.5) == 1.5 and gamma_of(1.0) == 2.0


def test_sigma_pm_examples():
    plus, minus = sigma_pm(GridFunction.zeros(M))
    assert np.all(plus.values == 0) and np.all(minus.values == 0)
    c = 0.7
    x = nodes(M)
    plus, minus = sigma_pm(GridFunction.constant(c, M))
    assert np.allclose(plus.values, c - c * c * x + c * c * (1 - x), atol=1e-14)
    assert np.allclose(minus.values, -c + c * c * x + c * c * (1 - x), atol=1e-14)


def test_sigma_pm_sum(rough_sigma):
    plus, minus = sigma_pm(rough_sigma)
    assert np.allclose((plus + minus).values, 2 * correlate(rough_sigma, rough_sigma).values,
                       atol=1e-14)


def test_predictions_free_and_linear():
    zero = GridFunction.zeros(M)
    n = np.arange(1, 33)
    for level in ("leading", "refined"):
        assert np.allclose(predictions(zero, 32, "dirichlet", level).values, math.pi * n, atol=1e-14)
        assert np.allclose(predictions(zero, 32, "neumann", level).values, math.pi * (n - 0.5),
                           atol=1e-14)
    lead = predictions(GridFunction(nodes(M)), 32, "dirichlet", "leading").values
    assert np.allclose(lead, math.pi * n + 1 / (2 * math.pi * n), atol=1e-12)
    gap = np.abs(lead - np.sqrt(math.pi ** 2 * n ** 2 + 1))
    assert np.all(gap * n ** 3 < 0.01)
    assert predicted(zero, 3, "neumann", "leading") == pytest.approx(2.5 * math.pi)


def test_predictions_bad_level():
    with pytest.raises(ValueError):
        predictions(GridFunction.zeros(M), 4, "dirichlet", "third")


def _spectra(sigma, n_max):
    return [locate(sigma, bc=bc, n_max=n_max) for bc in ("dirichlet", "neumann")]


def test_analyze_zero_and_errors():
    zero = GridFunction.zeros(M)
    rep = analyze(zero, _spectra(zero, 32), alpha=1.0)
    for table in (rep.residual_leading, rep.residual_refined):
        for seq in table.values():
            assert np.max(np.abs(seq.values)) < 1e-9
    assert rep.gamma == 2.0
    with pytest.raises(ValueError):
        analyze(zero, locate(zero, n_max=16))
    with pytest.raises(ValueError):
        analyze(zero, SpectralSequence("dirichlet", np.arange(1, 40.0), shift_C=1.0))


def test_linear_potential_refined_decay():
    sigma = GridFunction(nodes(M))
    rep = analyze(sigma, _spectra(sigma, 64), alpha=1.0)
    assert float(rep.fitted_exponents["refined_dirichlet"]) >= 1.8
    assert float(rep.fitted_exponents["refined_neumann"]) >= 1.8


@pytest.mark.slow
def test_rough_refined_decay(rough_sigma):
    rep = analyze(rough_sigma, _spectra(rough_sigma, 128), alpha=0.5)
    for bc in ("dirichlet", "neumann"):
        refined = float(rep.fitted_exponents[f"refined_{bc}"])
        leading = float(rep.fitted_exponents[f"leading_{bc}"])
        assert refined >= 1.3
        assert refined >= leading - 0.1


def test_smooth_refined_beats_leading():
    sigma = realize(PotentialSpec.fourier_random(1.0, 64, 3), M)
    rep = analyze(sigma, _spectra(sigma, 64), alpha=1.0)
    for bc in ("dirichlet", "neumann"):
        r, l = rep.residual_refined[bc].values, rep.residual_leading[bc].values
        assert np.all(np.abs(r[7:]) < np.abs(l[7:]))


def test_report_serialization(tmp_path):
    sigma = GridFunction(nodes(256))
    rep = analyze(sigma, _spectra(sigma, 32), alpha=1.0)
    d = rep.to_dict()
    assert set(d["fitted_exponents"]) == {"leading_dirichlet", "refined_dirichlet",
                                         "leading_neumann", "refined_neumann"}
    paths = rep.write_tables(str(tmp_path / "r"))
    assert len(paths) == 4 and all(len(open(p).read().splitlines()) == 33 for p in paths)


# -- model functions ---------------------------------------------------------
def test_generic_zeros_of_zero_kernel():
    xi, res = generic_zero_asymptotics(GridFunction.zeros(M), "both", 16)
    k = np.arange(1, 33)
    assert np.allclose(xi.values, math.pi * k / 2, atol=1e-12)
    assert np.max(np.abs(res.values)) < 1e-12


def test_generic_zeros_constant_kernel():
    c = 0.6
    xi = model_zeros(GridFunction.constant(c, M), "Fc", 10).values.real
    g = lambda t: math.cos(t) + c * math.sin(t) / t
    for n, v in enumerate(xi, start=1):
        lo, hi = math.pi * (n - 0.5) - 1.2, math.pi * (n - 0.5) + 1.2
        grid = np.linspace(max(lo, 1e-3), hi, 400)
        vals = [g(t) for t in grid]
        roots = [brentq(g, a, b, xtol=1e-14) for a, b, fa, fb
                 in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]) if fa * fb < 0]
        assert min(abs(r - v) for r in roots) < 1e-10


def test_generic_zero_decay_and_fixed_point():
    f = realize(PotentialSpec.fourier_random(0.5, 128, 7), M)
    xi, res = generic_zero_asymptotics(f, "both", 64)
    assert float(estimate_decay(res, 8, 128)) >= 1.3
    fp = fixed_point_residual(f, xi)
    assert np.all(np.abs(fp.values) <= 1e-8 * (1 + np.abs(xi.values)))


def test_fixed_point_sensitivity():
    f = realize(PotentialSpec.fourier_random(0.5, 32, 1), 512)
    xi, _ = generic_zero_asymptotics(f, "Fs", 10)
    assert np.max(np.abs(fixed_point_residual(GridFunction.zeros(512),
                                              SpectralSequence("Fs", np.pi * np.arange(1, 6))).values)) < 1e-14
    bumped = xi.values.copy()
    bumped[4] += 1e-3
    fp = fixed_point_residual(f, SpectralSequence("Fs", bumped))
    assert abs(fp[5]) > 1e-4


def test_model_function_reproduces_dirichlet_spectrum():
    # with ||tau|| about 0.13 the series tail is 2e-8, so the zeros of F_s
    # built from tau^- must match the Dirichlet spectrum to 1e-7
    x = nodes(M)
    sigma = GridFunction(0.2 * (np.sin(2 * np.pi * x) + 0.4 * x))
    fac = factorize(sigma)
    ser = build_series(fac.tau, 5, n_samples=20000, seed=1)
    xi = model_zeros(ser.tau_minus, "Fs", 12)
    assert np.max(np.abs(series_char(ser, xi.values, "dirichlet"))) < 1e-10
    lam = unshift(locate(fac.tau, "tau_form", "dirichlet", 12, fac.shift_C))
    assert np.max(np.abs(xi.values - lam.values)) <= 1e-7
