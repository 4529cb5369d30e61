import json
import math

import numpy as np
import pytest

from singular_sl.coeffseq import CoeffSeq
from singular_sl.gridfun import GridFunction, l2_norm, nodes, synthesize
from singular_sl.inverse import (detect_jumps, lanczos_factors, reconstruct, sigma_star,
                                 smoothness_gain, star_coefficients)
from singular_sl.potentials import PotentialSpec, realize
from singular_sl.spectrum import locate, remainders


def _rem(values):
    return CoeffSeq("plain", np.asarray(values, dtype=complex), 1)


def _step_star(x0, size, N, M):
    """Truncated sine series (2N terms) of size * 1[x > x0]."""
    k = np.arange(1, 2 * N + 1)
    b = 2 * size * (np.cos(k * math.pi * x0) - np.cos(k * math.pi)) / (k * math.pi)
    return synthesize(CoeffSeq("sine", b, 1), M)


def test_zero_remainders():
    star = sigma_star(_rem(np.zeros(16)), _rem(np.zeros(16)), 256)
    assert np.all(star.values == 0)


def test_linearity(rng):
    a = [_rem(rng.normal(size=20)) for _ in range(2)]
    b = [_rem(rng.normal(size=20)) for _ in range(2)]
    lhs = sigma_star(a[0] + b[0], a[1] + b[1], 512)
    rhs = sigma_star(*a, 512) + sigma_star(*b, 512)
    assert np.allclose(lhs.values, rhs.values, atol=1e-13)
    assert abs(lhs.values[0]) < 1e-13 and abs(lhs.values[-1]) < 1e-12


def test_star_coefficient_layout():
    c = star_coefficients(_rem([1.0, 2.0]), _rem([10.0, 20.0]))
    assert list(c.values) == [20.0, -2.0, 40.0, -4.0]
    with pytest.raises(ValueError):
        star_coefficients(_rem([1.0]), _rem([1.0, 2.0]))


def test_parseval_for_one_more_pair(rng):
    lam, mu = rng.normal(size=41), rng.normal(size=41)
    a = sigma_star(_rem(lam[:40]), _rem(mu[:40]), 4096)
    b = sigma_star(_rem(lam), _rem(mu), 4096)
    dropped = math.sqrt(0.5 * (4 * lam[40] ** 2 + 4 * mu[40] ** 2))
    assert l2_norm(b - a) == pytest.approx(dropped, abs=1e-10)


def test_resolution_guard():
    from singular_sl.errors import ResolutionError
    with pytest.raises(ResolutionError):
        sigma_star(_rem(np.ones(40)), _rem(np.ones(40)), 256)


def test_linear_potential_pipeline():
    M, N = 1024, 128
    sigma = GridFunction(nodes(M))
    lam = remainders(locate(sigma, bc="dirichlet", n_max=N))
    mu = remainders(locate(sigma, bc="neumann", n_max=N))
    star = sigma_star(lam, mu, M)
    k = np.arange(1, 2 * N + 1)
    x_series = synthesize(CoeffSeq("sine", -2 * np.cos(k * math.pi) / (k * math.pi), 1), M)
    assert l2_norm(star - x_series) <= 0.05


def test_gain_sentinels():
    M = 1024
    zero = GridFunction.zeros(M)
    gain = smoothness_gain(zero, zero, 64)
    assert gain.capped
    sigma = realize(PotentialSpec.fourier_random(1.0, 64, 2), M)
    res = reconstruct(*(locate(sigma, bc=bc, n_max=64) for bc in ("dirichlet", "neumann")),
                      M, sigma)
    assert res.smoothness_gain is not None and float(res.smoothness_gain) >= 0
    d = json.loads(res.to_json())
    assert d["n_used"] == 64 and d["detected_jumps"] == []


def test_lanczos_factors():
    w = lanczos_factors(128)
    assert np.all(w[:64] == 1) and np.all(np.diff(w[63:]) < 0) and 0 < w[-1] < 1


def test_smooth_star_has_no_jumps():
    M, N = 2048, 128
    x = nodes(M)
    star = GridFunction(np.sin(3 * math.pi * x) * x + 0.2 * np.sin(math.pi * x))
    assert detect_jumps(star, N) == []
    with pytest.raises(ValueError):
        detect_jumps(star, 32)


@pytest.mark.parametrize("x0,size", [(0.4, 1.0), (0.55, -0.5), (0.3, 2j)])
def test_synthetic_jump(x0, size):
    M, N = 2048, 128
    jumps = detect_jumps(_step_star(x0, size, N, M), N)
    assert len(jumps) == 1
    pos, s = jumps[0]
    assert abs(pos - x0) <= 1 / N
    assert abs(s - size) <= 0.05 * abs(size)


def test_shift_equivariance():
    M, N = 2048, 128
    base = detect_jumps(_step_star(800 / M, 1.0, N, M), N)
    for k in (1, 7, 40):
        moved = detect_jumps(_step_star((800 + k) / M, 1.0, N, M), N)
        assert len(moved) == len(base) == 1
        assert round((moved[0][0] - base[0][0]) * M) == k


@pytest.mark.slow
def test_two_deltas_pipeline():
    M, N = 2000, 200
    sigma = realize(PotentialSpec.step([(0.3, 1.0), (0.7, -0.5)]), M)
    spectra = [locate(sigma, bc=bc, n_max=N) for bc in ("dirichlet", "neumann")]
    res = reconstruct(*spectra, M, sigma)
    assert len(res.detected_jumps) == 2
    for (pos, s), (x0, h) in zip(res.detected_jumps, [(0.3, 1.0), (0.7, -0.5)]):
        assert abs(pos - x0) <= 1 / N
        assert abs(s - h) <= 0.05 * abs(h)
    for x in (0.0, 1.0):
        assert abs(res.sigma_star.values[int(x * M)]) < 1e-12


@pytest.mark.slow
@pytest.mark.parametrize("alpha", [0.5, 1.0])
def test_rough_pipeline_has_gain_and_no_jumps(alpha):
    M, N = 2048, 128
    sigma = realize(PotentialSpec.fourier_random(alpha, 256, 7), M)
    spectra = [locate(sigma, bc=bc, n_max=N) for bc in ("dirichlet", "neumann")]
    res = reconstruct(*spectra, M, sigma)
    assert res.detected_jumps == []
    assert float(res.smoothness_gain) >= alpha - 0.2
