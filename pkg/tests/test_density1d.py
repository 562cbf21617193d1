from __future__ import annotations

import json
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from avriso.density1d import (
    CALIBRATED_C,
    Density1D,
    IntervalSet,
    calibrate_c,
    check_cd0n,
    g_aux,
    isoprofile_bruteforce,
    milman_profile,
    model_density,
    model_ray,
    model_volume,
    perimeter1d,
    random_cd0n,
    residual,
    residual_v,
    volume,
    xi_minimizer,
)
from avriso.errors import DegenerateError, DomainError, InversionError

Ns = st.sampled_from([1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 6.0])


def two_x():
    return Density1D.sampled(2, [0.0, 1.0], [0.0, 2.0])


# -- model family -------------------------------------------------------------

def test_model_density_values():
    assert model_density(2, 1, 0, 0.5) == pytest.approx(1.0, abs=1e-15)
    assert model_density(2, 1, 1, 0.0) == pytest.approx(2 / 3, abs=1e-15)


@pytest.mark.parametrize("N,D,xi", [(3.5, 2.0, 0.7), (2.0, 1.0, 0.0), (5.0, 0.3, 40.0)])
def test_model_density_normalised(N, D, xi):
    val, _ = integrate.quad(lambda x: model_density(N, D, xi, x), 0, D,
                            epsabs=1e-14, epsrel=1e-13)
    assert val == pytest.approx(1.0, abs=1e-12)


def test_model_volume_values():
    assert model_volume(2, 1, 0, 0.5) == pytest.approx(0.25, abs=1e-15)
    assert model_volume(3, 2, 0.5, 1.0) == pytest.approx(7 / 26, abs=1e-15)
    quad, _ = integrate.quad(lambda x: model_density(3, 2, 0.5, x), 0, 1, epsabs=1e-14)
    assert quad == pytest.approx(7 / 26, abs=1e-13)
    assert model_volume(4.2, 3.0, 2.0, 3.0) == pytest.approx(1.0, abs=1e-15)


def test_model_ray_values():
    assert model_ray(4, 1, 0, 0.0625) == pytest.approx(0.5, abs=1e-15)
    assert model_ray(3, 2.5, 0.3, 1.0) == pytest.approx(2.5, abs=1e-14)


def test_model_round_trip_random():
    rng = np.random.default_rng(1)
    for _ in range(100):
        N = rng.uniform(1.1, 8)
        D = rng.uniform(0.1, 10)
        xi = 10 ** rng.uniform(-6, 4)
        v = rng.uniform(0, 1)
        assert model_volume(N, D, xi, model_ray(N, D, xi, v)) == pytest.approx(v, rel=1e-12, abs=1e-15)


def test_model_domain_errors():
    with pytest.raises(DomainError):
        model_density(2, 1, 0, 1.5)
    with pytest.raises(DomainError):
        model_volume(2, 1, 0, -0.1)
    with pytest.raises(DomainError):
        model_ray(2, 1, 0, 1.1)
    with pytest.raises(DomainError):
        model_density(1.0, 1, 0, 0.5)


# -- G_N and the profile ------------------------------------------------------

def test_g_aux_at_zero_is_one():
    assert g_aux(2, 0, 0.3) == 1.0
    assert np.all(np.asarray(g_aux(3.5, 0.0, np.linspace(0.01, 0.99, 50))) == 1.0)


def test_g_aux_high_precision_oracle():
    mpmath.mp.dps = 50
    exact = (mpmath.mpf(8) + 1) ** (mpmath.mpf(2) / 3) / 7
    assert g_aux(3, 1, 0.5) == pytest.approx(float(exact), abs=1e-14)
    assert float(exact) == pytest.approx(0.6181069587, abs=1e-10)


def _g_mp(N, xi, v):
    mpmath.mp.dps = 60
    N, xi, v = mpmath.mpf(N), mpmath.mpf(xi), mpmath.mpf(v)
    return ((xi + 1) ** N + (1 / v - 1) * xi ** N) ** ((N - 1) / N) / ((xi + 1) ** N - xi ** N)


@pytest.mark.parametrize("xi", [1e-6, 0.5, 1.0, 1.5, 30.0, 1e4, 1e6])
def test_g_aux_stable_against_mp(xi):
    for N in (2.0, 3.5):
        assert g_aux(N, xi, 0.1) == pytest.approx(float(_g_mp(N, xi, 0.1)), rel=1e-11)


def test_g_aux_large_xi_limit():
    # the large-xi limit is v**(-(N-1)/N)/N, continuous with the formula
    lim = g_aux(2, math.inf, 0.1)
    assert lim == pytest.approx(math.sqrt(10) / 2, rel=1e-15)
    assert g_aux(2, 1e6, 0.1) == pytest.approx(lim, rel=1e-6)
    assert float(_g_mp(2, 10 ** 12, 0.1)) == pytest.approx(lim, rel=1e-10)
    # (1/v - 1)**(1/2)/2 = 1.5 is not the limit
    assert abs(g_aux(2, 1e6, 0.1) - 1.5) > 0.05


def test_g_aux_domain():
    with pytest.raises(DomainError):
        g_aux(2, 1.0, 0.0)
    with pytest.raises(DomainError):
        g_aux(2, -1.0, 0.5)


def test_xi_minimizer_examples():
    xi = xi_minimizer(2, 0.01)
    assert xi / 0.01 ** 0.5 < 1
    ratios = [xi_minimizer(2, v) / v ** 0.5 for v in (1e-2, 1e-3, 1e-4)]
    assert ratios[0] > ratios[1] > ratios[2]
    xi = xi_minimizer(2, 0.49)
    assert math.isfinite(xi) and xi >= 0 and g_aux(2, xi, 0.49) <= 1


def test_xi_minimizer_matches_dense_grid():
    for N, v in [(2, 0.01), (3, 1e-4), (4, 0.2), (3.5, 0.45)]:
        grid = np.concatenate([[0], np.logspace(-8, 4, 200001)])
        oracle = float(np.min(g_aux(N, grid, v)))
        xi = xi_minimizer(N, v)
        assert g_aux(N, xi, v) <= oracle + 1e-13


def test_milman_profile_examples():
    val, xi = milman_profile(2, 1, 0.5)
    assert val <= 2 * 0.5 ** 0.5 + 1e-15
    grid = np.concatenate([[0], np.logspace(-4, 3, 5001)])
    assert val <= 2 * 0.5 ** 0.5 * float(np.min(g_aux(2, grid, 0.5))) + 1e-13
    rng = np.random.default_rng(3)
    for v in rng.uniform(0.001, 0.999, 20):
        a, b = milman_profile(3, 2, v)[0], milman_profile(3, 2, 1 - v)[0]
        assert a == pytest.approx(b, rel=1e-14)
    for v in (0.125, 0.25, 0.375):  # 1 - v is exact here
        assert milman_profile(3, 2, v) == milman_profile(3, 2, 1 - v)


@pytest.mark.parametrize("N", [2.0, 3.0, 3.5, 4.0])
def test_milman_estimate_with_calibrated_constant(N):
    C = CALIBRATED_C[N]
    for w in np.logspace(-8, -1, 15):
        inf_g = float(g_aux(N, xi_minimizer(N, w), w))
        assert 1 - C * w ** (1 / N) - 1e-12 <= inf_g <= 1.0
    v = 1e-4
    val, _ = milman_profile(N, 1.0, v)
    assert val >= N * v ** ((N - 1) / N) * (1 - C * v ** (1 / N)) - 1e-12


def test_calibration_table_is_reproducible():
    for N, C in CALIBRATED_C.items():
        assert 0 <= C - calibrate_c(N) <= 2e-8


@given(N=Ns, D=st.floats(0.1, 10), lam=st.floats(0.1, 10), v=st.floats(0.001, 0.999))
@settings(max_examples=60, deadline=None)
def test_profile_scaling(N, D, lam, v):
    assert milman_profile(N, lam * D, v)[0] == pytest.approx(milman_profile(N, D, v)[0] / lam, rel=1e-9)


# -- sampled densities ----------------------------------------------------------

def test_check_cd0n_examples():
    assert check_cd0n(Density1D.model(3, 2, 0.4))
    x = np.linspace(0, 1, 101)
    assert not check_cd0n(Density1D.sampled(2, x, x ** 2 + 1e-3))
    assert check_cd0n(Density1D.sampled(3, x, np.sqrt(3) * x))


def test_two_x_volume_and_perimeter():
    h = two_x()
    E = IntervalSet.of((0.25, 0.5))
    assert volume(h, E) == pytest.approx(0.1875, abs=1e-15)
    assert float(h.ray_of_volume(0.25)) == pytest.approx(0.5, abs=1e-15)
    assert perimeter1d(h, E) == pytest.approx(1.5, abs=1e-15)
    assert perimeter1d(h, IntervalSet.of((0.0, 0.3))) == pytest.approx(0.6, abs=1e-15)
    assert perimeter1d(h, IntervalSet.of((0.0, 1.0))) == 0.0


def test_sampled_cumulative_round_trip():
    rng = np.random.default_rng(7)
    for N in (1.5, 2.0, 3.5, 5.0):
        h = random_cd0n(rng, N, 0.8)
        vs = rng.uniform(0, h.mass, 100)
        back = np.asarray(h.cumulative(h.ray_of_volume(vs)))
        assert np.all(np.abs(back - vs) <= 1e-10 * h.mass)


def test_sampled_mass_matches_quadrature():
    rng = np.random.default_rng(8)
    h = random_cd0n(rng, 3.5, 1.3)
    val = sum(integrate.quad(h, a, b, epsabs=1e-15, epsrel=1e-13)[0]
              for a, b in zip(h.grid[:-1], h.grid[1:]))
    assert h.mass == pytest.approx(val, rel=1e-10)


def test_ray_of_volume_over_mass():
    with pytest.raises(InversionError):
        two_x().ray_of_volume(1.5)


def test_json_round_trip():
    h = random_cd0n(np.random.default_rng(2), 3, 0.9)
    h2 = Density1D.from_json(json.dumps(h.to_json()))
    assert np.array_equal(h.grid, h2.grid) and np.array_equal(h.h_pow, h2.h_pow)
    m = Density1D.model(2.5, 2.0, 0.3, mass=4.0)
    assert Density1D.from_json(m.to_json()).mass == 4.0


def test_interval_set_merges_and_validates():
    E = IntervalSet.of((0.2, 0.3), (0.0, 0.1), (0.1, 0.15))
    assert E.intervals == ((0.0, 0.15), (0.2, 0.3))
    with pytest.raises(DomainError):
        IntervalSet.of((0.0, 0.2), (0.1, 0.3))
    with pytest.raises(DomainError):
        IntervalSet.of()


# -- residuals --------------------------------------------------------------------

def test_residual_examples():
    rep = residual(two_x(), 3.0, IntervalSet.of((0.0, 0.5)))
    assert rep.res == pytest.approx(2.0, abs=1e-14) and rep.w == pytest.approx(0.25)
    h = Density1D.model(3.0, 2.0, 0.0)
    for v in np.linspace(0.01, 0.49, 25):
        assert abs(residual_v(h, 2.0, v).res) <= 1e-12
    with pytest.raises(DomainError):
        residual(h, 1.0, IntervalSet.of((0.0, 0.5)))


def test_residual_degenerate():
    h = Density1D.sampled(2, [0.0, 0.5, 1.0], [0.0, 1.0, 1.0])
    with pytest.raises(DegenerateError):
        residual(h, 1.0, IntervalSet.of((0.0, 1e-300)))


def test_residual_lower_bound_random():
    rng = np.random.default_rng(11)
    for i in range(200):
        N = float(rng.choice([2.0, 3.0, 3.5, 4.0]))
        h = random_cd0n(rng, N, rng.uniform(0.2, 1.0))
        D = h.D_prime * rng.uniform(1.0, 2.0)
        k = int(rng.integers(1, 4))
        pts = np.sort(rng.uniform(0, h.D_prime, 2 * k))
        if np.any(np.diff(pts) <= 0):
            continue
        E = IntervalSet(tuple(zip(pts[0::2], pts[1::2])))
        rep = residual(h, D, E)
        if rep.w > 0.1:
            continue
        assert rep.res >= -2 * CALIBRATED_C[N] * rep.w ** (1 / N)
        assert rep.res >= -1


@given(N=Ns, lam=st.floats(0.05, 20), v=st.floats(0.01, 0.49))
@settings(max_examples=50, deadline=None)
def test_residual_scale_free(N, lam, v):
    x = np.linspace(0, 1, 65)
    g = 0.2 + x - 0.5 * x ** 2
    h1 = Density1D.sampled(N, x, g)
    h2 = Density1D.sampled(N, lam * x, g)
    r1 = residual_v(h1, 1.3, v).res
    r2 = residual_v(h2, 1.3 * lam, v).res
    assert r2 == pytest.approx(r1, rel=1e-9, abs=1e-12)


# -- brute-force profile --------------------------------------------------------------

def test_bruteforce_model_single_interval():
    h = Density1D.model(3, 1.0, 0.0)
    for v in (0.05, 0.2, 0.45):
        expect = float(h(h.ray_of_volume(v)))
        assert isoprofile_bruteforce(h, v, 1) == pytest.approx(expect, rel=1e-9)


def test_bruteforce_nesting_and_milman():
    rng = np.random.default_rng(5)
    for N in (2.0, 3.5):
        h = random_cd0n(rng, N, 0.7).normalized()
        for v in (0.1, 0.4, 0.8):
            p1 = isoprofile_bruteforce(h, v, 1)
            p2 = isoprofile_bruteforce(h, v, 2)
            assert p2 <= p1
            assert p2 >= milman_profile(N, 1.0, v)[0] - 1e-9
