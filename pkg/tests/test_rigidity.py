from __future__ import annotations

import json
import math

import numpy as np
import pytest
from scipy import integrate

from avriso.cone import (
    Weight,
    WeightedCone,
    isoperimetric_deficit,
    load_cone,
    measure,
    omega,
    random_star,
    star_from_radial,
    sym_diff_centered,
    wulff_shape,
)
from avriso.errors import StrictConvexityError
from avriso.gauge import Gauge
from avriso.rigidity import Thresholds, fit_ball, rigidity_verdict, sym_diff_ball


@pytest.fixture(scope="module")
def quadrant():
    return load_cone("quadrant_xy")


def dilate(c, a=1.0, b=1.2, n_dirs=2048):
    return star_from_radial(c, lambda d: 1 / np.sqrt((d[:, 0] / a) ** 2 + (d[:, 1] / b) ** 2),
                            n_dirs)


def test_radius_formula(quadrant):
    E = wulff_shape(quadrant, 1.0, 2048)
    fit = fit_ball(quadrant, E)
    m = measure(quadrant, E)
    assert fit.rho == pytest.approx((m / (quadrant.avr * omega(4))) ** 0.25, rel=1e-10)
    assert fit.rho == pytest.approx(1.0, rel=1e-6)
    # m = 1/8 gives rho = 1 exactly through the closed forms
    assert (0.125 / (omega(4) / (4 * math.pi ** 2))) ** 0.25 == pytest.approx(1.0, rel=1e-14)


def test_centred_ball_found_at_vertex(quadrant):
    fit = fit_ball(quadrant, wulff_shape(quadrant, 1.0, 2048))
    assert np.linalg.norm(fit.center) <= fit.grid_step
    assert fit.sym_diff_rel <= 1e-3
    assert fit.basins() == 1


@pytest.mark.parametrize("name,r", [("plane", 0.8), ("halfplane_y", 1.0), ("quadrant", 2.0)])
def test_radius_consistency_other_cones(name, r):
    c = load_cone(name)
    fit = fit_ball(c, wulff_shape(c, r, 2048))
    assert fit.rho == pytest.approx(r, rel=1e-6)
    assert fit.sym_diff_rel <= 1e-2


def _sym_diff_oracle(a, b):
    # polar quadrature of |r_E^4 - 1| w(theta)/4 for the quadrant with w = xy, rho = 1 ball
    def f(t):
        rE = 1 / math.sqrt((math.cos(t) / a) ** 2 + (math.sin(t) / b) ** 2)
        return math.cos(t) * math.sin(t) * abs(rE ** 4 - 1) / 4
    return integrate.quad(f, 0, math.pi / 2, epsabs=1e-13)[0]


def test_dilate_sym_diff_against_quadrature(quadrant):
    E = dilate(quadrant)
    val = sym_diff_ball(quadrant, E, [0.0, 0.0], 1.0) / measure(quadrant, E)
    m_exact = integrate.quad(lambda t: math.cos(t) * math.sin(t) / 4
                             / ((math.cos(t)) ** 2 + (math.sin(t) / 1.2) ** 2) ** 2,
                             0, math.pi / 2)[0]
    assert val == pytest.approx(_sym_diff_oracle(1.0, 1.2) / m_exact, rel=1e-5)


def test_dilate_is_far_from_balls(quadrant):
    fit = fit_ball(quadrant, dilate(quadrant))
    assert fit.sym_diff_rel > 0.05
    assert 0.0 <= fit.sym_diff_rel <= 2.0


def test_polytope_gauge_refused():
    c = WeightedCone.make(2, [[1, 0], [0, 1]], Gauge.polytope([[1, 0], [0, 1], [-1, 0], [0, -1]]),
                          Weight.monomial([1, 1]))
    E = wulff_shape(c, 1.0, 256)
    with pytest.raises(StrictConvexityError):
        fit_ball(c, E)
    with pytest.raises(StrictConvexityError):
        rigidity_verdict(c, E)
    assert isoperimetric_deficit(c, E) == pytest.approx(0.0, abs=1e-9)


def test_verdict_centred_ball(quadrant):
    v = rigidity_verdict(quadrant, wulff_shape(quadrant, 1.0, 2048))
    assert v.verdict == "rigid" and v.passed
    assert v.deficit <= 1e-3
    assert v.ball_fit["sym_diff_rel"] <= 1e-2
    assert v.rays["h_tilde_dist_max"] <= 1e-10
    assert v.rays["a_rel_max"] <= 1e-10
    assert v.rays["delta_max"] == pytest.approx(0.02, rel=1e-6)
    json.loads(v.to_json())
    assert v.summary().startswith("PASS")


def test_verdict_perturbed(quadrant):
    E = random_star(quadrant, np.random.default_rng(3), 0.1)
    v = rigidity_verdict(quadrant, E)
    assert v.deficit > 0
    assert v.ball_fit["sym_diff_rel"] > 0.03
    assert v.verdict == "not-near-optimal"


def test_verdict_thresholds_are_configurable(quadrant):
    E = dilate(quadrant, 1.0, 1.05)
    strict = rigidity_verdict(quadrant, E, Thresholds(deficit=1.0, sym_diff=1e-3))
    assert strict.verdict == "violated" and not strict.passed


def test_rigidity_trend(quadrant):
    rng = np.random.default_rng(11)
    P = random_star(quadrant, rng, 0.2)
    B = wulff_shape(quadrant, 1.0, 2048)
    ratio = P.radial / B.radial
    defs, sds = [], []
    for s in np.linspace(0, 1, 6):
        E = B.with_radial(B.radial * ratio ** (1 - s))
        defs.append(isoperimetric_deficit(quadrant, E))
        sds.append(sym_diff_centered(quadrant, E))
    assert all(np.diff(defs) < 0) and all(np.diff(sds) < 0)
    assert defs[-1] <= 1e-3 and sds[-1] <= 1e-2
