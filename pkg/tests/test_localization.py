from __future__ import annotations

import csv
import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from avriso.cone import disk, load_cone, omega, wulff_shape
from avriso.density1d import calibrated_c, check_cd0n
from avriso.errors import DomainError, GateError, InfeasibleError
from avriso.localization import (
    GridTransportProblem,
    chain_angular_deviation,
    disk_instance,
    extract_rays,
    per_ray_residual,
    radial_decomposition,
    ray_balance,
    ray_problem,
    residual_l1_curve,
    solve_l1_potential,
)


@pytest.fixture(scope="module")
def quadrant():
    return load_cone("quadrant_xy")


def _random_boxes(rng, n, k=20):
    boxes = []
    while len(boxes) < k:
        side = rng.uniform(0.1, 0.4, n)
        lo = rng.uniform(0.0, 1.0 - side)
        hi = lo + side
        if np.linalg.norm(hi) < 1.0:
            boxes.append((lo, hi))
    return boxes


def _box_measure_monomial(lo, hi, exps):
    # integral of prod x_k**a_k over the box, coordinate by coordinate
    return float(np.prod([(b ** (a + 1) - c ** (a + 1)) / (a + 1)
                          for c, b, a in zip(lo, hi, exps)]))


def test_ball_reconstruction_quadrant(quadrant):
    dec = radial_decomposition(quadrant, 512)
    rho = 1.3
    E = wulff_shape(quadrant, rho, 2048)
    assert dec.reconstruct_star(E) == pytest.approx(rho ** 4 / 8, rel=1e-4)


def test_disintegration_boxes_2d(quadrant):
    dec = radial_decomposition(quadrant, 512)
    for lo, hi in _random_boxes(np.random.default_rng(0), 2):
        exact = _box_measure_monomial(lo, hi, (1, 1))
        assert abs(dec.reconstruct_box(lo, hi) / exact - 1) <= 1e-3


def test_disintegration_boxes_3d_at_2048():
    octant = load_cone("octant_xyz")
    dec = radial_decomposition(octant, 2048)
    errs = [abs(dec.reconstruct_box(lo, hi) / _box_measure_monomial(lo, hi, (1, 1, 1)) - 1)
            for lo, hi in _random_boxes(np.random.default_rng(0), 3)]
    assert max(errs) <= 1e-3


def test_disintegration_boxes_3d_second_order():
    octant = load_cone("octant_xyz")
    boxes = _random_boxes(np.random.default_rng(0), 3)
    med = []
    for n in (2048, 8000, 30000):
        dec = radial_decomposition(octant, n)
        med.append(np.median([abs(dec.reconstruct_box(lo, hi)
                                  / _box_measure_monomial(lo, hi, (1, 1, 1)) - 1)
                              for lo, hi in boxes]))
    # four times the directions: the typical error drops by about four
    assert med[1] < med[0] / 3 and med[2] < med[1] / 3
    assert med[2] <= 1e-3


def test_uniform_q_on_circle():
    plane = load_cone("plane")
    dec = radial_decomposition(plane, 64, "prob_sphere")
    assert np.allclose(dec.q, 1 / 64, rtol=0, atol=1e-15)


def test_prob_sphere_conditional_constant(quadrant):
    dec = radial_decomposition(quadrant, 4096, "prob_sphere")
    N = quadrant.N
    assert dec.q.sum() == pytest.approx(1.0, abs=1e-14)
    assert dec.density_scale == pytest.approx(N * omega(N) * quadrant.avr, rel=1e-6)


def test_normalizations_agree(quadrant):
    dec = radial_decomposition(quadrant, 512)
    lo, hi = np.array([0.2, 0.1]), np.array([0.5, 0.6])
    vals = [dec.renormalized(tag, 3.0).reconstruct_box(lo, hi)
            for tag in ("raw", "prob_sphere", "qhat_R")]
    assert vals[1] == pytest.approx(vals[0], rel=1e-13)
    assert vals[2] == pytest.approx(vals[0], rel=1e-13)
    with pytest.raises(DomainError):
        radial_decomposition(quadrant, 512, "qhat_R")
    with pytest.raises(DomainError):
        radial_decomposition(quadrant, 8)


def test_per_ray_densities_are_cd0n(quadrant):
    dec = radial_decomposition(quadrant, 64, "qhat_R", R=5.0)
    for i in range(len(dec.directions)):
        h = dec.per_ray_density(i)
        assert check_cd0n(h)
        assert h.mass == pytest.approx(1.0, rel=1e-14)


def test_off_vertex_ray_densities_are_cd0n(quadrant):
    E = disk(quadrant, 1.0, center=[0.3, 0.2])
    for th in np.linspace(0, 2 * math.pi, 24, endpoint=False):
        rp = ray_problem(quadrant, E, 20.0, th)
        assert check_cd0n(rp.h, tol=1e-9)


def test_balance_centred_ball(quadrant):
    E = wulff_shape(quadrant, 1.0, 2048)
    per_ray, ratio = ray_balance(quadrant, E, 50.0)
    assert np.max(np.abs(per_ray - ratio)) <= 1e-10


def test_balance_other_cones():
    for name in ("plane", "halfplane_y", "octant_xyz"):
        c = load_cone(name)
        E = wulff_shape(c, 0.7, 2048)
        per_ray, ratio = ray_balance(c, E, 7.0)
        assert np.max(np.abs(per_ray - ratio)) <= 1e-10 * max(ratio, 1e-300) + 1e-16


@pytest.mark.parametrize("rho,R", [(1.0, 100.0), (0.5, 10.0), (2.0, 8.0)])
def test_centred_residual_closed_form(quadrant, rho, R):
    E = wulff_shape(quadrant, rho, 2048)
    for th in (0.01, 0.7, 1.5):
        assert per_ray_residual(quadrant, E, R, th).res == pytest.approx(2 * rho / R, abs=1e-12)


def test_centred_residual_anisotropic():
    c = load_cone("halfplane_y")
    E = wulff_shape(c, 1.0, 2048)
    for th in (0.3, 2.0):
        assert per_ray_residual(c, E, 40.0, th).res == pytest.approx(2 / 40, abs=1e-12)


def test_residual_gate(quadrant):
    E = wulff_shape(quadrant, 1.0, 512)
    with pytest.raises(GateError):
        per_ray_residual(quadrant, E, 3.9, 0.5)


def test_residual_lower_bound(quadrant):
    E = disk(quadrant, 1.0, center=[0.3, 0.2], n_dirs=1024)
    C = calibrated_c(quadrant.N)
    checked = 0
    for R in (8.0, 20.0, 200.0):
        for th in np.linspace(0, 2 * math.pi, 32, endpoint=False):
            rr = per_ray_residual(quadrant, E, R, th)
            if rr.w <= 0.5:
                checked += 1
                assert rr.res >= -C * rr.w ** (1 / quadrant.N) - 1e-9
    assert checked > 40


def test_l1_curve_centred(quadrant):
    E = wulff_shape(quadrant, 1.0, 2048)
    Rs = np.geomspace(10, 1000, 5)
    curve = residual_l1_curve(quadrant, E, Rs, n_dirs=128)
    assert np.allclose(curve.value, 2 / Rs, rtol=0, atol=1e-9)
    assert curve.slope() == pytest.approx(-1.0, abs=0.05)
    assert curve.anchor == "vertex"


def test_l1_curve_off_centre(quadrant):
    E = disk(quadrant, 1.0, center=[0.3, 0.2], n_dirs=1024)
    curve = residual_l1_curve(quadrant, E, [10.0, 100.0, 1000.0], n_dirs=128)
    assert curve.anchor == "centroid"
    assert min(curve.value) > 0.01


@given(lam=st.floats(0.2, 5.0))
@settings(max_examples=5, deadline=None)
def test_l1_curve_scale_invariant(lam):
    q = load_cone("quadrant_xy")
    E = disk(q, 1.0, center=[0.3, 0.2], n_dirs=512)
    a = residual_l1_curve(q, E, [12.0], n_dirs=48).value[0]
    b = residual_l1_curve(q, E.scaled(lam), [12.0 * lam], n_dirs=48).value[0]
    assert b == pytest.approx(a, rel=1e-6)


def _path_problem(k=5, step=0.5):
    nodes = np.c_[np.arange(k + 1.0) * step, np.zeros(k + 1)]
    src = np.zeros(k + 1)
    snk = np.zeros(k + 1)
    src[0] = snk[k] = 1.0
    return GridTransportProblem.from_graph(nodes, [(i, i + 1) for i in range(k)],
                                           [step] * k, src, snk)


def test_path_graph():
    S = solve_l1_potential(_path_problem())
    assert np.allclose(S.phi, -0.5 * np.arange(6), atol=1e-15)
    rays = extract_rays(S)
    assert len(rays) == 1 and rays[0].tolist() == list(range(6))
    assert S.primal == pytest.approx(2.5, abs=1e-15)


def test_disconnected_graph_infeasible():
    nodes = np.array([[0.0, 0], [1, 0], [2, 0], [3, 0]])
    P = GridTransportProblem.from_graph(nodes, [(0, 1), (2, 3)], [1.0, 1.0],
                                        [1.0, 0, 0, 0], [0, 0, 0, 1.0])
    with pytest.raises(InfeasibleError):
        solve_l1_potential(P)


def test_unbalanced_rejected():
    P = GridTransportProblem.from_graph([[0.0, 0], [1, 0]], [(0, 1)], [1.0],
                                        [1.0, 0], [0, 0.5])
    with pytest.raises(DomainError):
        solve_l1_potential(P)


@pytest.fixture(scope="module")
def centred_flow():
    return solve_l1_potential(disk_instance(load_cone("plane")))


def test_flow_invariants(centred_flow):
    S = centred_flow
    assert S.lipschitz_violation() <= 1e-9
    assert S.slackness_violation() <= 1e-9
    assert S.duality_gap() <= 1e-9
    assert abs(S.problem.source.sum() - S.problem.sink.sum()) <= 1e-12
    assert np.max(S.phi[S.problem.source > 0]) == 0.0


def test_potential_is_radial(centred_flow):
    S = centred_flow
    r = np.linalg.norm(S.problem.nodes, axis=1)
    sel = (S.problem.source > 0) | (S.problem.sink > 0)
    assert np.corrcoef(S.phi[sel], -r[sel])[0, 1] >= 0.999


def test_rays_are_radial(centred_flow):
    dev = chain_angular_deviation(centred_flow, extract_rays(centred_flow), [0.0, 0.0])
    assert len(dev) > 50
    assert dev.mean() <= 2 * math.atan(1 / 64)


def test_off_centre_chains_cross_boundary_once():
    q = load_cone("quadrant_xy")
    P = disk_instance(q, size=48, rho=0.25, R=0.95, center=[0.35, 0.3], box=(0.0, 1.0))
    S = solve_l1_potential(P)
    assert S.slackness_violation() <= 1e-9 and S.duality_gap() <= 1e-9
    inE = P.source > 0
    for ch in extract_rays(S):
        assert inE[ch[0]]
        assert int(np.sum(np.diff(inE[ch].astype(int)) != 0)) <= 1


def test_eight_neighbour_stencil_has_metric_bias():
    S = solve_l1_potential(disk_instance(load_cone("plane"), size=32, stencil=8))
    assert S.slackness_violation() <= 1e-9
    r = np.linalg.norm(S.problem.nodes, axis=1)
    sel = S.problem.sink > 0
    # octagonal distance, not euclidean
    assert np.corrcoef(S.phi[sel], -r[sel])[0, 1] < 0.999


def test_potential_csv(centred_flow):
    rows = list(csv.reader(io.StringIO(centred_flow.potential_csv())))
    assert rows[0] == ["x", "y", "phi"]
    assert len(rows) == 64 * 64 + 1
