"""The acceptance suite, shared by the test-suite and ``avriso selftest``.

Each check returns an :class:`Outcome`; a check passes when all of its
conditions hold and it finished inside its time budget.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import cone as cn
from .density1d import (
    Density1D,
    calibrated_c,
    g_aux,
    isoprofile_bruteforce,
    milman_profile,
    model_ray,
    model_volume,
    random_cd0n,
    residual_v,
    xi_minimizer,
)
from .gauge import Gauge
from .localization import (
    chain_angular_deviation,
    disk_instance,
    extract_rays,
    radial_decomposition,
    ray_balance,
    residual_l1_curve,
    solve_l1_potential,
)
from .rigidity import fit_ball
from .rigidity1d import family_certificates


@dataclass(frozen=True)
class Outcome:
    number: int
    title: str
    passed: bool
    detail: str
    seconds: float
    budget: float

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"[{status}] {self.number:2d}. {self.title}: {self.detail} "
                f"({self.seconds:.1f}s / {self.budget:.0f}s)")


def _sector(angle_deg: float, gauge: Gauge, weight: cn.Weight | None = None,
            name: str = "") -> cn.WeightedCone:
    a = math.radians(angle_deg)
    return cn.WeightedCone.make(2, [[0.0, 1.0], [math.sin(a), -math.cos(a)]], gauge,
                                weight, name=name)


def wulff_relation_cones() -> list[cn.WeightedCone]:
    hexagon = [[math.cos(k * math.pi / 3), math.sin(k * math.pi / 3)] for k in range(6)]
    return [
        cn.load_cone("quadrant_xy"),
        cn.WeightedCone.make(2, [], Gauge.weighted_p(3.0, [1.0, 2.0]), name="plane_p3"),
        cn.load_cone("halfplane_y"),
        cn.WeightedCone.make(2, [[1, 0], [0, 1]], Gauge.polytope(hexagon, [1.0] * 6),
                             cn.Weight.monomial([0.5, 1.0]), name="quadrant_hexagon"),
        _sector(60, Gauge.weighted_p(1.5, [1.0, 1.0]), name="sector60_p1.5"),
        cn.load_cone("octant_xyz"),
    ]


def rigid_cones() -> list[cn.WeightedCone]:
    """Cones whose only isoperimetric sets are Wulff shapes about the vertex."""
    return [cn.load_cone("quadrant_xy"), cn.load_cone("quadrant"),
            _sector(60, Gauge.weighted_p(1.5, [1.0, 1.0]), name="sector60_p1.5")]


# -- the criteria ---------------------------------------------------------------------

def check_milman_lower_bound(seed: int = 0):
    rng = np.random.default_rng(seed)
    worst = math.inf
    count = 0
    for i in range(50):
        N = (2.0, 3.5, 4.0)[i % 3]
        D = 1.0
        h = random_cd0n(rng, N, float(rng.uniform(0.3, 1.0)) * D).normalized()
        for v in rng.uniform(0.02, 0.98, 10):
            gap = isoprofile_bruteforce(h, float(v), 2) - milman_profile(N, D, float(v))[0]
            worst = min(worst, gap)
            count += 1
    return worst >= -1e-9, f"{count} cases, min(brute - bound) = {worst:.3e}"


def check_model_exactness(seed: int = 0):
    rng = np.random.default_rng(seed)
    worst_res = 0.0
    for i, v in enumerate(np.linspace(0.004, 0.496, 100)):
        N = (2.0, 3.0, 3.5, 4.0)[i % 4]
        D = 1.0 + i % 3
        worst_res = max(worst_res, abs(residual_v(Density1D.model(N, D), D, float(v)).res))
    worst_rt = 0.0
    for _ in range(100):
        N, D, xi = rng.uniform(1.5, 6), rng.uniform(0.2, 5), rng.choice([0.0, rng.uniform(0, 50)])
        r = rng.uniform(0, D)
        back = float(model_ray(N, D, xi, model_volume(N, D, xi, r)))
        worst_rt = max(worst_rt, abs(back - r) / D)
    ok = worst_res <= 1e-12 and worst_rt <= 1e-12
    return ok, f"max |res| = {worst_res:.2e}, max round-trip = {worst_rt:.2e}"


def check_milman_asymptotics(seed: int = 0):
    notes = []
    ok = True
    for N in (2.0, 3.0, 3.5, 4.0):
        C = calibrated_c(N)
        ratios, bounds = [], []
        for k in range(1, 9):
            w = 10.0 ** -k
            xi = xi_minimizer(N, w)
            bounds.append((1 - float(g_aux(N, xi, w))) / w ** (1 / N))
            ratios.append(xi / w ** (1 / N))
        good = max(bounds) <= C and bool(np.all(np.diff(ratios) < 0)) and ratios[-1] <= 0.2
        ok &= good
        notes.append(f"N={N:g}: max={max(bounds):.4f}<=C={C:.4f}, xi/w^(1/N) final {ratios[-1]:.3g}")
    return ok, "; ".join(notes)


def check_rigidity_1d(seed: int = 0):
    certs = family_certificates(range(4, 15))
    cols = {
        "b_rel_err": [c.b_rel_err for c in certs],
        "a_rel": [c.a_rel for c in certs],
        "h_tilde_dist": [c.h_tilde_dist for c in certs],
        "1-D'/D": [1 - c.diam_ratio for c in certs],
    }
    ok = True
    notes = []
    for name, vals in cols.items():
        at12 = vals[12 - 4]
        mono = bool(np.all(np.diff(vals[8 - 4:]) <= 0))
        ok &= at12 <= 0.05 and mono
        notes.append(f"{name}@12={at12:.2e}{'' if mono else ' (not monotone)'}")
    return ok, ", ".join(notes)


def check_cone_equality(seed: int = 0):
    q = cn.load_cone("quadrant_xy")
    avr_err = abs(q.avr - 1 / (4 * math.pi ** 2))
    rho = 1.0
    B = cn.wulff_shape(q, rho, 2048)
    d_ball = cn.isoperimetric_deficit(q, B)
    per_err = abs(cn.perimeter_aniso(q, B) / (rho ** 3 / 2) - 1)
    pl = cn.load_cone("plane")
    d_disk = cn.isoperimetric_deficit(pl, cn.wulff_shape(pl, 1.0, 2048))
    d_ell = cn.isoperimetric_deficit(pl, cn.ellipse(pl, 2.0, 1.0, 2048))
    ok = (avr_err <= 1e-6 and d_ball <= 1e-3 and per_err <= 1e-4 and d_disk <= 1e-4
          and abs(d_ell - 0.0628) <= 0.002)
    return ok, (f"|AVR-1/(4pi^2)|={avr_err:.1e}, ball deficit={d_ball:.1e}, "
                f"perimeter err={per_err:.1e}, disk deficit={d_disk:.1e}, "
                f"2:1 ellipse deficit={d_ell:.5f} (target 0.0628+-0.002)")


def check_wulff_relation(seed: int = 0):
    worst = 0.0
    parts = []
    for c in wulff_relation_cones():
        W = cn.wulff_shape(c, 1.0, 8192 if c.n == 3 else 2048)
        err = abs(cn.perimeter_aniso(c, W) / (c.N * cn.measure(c, W)) - 1)
        worst = max(worst, err)
        parts.append(f"{c.name}={err:.1e}")
    return worst <= 1e-3, "rel err " + ", ".join(parts)


def check_strict_inequality(seed: int = 0):
    rng = np.random.default_rng(seed)
    cones = rigid_cones()
    accepted, generated = 0, 0
    min_acc, min_all = math.inf, math.inf
    while accepted < 100:
        c = cones[generated % len(cones)]
        generated += 1
        E = cn.random_star(c, rng, float(rng.uniform(0.05, 0.3)), n_dirs=1024)
        d = cn.isoperimetric_deficit(c, E)
        min_all = min(min_all, d)
        if cn.sym_diff_centered(c, E, 8192) < 0.05:
            continue
        accepted += 1
        min_acc = min(min_acc, d)
    ok = min_acc >= 1e-4 and min_all >= -1e-6
    return ok, (f"{accepted} sets kept of {generated}: min deficit {min_acc:.2e}, "
                f"min over all generated {min_all:.2e}")


def check_disintegration(seed: int = 0):
    rng = np.random.default_rng(seed)
    q = cn.load_cone("quadrant_xy")
    dec = radial_decomposition(q, 512)
    worst = 0.0
    boxes = 0
    while boxes < 20:
        side = rng.uniform(0.1, 0.4, 2)
        lo = rng.uniform(0.0, 1.0 - side)
        hi = lo + side
        if np.linalg.norm(hi) >= 1.0:
            continue
        boxes += 1
        exact = (hi[0] ** 2 - lo[0] ** 2) * (hi[1] ** 2 - lo[1] ** 2) / 4
        worst = max(worst, abs(dec.reconstruct_box(lo, hi) / exact - 1))
    bal = 0.0
    for name in ("quadrant_xy", "plane", "halfplane_y"):
        c = cn.load_cone(name)
        for R in (10.0, 100.0):
            per_ray, ratio = ray_balance(c, cn.wulff_shape(c, 1.0, 2048), R)
            bal = max(bal, float(np.max(np.abs(per_ray - ratio))))
    return worst <= 1e-3 and bal <= 1e-10, \
        f"box reconstruction err {worst:.1e}, balance err {bal:.1e}"


def check_residual_sweep(seed: int = 0):
    q = cn.load_cone("quadrant_xy")
    rho = 1.0
    Rs = rho * np.geomspace(10, 1000, 7)
    cen = residual_l1_curve(q, cn.wulff_shape(q, rho, 2048), Rs, n_dirs=512)
    err = float(np.max(np.abs(np.array(cen.value) - 2 * rho / Rs)))
    slope = cen.slope()
    off = residual_l1_curve(q, cn.disk(q, rho, center=[0.3 * rho, 0.2 * rho], n_dirs=2048),
                            Rs, n_dirs=256)
    ok = err <= 1e-9 and abs(slope + 1) <= 0.05 and min(off.value) >= 0.01
    return ok, (f"centred |curve-2rho/R|={err:.1e}, slope={slope:.4f}; "
                f"off-centre min={min(off.value):.3f} (anchor {off.anchor})")


def check_grid_potential(seed: int = 0):
    pl = cn.load_cone("plane")
    P = disk_instance(pl, size=64)
    S = solve_l1_potential(P)
    r = np.linalg.norm(P.nodes, axis=1)
    sel = (P.source > 0) | (P.sink > 0)
    corr = float(np.corrcoef(S.phi[sel], -r[sel])[0, 1])
    dev = chain_angular_deviation(S, extract_rays(S), [0.0, 0.0])
    lim = 2 * math.atan(1 / 64)
    ok = (S.lipschitz_violation() <= 1e-9 and S.slackness_violation() <= 1e-9
          and S.duality_gap() <= 1e-9 and corr >= 0.999 and dev.mean() <= lim)
    return ok, (f"lipschitz {S.lipschitz_violation():.1e}, slackness "
                f"{S.slackness_violation():.1e}, gap {S.duality_gap():.1e}, corr {corr:.5f}, "
                f"mean ray deviation {dev.mean():.4f} <= {lim:.4f}")


def check_ball_recognition(seed: int = 0):
    q = cn.load_cone("quadrant_xy")
    fit = fit_ball(q, cn.wulff_shape(q, 1.0, 2048))
    dil = cn.star_from_radial(q, lambda d: 1 / np.sqrt(d[:, 0] ** 2 + (d[:, 1] / 1.2) ** 2))
    fit2 = fit_ball(q, dil)
    off = float(np.linalg.norm(fit.center))
    ok = off <= fit.grid_step and fit.sym_diff_rel <= 1e-2 and fit2.sym_diff_rel > 0.05
    return ok, (f"centre offset {off:.1e} (cell {fit.grid_step:.2f}), sym diff "
                f"{fit.sym_diff_rel:.1e}; 1.2-dilate sym diff {fit2.sym_diff_rel:.3f}")


CRITERIA: list[tuple[int, str, float, Callable]] = [
    (1, "Milman lower bound", 60, check_milman_lower_bound),
    (2, "Model-space exactness", 1, check_model_exactness),
    (3, "Milman-estimate asymptotics", 10, check_milman_asymptotics),
    (4, "1-D almost-rigidity trends", 30, check_rigidity_1d),
    (5, "Cone equality case", 30, check_cone_equality),
    (6, "Wulff relation P = N m", 30, check_wulff_relation),
    (7, "Strict inequality off balls", 120, check_strict_inequality),
    (8, "Disintegration identity", 30, check_disintegration),
    (9, "Residual R-sweep", 60, check_residual_sweep),
    (10, "Discrete L1 potential", 120, check_grid_potential),
    (11, "Ball recognition", 60, check_ball_recognition),
]


def run_one(number: int, seed: int = 0) -> Outcome:
    for num, title, budget, fn in CRITERIA:
        if num == number:
            t0 = time.perf_counter()
            ok, detail = fn(seed)
            dt = time.perf_counter() - t0
            return Outcome(num, title, bool(ok) and dt <= budget, detail, dt, budget)
    raise KeyError(number)


def run_all(seed: int = 0, numbers=None, report: Callable[[Outcome], None] | None = None
            ) -> list[Outcome]:
    out = []
    for num, *_ in CRITERIA:
        if numbers is None or num in numbers:
            o = run_one(num, seed)
            if report:
                report(o)
            out.append(o)
    return out
