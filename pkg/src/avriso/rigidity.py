"""Ball recognition and rigidity verdicts on weighted cones (n = 2)."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .cone import StarSet, WeightedCone, isoperimetric_deficit, measure, wulff_radius
from .errors import DomainError, RegimeError
from .localization import anchor, ray_problem
from .rigidity1d import CSV_FIELDS, certify

_MOD = "rigidity"


def _ray_ball_interval(C: WeightedCone, dirs: np.ndarray, center: np.ndarray,
                       rho: float) -> tuple[np.ndarray, np.ndarray]:
    """For each unit direction, the interval {t >= 0 : H0(t d - c) < rho}
    (empty intervals come back as t0 = t1 = 0)."""
    g = C.gauge
    if g.kind == "euclidean" or (g.kind == "weighted_p" and g.p == 2):
        s = 1.0 if g.kind == "euclidean" else g.scales
        ds, cs = dirs / s, center / s
        a = np.einsum("ij,ij->i", ds, ds)
        b = ds @ cs
        disc = b * b - a * (cs @ cs - rho * rho)
        root = np.sqrt(np.maximum(disc, 0.0))
        t0 = np.maximum((b - root) / a, 0.0)
        t1 = np.maximum((b + root) / a, 0.0)
        empty = disc <= 0
        return np.where(empty, 0.0, t0), np.where(empty, 0.0, t1)
    # general gauge: golden section for the minimum, then bisection both sides
    f = lambda t: g.H0(t[:, None] * dirs - center) - rho
    top = float(np.max(g.H0(-center[None]) + rho)) * 4 * _span(g)
    lo, hi = np.zeros(len(dirs)), np.full(len(dirs), top)
    phi = (math.sqrt(5) - 1) / 2
    for _ in range(60):
        c1, c2 = hi - phi * (hi - lo), lo + phi * (hi - lo)
        left = f(c1) < f(c2)
        hi = np.where(left, c2, hi)
        lo = np.where(left, lo, c1)
    tm = 0.5 * (lo + hi)
    fm = f(tm)
    inside = fm < 0

    def bisect(a, b, rising):
        for _ in range(55):
            m = 0.5 * (a + b)
            pos = f(m) > 0
            a, b = (np.where(pos, a, m), np.where(pos, m, b)) if rising else \
                (np.where(pos, m, a), np.where(pos, b, m))
        return 0.5 * (a + b)
    t1 = bisect(tm, np.full(len(dirs), top), True)
    at0 = f(np.zeros(len(dirs))) < 0
    t0 = np.where(at0, 0.0, bisect(np.zeros(len(dirs)), tm, False))
    return np.where(inside, t0, 0.0), np.where(inside, t1, 0.0)


def _span(g) -> float:
    # max |y| / H0(y), a bound used to bracket roots
    ang = np.linspace(0, 2 * math.pi, 721)
    d = np.stack([np.cos(ang), np.sin(ang)], axis=-1)
    return float(np.max(1.0 / g.H0(d)))


def _quadrature(C: WeightedCone, n: int) -> tuple[np.ndarray, np.ndarray]:
    arc = C.arc
    th = arc.angles(n)
    if arc.full:
        wt = np.full(n, 2 * math.pi / n)
    else:
        hstep = arc.length / (n - 1)
        wt = np.full(n, hstep)
        wt[[0, -1]] = hstep / 2
    return np.stack([np.cos(th), np.sin(th)], axis=-1), wt


def sym_diff_ball(C: WeightedCone, E: StarSet, center, rho: float,
                  n_fine: int = 4096) -> float:
    """w-measure of E symmetric-difference (W_rho(center) cap Sigma)."""
    N = C.N
    d, wt = _quadrature(C, n_fine)
    th = np.arctan2(d[:, 1], d[:, 0])
    r = E.radial_trace(th)
    t0, t1 = _ray_ball_interval(C, d, np.asarray(center, dtype=float), rho)
    F = lambda a, b: (np.maximum(b, 0) ** N - np.maximum(a, 0) ** N) / N
    lo, hi = np.maximum(t0, 0.0), np.minimum(t1, r)
    both = np.where(hi > lo, F(lo, hi), 0.0)
    per_ray = F(0.0, r) + F(t0, t1) - 2 * both
    return float(np.sum(wt * C.weight(d) * np.maximum(per_ray, 0.0)))


@dataclass(frozen=True)
class BallFit:
    center: tuple[float, ...]
    rho: float
    sym_diff_rel: float
    grid_values: list = field(default_factory=list, repr=False)
    grid_step: float = 0.0

    def as_dict(self) -> dict:
        d = asdict(self)
        d.pop("grid_values")
        return d

    def basins(self) -> int:
        """Number of strict local minima of the centre landscape on the grid."""
        pts = {(i, j): v for i, j, v in self.grid_values}
        count = 0
        for (i, j), v in pts.items():
            nb = [pts[(i + a, j + b)] for a in (-1, 0, 1) for b in (-1, 0, 1)
                  if (a or b) and (i + a, j + b) in pts]
            if all(v < u for u in nb):
                count += 1
        return count


def fit_ball(C: WeightedCone, E: StarSet, grid: int = 21, n_fine: int = 4096,
             min_step: float = 1e-4) -> BallFit:
    """Radius from the measure; centre by grid search over the closed cone
    in the box [-2 rho, 2 rho]^2 (at a quarter of the angular resolution)
    followed by compass search."""
    if C.n != 2:
        raise DomainError("fit_ball is implemented for n = 2", module=_MOD)
    C.gauge.require_strictly_convex("fit_ball")
    m = measure(C, E)
    if not m > 0:
        raise DomainError("E has zero measure", module=_MOD)
    rho = wulff_radius(C, m)
    cost = lambda c, n=n_fine: sym_diff_ball(C, E, c, rho, n) / m
    coarse = max(256, n_fine // 4)
    xs = np.linspace(-2 * rho, 2 * rho, grid)
    values = []
    best, best_v = None, math.inf
    for i, x in enumerate(xs):
        for j, y in enumerate(xs):
            c = np.array([x, y])
            if not bool(C.contains(c, tol=1e-12)) and (x or y):
                continue
            v = cost(c, coarse)
            values.append((i, j, v))
            if v < best_v:
                best, best_v = c, v
    best_v = cost(best)
    step = xs[1] - xs[0]
    while step > min_step * rho:
        moved = False
        for e in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            c = best + step * np.array(e, dtype=float)
            if not bool(C.contains(c, tol=1e-12)):
                continue
            v = cost(c)
            if v < best_v:
                best, best_v, moved = c, v, True
                break
        if not moved:
            step /= 2
    return BallFit(tuple(float(x) for x in best), float(rho), float(best_v),
                   values, float(xs[1] - xs[0]))


@dataclass(frozen=True)
class Thresholds:
    deficit: float = 1e-3
    sym_diff: float = 5e-2
    ray: float = 5e-2
    n_rays: int = 64
    R_factor: float = 100.0


@dataclass(frozen=True)
class Verdict:
    verdict: str
    deficit: float
    ball_fit: dict
    rays: dict
    thresholds: dict
    anchor: dict

    @property
    def passed(self) -> bool:
        return self.verdict != "violated"

    def as_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True)

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"{status} verdict={self.verdict} deficit={self.deficit:.3e} "
                f"sym_diff_rel={self.ball_fit['sym_diff_rel']:.3e}")


def _ray_summary(C: WeightedCone, E: StarSet, rho: float, th: Thresholds) -> tuple[dict, dict]:
    A = anchor(C, E)
    R = th.R_factor * rho
    if A.choice == "vertex":
        arc = C.arc
        ang = arc.start + arc.length * (np.arange(th.n_rays) + 0.5) / th.n_rays
    else:
        ang = 2 * math.pi * (np.arange(th.n_rays) + 0.5) / th.n_rays
    rows, gated = [], 0
    for a in ang:
        rp = ray_problem(C, E, R, float(a), anchor_info=A)
        try:
            rows.append(certify(rp.h, rp.D, rp.trace).row())
        except RegimeError:
            gated += 1
    arr = np.array(rows) if rows else np.zeros((0, len(CSV_FIELDS)))
    out = {"R": R, "n_rays": int(th.n_rays), "gated": gated}
    for k, name in enumerate(CSV_FIELDS):
        col = np.abs(arr[:, k]) if len(arr) else np.array([math.nan])
        out[f"{name}_max"] = float(np.max(col))
        out[f"{name}_median"] = float(np.median(col))
    info = {"choice": A.choice, "x0": A.x0.tolist(), "diam_bound": A.diam_bound}
    return out, info


def rigidity_verdict(C: WeightedCone, E: StarSet,
                     thresholds: Thresholds | None = None) -> Verdict:
    """Deficit, ball fit and per-ray certificates, with the verdict

    ``not-near-optimal`` (deficit above threshold), ``rigid`` (small deficit
    and the set is close to a ball with model-like rays) or ``violated``.
    """
    th = thresholds or Thresholds()
    C.gauge.require_strictly_convex("rigidity_verdict")
    deficit = isoperimetric_deficit(C, E)
    fit = fit_ball(C, E)
    rays, info = _ray_summary(C, E, fit.rho, th)
    if deficit > th.deficit:
        verdict = "not-near-optimal"
    else:
        ball_ok = fit.sym_diff_rel <= th.sym_diff
        rays_ok = rays["gated"] == 0 and rays["h_tilde_dist_max"] <= th.ray \
            and rays["b_rel_err_max"] <= th.ray and rays["a_rel_max"] <= th.ray
        verdict = "rigid" if (ball_ok and rays_ok) else "violated"
    return Verdict(verdict, float(deficit), fit.as_dict(), rays, asdict(th), info)
