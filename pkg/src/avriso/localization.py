"""Ray (needle) decompositions of weighted cones.

Two independent routes are provided.  The exact one writes the cone measure in
polar form around the vertex: along the ray ``t -> t u`` with ``H0(u) = 1`` the
conditional density is a multiple of ``t**(N-1)``.  The discrete one solves an
L1 transport problem on a lattice and reads the rays off the dual potential.

Normalisation tags for direction weights:

``raw``
    ``q_i = sigma_i w(theta_i) / H0(theta_i)**N`` and conditional ``t**(N-1)``.
``prob_sphere``
    ``q`` sums to 1 and the conditional is ``N omega_N AVR t**(N-1)``
    (the quadrature estimate of that constant).
``qhat_R``
    ``q`` has total mass ``m(B_R)`` and the conditional is the probability
    density ``N t**(N-1) / R**N`` on ``[0, R]``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import optimize, sparse
from scipy.sparse.csgraph import connected_components

from .cone import StarSet, WeightedCone, measure
from .density1d import Density1D, IntervalSet, residual
from .errors import DomainError, GateError, InfeasibleError, NonconvergenceError

_MOD = "localization"
NORMALIZATIONS = ("raw", "prob_sphere", "qhat_R")


# -- exact radial decomposition ---------------------------------------------------

@dataclass(frozen=True, eq=False)
class RayDecomposition:
    cone: WeightedCone
    directions: np.ndarray
    sigma: np.ndarray
    normalization: str = "raw"
    truncation_R: float | None = None

    def __post_init__(self):
        if self.normalization not in NORMALIZATIONS:
            raise DomainError(f"unknown normalization {self.normalization!r}", module=_MOD)
        if self.normalization == "qhat_R" and self.truncation_R is None:
            raise DomainError("qhat_R needs truncation_R", module=_MOD)

    @cached_property
    def unit_rays(self) -> np.ndarray:
        """Directions rescaled to H0-length one."""
        return self.directions / self.cone.gauge.H0(self.directions)[:, None]

    @cached_property
    def raw_weights(self) -> np.ndarray:
        g = self.cone.gauge
        return self.sigma * self.cone.weight(self.directions) \
            / g.H0(self.directions) ** self.cone.N

    @property
    def q(self) -> np.ndarray:
        raw = self.raw_weights
        if self.normalization == "raw":
            return raw
        if self.normalization == "prob_sphere":
            return raw / raw.sum()
        N = self.cone.N
        return raw * self.truncation_R ** N / N

    @property
    def density_scale(self) -> float:
        """The constant c in the conditional density ``c t**(N-1)``."""
        if self.normalization == "raw":
            return 1.0
        if self.normalization == "prob_sphere":
            return float(self.raw_weights.sum())
        return self.cone.N / self.truncation_R ** self.cone.N

    def renormalized(self, tag: str, R: float | None = None) -> "RayDecomposition":
        return RayDecomposition(self.cone, self.directions, self.sigma, tag,
                                self.truncation_R if R is None else float(R))

    def per_ray_density(self, i: int) -> Density1D:
        T = self.truncation_R
        if T is None:
            raise DomainError("per-ray densities need truncation_R", module=_MOD)
        N = self.cone.N
        return Density1D.model(N, T, 0.0, mass=self.density_scale * T ** N / N)

    def _integrate_traces(self, t0: np.ndarray, t1: np.ndarray) -> float:
        N = self.cone.N
        seg = np.maximum(t1, 0.0) ** N - np.maximum(t0, 0.0) ** N
        return float(self.density_scale * np.sum(self.q * np.maximum(seg, 0.0)) / N)

    def reconstruct_box(self, lo, hi) -> float:
        """Measure of the box [lo, hi] rebuilt from rays and conditionals."""
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        U = self.unit_rays
        t0 = np.zeros(len(U))
        t1 = np.full(len(U), np.inf)
        for k in range(self.cone.n):
            u = U[:, k]
            with np.errstate(divide="ignore", invalid="ignore"):
                a, b = lo[k] / u, hi[k] / u
            pos, neg, zero = u > 0, u < 0, u == 0
            t0 = np.where(pos, np.maximum(t0, a), t0)
            t1 = np.where(pos, np.minimum(t1, b), t1)
            t0 = np.where(neg, np.maximum(t0, b), t0)
            t1 = np.where(neg, np.minimum(t1, a), t1)
            outside = zero & ((lo[k] > 0) | (hi[k] < 0))
            t1 = np.where(outside, 0.0, t1)
        return self._integrate_traces(t0, np.where(t1 > t0, t1, t0))

    def reconstruct_star(self, E: StarSet) -> float:
        return self._integrate_traces(np.zeros(len(self.directions)),
                                      _star_radius(E, self.directions)
                                      * self.cone.gauge.H0(self.directions))


def _star_radius(E: StarSet, dirs: np.ndarray) -> np.ndarray:
    if E.n == 2:
        return E.radial_trace(np.arctan2(dirs[:, 1], dirs[:, 0]))
    if len(dirs) != len(E.directions) or not np.allclose(dirs, E.directions):
        raise DomainError("3-D star sets are evaluated at their own directions", module=_MOD)
    return E.radial


def radial_decomposition(C: WeightedCone, n_dirs: int,
                         normalization: str = "raw",
                         R: float | None = None) -> RayDecomposition:
    """Rays from the vertex with sphere quadrature weights.

    n = 2 uses equally spaced angles (periodic trapezoid on a full circle,
    trapezoid on an arc); n = 3 uses the vertices of the clipped icosphere
    with solid-angle weights.
    """
    if n_dirs < 16:
        raise DomainError("n_dirs must be >= 16", module=_MOD)
    if C.n == 2:
        arc = C.arc
        ang = arc.angles(n_dirs)
        if arc.full:
            sig = np.full(n_dirs, 2 * math.pi / n_dirs)
        else:
            h = arc.length / (n_dirs - 1)
            sig = np.full(n_dirs, h)
            sig[[0, -1]] = h / 2
        d = np.stack([np.cos(ang), np.sin(ang)], axis=-1)
    else:
        mesh = C.sphere_mesh(n_dirs)
        d, sig = mesh.vertices, mesh.vertex_weights
    return RayDecomposition(C, d, sig, normalization, R)


def ray_balance(C: WeightedCone, E: StarSet, R: float) -> tuple[np.ndarray, float]:
    """Per-ray normalised mass of E along the rays through E's own nodes, and
    ``m(E) / m(B_R)`` with B_R sampled on the same nodes."""
    g = C.gauge
    dirs = E.directions
    s = E.radial * g.H0(dirs)
    if np.max(s) > R:
        raise GateError("E is not inside B_R", module=_MOD)
    per_ray = (s / R) ** C.N
    ball = E.with_radial(R / g.H0(dirs))
    return per_ray, measure(C, E) / measure(C, ball)


# -- per-ray residuals ------------------------------------------------------------------

@dataclass(frozen=True)
class RayResidual:
    theta: float
    res: float
    w: float
    T: float
    ray_mass: float
    trace: IntervalSet


@dataclass(frozen=True)
class Anchor:
    """Base point of the rays, and how it was chosen."""

    x0: np.ndarray
    choice: str
    diam_bound: float


def _is_centered(C: WeightedCone, E: StarSet, rtol: float = 1e-9) -> bool:
    lev = C.gauge.H0(E.points)
    return float(np.max(lev) - np.min(lev)) <= rtol * float(np.max(lev))


def centroid(C: WeightedCone, E: StarSet, n_fine: int = 8192) -> np.ndarray:
    """w-weighted centroid of E, by polar integration about the vertex."""
    N = C.N
    if C.n == 2:
        dec = radial_decomposition(C, n_fine)
    else:
        dec = RayDecomposition(C, E.directions,
                               C.sphere_mesh(len(E.directions)).vertex_weights)
    d = dec.directions
    r = _star_radius(E, d)
    wt = dec.sigma * C.weight(d)
    first = np.sum((wt * r ** (N + 1) / (N + 1))[:, None] * d, axis=0)
    return first / np.sum(wt * r ** N / N)


def anchor(C: WeightedCone, E: StarSet, x0=None) -> Anchor:
    """The vertex for centred Wulff shapes, otherwise the centroid (unless
    ``x0`` is given)."""
    if x0 is not None:
        x = np.asarray(x0, dtype=float)
        choice = "given"
    elif _is_centered(C, E):
        x = np.zeros(C.n)
        choice = "vertex"
    else:
        x = centroid(C, E)
        choice = "centroid"
    g = C.gauge
    pts = np.vstack([E.points, np.zeros((1, C.n))])
    diam = 2.0 * float(max(np.max(g.H0(pts - x)), np.max(g.H0(x - pts))))
    return Anchor(x, choice, diam)


def _inside(E: StarSet, C: WeightedCone, x: np.ndarray) -> np.ndarray:
    th = np.arctan2(x[..., 1], x[..., 0])
    r = np.linalg.norm(x, axis=-1)
    return C.contains(x) & (r < E.radial_trace(th))


def _trace_from(C: WeightedCone, E: StarSet, x0: np.ndarray, u: np.ndarray,
                t_max: float, n: int = 2048) -> IntervalSet:
    """{t in [0, t_max] : x0 + t u in E} (n = 2)."""
    t = np.linspace(0.0, t_max, n)
    x = x0 + t[:, None] * u
    ins = _inside(E, C, x)
    if not ins[0]:
        raise GateError("the anchor point is not inside E", module=_MOD)

    def g(s):
        y = x0 + s * u
        return float(np.linalg.norm(y)) - float(E.radial_trace(math.atan2(y[1], y[0])))

    cuts = []
    flips = np.flatnonzero(ins[1:] != ins[:-1])
    for k in flips:
        a, b = t[k], t[k + 1]
        try:
            cuts.append(optimize.brentq(g, a, b, xtol=1e-14 * t_max))
        except ValueError:
            cuts.append(0.5 * (a + b))
    edges = [0.0] + cuts + ([t_max] if ins[-1] else [])
    pairs = [(edges[i], edges[i + 1]) for i in range(0, len(edges) - 1, 2)
             if edges[i + 1] > edges[i]]
    return IntervalSet(tuple(pairs))


def _exit_time(C: WeightedCone, x0: np.ndarray, u: np.ndarray) -> float:
    T = math.inf
    for nu in np.asarray(C.normals):
        du = float(nu @ u)
        if du < 0:
            T = min(T, max(0.0, -float(nu @ x0) / du))
    return T


def _ray_density(C: WeightedCone, x0: np.ndarray, u: np.ndarray, T: float,
                 knots, n: int = 1500) -> Density1D:
    N, n_amb = C.N, C.n
    knots = [k for k in knots if 0 < k < T]
    scale = max(knots) if knots else T
    t = np.unique(np.concatenate([
        np.linspace(0.0, min(T, 2 * scale), n),
        np.geomspace(min(T, 2 * scale), T, n // 2) if T > 2 * scale else [],
        knots, [T]]))
    x = x0 + t[:, None] * u
    h = np.maximum(C.weight(x), 0.0) * t ** (n_amb - 1)
    return Density1D.sampled(N, t, h ** (1.0 / (N - 1.0)))


@dataclass(frozen=True, eq=False)
class RayProblem:
    """The one-dimensional data of a single ray: density on ``[0, T]``,
    ambient bound ``D`` and the trace of E."""

    theta: float
    h: Density1D
    D: float
    trace: IntervalSet
    T: float
    ray_mass: float


def _direction(C: WeightedCone, theta) -> tuple[np.ndarray, float]:
    if np.ndim(theta) == 0:
        if C.n != 2:
            raise DomainError("scalar theta needs n = 2", module=_MOD)
        return np.array([math.cos(theta), math.sin(theta)]), float(theta)
    d = np.asarray(theta, dtype=float)
    d = d / np.linalg.norm(d)
    return d, float(math.atan2(d[1], d[0])) if C.n == 2 else float("nan")


def ray_problem(C: WeightedCone, E: StarSet, R: float, theta, x0=None,
                anchor_info: Anchor | None = None) -> RayProblem:
    """Build the ray from the anchor in direction theta (an angle for n = 2
    or a vector), truncated at H0-distance R.

    The ambient bound is ``R + diam`` with ``diam`` twice the H0-radius of E
    about the anchor.
    """
    A = anchor_info or anchor(C, E, x0)
    g = C.gauge
    N = C.N
    reach = A.diam_bound / 2.0
    if reach > R / 4.0 * (1 + 1e-12):
        raise GateError(f"E is not inside B_(R/4): radius {reach:.6g} vs R={R:.6g}",
                        module=_MOD)
    d, th = _direction(C, theta)
    h0 = float(g.H0(d))
    u = d / h0
    D = R + A.diam_bound
    if A.choice == "vertex":
        if not bool(C.contains(d, tol=1e-9)):
            raise DomainError("direction leaves the cone", module=_MOD)
        if C.n == 2:
            s = float(_star_radius(E, d[None])[0]) * h0
        else:
            i = int(np.argmax(E.directions @ d))
            if float(E.directions[i] @ d) < 1 - 1e-12:
                raise DomainError("3-D rays must pass through nodes of E", module=_MOD)
            s = float(E.radial[i]) * h0
        mass = float(C.weight(d)) / h0 ** N * R ** N / N
        return RayProblem(th, Density1D.model(N, R), D,
                          IntervalSet.of((0.0, min(s, R))), R, mass)
    if C.n != 2:
        raise DomainError("off-vertex rays are implemented for n = 2", module=_MOD)
    T = min(R, _exit_time(C, A.x0, u))
    if not T > 0:
        raise DomainError("ray leaves the cone immediately", module=_MOD)
    trace = _trace_from(C, E, A.x0, u, min(T, reach * 1.05 + 1e-12))
    h = _ray_density(C, A.x0, u, T, list(trace.a) + list(trace.b))
    return RayProblem(th, h, D, trace, T, h.mass / h0 ** C.n)


def per_ray_residual(C: WeightedCone, E: StarSet, R: float, theta,
                     x0=None, anchor_info: Anchor | None = None) -> RayResidual:
    """Residual of E's trace on one ray (see :func:`ray_problem`)."""
    rp = ray_problem(C, E, R, theta, x0, anchor_info)
    rep = residual(rp.h, rp.D, rp.trace)
    return RayResidual(rp.theta, rep.res, rep.w, rp.T, rp.ray_mass, rp.trace)


def ray_directions(C: WeightedCone, E: StarSet, A: Anchor,
                   n_dirs: int) -> tuple[np.ndarray, np.ndarray]:
    """Ray directions and sphere weights: the cone's section for vertex
    anchors (E's own nodes when n = 3), the full circle otherwise."""
    if A.choice == "vertex" and C.n == 3:
        return E.directions, C.sphere_mesh(len(E.directions)).vertex_weights
    if A.choice == "vertex":
        dec = radial_decomposition(C, n_dirs)
        return dec.directions, dec.sigma
    ang = 2 * math.pi * (np.arange(n_dirs) + 0.5) / n_dirs
    return (np.stack([np.cos(ang), np.sin(ang)], axis=-1),
            np.full(n_dirs, 2 * math.pi / n_dirs))


@dataclass(frozen=True)
class ResidualCurve:
    R: tuple[float, ...]
    value: tuple[float, ...]
    anchor: str
    x0: tuple[float, ...]

    def slope(self) -> float:
        """Least-squares slope of log(value) against log(R)."""
        return float(np.polyfit(np.log(self.R), np.log(self.value), 1)[0])

    def rows(self) -> list[tuple[float, float]]:
        return list(zip(self.R, self.value))


def residual_l1_curve(C: WeightedCone, E: StarSet, R_list, n_dirs: int = 512,
                      x0=None) -> ResidualCurve:
    """``R -> (integral of |Res_theta,R| dq_hat_R) / m(B_R)``.

    The direction weights are ``sigma_theta`` times the ray mass inside
    ``B_R``, so dividing by their sum is dividing by ``m(B_R)``.
    """
    A = anchor(C, E, x0)
    dirs, sig = ray_directions(C, E, A, n_dirs)
    out = []
    for R in R_list:
        res = np.empty(len(dirs))
        wts = np.empty(len(dirs))
        for i, d in enumerate(dirs):
            rr = per_ray_residual(C, E, float(R), d if C.n == 3 else
                                  math.atan2(d[1], d[0]), anchor_info=A)
            res[i] = abs(rr.res)
            wts[i] = sig[i] * rr.ray_mass
        out.append(float(np.sum(wts * res) / np.sum(wts)))
    return ResidualCurve(tuple(float(r) for r in R_list), tuple(out), A.choice,
                         tuple(A.x0.tolist()))


# -- discrete L1 transport on a lattice ---------------------------------------------

STENCILS = {
    4: ((1, 0), (0, 1)),
    8: ((1, 0), (0, 1), (1, 1), (1, -1)),
    16: ((1, 0), (0, 1), (1, 1), (1, -1), (2, 1), (1, 2), (2, -1), (1, -2)),
}


@dataclass(frozen=True, eq=False)
class GridTransportProblem:
    """Min-cost flow from ``source`` to ``sink`` masses on a graph of nodes.

    Arcs are directed (both orientations of every link are present) with
    length ``H0(x_head - x_tail)``.
    """

    nodes: np.ndarray
    tail: np.ndarray
    head: np.ndarray
    length: np.ndarray
    source: np.ndarray
    sink: np.ndarray
    shape: tuple[int, ...] | None = None
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_graph(cls, nodes, edges, lengths, source, sink) -> "GridTransportProblem":
        e = np.asarray(edges, dtype=int).reshape(-1, 2)
        L = np.asarray(lengths, dtype=float)
        if len(L) != len(e) or np.any(L <= 0):
            raise DomainError("need one positive length per edge", module=_MOD)
        return cls(np.asarray(nodes, dtype=float),
                   np.concatenate([e[:, 0], e[:, 1]]),
                   np.concatenate([e[:, 1], e[:, 0]]),
                   np.concatenate([L, L]),
                   np.asarray(source, dtype=float), np.asarray(sink, dtype=float))

    @classmethod
    def grid(cls, C: WeightedCone, size: int, box, source_fn, sink_fn,
             stencil: int = 16) -> "GridTransportProblem":
        """Lattice of size x size nodes on the square ``box = (lo, hi)``,
        restricted to the cone; masses are the normalised indicators of
        ``source_fn(points)`` and ``sink_fn(points)``."""
        if C.n != 2:
            raise DomainError("grid problems are two-dimensional", module=_MOD)
        if stencil not in STENCILS:
            raise DomainError(f"stencil must be one of {sorted(STENCILS)}", module=_MOD)
        lo, hi = (float(b) for b in box)
        xs = np.linspace(lo, hi, size)
        X, Y = np.meshgrid(xs, xs, indexing="ij")
        pts = np.stack([X.ravel(), Y.ravel()], axis=1)
        keep = C.contains(pts, tol=1e-12)
        new_id = np.full(len(pts), -1)
        new_id[keep] = np.arange(int(keep.sum()))
        idx = new_id.reshape(size, size)
        tails, heads = [], []
        for dx, dy in STENCILS[stencil]:
            a = idx[max(0, -dx):size - max(0, dx), max(0, -dy):size - max(0, dy)]
            b = idx[max(0, dx):size - max(0, -dx), max(0, dy):size - max(0, -dy)]
            ok = (a >= 0) & (b >= 0)
            tails.append(a[ok])
            heads.append(b[ok])
        t = np.concatenate(tails)
        h = np.concatenate(heads)
        P = pts[keep]
        g = C.gauge
        src = np.asarray(source_fn(P), dtype=bool).astype(float)
        snk = np.asarray(sink_fn(P), dtype=bool).astype(float)
        if src.sum() == 0 or snk.sum() == 0:
            raise DomainError("empty source or sink on this grid", module=_MOD)
        tt, hh = np.concatenate([t, h]), np.concatenate([h, t])
        return cls(P, tt, hh, g.H0(P[hh] - P[tt]), src / src.sum(), snk / snk.sum(),
                   shape=(size, size),
                   meta={"box": [lo, hi], "stencil": stencil, "size": size})

    @property
    def supply(self) -> np.ndarray:
        return self.source - self.sink

    def to_json(self) -> dict:
        return {"nodes": self.nodes.tolist(), "tail": self.tail.tolist(),
                "head": self.head.tolist(), "length": self.length.tolist(),
                "source": self.source.tolist(), "sink": self.sink.tolist(),
                "meta": self.meta}


def disk_instance(C: WeightedCone, size: int = 64, rho: float = 0.3, R: float = 0.95,
                  center=None, box=(-1.0, 1.0), stencil: int = 16) -> GridTransportProblem:
    """Source = H0-ball of radius rho about ``center``; sink = H0-ball of
    radius R about the vertex."""
    c = np.zeros(2) if center is None else np.asarray(center, dtype=float)
    g = C.gauge
    prob = GridTransportProblem.grid(C, size, box, lambda P: g.H0(P - c) < rho,
                                     lambda P: g.H0(P) < R, stencil)
    prob.meta.update(rho=rho, R=R, center=c.tolist())
    return prob


@dataclass(frozen=True, eq=False)
class TransportSolution:
    problem: GridTransportProblem
    flow: np.ndarray
    phi: np.ndarray
    primal: float
    dual: float
    flow_tol: float

    @property
    def carrying(self) -> np.ndarray:
        return self.flow > self.flow_tol

    def lipschitz_violation(self) -> float:
        P = self.problem
        return float(np.max(self.phi[P.tail] - self.phi[P.head] - P.length))

    def slackness_violation(self) -> float:
        P = self.problem
        f = self.carrying
        if not f.any():
            return 0.0
        return float(np.max(np.abs(self.phi[P.tail[f]] - self.phi[P.head[f]]
                                   - P.length[f])))

    def duality_gap(self) -> float:
        return abs(self.primal - self.dual)

    def potential_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["x", "y", "phi"])
        for (x, y), p in zip(self.problem.nodes, self.phi):
            wr.writerow([repr(float(x)), repr(float(y)), repr(float(p))])
        return buf.getvalue()


def _potentials(prob: GridTransportProblem, flow: np.ndarray, tol: float,
                max_iter: int) -> np.ndarray:
    """Shortest-path distances in the residual graph (Bellman-Ford from a
    virtual root joined to every node); ``phi = -dist``."""
    carry = flow > tol
    t = np.concatenate([prob.tail, prob.head[carry]])
    h = np.concatenate([prob.head, prob.tail[carry]])
    c = np.concatenate([prob.length, -prob.length[carry]])
    n = len(prob.nodes)
    d = np.zeros(n)
    eps = 1e-13 * max(1.0, float(np.max(prob.length)))
    for _ in range(max_iter):
        cand = np.full(n, np.inf)
        np.minimum.at(cand, h, d[t] + c)
        upd = cand < d - eps
        if not upd.any():
            return -d
        d = np.where(upd, cand, d)
    raise NonconvergenceError("residual graph has a negative cycle or the "
                              "iteration cap was hit", module=_MOD)


def solve_l1_potential(P: GridTransportProblem, max_iter: int = 200000) -> TransportSolution:
    """Min-cost flow (HiGHS dual simplex) plus exact dual potentials,
    shifted so that max phi over the source support is 0."""
    b = P.supply
    if abs(P.source.sum() - P.sink.sum()) > 1e-12:
        raise DomainError("source and sink masses differ", module=_MOD)
    n, m = len(P.nodes), len(P.tail)
    adj = sparse.coo_matrix((np.ones(m), (P.tail, P.head)), shape=(n, n))
    _, lab = connected_components(adj, directed=False)
    for comp in np.unique(lab):
        if abs(b[lab == comp].sum()) > 1e-12:
            raise InfeasibleError("source and sink lie in different components",
                                  module=_MOD)
    A = sparse.csr_matrix(
        (np.concatenate([np.ones(m), -np.ones(m)]),
         (np.concatenate([P.tail, P.head]), np.concatenate([np.arange(m)] * 2))),
        shape=(n, m))
    res = optimize.linprog(P.length, A_eq=A, b_eq=b, bounds=(0, None), method="highs-ds",
                           options={"primal_feasibility_tolerance": 1e-10,
                                    "dual_feasibility_tolerance": 1e-10,
                                    "maxiter": max_iter})
    if res.status == 2:
        raise InfeasibleError(res.message, module=_MOD)
    if res.status != 0:
        raise NonconvergenceError(res.message, module=_MOD)
    flow = np.maximum(res.x, 0.0)
    tol = 1e-14 * max(1.0, float(flow.max()))
    phi = _potentials(P, flow, tol, max_iter=n + 1)
    phi = phi - np.max(phi[P.source > 0])
    return TransportSolution(P, flow, phi, float(P.length @ flow), float(b @ phi), tol)


def _walk(start: int, nbrs: dict, pts: np.ndarray, anchor_of) -> list[int]:
    path = [start]
    seen = {start}
    cur = start
    ref = None
    while True:
        cand = [j for j in nbrs.get(cur, ()) if j not in seen]
        if not cand:
            return path
        if ref is None:
            nxt = min(cand, key=lambda j: (float(np.linalg.norm(pts[j] - pts[cur])), j))
        else:
            a = anchor_of(path)

            def score(j):
                v = pts[j] - a
                return (-float(v @ ref) / float(np.linalg.norm(v)), j)
            nxt = min(cand, key=score)
        path.append(nxt)
        seen.add(nxt)
        cur = nxt
        v = pts[cur] - anchor_of(path)
        ref = v / np.linalg.norm(v)


def extract_rays(S: TransportSolution, tol: float = 1e-9) -> list[np.ndarray]:
    """Maximal chains of tight arcs (``phi(i) - phi(j) = length(i, j)``)
    through each source node.

    Among several tight arcs the chain takes the one that keeps it closest
    to a straight segment: backwards it stays in line with the source node,
    forwards in line with the chain's first node.
    """
    P = S.problem
    tight = np.abs(S.phi[P.tail] - S.phi[P.head] - P.length) <= tol * (1 + P.length)
    out: dict[int, list[int]] = defaultdict(list)
    inn: dict[int, list[int]] = defaultdict(list)
    for a, b in zip(P.tail[tight].tolist(), P.head[tight].tolist()):
        out[a].append(b)
        inn[b].append(a)
    pts = P.nodes
    chains = []
    seen = set()
    for s in np.flatnonzero(P.source > 0).tolist():
        back = _walk(s, inn, pts, lambda p: pts[p[0]])
        first = back[-1]
        fwd = _walk(s, out, pts, lambda p, f=first: pts[f])
        chain = tuple(back[::-1] + fwd[1:])
        if chain not in seen:
            seen.add(chain)
            chains.append(np.array(chain))
    return chains


def chain_angular_deviation(S: TransportSolution, chains, center,
                            min_cells: float = 5.0) -> np.ndarray:
    """Angle between each chain's chord and the radial direction from
    ``center`` at its far end; chains shorter than ``min_cells`` lattice
    spacings are skipped."""
    P = S.problem
    lo, hi = P.meta.get("box", (0.0, 1.0))
    cell = (hi - lo) / (P.meta.get("size", 2) - 1)
    c = np.asarray(center, dtype=float)
    out = []
    for ch in chains:
        a, e = P.nodes[ch[0]], P.nodes[ch[-1]]
        v = e - a
        if np.linalg.norm(v) < min_cells * cell:
            continue
        r = e - c
        ang = math.atan2(v[1], v[0]) - math.atan2(r[1], r[0])
        out.append(abs((ang + math.pi) % (2 * math.pi) - math.pi))
    return np.array(out)


def dump_problem(P: GridTransportProblem) -> str:
    return json.dumps(P.to_json())
