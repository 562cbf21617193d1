"""Weighted anisotropic convex cones and star-shaped sets inside them.

The space is a convex cone ``Sigma = {x : <nu_j, x> >= 0}`` in R^n (n = 2 or
3) with an alpha-homogeneous weight ``w``, distances ``H0(x - y)`` and
perimeter density ``H(nu) w``.  Its dimension parameter is ``N = n + alpha``.

Sets are star-shaped about the vertex and bounded by a polygon (n = 2) or a
triangle mesh (n = 3) through the points ``radial_i * theta_i``.  Since
``div(w(x) x) = N w(x)`` for homogeneous ``w``, the measure is a boundary
flux, so measure and perimeter are both exact integrals over the same
polygonal boundary.  Faces through the vertex carry no flux, and faces on the
cone boundary are left out of the relative perimeter.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.spatial import cKDTree

from .errors import DegenerateError, DomainError
from .gauge import Gauge

_MOD = "cone"
BOUNDARY_TOL = 1e-9

_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)
_GL_X = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W

# 7-point degree-5 rule on the reference triangle (barycentric, weights sum to 1)
_A1, _B1, _W1 = 0.059715871789770, 0.470142064105115, 0.132394152788506
_A2, _B2, _W2 = 0.797426985353087, 0.101286507323456, 0.125939180544827
_TRI_BARY = np.array([
    [1 / 3, 1 / 3, 1 / 3],
    [_A1, _B1, _B1], [_B1, _A1, _B1], [_B1, _B1, _A1],
    [_A2, _B2, _B2], [_B2, _A2, _B2], [_B2, _B2, _A2],
])
_TRI_W = np.array([0.225, _W1, _W1, _W1, _W2, _W2, _W2])


def omega(N: float) -> float:
    """Volume of the unit ball in dimension N, for real N."""
    return math.pi ** (N / 2.0) / math.gamma(N / 2.0 + 1.0)


# -- weights -------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Weight:
    """An alpha-homogeneous weight; monomials prod x_i**a_i or a callable."""

    alpha: float
    exponents: tuple[float, ...] | None = None
    fn: Callable | None = None

    @classmethod
    def one(cls, n: int) -> "Weight":
        return cls(alpha=0.0, exponents=(0.0,) * n)

    @classmethod
    def monomial(cls, exponents) -> "Weight":
        a = tuple(float(e) for e in exponents)
        if any(e < 0 for e in a):
            raise DomainError("monomial exponents must be >= 0", module=_MOD)
        return cls(alpha=float(sum(a)), exponents=a)

    @classmethod
    def custom(cls, fn: Callable, alpha: float) -> "Weight":
        return cls(alpha=float(alpha), fn=fn)

    @property
    def is_one(self) -> bool:
        return self.exponents is not None and all(e == 0 for e in self.exponents)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.fn is not None:
            return np.asarray(self.fn(x), dtype=float)
        out = np.ones(x.shape[:-1])
        for i, e in enumerate(self.exponents):
            if e != 0:
                out = out * np.maximum(x[..., i], 0.0) ** e
        return out

    def spec(self) -> str:
        if self.fn is not None:
            raise DomainError("custom weights cannot be serialised", module=_MOD)
        if self.is_one:
            return "one"
        return "monomial[" + ",".join(f"{e:g}" for e in self.exponents) + "]"

    @classmethod
    def parse(cls, text: str, n: int) -> "Weight":
        text = text.strip()
        if text == "one":
            return cls.one(n)
        m = re.fullmatch(r"monomial\[([^\]]*)\]", text)
        if not m:
            raise DomainError(f"cannot parse weight {text!r}", module=_MOD)
        parts = [p for p in m.group(1).split(",") if p.strip()]
        if len(parts) != n:
            raise DomainError("monomial needs one exponent per coordinate", module=_MOD)
        return cls.monomial(float(p) for p in parts)


# -- sections of the cone by the unit sphere ----------------------------------------

@dataclass(frozen=True)
class Arc:
    """Sigma intersected with the unit circle: [start, start + length]."""

    start: float
    length: float
    full: bool

    def angles(self, n: int, extra=()) -> np.ndarray:
        if self.full:
            base = self.start + 2 * math.pi * np.arange(n) / n
        else:
            base = self.start + self.length * np.linspace(0.0, 1.0, n)
        if len(extra):
            rel = np.mod(np.asarray(extra, dtype=float) - self.start, 2 * math.pi)
            keep = rel <= self.length * (1 + 1e-12)
            base = np.concatenate([base, self.start + rel[keep]])
            base = np.unique(np.round(base, 14))
        return base

    def contains_angle(self, theta) -> np.ndarray:
        if self.full:
            return np.ones(np.shape(theta), dtype=bool)
        rel = np.mod(np.asarray(theta) - self.start, 2 * math.pi)
        return rel <= self.length + 1e-12


def _arc_of_halfplanes(normals: np.ndarray) -> Arc:
    if len(normals) == 0:
        return Arc(0.0, 2 * math.pi, True)
    phis = np.arctan2(normals[:, 1], normals[:, 0])
    start, length = phis[0] - math.pi / 2, math.pi
    for phi in phis[1:]:
        d = (phi - math.pi / 2 - start) % (2 * math.pi)
        pieces = []
        for lo in (d, d - 2 * math.pi):
            a, b = max(0.0, lo), min(length, lo + math.pi)
            if b - a > 1e-12:
                pieces.append((a, b))
        if len(pieces) != 1:
            raise DomainError("cone has empty interior", module=_MOD)
        a, b = pieces[0]
        start, length = start + a, b - a
    return Arc(float(start % (2 * math.pi)), float(length), False)


def _icosphere(level: int) -> tuple[np.ndarray, np.ndarray]:
    t = (1 + math.sqrt(5)) / 2
    v = np.array([[-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
                  [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
                  [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1]], dtype=float)
    f = np.array([[0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
                  [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
                  [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
                  [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1]])
    v /= np.linalg.norm(v, axis=1)[:, None]
    for _ in range(level):
        verts = list(v)
        cache: dict[tuple[int, int], int] = {}

        def mid(i, j):
            key = (min(i, j), max(i, j))
            if key not in cache:
                m = verts[i] + verts[j]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        nf = []
        for a, b, c in f:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            nf += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        v, f = np.array(verts), np.array(nf)
    return v, f


def _clip_polygon(poly: list[np.ndarray], nu: np.ndarray) -> list[np.ndarray]:
    out = []
    m = len(poly)
    for i in range(m):
        p, q = poly[i], poly[(i + 1) % m]
        dp, dq = float(p @ nu), float(q @ nu)
        if dp >= 0:
            out.append(p)
        if (dp >= 0) != (dq >= 0):
            s = dp / (dp - dq)
            out.append(p + s * (q - p))
    return out


@dataclass(frozen=True, eq=False)
class SphereMesh:
    """Triangulation of Sigma intersected with the unit sphere (n = 3)."""

    vertices: np.ndarray
    triangles: np.ndarray

    @classmethod
    def build(cls, normals: np.ndarray, level: int) -> "SphereMesh":
        v, f = _icosphere(level)
        if len(normals):
            side = (v @ normals.T) >= 0
            inside = np.all(side[f], axis=(1, 2))
            # a flat face with every vertex outside one halfspace is dropped
            outside = np.any(~np.any(side[f], axis=1), axis=1)
            clip = ~inside & ~outside
        else:
            inside = np.ones(len(f), dtype=bool)
            clip = ~inside
        pts: list[np.ndarray] = list(v)
        tris: list[list[int]] = [list(t) for t in f[inside]]
        for face in f[clip]:
            poly = [v[i] for i in face]
            for nu in normals:
                poly = _clip_polygon(poly, nu)
                if len(poly) < 3:
                    break
            if len(poly) < 3:
                continue
            base = len(pts)
            pts.extend(poly)
            for j in range(1, len(poly) - 1):
                tris.append([base, base + j, base + j + 1])
        if not tris:
            raise DomainError("cone has empty interior", module=_MOD)
        P = np.array(pts)
        P /= np.linalg.norm(P, axis=1)[:, None]
        key = np.round(P, 11)
        uniq, inv = np.unique(key, axis=0, return_inverse=True)
        inv = inv.ravel()
        V = np.zeros_like(uniq)
        np.add.at(V, inv, P)
        V /= np.linalg.norm(V, axis=1)[:, None]
        T = inv[np.array(tris)]
        T = T[(T[:, 0] != T[:, 1]) & (T[:, 1] != T[:, 2]) & (T[:, 0] != T[:, 2])]
        det = np.einsum("ij,ij->i", V[T[:, 0]], np.cross(V[T[:, 1]], V[T[:, 2]]))
        T = T[np.abs(det) > 1e-15]
        det = det[np.abs(det) > 1e-15]
        T[det < 0] = T[det < 0][:, [0, 2, 1]]
        return cls(vertices=V, triangles=T)

    @cached_property
    def vertex_weights(self) -> np.ndarray:
        """Solid-angle quadrature weights: a third of each adjacent triangle."""
        a, b, c = (self.vertices[self.triangles[:, k]] for k in range(3))
        num = np.abs(np.einsum("ij,ij->i", a, np.cross(b, c)))
        den = 1 + np.einsum("ij,ij->i", a, b) + np.einsum("ij,ij->i", b, c) \
            + np.einsum("ij,ij->i", c, a)
        area = 2 * np.arctan2(num, den)
        wts = np.zeros(len(self.vertices))
        for k in range(3):
            np.add.at(wts, self.triangles[:, k], area / 3)
        return wts

    def integrate(self, f: Callable) -> float:
        """Integral of f(theta) over the section, through the radial
        projection of each flat triangle (exact change of variables)."""
        a, b, c = (self.vertices[self.triangles[:, k]] for k in range(3))
        cr = np.cross(b - a, c - a)
        x = (_TRI_BARY[:, 0, None, None] * a + _TRI_BARY[:, 1, None, None] * b
             + _TRI_BARY[:, 2, None, None] * c)
        r = np.linalg.norm(x, axis=-1)
        jac = np.einsum("qij,ij->qi", x, cr) / r ** 3 * 0.5
        vals = f(x / r[..., None])
        return float(np.sum(_TRI_W[:, None] * vals * jac))


# -- the cone ----------------------------------------------------------------------



@dataclass(frozen=True, eq=False)
class WeightedCone:
    n: int
    normals: np.ndarray
    gauge: Gauge
    weight: Weight
    name: str = field(default="", compare=False)

    @classmethod
    def make(cls, n: int, normals, gauge: Gauge | None = None,
             weight: Weight | None = None, name: str = "") -> "WeightedCone":
        if n not in (2, 3):
            raise DomainError("only n = 2 and n = 3 are supported", module=_MOD)
        A = np.array(normals, dtype=float).reshape(-1, n)
        if len(A):
            norms = np.linalg.norm(A, axis=1)
            if np.any(norms == 0):
                raise DomainError("zero cone normal", module=_MOD)
            A = A / norms[:, None]
        A.setflags(write=False)
        gauge = gauge or Gauge.euclidean(n)
        weight = weight or Weight.one(n)
        if gauge.n != n:
            raise DomainError("gauge dimension mismatch", module=_MOD)
        if weight.exponents is not None and len(weight.exponents) != n:
            raise DomainError("weight dimension mismatch", module=_MOD)
        cone = cls(n=n, normals=A, gauge=gauge, weight=weight, name=name)
        if n == 2:
            cone.arc
        return cone

    @property
    def N(self) -> float:
        return self.n + self.weight.alpha

    @property
    def alpha(self) -> float:
        return self.weight.alpha

    def contains(self, x, tol: float = 1e-12):
        x = np.asarray(x, dtype=float)
        if len(self.normals) == 0:
            return np.ones(x.shape[:-1], dtype=bool)
        scale = np.linalg.norm(x, axis=-1)
        return np.all(x @ self.normals.T >= -tol * scale[..., None], axis=-1)

    def on_boundary(self, pts: np.ndarray) -> np.ndarray:
        """Per facet j: whether every given point lies on {<nu_j, x> = 0}."""
        if len(self.normals) == 0:
            return np.zeros((0,), dtype=bool)
        d = pts @ self.normals.T
        scale = np.linalg.norm(pts, axis=-1)
        return np.all(d <= BOUNDARY_TOL * scale[..., None], axis=-2)

    @cached_property
    def arc(self) -> Arc:
        if self.n != 2:
            raise DomainError("arc is defined for n = 2", module=_MOD)
        return _arc_of_halfplanes(np.asarray(self.normals))

    def sphere_mesh(self, n_dirs: int) -> SphereMesh:
        """Smallest clipped icosphere with at least n_dirs vertices."""
        for level in range(8):
            mesh = SphereMesh.build(np.asarray(self.normals), level)
            if len(mesh.vertices) >= n_dirs:
                break
        return mesh

    def check_weight(self, n_segments: int = 1000, tol: float = 1e-10,
                     seed: int = 0) -> bool:
        """Randomised falsifier for concavity of w**(1/alpha) on Sigma."""
        if self.alpha == 0:
            return True
        rng = np.random.default_rng(seed)
        x = self.random_points(rng, 2 * n_segments).reshape(n_segments, 2, self.n)
        s = rng.uniform(0, 1, size=(n_segments, 5))
        p = x[:, None, 0] + s[..., None] * (x[:, None, 1] - x[:, None, 0])
        g = lambda y: self.weight(y) ** (1.0 / self.alpha)
        lhs = g(p)
        rhs = (1 - s) * g(x[:, 0])[:, None] + s * g(x[:, 1])[:, None]
        return bool(np.all(lhs >= rhs - tol * np.maximum(1.0, np.abs(rhs))))

    def random_points(self, rng: np.random.Generator, k: int) -> np.ndarray:
        """Random points of Sigma in the unit ball (rejection from a cube)."""
        out = np.zeros((0, self.n))
        while len(out) < k:
            y = rng.uniform(-1, 1, size=(4 * k, self.n))
            y = y[(np.linalg.norm(y, axis=1) <= 1) & self.contains(y)]
            out = np.vstack([out, y])
        return out[:k]

    # AVR = w(W_1 cap Sigma) / omega_N
    @cached_property
    def avr(self) -> float:
        N = self.N
        g = self.gauge
        if self.n == 2:
            arc = self.arc

            def f(t):
                d = np.array([math.cos(t), math.sin(t)])
                return float(self.weight(d)) / (N * g.H0(d) ** N)

            corners = g.wulff_corners()
            brk = [float(a) for a in np.arctan2(corners[:, 1], corners[:, 0])] if len(corners) else []
            pts = sorted({arc.start + (b - arc.start) % (2 * math.pi) for b in brk
                          if arc.contains_angle(b)} | {arc.start, arc.start + arc.length})
            total = 0.0
            for a, b in zip(pts[:-1], pts[1:]):
                if b - a > 1e-15:
                    total += integrate.quad(f, a, b, epsabs=1e-15, epsrel=1e-13, limit=200)[0]
            return total / omega(N)
        mesh = SphereMesh.build(np.asarray(self.normals), 6)
        val = mesh.integrate(lambda d: self.weight(d) / (N * g.H0(d) ** N))
        return val / omega(N)

    def avr_monte_carlo(self, n_samples: int = 10 ** 6, seed: int = 0) -> tuple[float, float]:
        rng = np.random.default_rng(seed)
        R0 = float(np.max(np.linalg.norm(self.gauge.dual().vertices, axis=1))) \
            if self.gauge.kind == "polytope" else _max_radius(self.gauge, self.n)
        y = rng.uniform(-R0, R0, size=(n_samples, self.n))
        inside = (self.gauge.H0(y) <= 1) & self.contains(y)
        vals = np.where(inside, self.weight(y), 0.0) * (2 * R0) ** self.n
        est = float(np.mean(vals))
        hw = 1.96 * float(np.std(vals)) / math.sqrt(n_samples)
        return est / omega(self.N), hw / omega(self.N)

    def to_json(self) -> dict:
        return {"n": self.n, "cone_normals": np.asarray(self.normals).tolist(),
                "gauge": self.gauge.to_json(), "alpha": self.alpha,
                "weight": self.weight.spec()}

    @classmethod
    def from_json(cls, data: dict | str, name: str = "") -> "WeightedCone":
        if isinstance(data, str):
            data = json.loads(data)
        keys = {"n", "cone_normals", "gauge", "alpha", "weight"}
        extra = set(data) - keys - {"name", "description"}
        if extra:
            raise DomainError(f"unknown cone keys {sorted(extra)}", module=_MOD)
        missing = keys - set(data)
        if missing:
            raise DomainError(f"missing cone keys {sorted(missing)}", module=_MOD)
        n = int(data["n"])
        weight = Weight.parse(data["weight"], n)
        if abs(weight.alpha - float(data["alpha"])) > 1e-12:
            raise DomainError("alpha does not match the weight's degree", module=_MOD)
        gauge = Gauge.from_json(data["gauge"], n)
        return cls.make(n, data["cone_normals"], gauge, weight,
                        name=name or data.get("name", ""))


def _max_radius(g: Gauge, n: int) -> float:
    """max |y| over {H0(y) <= 1}, i.e. max 1/H0 on the unit sphere."""
    if g.kind == "euclidean":
        return 1.0
    if n == 2:
        t = np.linspace(0, 2 * math.pi, 20001)
        d = np.stack([np.cos(t), np.sin(t)], axis=-1)
    else:
        d = _icosphere(5)[0]
    return float(np.max(1.0 / g.H0(d))) * 1.01


BUILTIN_DIR = "data"


def builtin_cones() -> list[str]:
    root = resources.files("avriso") / BUILTIN_DIR
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_cone(spec: str | Path) -> WeightedCone:
    """Load a cone from a JSON path, or by builtin name (``quadrant_xy``)."""
    path = Path(spec)
    if path.is_file():
        return WeightedCone.from_json(path.read_text(), name=path.stem)
    name = path.stem
    res = resources.files("avriso") / BUILTIN_DIR / f"{name}.json"
    if res.is_file():
        return WeightedCone.from_json(res.read_text(), name=name)
    raise DomainError(f"no cone file or builtin named {spec!r}", module=_MOD)


# -- star-shaped sets -------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class StarSet:
    """Star-shaped set {t theta : t < radial(theta)} with a polygonal boundary.

    For n = 2, ``angles`` are increasing; ``closed`` means the boundary wraps
    around the full circle.  For n = 3, ``triangles`` index ``directions``.
    """

    directions: np.ndarray
    radial: np.ndarray
    closed: bool = False
    angles: np.ndarray | None = None
    triangles: np.ndarray | None = None

    def __post_init__(self):
        if np.any(~np.isfinite(self.radial)) or np.any(self.radial <= 0):
            raise DomainError("radial values must be positive and finite", module=_MOD)

    @property
    def n(self) -> int:
        return self.directions.shape[1]

    @property
    def points(self) -> np.ndarray:
        return self.radial[:, None] * self.directions

    def scaled(self, lam: float) -> "StarSet":
        return StarSet(self.directions, lam * self.radial, self.closed, self.angles,
                       self.triangles)

    def with_radial(self, radial) -> "StarSet":
        return StarSet(self.directions, np.asarray(radial, dtype=float), self.closed,
                       self.angles, self.triangles)

    def faces(self) -> tuple[np.ndarray, ...]:
        """Outer boundary faces as vertex arrays (A, B) or (A, B, C)."""
        P = self.points
        if self.n == 2:
            idx = np.arange(len(P))
            nxt = (idx + 1) % len(P) if self.closed else idx[1:]
            cur = idx if self.closed else idx[:-1]
            return P[cur], P[nxt]
        T = self.triangles
        return P[T[:, 0]], P[T[:, 1]], P[T[:, 2]]

    def radial_trace(self, theta) -> np.ndarray:
        """n = 2: distance from the vertex to the boundary along angles theta."""
        if self.n != 2:
            raise DomainError("radial_trace is defined for n = 2", module=_MOD)
        ang = self.angles
        P = self.points
        theta = np.asarray(theta, dtype=float)
        if self.closed:
            rel = np.mod(theta - ang[0], 2 * math.pi) + ang[0]
            i = np.searchsorted(ang, rel, side="right") - 1
            j = (i + 1) % len(ang)
        else:
            rel = ang[0] + np.mod(theta - ang[0], 2 * math.pi)
            rel = np.where(rel > ang[-1] + 1e-12, rel - 2 * math.pi, rel)
            i = np.clip(np.searchsorted(ang, rel, side="right") - 1, 0, len(ang) - 2)
            j = i + 1
        d = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
        A, B = P[i], P[j]
        num = A[..., 0] * B[..., 1] - A[..., 1] * B[..., 0]
        E = B - A
        den = d[..., 0] * E[..., 1] - d[..., 1] * E[..., 0]
        return num / den

    def to_json(self) -> dict:
        out = {"directions": self.directions.tolist(), "radial": self.radial.tolist(),
               "closed": self.closed}
        if self.triangles is not None:
            out["triangles"] = self.triangles.tolist()
        return out


def star_from_radial(cone: WeightedCone, fn: Callable, n_dirs: int = 2048,
                     extra_angles=()) -> StarSet:
    """Sample a radial function ``fn(directions) -> radii`` on Sigma's section."""
    if cone.n == 2:
        ang = cone.arc.angles(n_dirs, extra_angles)
        d = np.stack([np.cos(ang), np.sin(ang)], axis=-1)
        return StarSet(d, np.asarray(fn(d), dtype=float), cone.arc.full, ang)
    mesh = cone.sphere_mesh(n_dirs)
    return StarSet(mesh.vertices, np.asarray(fn(mesh.vertices), dtype=float),
                   False, None, mesh.triangles)


def wulff_shape(cone: WeightedCone, r: float, n_dirs: int = 2048) -> StarSet:
    """Radius-r Wulff shape {H0 <= r} intersected with Sigma."""
    if not r > 0:
        raise DomainError("r must be positive", module=_MOD)
    extra = ()
    if cone.n == 2:
        c = cone.gauge.wulff_corners()
        if len(c):
            extra = np.arctan2(c[:, 1], c[:, 0])
    return star_from_radial(cone, lambda d: r / cone.gauge.H0(d), n_dirs, extra)


def disk(cone: WeightedCone, rho: float, center=None, n_dirs: int = 2048) -> StarSet:
    """Euclidean disk B_rho(center) intersected with Sigma; needs |center| < rho."""
    c = np.zeros(cone.n) if center is None else np.asarray(center, dtype=float)
    if np.linalg.norm(c) >= rho:
        raise DomainError("the vertex must lie inside the disk", module=_MOD)

    def fn(d):
        cd = d @ c
        return cd + np.sqrt(cd * cd - c @ c + rho * rho)
    return star_from_radial(cone, fn, n_dirs)


def ellipse(cone: WeightedCone, a: float, b: float, n_dirs: int = 2048) -> StarSet:
    """Axis-aligned ellipse with semi-axes a, b (n = 2)."""
    return star_from_radial(
        cone, lambda d: 1.0 / np.sqrt((d[:, 0] / a) ** 2 + (d[:, 1] / b) ** 2), n_dirs)


def random_star(cone: WeightedCone, rng: np.random.Generator, amplitude: float,
                modes: int = 4, r: float = 1.0, n_dirs: int = 2048) -> StarSet:
    """The radius-r Wulff shape with its radial function multiplied by
    exp(smooth random perturbation of size ~amplitude)."""
    a = rng.normal(size=modes) * amplitude / np.sqrt(np.arange(1, modes + 1))
    ph = rng.uniform(0, 2 * math.pi, size=modes)
    k = np.arange(1, modes + 1)
    if cone.n == 2:
        arc = cone.arc

        def bump(d):
            th = np.arctan2(d[:, 1], d[:, 0])
            s = np.mod(th - arc.start, 2 * math.pi)
            x = s[:, None] * (k if arc.full else k * math.pi / arc.length)
            return np.cos(x + ph) @ a
    else:
        u = rng.normal(size=(modes, 3))
        u /= np.linalg.norm(u, axis=1)[:, None]

        def bump(d):
            return np.cos(2.0 * (d @ u.T) * k + ph) @ a
    return star_from_radial(cone, lambda d: r / cone.gauge.H0(d) * np.exp(bump(d)),
                            n_dirs)


def _check_faces(det: np.ndarray) -> None:
    if np.any(det <= 0):
        raise DegenerateError("boundary is not a simple star-shaped surface", module=_MOD)


def measure(cone: WeightedCone, E: StarSet) -> float:
    """w-measure of E, computed as (1/N) times the flux of w x through its boundary."""
    N = cone.N
    if E.n == 2:
        A, B = E.faces()
        det = A[:, 0] * B[:, 1] - A[:, 1] * B[:, 0]
        _check_faces(det)
        if cone.weight.is_one:
            return float(np.sum(det) / N)
        x = A[None] + _GL_X[:, None, None] * (B - A)[None]
        avg = np.einsum("q,qi->i", _GL_W, cone.weight(x))
        return float(np.sum(det * avg) / N)
    A, B, C = E.faces()
    det = np.einsum("ij,ij->i", A, np.cross(B, C))
    _check_faces(det)
    x = _TRI_BARY[:, 0, None, None] * A + _TRI_BARY[:, 1, None, None] * B \
        + _TRI_BARY[:, 2, None, None] * C
    avg = np.einsum("q,qi->i", _TRI_W, cone.weight(x))
    return float(np.sum(det * avg) / (2 * N))


def _interior_faces(cone: WeightedCone, verts: list[np.ndarray]) -> np.ndarray:
    if len(cone.normals) == 0:
        return np.ones(len(verts[0]), dtype=bool)
    pts = np.stack(verts + [sum(verts) / len(verts)], axis=1)
    d = pts @ cone.normals.T
    scale = np.linalg.norm(pts, axis=-1)[..., None]
    on = np.all(d <= BOUNDARY_TOL * scale, axis=1)
    return ~np.any(on, axis=-1)


def perimeter_aniso(cone: WeightedCone, E: StarSet) -> float:
    """Relative weighted anisotropic perimeter: integral of H(nu) w over the
    part of the boundary inside Sigma."""
    if E.n == 2:
        A, B = E.faces()
        det = A[:, 0] * B[:, 1] - A[:, 1] * B[:, 0]
        _check_faces(det)
        D = B - A
        L = np.linalg.norm(D, axis=1)
        nu = np.stack([D[:, 1], -D[:, 0]], axis=1) / L[:, None]
        x = A[None] + _GL_X[:, None, None] * D[None]
        avg = np.einsum("q,qi->i", _GL_W, cone.weight(x))
        keep = _interior_faces(cone, [A, B])
        return float(np.sum((cone.gauge.H(nu) * L * avg)[keep]))
    A, B, C = E.faces()
    cr = np.cross(B - A, C - A)
    area2 = np.linalg.norm(cr, axis=1)
    _check_faces(np.einsum("ij,ij->i", A, np.cross(B, C)))
    nu = cr / area2[:, None]
    x = _TRI_BARY[:, 0, None, None] * A + _TRI_BARY[:, 1, None, None] * B \
        + _TRI_BARY[:, 2, None, None] * C
    avg = np.einsum("q,qi->i", _TRI_W, cone.weight(x))
    keep = _interior_faces(cone, [A, B, C])
    return float(np.sum((cone.gauge.H(nu) * 0.5 * area2 * avg)[keep]))


def isoperimetric_deficit(cone: WeightedCone, E: StarSet) -> float:
    m = measure(cone, E)
    if not m > 0:
        raise DegenerateError("set has zero measure", module=_MOD)
    N = cone.N
    P = perimeter_aniso(cone, E)
    bound = N * omega(N) ** (1 / N) * cone.avr ** (1 / N) * m ** ((N - 1) / N)
    return P / bound - 1.0


def wulff_radius(cone: WeightedCone, m: float) -> float:
    """Radius of the centred Wulff shape of measure m."""
    return (m / (cone.avr * omega(cone.N))) ** (1.0 / cone.N)


def sym_diff_centered(cone: WeightedCone, E: StarSet, n_fine: int = 16384) -> float:
    """w-measure of E symmetric-difference the centred Wulff shape of equal
    measure, relative to m(E) (n = 2)."""
    if cone.n != 2:
        raise DomainError("sym_diff_centered is implemented for n = 2", module=_MOD)
    m = measure(cone, E)
    rho = wulff_radius(cone, m)
    return sym_diff_star(cone, E, lambda d: rho / cone.gauge.H0(d), n_fine) / m


def sym_diff_star(cone: WeightedCone, E: StarSet, other: Callable,
                  n_fine: int = 16384) -> float:
    """w-measure of E symmetric-difference {t theta : t < other(theta)}."""
    N = cone.N
    arc = cone.arc
    th = arc.angles(n_fine)
    d = np.stack([np.cos(th), np.sin(th)], axis=-1)
    r1 = E.radial_trace(th)
    r2 = np.asarray(other(d), dtype=float)
    f = cone.weight(d) * np.abs(r1 ** N - r2 ** N) / N
    if arc.full:
        return float(np.sum(f) * 2 * math.pi / n_fine)
    return float(integrate.trapezoid(f, th))


# -- Minkowski content ----------------------------------------------------------------------

@dataclass(frozen=True)
class MinkowskiEstimate:
    value: float
    halfwidth: float
    eps: tuple[float, ...]
    contents: tuple[float, ...]


def _segments_distance(g: Gauge, x: np.ndarray, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """min over t in [0,1] of H0(x - A - t (B - A)), elementwise."""
    if g.kind == "euclidean" or (g.kind == "weighted_p" and g.p == 2):
        s = 1.0 if g.kind == "euclidean" else g.scales
        xs, As, Bs = x / s, A / s, B / s
        D = Bs - As
        t = np.clip(np.einsum("...i,...i->...", xs - As, D)
                    / np.maximum(np.einsum("...i,...i->...", D, D), 1e-300), 0, 1)
        return np.linalg.norm(xs - As - t[..., None] * D, axis=-1)
    lo = np.zeros(x.shape[:-1])
    hi = np.ones(x.shape[:-1])
    phi = (math.sqrt(5) - 1) / 2
    f = lambda t: g.H0(x - A - t[..., None] * (B - A))
    c, d = hi - phi * (hi - lo), lo + phi * (hi - lo)
    fc, fd = f(c), f(d)
    for _ in range(45):
        left = fc < fd
        hi = np.where(left, d, hi)
        lo = np.where(left, lo, c)
        d_new = np.where(left, c, lo + phi * (hi - lo))
        c_new = np.where(left, hi - phi * (hi - lo), d)
        fd = np.where(left, fc, f(d_new))
        fc = np.where(left, f(c_new), fd)
        c, d = c_new, d_new
    ends = np.minimum(f(np.zeros_like(lo)), f(np.ones_like(lo)))
    return np.minimum(np.minimum(fc, fd), ends)


def minkowski_content(cone: WeightedCone, E: StarSet, eps_list=(0.02, 0.01, 0.005),
                      n_samples: int = 10 ** 6, seed: int = 0, k_near: int = 8,
                      spread: float = 4.0) -> MinkowskiEstimate:
    """Monte-Carlo outer Minkowski content of E for the H0-distance, with a
    linear extrapolation of (m(E^eps) - m(E))/eps to eps = 0 (n = 2).

    ``eps_list`` is relative to the largest radial value of E.
    """
    if cone.n != 2:
        raise DomainError("minkowski_content is implemented for n = 2", module=_MOD)
    eps = np.asarray(eps_list, dtype=float) * float(np.max(E.radial))
    if np.any(np.diff(eps) >= 0):
        raise DomainError("eps values must be decreasing", module=_MOD)
    rng = np.random.default_rng(seed)
    arc = cone.arc
    g = cone.gauge
    reach = float(eps[0]) * _max_radius(g, 2) * spread

    # boundary of the closed set, including pieces on the cone boundary
    P = E.points
    if arc.full:
        segA, segB = np.roll(P, 0, axis=0), np.roll(P, -1, axis=0)
    else:
        segA = np.vstack([[0.0, 0.0], P])
        segB = np.vstack([P, [[0.0, 0.0]]])
    h = float(np.median(np.linalg.norm(segB - segA, axis=1)))
    pieces_a, pieces_b = [], []
    for a, b in zip(segA, segB):
        k = max(1, int(math.ceil(np.linalg.norm(b - a) / h)))
        s = np.linspace(0, 1, k + 1)
        pts = a + s[:, None] * (b - a)
        pieces_a.append(pts[:-1])
        pieces_b.append(pts[1:])
    PA, PB = np.vstack(pieces_a), np.vstack(pieces_b)
    tree = cKDTree(0.5 * (PA + PB))

    th = arc.start + arc.length * rng.uniform(0, 1, n_samples)
    tb = E.radial_trace(th)
    u = rng.uniform(0, 1, n_samples)
    t = tb + reach * u
    d = np.stack([np.cos(th), np.sin(th)], axis=-1)
    x = t[:, None] * d
    _, nb = tree.query(x, k=k_near)
    dist = np.min(_segments_distance(g, x[:, None, :], PA[nb], PB[nb]), axis=1)
    far = u > 0.95
    if np.any(dist[far] < eps[0]):
        raise DomainError("sampling shell too thin; increase spread", module=_MOD)
    jac = arc.length * reach * t * cone.weight(x)
    X = np.stack([(dist < e) * jac / e for e in eps], axis=1)
    contents = X.mean(axis=0)
    design = np.stack([np.ones_like(eps), eps], axis=1)
    coef = np.linalg.pinv(design)[0]
    Y = X @ coef
    value = float(np.mean(Y))
    hw = 1.96 * float(np.std(Y)) / math.sqrt(n_samples)
    return MinkowskiEstimate(value, hw, tuple(eps.tolist()), tuple(contents.tolist()))
