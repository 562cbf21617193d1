"""Gauges (norms) on R^n and their duals.

``H`` measures perimeter densities, its dual ``H0(y) = sup{<x, y> : H(x) <= 1}``
measures distances.  Three families are supported: the Euclidean norm,
scaled p-norms ``H(x) = ||s * x||_p`` and polytope norms
``H(x) = max_j <n_j, x> / c_j``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.spatial import HalfspaceIntersection, QhullError

from .errors import DomainError, StrictConvexityError

_MOD = "cone"


def _pnorm(z: np.ndarray, p: float) -> np.ndarray:
    a = np.abs(z)
    if math.isinf(p):
        return np.max(a, axis=-1)
    if p == 1:
        return np.sum(a, axis=-1)
    if p == 2:
        return np.sqrt(np.sum(a * a, axis=-1))
    m = np.max(a, axis=-1)
    safe = np.where(m > 0, m, 1.0)
    return m * np.sum((a / safe[..., None]) ** p, axis=-1) ** (1.0 / p)


def conjugate_exponent(p: float) -> float:
    if p == 1:
        return math.inf
    if math.isinf(p):
        return 1.0
    return p / (p - 1.0)


@dataclass(frozen=True, eq=False)
class Gauge:
    n: int
    kind: str
    p: float = 2.0
    scales: np.ndarray | None = None
    normals: np.ndarray | None = None
    offsets: np.ndarray | None = None

    @classmethod
    def euclidean(cls, n: int) -> "Gauge":
        if n < 2:
            raise DomainError("dimension must be >= 2", module=_MOD)
        return cls(n=n, kind="euclidean")

    @classmethod
    def weighted_p(cls, p: float, scales) -> "Gauge":
        s = np.array(scales, dtype=float)
        if s.ndim != 1 or len(s) < 2 or np.any(s <= 0):
            raise DomainError("scales must be >= 2 positive numbers", module=_MOD)
        if not p >= 1:
            raise DomainError("p must be >= 1", module=_MOD)
        s.setflags(write=False)
        return cls(n=len(s), kind="weighted_p", p=float(p), scales=s)

    @classmethod
    def polytope(cls, normals, offsets=None) -> "Gauge":
        A = np.array(normals, dtype=float)
        if A.ndim != 2 or A.shape[1] < 2:
            raise DomainError("normals must be a (k, n) array", module=_MOD)
        c = np.ones(len(A)) if offsets is None else np.array(offsets, dtype=float)
        if c.shape != (len(A),) or np.any(c <= 0):
            raise DomainError("offsets must be positive, one per normal", module=_MOD)
        A.setflags(write=False)
        c.setflags(write=False)
        g = cls(n=A.shape[1], kind="polytope", normals=A, offsets=c)
        g.vertices  # validates boundedness
        return g

    @property
    def strictly_convex(self) -> bool:
        if self.kind == "euclidean":
            return True
        if self.kind == "weighted_p":
            return 1 < self.p < math.inf
        return False

    def require_strictly_convex(self, what: str = "this operation") -> None:
        if not self.strictly_convex:
            raise StrictConvexityError(
                f"{what} needs a strictly convex gauge, got {self.describe()}",
                module="rigidity")

    @cached_property
    def vertices(self) -> np.ndarray:
        """Vertices of the unit ball {H <= 1} (polytope kind only)."""
        if self.kind != "polytope":
            raise DomainError("vertices exist only for polytope gauges", module=_MOD)
        hs = np.hstack([self.normals, -self.offsets[:, None]])
        try:
            pts = HalfspaceIntersection(hs, np.zeros(self.n)).intersections
        except QhullError as exc:
            raise DomainError(f"polytope gauge is not a bounded norm ball: {exc}",
                              module=_MOD) from None
        if not np.all(np.isfinite(pts)):
            raise DomainError("polytope gauge is unbounded", module=_MOD)
        pts = np.unique(np.round(pts, 12), axis=0)
        return pts

    def H(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "euclidean":
            out = np.sqrt(np.sum(x * x, axis=-1))
        elif self.kind == "weighted_p":
            out = _pnorm(x * self.scales, self.p)
        else:
            out = np.max(x @ self.normals.T / self.offsets, axis=-1)
        return float(out) if np.ndim(out) == 0 else out

    def H0(self, y):
        y = np.asarray(y, dtype=float)
        if self.kind == "euclidean":
            out = np.sqrt(np.sum(y * y, axis=-1))
        elif self.kind == "weighted_p":
            out = _pnorm(y / self.scales, conjugate_exponent(self.p))
        else:
            out = np.max(y @ self.vertices.T, axis=-1)
        return float(out) if np.ndim(out) == 0 else out

    def dual(self) -> "Gauge":
        """The gauge whose H is this gauge's H0."""
        if self.kind == "euclidean":
            return self
        if self.kind == "weighted_p":
            return Gauge.weighted_p(conjugate_exponent(self.p), 1.0 / self.scales)
        return Gauge.polytope(self.vertices, np.ones(len(self.vertices)))

    def wulff_corners(self) -> np.ndarray:
        """Corner points of the Wulff shape {H0 <= 1}; empty when it is smooth."""
        if self.kind == "polytope":
            return self.dual().vertices
        if self.kind == "weighted_p" and self.p == 1:
            signs = np.array(np.meshgrid(*[[-1.0, 1.0]] * self.n)).reshape(self.n, -1).T
            return signs * self.scales
        if self.kind == "weighted_p" and math.isinf(self.p):
            eye = np.eye(self.n) * self.scales
            return np.vstack([eye, -eye])
        return np.zeros((0, self.n))

    def describe(self) -> str:
        if self.kind == "weighted_p":
            return f"weighted_p(p={self.p}, scales={self.scales.tolist()})"
        return self.kind

    def to_json(self) -> dict:
        if self.kind == "euclidean":
            return {"kind": "euclidean"}
        if self.kind == "weighted_p":
            return {"kind": "weighted_p",
                    "p": "inf" if math.isinf(self.p) else self.p,
                    "scales": self.scales.tolist()}
        return {"kind": "polytope", "normals": self.normals.tolist(),
                "offsets": self.offsets.tolist()}

    @classmethod
    def from_json(cls, data: dict, n: int) -> "Gauge":
        allowed = {"euclidean": {"kind"}, "weighted_p": {"kind", "p", "scales"},
                   "polytope": {"kind", "normals", "offsets"}}
        kind = data.get("kind")
        if kind not in allowed:
            raise DomainError(f"unknown gauge kind {kind!r}", module=_MOD)
        extra = set(data) - allowed[kind]
        if extra:
            raise DomainError(f"unknown gauge keys {sorted(extra)}", module=_MOD)
        if kind == "euclidean":
            g = cls.euclidean(n)
        elif kind == "weighted_p":
            p = data.get("p", 2.0)
            g = cls.weighted_p(math.inf if p in ("inf", "Infinity") else float(p),
                               data["scales"])
        else:
            g = cls.polytope(data["normals"], data.get("offsets"))
        if g.n != n:
            raise DomainError("gauge dimension does not match the cone", module=_MOD)
        return g


def dual_gauge(H: Gauge, y):
    """H0(y) = sup{<x, y> : H(x) <= 1}."""
    return H.H0(y)
