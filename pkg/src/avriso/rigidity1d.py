"""Almost-rigidity estimators for sets of small residual on a CD(0,N) segment.

For a set E of relative mass w and residual delta, the right end b(E) should
be close to D*w**(1/N), the last component should start near 0, and the
rescaled density h~_E(t) = 1_E(b t) (b/m(E)) h(b t) should be close to
N t**(N-1).  The functions here measure those distances; nothing is assumed
about the rate.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy import optimize

from .density1d import Density1D, IntervalSet, residual, volume
from .errors import DegenerateError, DomainError, RegimeError

_MOD = "rigidity1d"

CSV_FIELDS = ("w", "delta", "b_rel_err", "a_rel", "h_tilde_dist", "diam_ratio")


@dataclass(frozen=True)
class RigidityCertificate:
    w: float
    delta: float
    b_rel_err: float
    a_rel: float
    h_tilde_dist: float
    diam_ratio: float

    def row(self) -> list[float]:
        return [getattr(self, f) for f in CSV_FIELDS]

    def as_dict(self) -> dict:
        return asdict(self)


def right_endpoint(h: Density1D, E: IntervalSet) -> float:
    return float(E.intervals[-1][1])


def left_gap(h: Density1D, D: float, E: IntervalSet, n_check: int = 2001) -> float:
    """Left end of the right-most component of E.

    Only returned when the expected structure is visible: the last component
    starts after every other endpoint (automatic for sorted sets) and h is
    nondecreasing on [0, b(E)].  Otherwise a :class:`RegimeError` is raised.
    """
    if D < h.D_prime * (1 - 1e-12):
        raise DomainError("D below the diameter of the density", module=_MOD)
    a, b = E.intervals[-1]
    others = [x for p in E.intervals[:-1] for x in p]
    if others and max(others) >= a:
        raise RegimeError("last component is not right-extremal", module=_MOD)
    if h.kind == "sampled":
        xs = np.concatenate([h.grid[h.grid <= b], [b]])
    else:
        xs = np.linspace(0.0, b, n_check)
    vals = np.asarray(h.pow_at(xs))
    if np.any(np.diff(vals) < -1e-12 * max(float(np.max(vals)), 1e-300)):
        raise RegimeError("density is not nondecreasing up to b(E)", module=_MOD)
    return float(a)


@dataclass(frozen=True, eq=False)
class TildeDensity:
    """The rescaled density t -> 1_E(b t) (b/m) h(b t) on [0, 1]."""

    h: Density1D
    E: IntervalSet
    b: float
    mass: float

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        x = np.clip(self.b * t, 0.0, self.h.D_prime)
        inside = self.E.contains(x) | np.isclose(x, self.b, rtol=0, atol=1e-15)
        return np.where(inside, self.b / self.mass * np.asarray(self.h(x)), 0.0)

    def sample(self, n: int = 4001) -> tuple[np.ndarray, np.ndarray]:
        t = np.linspace(0.0, 1.0, n)
        return t, self(t)

    def integral(self, n_per_piece: int = 2049) -> float:
        total = 0.0
        for a, b in self.E.intervals:
            t = np.linspace(a / self.b, b / self.b, n_per_piece)
            mid = 0.5 * (t[:-1] + t[1:])
            # Simpson on each component, evaluated strictly inside it
            fa = self.b / self.mass * np.asarray(self.h(self.b * t))
            fm = self.b / self.mass * np.asarray(self.h(self.b * mid))
            total += float(np.sum(np.diff(t) * (fa[:-1] + 4 * fm + fa[1:]) / 6.0))
        return total

    def sup_distance(self, N: float, n: int = 4001) -> float:
        """Sup distance to N t**(N-1), over a uniform grid plus both one-sided
        limits at every component endpoint."""
        t, vals = self.sample(n)
        d = float(np.max(np.abs(vals - N * t ** (N - 1))))
        for a, b in self.E.intervals:
            for e in (a / self.b, b / self.b):
                inner = self.b / self.mass * float(self.h(min(e * self.b, self.h.D_prime)))
                model = N * e ** (N - 1)
                d = max(d, abs(inner - model), model if e < 1 else 0.0)
        return d


def tilde_density(h: Density1D, E: IntervalSet) -> TildeDensity:
    m = volume(h, E)
    if not m > 0:
        raise DegenerateError("set has zero measure", module=_MOD)
    return TildeDensity(h=h, E=E, b=right_endpoint(h, E), mass=m)


def monotone_f(t, eta, N: float):
    """(1 + eta - t**N) / (1 - t) for t in [0, 1)."""
    t = np.asarray(t, dtype=float)
    if np.any(t >= 1) or np.any(t < 0):
        raise DomainError("t must lie in [0, 1)", module=_MOD)
    if eta < 0:
        raise DomainError("eta must be >= 0", module=_MOD)
    out = (1.0 + eta - t ** N) / (1.0 - t)
    return float(out) if out.ndim == 0 else out


def _f0_inverse(y, N: float, iters: int = 80):
    """Inverse of t -> (1 - t**N)/(1 - t) on [0, 1); returns 1 for y >= N."""
    y = np.asarray(y, dtype=float)
    lo = np.zeros_like(y)
    hi = np.ones_like(y)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            below = (1.0 - mid ** N) / (1.0 - mid) <= y
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return np.where(y >= N, 1.0, lo)


def gap_g(eta: float, N: float, n: int = 4001) -> float:
    """sup { t - s : f(t, 0) <= f(s, eta) } over s, t in [0, 1)."""
    if eta < 0:
        raise DomainError("eta must be >= 0", module=_MOD)
    if eta == 0:
        return 0.0

    def gain(s):
        s = np.asarray(s, dtype=float)
        return _f0_inverse((1.0 + eta - s ** N) / (1.0 - s), N) - s

    s = np.linspace(0.0, 1.0, n, endpoint=False)
    vals = gain(s)
    k = int(np.argmax(vals))
    lo, hi = s[max(k - 1, 0)], s[min(k + 1, n - 1)]
    res = optimize.minimize_scalar(lambda x: -float(gain(x)), bounds=(lo, hi),
                                   method="bounded", options={"xatol": 1e-13})
    return max(float(vals[k]), -float(res.fun), 0.0)


def certify(h: Density1D, D: float, E: IntervalSet) -> RigidityCertificate:
    rep = residual(h, D, E)
    N = h.N
    scale = D * rep.w ** (1.0 / N)
    b = right_endpoint(h, E)
    a = left_gap(h, D, E)
    tilde = tilde_density(h, E)
    return RigidityCertificate(
        w=rep.w,
        delta=rep.res,
        b_rel_err=abs(b - scale) / scale,
        a_rel=a / scale,
        h_tilde_dist=tilde.sup_distance(N),
        diam_ratio=h.D_prime / D,
    )


@dataclass(frozen=True)
class FamilyMember:
    k: int
    h: Density1D
    D: float
    E: IntervalSet


def perturbed_family(k: int, N: float = 3.0, c0: float = 0.5, c1: float = -0.3,
                     lam0: float = 0.25) -> FamilyMember:
    """A member of a family with w = delta = 2**-k.

    The density on [0, 1] has h**(1/(N-1)) = (1-eps) x + eps (c0 + c1 x)
    with eps = 2**-k, and E = (0, r) U (2r, b) with r = lam * w**(1/N),
    lam = lam0 * 2**(-k/2), b fixed by the mass.  D is then chosen so that
    the residual equals delta exactly.
    """
    w = delta = 2.0 ** (-k)
    eps = 2.0 ** (-k)
    x = np.concatenate([[0.0], np.geomspace(1e-9, 1.0, 600)])
    h = Density1D.sampled(N, x, (1 - eps) * x + eps * (c0 + c1 * x)).normalized()
    r = lam0 * 2.0 ** (-k / 2.0) * w ** (1.0 / N)
    m_first = float(h.cumulative(r))
    if m_first >= w:
        raise DomainError("first component already exceeds the mass", module=_MOD)
    b = float(h.ray_of_volume(w - m_first + float(h.cumulative(2 * r))))
    E = IntervalSet.of((0.0, r), (2 * r, b))
    res0 = residual(h, h.D_prime, E).res
    D = h.D_prime * (1.0 + delta) / (1.0 + res0)
    if D < h.D_prime:
        raise RegimeError(f"family member k={k} has residual {res0} above delta",
                          module=_MOD)
    return FamilyMember(k=k, h=h, D=D, E=E)


def family_certificates(ks=range(4, 15), **kw) -> list[RigidityCertificate]:
    out = []
    for k in ks:
        fm = perturbed_family(k, **kw)
        out.append(certify(fm.h, fm.D, fm.E))
    return out

