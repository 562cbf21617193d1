"""One-dimensional CD(0,N) densities, model spaces and the residual calculus.

A density ``h`` on ``[0, D']`` is CD(0,N) when ``h**(1/(N-1))`` is concave.
Two concrete kinds are supported:

* ``model``: the closed-form family
  ``h(x) = N/D**N * (x + xi*D)**(N-1) / ((xi+1)**N - xi**N)``,
  optionally multiplied by a total mass;
* ``sampled``: samples of ``h**(1/(N-1))`` on a grid, interpolated
  piecewise-linearly in that power (which keeps the class closed).

Volumes, perimeters and the residual ``D*P(E)/(N*m(E)**(1-1/N)) - 1`` are
computed for finite unions of open intervals (:class:`IntervalSet`).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
from scipy import optimize

from .errors import DegenerateError, DomainError, InversionError

_MOD = "density1d"

# Coarse xi grid for the inner minimisation of the Milman profile.
XI_GRID = np.concatenate([[0.0], np.logspace(-6.0, 4.0, 48)])

# max_w (1 - inf_xi G_N(xi, w)) / w**(1/N) over w in [1e-8, 1e-1] (57 log-spaced
# points), rounded up.  Regenerate with ``calibrate_c``; test tolerances use twice these.
CALIBRATED_C = {
    2.0: 0.16227767,
    3.0: 0.36599522,
    3.5: 0.43965239,
    4.0: 0.49904920,
}


def _scalar_or_array(x):
    return float(x) if np.ndim(x) == 0 else x


def _check_params(N, D=None, xi=None):
    if not N > 1:
        raise DomainError(f"N must exceed 1, got {N}", module=_MOD)
    if D is not None and not D > 0:
        raise DomainError(f"D must be positive, got {D}", module=_MOD)
    if xi is not None and not xi >= 0:
        raise DomainError(f"xi must be >= 0, got {xi}", module=_MOD)


def _model_norm(N, xi):
    """(xi+1)**N - xi**N without cancellation for large xi."""
    xi = np.asarray(xi, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        big = xi ** N * np.expm1(N * np.log1p(1.0 / np.where(xi > 1, xi, 1.0)))
    return np.where(xi > 1, big, (xi + 1.0) ** N - xi ** N)


def model_density(N: float, D: float, xi: float, x):
    """The model density ``h_{N,D}(xi, x)``; integrates to one on ``[0, D]``."""
    _check_params(N, D, xi)
    x = np.asarray(x, dtype=float)
    if np.any((x < 0) | (x > D)):
        raise DomainError("x outside [0, D]", module=_MOD)
    out = N / D ** N * (x + xi * D) ** (N - 1) / _model_norm(N, xi)
    return _scalar_or_array(out)


def model_volume(N: float, D: float, xi: float, r):
    """Mass of ``[0, r]`` under the model density."""
    _check_params(N, D, xi)
    r = np.asarray(r, dtype=float)
    if np.any((r < 0) | (r > D)):
        raise DomainError("r outside [0, D]", module=_MOD)
    u = r / D
    if xi > 1:
        out = np.expm1(N * np.log1p(u / xi)) / np.expm1(N * np.log1p(1.0 / xi))
    else:
        out = ((u + xi) ** N - xi ** N) / _model_norm(N, xi)
    return _scalar_or_array(np.clip(out, 0.0, 1.0))


def model_ray(N: float, D: float, xi: float, v):
    """Inverse of :func:`model_volume` in ``r``."""
    _check_params(N, D, xi)
    v = np.asarray(v, dtype=float)
    if np.any((v < 0) | (v > 1)):
        raise DomainError("v outside [0, 1]", module=_MOD)
    if xi > 1:
        e = np.expm1(N * np.log1p(1.0 / xi))
        out = D * xi * np.expm1(np.log1p(v * e) / N)
    else:
        out = D * ((xi ** N + v * _model_norm(N, xi)) ** (1.0 / N) - xi)
    return _scalar_or_array(np.clip(out, 0.0, D))


def g_aux(N: float, xi, v):
    """The D-free auxiliary function ``G_N(xi, v)``.

    ``xi = inf`` returns the limit ``v**(-(N-1)/N) / N``.
    """
    _check_params(N)
    v = np.asarray(v, dtype=float)
    if np.any((v <= 0) | (v >= 1)):
        raise DomainError("v outside (0, 1)", module=_MOD)
    xi = np.asarray(xi, dtype=float)
    if np.any(xi < 0):
        raise DomainError("xi must be >= 0", module=_MOD)
    q = (N - 1.0) / N
    inv = 1.0 / v - 1.0
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        small = ((xi + 1.0) ** N + inv * xi ** N) ** q / ((xi + 1.0) ** N - xi ** N)
        t = 1.0 / np.where(xi > 1, xi, 1.0)
        large = ((1.0 + t) ** N + inv) ** q / (np.expm1(N * np.log1p(t)) / t)
    out = np.where(xi > 1, large, small)
    out = np.where(np.isinf(xi), v ** (-q) / N, out)
    return _scalar_or_array(out)


def xi_minimizer(N: float, v: float) -> float:
    """Locate ``argmin_xi G_N(xi, v)`` for ``v`` in ``(0, 1/2]``.

    Log grid over ``{0} U [1e-6, 1e4]`` followed by golden-section refinement
    inside the bracket around the best grid node.
    """
    _check_params(N)
    if not 0 < v <= 0.5:
        raise DomainError(f"v must lie in (0, 1/2], got {v}", module=_MOD)
    vals = g_aux(N, XI_GRID, v)
    k = int(np.argmin(vals))

    def f(x):
        return float(g_aux(N, max(x, 0.0), v))

    if k == 0:
        res = optimize.minimize_scalar(
            f, bounds=(0.0, XI_GRID[1]), method="bounded",
            options={"xatol": 1e-10 * XI_GRID[1]},
        )
        cand = [0.0, float(res.x)]
    elif k == len(XI_GRID) - 1:
        # coercive in xi, so a minimiser this far out only happens for v ~ 1/2
        res = optimize.minimize_scalar(
            f, bounds=(XI_GRID[-2], 10 * XI_GRID[-1]), method="bounded",
            options={"xatol": 1e-10 * XI_GRID[-1]},
        )
        cand = [XI_GRID[-1], float(res.x)]
    else:
        a, b, c = XI_GRID[k - 1], XI_GRID[k], XI_GRID[k + 1]
        res = optimize.minimize_scalar(
            f, bracket=(a, b, c), method="golden", tol=1e-10,
        )
        cand = [b, float(res.x)]
    return min(cand, key=f)


def milman_profile(N: float, D: float, v: float) -> tuple[float, float]:
    """Sharp lower bound ``I_{N,D}(v)`` for CD(0,N) densities of diameter <= D.

    Returns ``(value, xi_star)``.
    """
    _check_params(N, D)
    if not 0 < v < 1:
        raise DomainError(f"v must lie in (0, 1), got {v}", module=_MOD)
    m = min(v, 1.0 - v)
    xi = xi_minimizer(N, m)
    value = N / D * m ** ((N - 1.0) / N) * float(g_aux(N, xi, m))
    return value, xi


def calibrate_c(N: float, w_min: float = 1e-8, w_max: float = 1e-1,
                n: int = 57) -> float:
    """Empirical constant in ``inf_xi G_N(xi, w) >= 1 - C w**(1/N)``."""
    ws = np.logspace(math.log10(w_min), math.log10(w_max), n)
    ratios = [(1.0 - float(g_aux(N, xi_minimizer(N, w), w))) / w ** (1.0 / N)
              for w in ws]
    return max(ratios)


def calibrated_c(N: float) -> float:
    c = CALIBRATED_C.get(float(N))
    return calibrate_c(N) if c is None else c


# -- densities ---------------------------------------------------------------

def _power_mean_integral(a, b, N):
    """Integral over [0, 1] of (a + (b - a) u)**(N - 1), for a, b >= 0."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    d = b - a
    m = 0.5 * (a + b)
    close = np.abs(d) <= 1e-6 * np.maximum(np.abs(m), 1e-300)
    with np.errstate(divide="ignore", invalid="ignore"):
        exact = (b ** N - a ** N) / (N * d)
        msafe = np.where(m > 0, m, 1.0)
        series = np.where(
            m > 0,
            msafe ** (N - 1) * (1 + (N - 1) * (N - 2) / 24.0 * (d / msafe) ** 2),
            0.0,
        )
    return np.where(close, series, exact)


@dataclass(frozen=True, eq=False)
class Density1D:
    """A CD(0,N) density on ``[0, D_prime]``.

    Build with :meth:`model` or :meth:`sampled`.  ``mass`` is the total
    integral; the residual and profile routines normalise by it.
    """

    N: float
    D_prime: float
    xi: float | None = None
    grid: np.ndarray | None = None
    h_pow: np.ndarray | None = None
    scale: float = 1.0

    @classmethod
    def model(cls, N: float, D: float, xi: float = 0.0, mass: float = 1.0):
        _check_params(N, D, xi)
        if not mass > 0:
            raise DomainError("mass must be positive", module=_MOD)
        return cls(N=float(N), D_prime=float(D), xi=float(xi), scale=float(mass))

    @classmethod
    def sampled(cls, N: float, x: Sequence[float], h_pow: Sequence[float]):
        _check_params(N)
        x = np.array(x, dtype=float)
        g = np.array(h_pow, dtype=float)
        if x.ndim != 1 or x.shape != g.shape or len(x) < 2:
            raise DomainError("grid and h_pow must be 1-D of equal length >= 2",
                              module=_MOD)
        if x[0] != 0.0 or np.any(np.diff(x) <= 0):
            raise DomainError("grid must start at 0 and increase strictly",
                              module=_MOD)
        if np.any(g < 0) or np.any(g[1:-1] <= 0):
            raise DomainError("h_pow must be >= 0 and positive inside",
                              module=_MOD)
        x.setflags(write=False)
        g.setflags(write=False)
        return cls(N=float(N), D_prime=float(x[-1]), grid=x, h_pow=g)

    @classmethod
    def from_function(cls, N: float, D: float, fn, n: int = 401, grading: float = 1.0):
        """Sample ``fn`` (a density ``h``) on a grid graded towards 0."""
        s = np.linspace(0.0, 1.0, n) ** grading
        x = D * s
        h = np.maximum(np.asarray(fn(x), dtype=float), 0.0)
        return cls.sampled(N, x, h ** (1.0 / (N - 1.0)))

    @property
    def kind(self) -> str:
        return "model" if self.grid is None else "sampled"

    @cached_property
    def _cum(self) -> np.ndarray:
        g = self.h_pow
        seg = np.diff(self.grid) * _power_mean_integral(g[:-1], g[1:], self.N)
        return np.concatenate([[0.0], np.cumsum(seg)])

    @property
    def mass(self) -> float:
        return self.scale if self.kind == "model" else float(self._cum[-1])

    def pow_at(self, x):
        """``h(x)**(1/(N-1))``."""
        x = np.asarray(x, dtype=float)
        if self.kind == "model":
            c = (self.scale * self.N / self.D_prime ** self.N
                 / float(_model_norm(self.N, self.xi))) ** (1.0 / (self.N - 1.0))
            return _scalar_or_array(c * (x + self.xi * self.D_prime))
        return _scalar_or_array(np.interp(x, self.grid, self.h_pow))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if np.any((x < -1e-12 * self.D_prime) | (x > self.D_prime * (1 + 1e-12))):
            raise DomainError("x outside [0, D']", module=_MOD)
        x = np.clip(x, 0.0, self.D_prime)
        if self.kind == "model":
            return _scalar_or_array(
                self.scale * np.asarray(model_density(self.N, self.D_prime, self.xi, x)))
        return _scalar_or_array(np.asarray(self.pow_at(x)) ** (self.N - 1.0))

    def cumulative(self, r):
        """``v_h(r)``: the mass of ``[0, r]``."""
        r = np.clip(np.asarray(r, dtype=float), 0.0, self.D_prime)
        if self.kind == "model":
            return _scalar_or_array(
                self.scale * np.asarray(model_volume(self.N, self.D_prime, self.xi, r)))
        x, g = self.grid, self.h_pow
        i = np.clip(np.searchsorted(x, r, side="right") - 1, 0, len(x) - 2)
        gr = np.interp(r, x, g)
        part = (r - x[i]) * _power_mean_integral(g[i], gr, self.N)
        return _scalar_or_array(self._cum[i] + part)

    def ray_of_volume(self, v):
        """``r_h(v)``: the inverse of :meth:`cumulative`."""
        v = np.asarray(v, dtype=float)
        M = self.mass
        if np.any(v < -1e-14 * M) or np.any(v > M * (1 + 1e-12)):
            raise InversionError("volume outside [0, total mass]", module=_MOD)
        v = np.clip(v, 0.0, M)
        if self.kind == "model":
            return _scalar_or_array(
                np.asarray(model_ray(self.N, self.D_prime, self.xi, v / M)))
        return _scalar_or_array(self._invert_sampled(v))

    def _invert_sampled(self, v):
        # Within one segment h**(1/(N-1)) is affine, so v_h has a closed-form
        # inverse there; bisection cleans up the rare ill-conditioned cases.
        x, g, N, cum = self.grid, self.h_pow, self.N, self._cum
        i = np.clip(np.searchsorted(cum, v, side="right") - 1, 0, len(x) - 2)
        L = x[i + 1] - x[i]
        slope = (g[i + 1] - g[i]) / L
        dv = v - cum[i]
        flat = np.abs(slope) * L <= 1e-9 * np.maximum(g[i], 1e-300)
        with np.errstate(divide="ignore", invalid="ignore"):
            gr = np.maximum(g[i] ** N + N * slope * dv, 0.0) ** (1.0 / N)
            r_curved = x[i] + (gr - g[i]) / slope
            r_flat = x[i] + dv / g[i] ** (N - 1)
        r = np.where(flat, r_flat, r_curved)
        r = np.clip(np.nan_to_num(r, nan=x[i]), x[i], x[i + 1])
        r = np.where(v >= cum[-1], self.D_prime, r)
        err = np.abs(np.asarray(self.cumulative(r)) - v)
        bad = err > 1e-12 * max(cum[-1], 1e-300)
        if np.any(bad):
            r = np.array(r, dtype=float, copy=True)
            lo, hi = x[i][bad], x[i + 1][bad]
            target = v[bad] if np.ndim(v) else np.asarray([v])
            for _ in range(64):
                mid = 0.5 * (lo + hi)
                below = np.asarray(self.cumulative(mid)) < target
                lo = np.where(below, mid, lo)
                hi = np.where(below, hi, mid)
            if np.ndim(r):
                r[bad] = 0.5 * (lo + hi)
            else:
                r = 0.5 * (lo[0] + hi[0])
        return r

    def normalized(self) -> "Density1D":
        if self.kind == "model":
            return Density1D.model(self.N, self.D_prime, self.xi, 1.0)
        c = self.mass ** (-1.0 / (self.N - 1.0))
        return Density1D.sampled(self.N, self.grid, self.h_pow * c)

    def to_json(self) -> dict:
        if self.kind == "model":
            return {"kind": "model", "N": self.N, "D_prime": self.D_prime,
                    "xi": self.xi, "mass": self.scale}
        return {"x": self.grid.tolist(), "h_pow": self.h_pow.tolist(),
                "N": self.N, "D_prime": self.D_prime}

    @classmethod
    def from_json(cls, data: dict | str) -> "Density1D":
        if isinstance(data, str):
            data = json.loads(data)
        if data.get("kind") == "model":
            return cls.model(data["N"], data["D_prime"], data.get("xi", 0.0),
                             data.get("mass", 1.0))
        d = cls.sampled(data["N"], data["x"], data["h_pow"])
        if "D_prime" in data and not math.isclose(d.D_prime, data["D_prime"],
                                                  rel_tol=1e-12):
            raise DomainError("D_prime does not match the last grid node",
                              module=_MOD)
        return d


def check_cd0n(h: Density1D, tol: float = 1e-10) -> bool:
    """True when ``h**(1/(N-1))`` is concave (exactly, on the sample grid)."""
    if h.kind == "model":
        return h.xi >= 0
    x, g = h.grid, h.h_pow
    if np.any(g < 0):
        return False
    if len(x) < 3:
        return True
    slopes = np.diff(g) / np.diff(x)
    scale = max(float(np.max(np.abs(slopes))), 1e-300)
    return bool(np.all(np.diff(slopes) <= tol * scale))


# -- interval sets -------------------------------------------------------------

@dataclass(frozen=True)
class IntervalSet:
    """Finite disjoint union of open intervals, sorted; touching pieces merge."""

    intervals: tuple[tuple[float, float], ...]

    def __post_init__(self):
        pieces = sorted((float(a), float(b)) for a, b in self.intervals)
        if not pieces:
            raise DomainError("empty interval set", module=_MOD)
        merged: list[list[float]] = []
        for a, b in pieces:
            if not (a < b) or a < 0:
                raise DomainError(f"bad interval ({a}, {b})", module=_MOD)
            if merged and a < merged[-1][1]:
                raise DomainError("intervals overlap", module=_MOD)
            if merged and a == merged[-1][1]:
                merged[-1][1] = b
            else:
                merged.append([a, b])
        object.__setattr__(self, "intervals", tuple((a, b) for a, b in merged))

    @classmethod
    def of(cls, *pairs: Iterable[float]) -> "IntervalSet":
        return cls(tuple(tuple(p) for p in pairs))

    @property
    def a(self) -> np.ndarray:
        return np.array([p[0] for p in self.intervals])

    @property
    def b(self) -> np.ndarray:
        return np.array([p[1] for p in self.intervals])

    @property
    def length(self) -> float:
        return float(np.sum(self.b - self.a))

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        inside = np.zeros(x.shape, dtype=bool)
        for a, b in self.intervals:
            inside |= (x > a) & (x < b)
        return inside

    def scaled(self, lam: float) -> "IntervalSet":
        return IntervalSet(tuple((lam * a, lam * b) for a, b in self.intervals))


@dataclass(frozen=True)
class ResidualReport:
    w: float
    res: float
    D: float


def _check_inside(h: Density1D, E: IntervalSet):
    if E.intervals[0][0] < 0 or E.intervals[-1][1] > h.D_prime * (1 + 1e-12):
        raise DomainError("interval set leaves [0, D']", module=_MOD)


def volume(h: Density1D, E: IntervalSet) -> float:
    _check_inside(h, E)
    return float(np.sum(np.asarray(h.cumulative(E.b)) - np.asarray(h.cumulative(E.a))))


def cumulative(h: Density1D, r):
    return h.cumulative(r)


def ray_of_volume(h: Density1D, v):
    return h.ray_of_volume(v)


def perimeter1d(h: Density1D, E: IntervalSet, tol: float = 1e-12) -> float:
    """Sum of ``h`` over endpoints that are not endpoints of ``[0, D']``."""
    _check_inside(h, E)
    a, b = E.a, E.b
    inner_a = a[a > tol * h.D_prime]
    inner_b = b[b < h.D_prime * (1 - tol)]
    return float(np.sum(h(inner_a)) + np.sum(h(inner_b)))


def residual(h: Density1D, D: float, E: IntervalSet) -> ResidualReport:
    """The D-residual of ``E``, computed for the normalised density."""
    if D < h.D_prime * (1 - 1e-12):
        raise DomainError(f"D={D} is below the diameter D'={h.D_prime}", module=_MOD)
    M = h.mass
    w = volume(h, E) / M
    if not w > 0:
        raise DegenerateError("set has zero measure", module=_MOD)
    P = perimeter1d(h, E) / M
    N = h.N
    res = D * P / (N * w ** (1.0 - 1.0 / N)) - 1.0
    return ResidualReport(w=w, res=res, D=float(D))


def residual_v(h: Density1D, D: float, v: float) -> ResidualReport:
    """Residual of the left interval ``[0, r_h(v)]`` of relative mass ``v``."""
    if not 0 < v < 0.5:
        raise DomainError(f"v must lie in (0, 1/2), got {v}", module=_MOD)
    r = float(h.ray_of_volume(v * h.mass))
    return residual(h, D, IntervalSet.of((0.0, r)))


# -- brute-force isoperimetric profile ------------------------------------------

def _perimeter_from_ends(h: Density1D, ends: np.ndarray) -> np.ndarray:
    """Perimeter of sets given as (..., 2k) arrays of sorted endpoints."""
    tol = 1e-12 * h.D_prime
    hv = np.asarray(h(np.clip(ends, 0.0, h.D_prime)))
    count = np.ones_like(ends, dtype=bool)
    count[..., 0::2] &= ends[..., 0::2] > tol
    count[..., 1::2] &= ends[..., 1::2] < h.D_prime - tol
    return np.sum(np.where(count, hv, 0.0), axis=-1)


def _ends_from_volumes(h: Density1D, params: np.ndarray, v: float, k: int):
    """Map unit-cube parameters to endpoint arrays of k intervals of mass v.

    params[..., 0] places the first left end, params[..., 1:k] split the mass
    and params[..., k:] split the free mass into gaps (volume coordinates).
    """
    M = h.mass
    p = np.clip(params, 0.0, 1.0)
    free = M - v
    if k == 1:
        u = p[..., 0] * free
        vols = np.stack([u, u + v], axis=-1)
    else:
        split = np.sort(p[..., 1:k], axis=-1)
        fr = np.diff(np.concatenate(
            [np.zeros(split.shape[:-1] + (1,)), split, np.ones(split.shape[:-1] + (1,))],
            axis=-1), axis=-1) * v
        u0 = p[..., 0] * free
        rest = free - u0
        gaps = p[..., k:2 * k - 1]
        # successive fractions of what remains
        cols = [u0]
        acc = u0.copy()
        remaining = rest.copy()
        for j in range(k):
            acc = acc + fr[..., j]
            cols.append(acc.copy())
            if j < k - 1:
                gj = gaps[..., j] * remaining
                remaining = remaining - gj
                acc = acc + gj
                cols.append(acc.copy())
        vols = np.stack(cols, axis=-1)
    vols = np.clip(vols, 0.0, M)
    return np.asarray(h.ray_of_volume(vols))


def isoprofile_bruteforce(h: Density1D, v: float, k: int = 1,
                          resolution: int | None = None) -> float:
    """Least perimeter over sets of at most ``k`` intervals with mass ``v``.

    Grid search in volume coordinates, then Nelder-Mead from the best nodes.
    The result is the perimeter of an actual set, hence an upper bound for
    the isoperimetric profile ``I_h(v)``.
    """
    if k not in (1, 2, 3):
        raise DomainError("k must be 1, 2 or 3", module=_MOD)
    M = h.mass
    if not 0 < v < M:
        raise DomainError("v must lie in (0, total mass)", module=_MOD)
    best = math.inf
    for kk in range(1, k + 1):
        dim = 2 * kk - 1
        n = resolution or {1: 2001, 2: 33, 3: 9}[kk]
        axes = [np.linspace(0.0, 1.0, n)] * dim
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dim)
        per = _perimeter_from_ends(h, _ends_from_volumes(h, mesh, v, kk))
        order = np.argsort(per)[:1]
        best = min(best, float(per[order[0]]))

        def obj(p, kk=kk):
            return float(_perimeter_from_ends(h, _ends_from_volumes(h, p[None], v, kk))[0])

        step = 1.0 / (n - 1)
        for idx in order:
            x0 = mesh[idx]
            if kk == 1:
                lo, hi = max(0.0, x0[0] - step), min(1.0, x0[0] + step)
                res = optimize.minimize_scalar(lambda s: obj(np.array([s])),
                                               bounds=(lo, hi), method="bounded",
                                               options={"xatol": 1e-12})
                best = min(best, float(res.fun))
            else:
                simplex = np.vstack([x0] + [np.clip(x0 + step * e, 0, 1)
                                            for e in np.eye(dim)])
                res = optimize.minimize(obj, x0, method="Nelder-Mead",
                                        options={"initial_simplex": simplex,
                                                 "xatol": 1e-10, "fatol": 1e-14,
                                                 "maxiter": 400 * dim})
                best = min(best, float(res.fun))
    return best


def random_cd0n(rng: np.random.Generator, N: float, D_prime: float,
                n: int = 257) -> Density1D:
    """Random sampled CD(0,N) density: ``h**(1/(N-1))`` is a positive
    combination of concave pieces, minimised against a random tent."""
    t = np.linspace(0.0, 1.0, n)
    a = rng.uniform(0.0, 1.0, size=3)
    g = a[0] + a[1] * t + 4.0 * a[2] * t * (1.0 - t)
    peak, lo, hi = rng.uniform(0.1, 0.9), rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0)
    tent = np.where(t < peak, lo + (3.0 - lo) * t / peak,
                    hi + (3.0 - hi) * (1.0 - t) / (1.0 - peak))
    g = np.minimum(g, tent)
    if g[0] == 0 and g[-1] == 0 and np.all(g == 0):
        g = g + 1.0
    return Density1D.sampled(N, D_prime * t, g + 1e-3 * (g[1:-1].min() == 0))
