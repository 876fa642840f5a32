"""Radon-Nikodym derivatives as piecewise affine interpolants of the smoothed
kernel, and convergence-rate studies against exact densities."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .operator_model import ColumnDecayOperator, DecayVector, OpenRealSet
from .poisson import kernel_sweep, richardson
from .resolvent import DEFAULT_CAP

__all__ = ["PiecewiseAffineDensity", "rn_derivative", "smoothed_density", "RateStudy", "rate_study", "fit_slope"]


def _knot_count(a: float, b: float, n: int, m: int) -> int:
    """Number of equal cells on ``[a, b]``: cell width at most ``1/((b-a) n^3 m^2)``
    and at most ``1/n`` so the end knots stand off by no more than ``1/n``."""
    w = b - a
    return max(int(math.ceil(w * w * n**3 * m * m - 1e-9)), int(math.ceil(w * n - 1e-9)), 2)


@dataclass
class PiecewiseAffineDensity:
    """Affine interpolant of ``f(u) = <K(u + i/n) x, y>`` on scheduled knots.

    Interval ``m`` (1-based) of the first ``n`` intervals of ``U`` carries the
    knots ``a + (b - a) j / N_m``, ``j = 1..N_m - 1``.  The schedule is stored
    implicitly; knot values are computed on demand and cached, so evaluating
    at a point costs at most two kernel evaluations even when ``N_m`` is huge.
    The function is zero outside the hull of each interval's knots.
    """

    op: ColumnDecayOperator
    x: DecayVector
    y: DecayVector
    n: int
    intervals: list
    counts: list
    tol: float = 1e-10
    cap: int = DEFAULT_CAP
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def epsilon(self) -> float:
        return 1.0 / self.n

    def knots(self, m: int) -> np.ndarray:
        """Knots of interval ``m`` (1-based); empty for degenerate intervals."""
        a, b = self.intervals[m - 1]
        N = self.counts[m - 1]
        if N == 0:
            return np.zeros(0)
        return a + (b - a) * np.arange(1, N) / N

    def rational_knot(self, m: int, j: int) -> Fraction:
        """Knot ``j`` of interval ``m`` as an exact rational (finite float endpoints)."""
        a, b = self.intervals[m - 1]
        N = self.counts[m - 1]
        fa, fb = Fraction(a), Fraction(b)
        return fa + (fb - fa) * Fraction(j, N)

    def _values(self, keys: list[tuple[int, int]]) -> np.ndarray:
        missing = [k for k in dict.fromkeys(keys) if k not in self._cache]
        if missing:
            pts = np.array([self._knot(m, j) for m, j in missing])
            order = np.argsort(pts)
            sw = kernel_sweep(self.op, self.x, pts[order], self.epsilon, self.tol, ys=[self.y], cap=self.cap)
            vals = sw.inner[:, 0]
            for idx, v in zip(order, vals):
                self._cache[missing[idx]] = complex(v)
        return np.array([self._cache[k] for k in keys], dtype=complex)

    def _knot(self, m: int, j: int) -> float:
        a, b = self.intervals[m - 1]
        return a + (b - a) * j / self.counts[m - 1]

    def __call__(self, u) -> np.ndarray:
        u = np.atleast_1d(np.asarray(u, dtype=float))
        out = np.zeros(u.shape, dtype=complex)
        for m, ((a, b), N) in enumerate(zip(self.intervals, self.counts), start=1):
            if N < 2:
                continue
            h = (b - a) / N
            s = (u - a) / h
            inside = (s >= 1) & (s <= N - 1)
            if not inside.any():
                continue
            j0 = np.clip(np.floor(s[inside]).astype(np.int64), 1, N - 2) if N > 2 else np.ones(inside.sum(), np.int64)
            t = s[inside] - j0
            keys0 = [(m, int(j)) for j in j0]
            keys1 = [(m, int(j) + 1 if N > 2 else 1) for j in j0]
            v0, v1 = self._values(keys0), self._values(keys1)
            out[inside] = (1 - t) * v0 + t * v1
        return out

    def knot_values(self, m: int) -> np.ndarray:
        """All knot values of interval ``m`` (use only for modest knot counts)."""
        N = self.counts[m - 1]
        return self._values([(m, j) for j in range(1, N)]) if N > 1 else np.zeros(0, complex)

    def check_schedule(self) -> bool:
        """Spacing ``<= 1/((b-a) n^3 m^2)``, end standoff ``<= 1/n``, knots interior."""
        for m, ((a, b), N) in enumerate(zip(self.intervals, self.counts), start=1):
            if N == 0:
                continue
            h = (b - a) / N
            if h > 1.0 / ((b - a) * self.n**3 * m * m) * (1 + 1e-12) or h > 1.0 / self.n * (1 + 1e-12):
                return False
            if N < 2:
                return False
        return True


def rn_derivative(
    op: ColumnDecayOperator,
    x: DecayVector,
    y: DecayVector,
    U: OpenRealSet,
    n: int,
    tol: float = 1e-10,
    cap: int = DEFAULT_CAP,
) -> PiecewiseAffineDensity:
    """Piecewise affine approximation of the density of ``mu_{x,y}`` on ``U``.

    Uses the first ``n`` intervals of ``U`` (clipped to ``[-n, n]``) and
    smoothing ``1/n``.  Intervals shorter than ``2/n`` get no knots.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    intervals, counts = [], []
    for a, b in U.first(n):
        a, b = max(a, -n), min(b, n)
        intervals.append((a, b))
        counts.append(0 if b - a < 2.0 / n else _knot_count(a, b, n, len(intervals)))
    return PiecewiseAffineDensity(op, x, y, n, intervals, counts, tol, cap)


def smoothed_density(
    op: ColumnDecayOperator,
    x: DecayVector,
    points,
    eps: float,
    y: DecayVector | None = None,
    richardson_depth: int = 0,
    tol: float = 1e-12,
    cap: int = DEFAULT_CAP,
) -> np.ndarray:
    """``<K(u + i eps) x, y>`` at ``points``, optionally Richardson-extrapolated
    over ``eps, eps/2, ..., eps/2^k`` (depth ``k``)."""
    y = x if y is None else y
    pts = np.atleast_1d(np.asarray(points, dtype=float))
    ladder = [eps / 2.0**k for k in range(richardson_depth + 1)]
    samples = []
    for e in ladder:
        sw = kernel_sweep(op, x, pts, e, tol, ys=[y], cap=cap)
        samples.append((e, sw.inner[:, 0]))
    if richardson_depth == 0:
        return samples[0][1]
    return np.asarray(richardson(samples, richardson_depth))


def fit_slope(eps, err) -> float:
    """Least-squares slope of ``log err`` against ``log eps`` (zero errors skipped)."""
    eps = np.asarray(eps, float)
    err = np.abs(np.asarray(err, float))
    ok = err > 0
    if ok.sum() < 2:
        return math.nan
    return float(np.polyfit(np.log(eps[ok]), np.log(err[ok]), 1)[0])


@dataclass
class RateStudy:
    eps: np.ndarray
    points: np.ndarray
    errors: np.ndarray  # (depth+1, len(eps), len(points))
    slopes: np.ndarray  # (depth+1, len(points))
    l1_errors: np.ndarray | None = None  # (depth+1, len(eps))
    l1_slopes: np.ndarray | None = None

    def rows(self) -> list[dict]:
        out = []
        for d in range(self.slopes.shape[0]):
            for p, s in zip(self.points, self.slopes[d]):
                out.append({"depth": d, "point": float(p), "slope": float(s)})
            if self.l1_slopes is not None:
                out.append({"depth": d, "point": "L1", "slope": float(self.l1_slopes[d])})
        return out


def rate_study(
    op: ColumnDecayOperator,
    exact_density: Callable[[np.ndarray], np.ndarray],
    points: Sequence[float],
    eps_ladder: Sequence[float],
    extrapolation_depth: int = 0,
    x: DecayVector | None = None,
    l1_window: tuple[float, float] | None = None,
    l1_nodes: int = 400,
    tol: float = 1e-12,
    cap: int = DEFAULT_CAP,
) -> RateStudy:
    """Pointwise (and optionally L1) error of the smoothed density along a
    ``eps`` ladder, raw and after Richardson steps ``1..depth``.

    The depth-``d`` value at ``eps`` combines ``eps, eps/2, ..., eps/2^d``; the
    kernel is therefore sampled on the extended ladder.  Slopes are log-log
    least-squares fits over the ladder.
    """
    eps = np.asarray(sorted(eps_ladder, reverse=True), dtype=float)
    if eps.size < 3:
        raise ValueError("need at least 3 ladder points")
    x = x or DecayVector.basis(1)
    pts = np.asarray(points, dtype=float)
    grid = w = None
    if l1_window is not None:
        from .poisson import _gl

        gx, gw = _gl(l1_nodes)
        lo, hi = l1_window
        grid = 0.5 * (hi - lo) * gx + 0.5 * (hi + lo)
        w = 0.5 * (hi - lo) * gw
    allpts = pts if grid is None else np.concatenate([pts, grid])
    vals: dict = {}

    def sample(e):
        key = round(math.log2(e), 9)
        if key not in vals:
            vals[key] = kernel_sweep(op, x, allpts, e, tol, ys=[x], cap=cap).inner[:, 0].real
        return vals[key]

    exact = np.asarray(exact_density(allpts), dtype=float)
    D = extrapolation_depth + 1
    errors = np.zeros((D, eps.size, pts.size))
    l1 = np.zeros((D, eps.size)) if grid is not None else None
    for d in range(D):
        for i, e in enumerate(eps):
            samples = [(e / 2.0**k, sample(e / 2.0**k)) for k in range(d + 1)]
            v = samples[0][1] if d == 0 else np.asarray(richardson(samples, d))
            err = v - exact
            errors[d, i] = err[: pts.size]
            if grid is not None:
                l1[d, i] = float(w @ np.abs(err[pts.size:]))
    slopes = np.array([[fit_slope(eps, errors[d, :, p]) for p in range(pts.size)] for d in range(D)])
    l1s = np.array([fit_slope(eps, l1[d]) for d in range(D)]) if l1 is not None else None
    return RateStudy(eps, pts, errors, slopes, l1, l1s)

