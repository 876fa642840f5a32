"""Functional calculus: ``F(T) x`` for bounded continuous ``F`` by integrating
the Poisson-smoothed measure against piecewise-constant approximants of ``F``,
and ``w(T) x`` for holomorphic ``w`` by contour quadrature of the resolvent.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .operator_model import ColumnDecayOperator, DecayVector
from .poisson import _gl, kernel_sweep, radius_for
from .resolvent import DEFAULT_CAP, ResolventNotConverged, resolvent_batch

__all__ = [
    "BoundedFunctionSpec",
    "CalcResult",
    "apply_cb_function",
    "ContourSpec",
    "HolomorphicResult",
    "apply_holomorphic",
    "evolve",
]


@dataclass
class BoundedFunctionSpec:
    """A bounded continuous ``F`` with the data needed to build step approximants.

    ``F`` must accept numpy arrays.  ``lipschitz`` (when known) fixes the cell
    width ``1 / (2 n lipschitz)`` of the approximant ``F_n``; otherwise a
    Lipschitz constant is estimated from samples at spacing ``1 / (4 n)``.
    """

    F: Callable[[np.ndarray], np.ndarray]
    lipschitz: float | None = None
    sup: float | None = None
    _lip_cache: dict = field(default_factory=dict, repr=False)

    def __call__(self, u):
        return np.asarray(self.F(np.asarray(u, dtype=float)), dtype=complex)

    def cell_width(self, n: int, span: float | None = None) -> float:
        span = float(n) if span is None else span
        lip = self.lipschitz
        if lip is None:
            lip = self._lip_cache.get((n, span))
            if lip is None:
                u = np.linspace(-span, span, int(8 * n * span) + 2)
                v = self(u)
                lip = 1.5 * float(np.max(np.abs(np.diff(v))) / (u[1] - u[0])) if u.size > 1 else 0.0
                self._lip_cache[(n, span)] = lip
        if lip <= 0:
            return 2.0 * span
        return min(2.0 * span, 1.0 / (2.0 * n * lip))

    def approximant(self, n: int, span: float | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Cells and values of ``F_n``: ``edges`` (k+1,) and ``values`` (k,).

        Cells lie on the grid ``h Z`` clipped to ``[-span, span]`` (``span = n``
        by default); values are ``F`` at cell centres, so
        ``|F - F_n| <= lip * h / 2 <= 1 / (4 n)`` on the support.
        """
        span = float(n) if span is None else span
        h = self.cell_width(n, span)
        k0, k1 = math.floor(-span / h), math.ceil(span / h)
        edges = np.clip(np.arange(k0, k1 + 1) * h, -span, span)
        edges = np.unique(edges)
        values = self(0.5 * (edges[1:] + edges[:-1]))
        return edges, values

    def approximant_at(self, n: int, u, span: float | None = None) -> np.ndarray:
        """``F_n(u)``: ``F`` at the centre of the grid cell containing ``u``."""
        span = float(n) if span is None else span
        h = self.cell_width(n, span)
        u = np.asarray(u, dtype=float)
        k = np.floor(u / h)
        lo = np.maximum(k * h, -span)
        hi = np.minimum((k + 1) * h, span)
        out = self(0.5 * (lo + hi))
        return np.where(np.abs(u) <= span, out, 0.0)


@dataclass
class CalcResult:
    """``F(T) x`` approximation; ``kernel_bound`` is the propagated resolvent error."""

    coeffs: np.ndarray
    n: int
    epsilon: float
    nodes: int
    kernel_bound: float

    def vector(self, m: int) -> np.ndarray:
        out = np.zeros(m, dtype=complex)
        k = min(m, self.coeffs.size)
        out[:k] = self.coeffs[:k]
        return out


def _graded_breaks(lo: float, hi: float, core: tuple[float, float], h: float) -> np.ndarray:
    """Panel breaks on ``[lo, hi]``: width ``h`` on ``core`` (aligned to ``h Z``),
    growing like half the distance to ``core`` outside it."""
    c0, c1 = max(core[0], lo), min(core[1], hi)
    out = []
    if c1 > c0:
        k0, k1 = math.ceil(c0 / h), math.floor(c1 / h)
        out.append(np.concatenate([[c0], np.arange(k0, k1 + 1) * h, [c1]]))
        right_start, left_start = c1, c0
    else:
        right_start = left_start = min(max(0.5 * (core[0] + core[1]), lo), hi)
    b, pts = right_start, []
    while b < hi:
        b = min(hi, b + max(h, 0.5 * (b - core[1])))
        pts.append(b)
    out.append(np.array(pts))
    b, pts = left_start, []
    while b > lo:
        b = max(lo, b - max(h, 0.5 * (core[0] - b)))
        pts.append(b)
    out.append(np.array(pts))
    breaks = np.unique(np.concatenate(out + [[lo, hi]]))
    return breaks[(breaks >= lo) & (breaks <= hi)]


def _panel_nodes(breaks: np.ndarray, order: int = 8):
    t, wt = _gl(order)
    lo, hi = breaks[:-1], breaks[1:]
    keep = hi > lo
    lo, hi = lo[keep], hi[keep]
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    return (mid[:, None] + half[:, None] * t).ravel(), (half[:, None] * wt).ravel()


def cb_nodes(op: ColumnDecayOperator, n: int, order: int = 8) -> tuple[np.ndarray, np.ndarray, float]:
    """Quadrature nodes/weights for ``int_{-n}^{n} (.) du`` at ``eps = 1/n``.

    Self-adjoint: panels of width ``eps`` where the spectrum may lie (the
    ``bounded_hint`` widened by ``20 eps``), graded outside.  Unitary: panels
    of width ``eps`` over the whole circle.
    """
    eps = 1.0 / n
    if op.kind == "u":
        breaks = _graded_breaks(-math.pi, math.pi, (-math.pi, math.pi), eps)
    else:
        core = (-float(n), float(n))
        if op.bounded_hint is not None:
            core = (op.bounded_hint[0] - 20 * eps, op.bounded_hint[1] + 20 * eps)
        breaks = _graded_breaks(-float(n), float(n), core, eps)
    x, w = _panel_nodes(breaks, order)
    return x, w, eps


def apply_cb_function(
    op: ColumnDecayOperator,
    x: DecayVector,
    F: BoundedFunctionSpec | Callable,
    n: int,
    tol: float = 1e-8,
    order: int = 8,
    cap: int = DEFAULT_CAP,
    exact_function: bool = False,
) -> CalcResult:
    """``int_{-n}^{n} K(u + i/n) x F_n(u) du``, converging to ``F(T) x``.

    For unitary operators ``F`` is a function of the angle and the disk
    kernel at radius ``1 - 1/n`` is integrated over the circle.  With
    ``exact_function`` the nodes sample ``F`` itself instead of ``F_n``.
    """
    if n < 2 and op.kind == "u":
        raise ValueError("unitary functional calculus needs n >= 2")
    if n < 1:
        raise ValueError("n must be >= 1")
    spec = F if isinstance(F, BoundedFunctionSpec) else BoundedFunctionSpec(F)
    nodes, weights, eps = cb_nodes(op, n, order)
    span = math.pi if op.kind == "u" else float(n)
    fvals = spec(nodes) if exact_function else spec.approximant_at(n, nodes, span=span)
    w = weights * fvals
    live = w != 0
    if not np.any(live):
        return CalcResult(np.zeros(max(x.support or 1, 1), dtype=complex), n, eps, 0, 0.0)
    sw = kernel_sweep(op, x, nodes[live], eps, tol, weights=w[live], cap=cap)
    return CalcResult(sw.weighted, n, eps, int(live.sum()), sw.weighted_bound)


# ---------------------------------------------------------------- contours


@dataclass
class _Piece:
    kind: str  # "line" or "arc"
    a: complex  # line start, or arc centre
    b: complex  # line end
    radius: float = 0.0
    t0: float = 0.0
    t1: float = 0.0

    def nodes(self, m: int):
        t, wt = _gl(m)
        if self.kind == "line":
            mid, half = 0.5 * (self.a + self.b), 0.5 * (self.b - self.a)
            return mid + half * t, half * wt
        mid, half = 0.5 * (self.t0 + self.t1), 0.5 * (self.t1 - self.t0)
        ang = mid + half * t
        z = self.a + self.radius * np.exp(1j * ang)
        return z, 1j * self.radius * np.exp(1j * ang) * half * wt

    @property
    def length(self) -> float:
        if self.kind == "line":
            return abs(self.b - self.a)
        return abs(self.t1 - self.t0) * self.radius


def _line_graded(z0: complex, z1: complex, toward: complex, smallest: float) -> list[_Piece]:
    """Split ``[z0, z1]`` geometrically towards the endpoint nearest ``toward``."""
    if abs(z1 - toward) < abs(z0 - toward):
        return [_Piece("line", p.b, p.a) for p in reversed(_line_graded(z1, z0, toward, smallest))]
    # z0 is the end near ``toward``
    L = abs(z1 - z0)
    d0 = max(abs(z0 - toward), smallest)
    cuts = [0.0]
    s = d0
    while cuts[-1] + s < L:
        cuts.append(cuts[-1] + s)
        s = cuts[-1] + d0
    cuts.append(L)
    u = (z1 - z0) / L
    return [_Piece("line", z0 + u * c0, z0 + u * c1) for c0, c1 in zip(cuts[:-1], cuts[1:])]


@dataclass
class ContourSpec:
    """Closed, positively oriented contour for ``w(T) x = -(1 / 2 pi i) int w(z) R(z) x dz``
    (the minus sign because ``R(z) = (T - z)^{-1}``).

    ``pieces`` are straight or circular panels, each integrated with
    ``nodes`` Gauss-Legendre points.  ``w`` is the scalar function (principal
    branch for fractional powers, so its cut is the non-positive axis).
    ``margin`` is a lower bound on the distance between the contour and the
    spectrum.
    """

    pieces: list
    w: Callable[[np.ndarray], np.ndarray]
    margin: float
    nodes: int = 16
    label: str = ""

    @property
    def length(self) -> float:
        return float(sum(p.length for p in self.pieces))

    def quadrature(self, m: int | None = None) -> tuple[np.ndarray, np.ndarray]:
        m = m or self.nodes
        zs, ws = zip(*(p.nodes(m) for p in self.pieces))
        return np.concatenate(zs), np.concatenate(ws)

    @classmethod
    def rectangle(cls, x0: float, x1: float, y: float, w: Callable, nodes: int = 16, margin: float | None = None,
                  spectrum: tuple[float, float] | None = None) -> "ContourSpec":
        """Counterclockwise rectangle ``[x0, x1] x [-y, y]``.

        ``margin`` defaults to the distance to ``spectrum`` (an interval on the
        real line) when given.
        """
        if not (x1 > x0 and y > 0):
            raise ValueError("need x1 > x0 and y > 0")
        if margin is None:
            if spectrum is None:
                raise ValueError("give margin or spectrum")
            lo, hi = spectrum
            if not (x0 < lo and hi < x1):
                raise ValueError("rectangle does not enclose the spectrum interval")
            margin = min(y, lo - x0, x1 - hi)
        corners = [complex(x1, -y), complex(x1, y), complex(x0, y), complex(x0, -y)]
        pieces = [_Piece("line", corners[k], corners[(k + 1) % 4]) for k in range(4)]
        return cls(pieces, w, float(margin), nodes, "rectangle")

    @classmethod
    def keyhole(cls, right: float, height: float, w: Callable, delta: float = 1e-3, nodes: int = 16) -> "ContourSpec":
        """Contour around ``[0, right)`` for spectra touching 0 with a cut on ``(-inf, 0]``.

        The rectangle ``[0, right] x [-height, height]`` with its left edge
        replaced by two segments on the imaginary axis that meet a semicircle of
        radius ``delta`` about 0 on the left, crossing the cut once at
        ``-delta``.  The segments near 0 are split geometrically.
        """
        if not (right > 0 and height > delta > 0):
            raise ValueError("need right > 0 and height > delta > 0")
        pieces = [
            _Piece("line", complex(right, 0), complex(right, height)),
            _Piece("line", complex(right, height), complex(0, height)),
        ]
        pieces += _line_graded(complex(0, height), complex(0, delta), 0j, delta)
        pieces += [
            _Piece("arc", 0j, 0j, delta, 0.5 * math.pi, math.pi),
            _Piece("arc", 0j, 0j, delta, math.pi, 1.5 * math.pi),
        ]
        pieces += _line_graded(complex(0, -delta), complex(0, -height), 0j, delta)
        pieces += [
            _Piece("line", complex(0, -height), complex(right, -height)),
            _Piece("line", complex(right, -height), complex(right, 0)),
        ]
        return cls(pieces, w, float(delta), nodes, "keyhole")


@dataclass
class HolomorphicResult:
    """Contour quadrature result.

    ``bound`` = resolvent part (``sum |w_k dz_k| bound_k / 2 pi``) plus the
    quadrature estimate (change from the previous node count).
    """

    coeffs: np.ndarray
    bound: float
    resolvent_bound: float
    quadrature_estimate: float
    nodes: int
    n_max: int

    def vector(self, m: int) -> np.ndarray:
        out = np.zeros(m, dtype=complex)
        k = min(m, self.coeffs.size)
        out[:k] = self.coeffs[:k]
        return out


def _contour_sum(op, x, zs, ws, wvals, rtol, cap, fixed_n, dist):
    dists = [max(dist, op.dist_lower_bound(z)) for z in zs] if dist is not None else None
    sols = []
    for start in range(0, len(zs), 64):
        sl = slice(start, start + 64)
        try:
            sols += resolvent_batch(op, [x], list(zs[sl]), rtol, cap=cap, fixed_n=fixed_n,
                                    dist_lower_bound=None if dists is None else dists[sl], accept_floor=True)
        except ResolventNotConverged as exc:
            raise ResolventNotConverged(f"contour node did not converge: {exc}", exc.result) from None
    m = max(s[0].coeffs.size for s in sols)
    acc = np.zeros(m, dtype=complex)
    bnd = 0.0
    for k, row in enumerate(sols):
        s = row[0]
        c = -wvals[k] * ws[k] / (2j * math.pi)
        acc[: s.coeffs.size] += c * s.coeffs
        bnd += abs(c) * s.bound
    return acc, bnd, m


def apply_holomorphic(
    op: ColumnDecayOperator,
    x: DecayVector,
    contour: ContourSpec,
    tol: float = 1e-8,
    fixed_n: int | None = None,
    max_nodes: int = 256,
    cap: int = DEFAULT_CAP,
) -> HolomorphicResult:
    """``w(T) x = -(1 / 2 pi i) int_gamma w(z) R(z) x dz`` over a counterclockwise contour.

    The per-panel node count doubles from ``contour.nodes`` until the change in
    the result is below ``tol / 4`` (or ``max_nodes`` is reached).  Each
    resolvent is solved to ``tol / (4 L max|w|)`` with ``L`` the contour length,
    or at the fixed truncation ``fixed_n``.
    """
    if contour.margin <= 0:
        raise ValueError("contour must clear the spectrum by a positive margin")
    m = contour.nodes
    prev = None
    L = contour.length
    while True:
        zs, ws = contour.quadrature(m)
        wv = np.asarray(contour.w(zs), dtype=complex)
        wmax = float(np.max(np.abs(wv))) or 1.0
        rtol = tol / (4 * L * wmax)
        vec, rb, nmax = _contour_sum(op, x, zs, ws, wv, rtol, cap, fixed_n, contour.margin)
        if prev is not None:
            k = max(vec.size, prev.size)
            a = np.pad(vec, (0, k - vec.size))
            b = np.pad(prev, (0, k - prev.size))
            q = float(np.linalg.norm(a - b))
            if q < tol / 4 or 2 * m > max_nodes:
                return HolomorphicResult(vec, rb + q, rb, q, int(zs.size), nmax)
        prev = vec
        m *= 2


def _default_rectangle(op: ColumnDecayOperator, w: Callable, nodes: int = 32) -> ContourSpec:
    if op.bounded_hint is None or not np.all(np.isfinite(op.bounded_hint)):
        raise ValueError("a bounded spectrum hint is needed for a contour")
    lo, hi = op.bounded_hint
    pad = max(0.5, 0.1 * (hi - lo))
    return ContourSpec.rectangle(lo - pad, hi + pad, pad, w, nodes, spectrum=(lo, hi))


def evolve(
    op: ColumnDecayOperator,
    x0: DecayVector,
    equation: str,
    t: float,
    tol: float = 1e-8,
    alpha: float = 1.0,
    n: int | None = None,
    contour: ContourSpec | None = None,
    fixed_n: int | None = None,
):
    """Solve ``u' = F(A) u`` with ``u(0) = x0`` at time ``t``.

    ``equation="schrodinger"``: ``u(t) = exp(-i t A) x0``; contour quadrature
    when ``A`` has a bounded spectrum hint, otherwise the Poisson calculus at
    stage ``n``.  ``equation="fractional_diffusion"``: ``u(t) = exp(-t A^alpha) x0``
    for ``A >= 0`` (pass ``-H_0`` for a graph Laplacian ``H_0 <= 0``); a
    rectangle is used when ``alpha`` is an integer or the spectrum stays away
    from 0, otherwise a keyhole.  Returns a result with ``.coeffs``.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    if t == 0:
        m = max(x0.support or 1, 1)
        return HolomorphicResult(x0.head(m), 0.0, 0.0, 0.0, 0, m)
    if op.kind != "sa":
        raise ValueError("evolve expects a self-adjoint generator")
    if equation == "schrodinger":
        w = lambda z: np.exp(-1j * t * np.asarray(z))
        hint = op.bounded_hint
        if contour is None and (hint is None or not np.all(np.isfinite(hint))):
            if n is None:
                raise ValueError("unbounded generator: give the stage n")
            return apply_cb_function(op, x0, BoundedFunctionSpec(lambda u: np.exp(-1j * t * u), lipschitz=abs(t)), n, tol)
        return apply_holomorphic(op, x0, contour or _default_rectangle(op, w), tol, fixed_n=fixed_n)
    if equation in ("fractional_diffusion", "diffusion"):
        if alpha <= 0:
            raise ValueError("alpha must be positive")
        w = lambda z: np.exp(-t * np.power(np.asarray(z, dtype=complex), alpha))
        if contour is None:
            hint = op.bounded_hint
            if hint is None or not np.isfinite(hint[1]) or hint[0] < 0:
                raise ValueError("fractional diffusion needs a spectrum hint inside [0, inf)")
            lo, hi = hint
            pad = max(0.5, 0.1 * (hi - lo))
            if float(alpha).is_integer():
                contour = ContourSpec.rectangle(lo - pad, hi + pad, pad, w, 32, spectrum=(lo, hi))
            elif lo > 0:
                contour = ContourSpec.rectangle(lo / 2, hi + pad, pad, w, 32, margin=min(lo / 2, pad))
            else:
                # w jumps across the cut on the small arc; the jump costs about
                # t delta^(1+alpha) / lambda per eigenvalue lambda, so shrink delta with tol
                delta = min(1e-3, tol ** (1.0 / (1.0 + alpha)))
                contour = ContourSpec.keyhole(hi + pad, pad, w, delta=delta, nodes=16)
        return apply_holomorphic(op, x0, contour, tol, fixed_n=fixed_n)
    raise ValueError(f"unknown equation {equation!r}")
