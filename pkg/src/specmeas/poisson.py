"""Poisson-smoothed spectral measures, Stone-formula projections and atoms.

For self-adjoint ``T`` the smoothed kernel is

    K_H(u + i eps) x = (R(u + i eps) - R(u - i eps)) x / (2 pi i)
                     = int P_H(u - l, eps) dE(l) x.

For unitary ``T`` and ``z = r e^{i psi}``, ``w = 1 / conj(z)``,

    S(r, psi) x = (z R(z) - w R(w)) x / (2 pi) = int P_D(r, psi - theta) dE(theta) x,

which is the disk analogue with the same normalization as ``K_H``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .operator_model import ColumnDecayOperator, DecayVector, OpenRealSet
from .resolvent import DEFAULT_CAP, resolvent_batch

__all__ = [
    "poisson_h",
    "poisson_d",
    "SmoothedMeasureSample",
    "KernelSweep",
    "smoothed_kernel",
    "kernel_sweep",
    "radius_for",
    "stone_nodes",
    "gauss_panels",
    "ProjectionResult",
    "spectral_projection",
    "measure_of_set",
    "atom_weight",
    "find_atoms",
    "richardson",
    "AdaptiveIntegral",
    "adaptive_kernel_integral",
    "GKResult",
    "gauss_kronrod_adaptive",
]

_CHUNK = 64
_SWEEP_MEMORY = 4e8


def poisson_h(x, y):
    """Half-plane Poisson kernel ``y / (pi (x^2 + y^2))``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0):
        raise ValueError("poisson_h needs y > 0")
    out = y / (np.pi * (x * x + y * y))
    return float(out) if out.ndim == 0 else out


def poisson_d(r, phi):
    """Disk Poisson kernel ``(1 - r^2) / (2 pi (1 - 2 r cos phi + r^2))``."""
    r = np.asarray(r, dtype=float)
    if np.any((r < 0) | (r >= 1)):
        raise ValueError("poisson_d needs 0 <= r < 1")
    phi = np.asarray(phi, dtype=float)
    out = (1 - r * r) / (2 * np.pi * (1 - 2 * r * np.cos(phi) + r * r))
    return float(out) if out.ndim == 0 else out


def radius_for(eps: float) -> float:
    """Disk radius used for smoothing distance ``eps``: ``r = 1 - eps``."""
    if not 0 < eps < 1:
        raise ValueError("unitary smoothing needs 0 < eps < 1")
    return 1.0 - eps


@dataclass
class SmoothedMeasureSample:
    """Smoothed kernel vector at one point with its certified error."""

    point: float
    epsilon: float
    vector_value: np.ndarray
    bound: float
    circle: bool = False

    def inner(self, y: DecayVector | np.ndarray) -> complex:
        """``<vector_value, y>`` (linear in the first slot)."""
        v = self.vector_value
        yy = y.head(v.size) if isinstance(y, DecayVector) else np.asarray(y, dtype=complex)[: v.size]
        return complex(np.dot(v[: yy.size], np.conj(yy)))


@dataclass
class KernelSweep:
    """Kernel values over many points.

    ``inner[k, j] = <K(points[k]) x, ys[j]>``; ``bounds[k]`` is the certified
    error of the vector at ``points[k]``; ``weighted`` is
    ``sum_k weights[k] * K(points[k]) x`` when weights were given (one column
    per weight column when ``weights`` is two-dimensional).
    """

    points: np.ndarray
    epsilon: float
    inner: np.ndarray
    bounds: np.ndarray
    weighted: np.ndarray | None = None
    weighted_bound: float = 0.0
    n_max: int = 0


def _resolvent_tol(op: ColumnDecayOperator, eps: float, tol: float) -> float:
    if op.kind == "sa":
        return math.pi * tol
    r = radius_for(eps)
    return 2 * math.pi * tol / (r + 1 / r)


def _heads(ys, m):
    return np.stack([y.head(m) if isinstance(y, DecayVector) else np.pad(np.asarray(y, complex), (0, max(0, m - len(y))))[:m] for y in ys], axis=1)


def kernel_sweep(
    op: ColumnDecayOperator,
    x: DecayVector | Sequence[DecayVector],
    points,
    eps: float,
    tol: float = 1e-10,
    ys: Sequence | None = None,
    weights=None,
    cap: int = DEFAULT_CAP,
    diagonal: bool = False,
) -> KernelSweep | list[KernelSweep]:
    """Evaluate the smoothed kernel at many points.

    ``tol`` bounds the error of each kernel vector.  With ``ys`` the inner
    products ``<K x, y>`` are returned; with ``weights`` the weighted sum of the
    kernel vectors is accumulated (the individual vectors are not stored).
    Several right-hand sides may be passed as a list; ``diagonal=True`` then
    pairs each ``x`` with the same-index ``y`` only (``ys`` defaults to ``x``).
    """
    multi = isinstance(x, (list, tuple))
    xs = list(x) if multi else [x]
    points = np.atleast_1d(np.asarray(points, dtype=float))
    if eps <= 0:
        raise ValueError("eps must be positive")
    ys = list(ys) if ys is not None else ([] if not diagonal else xs)
    rtol = _resolvent_tol(op, eps, tol)
    sa = op.kind == "sa"
    conj_trick = sa and op.real and all(v.is_real for v in xs)
    npt = points.size
    nx = len(xs)
    inner = np.zeros((nx, npt, len(ys) if not diagonal else 1), dtype=complex)
    bounds = np.zeros((nx, npt))
    w = None if weights is None else np.asarray(weights)
    flat_w = w is not None and w.ndim == 1
    if w is not None:
        w = w.reshape(npt, -1)
        if w.shape[0] != npt:
            raise ValueError("weights must have one row per point")
    ncol = 0 if w is None else w.shape[1]
    acc: list[np.ndarray] = [np.zeros((0, ncol), dtype=complex) for _ in xs]
    acc_bound = np.zeros((nx, ncol))
    n_max = 0
    r = None if sa else radius_for(eps)
    n_start = 8
    chunk = min(8, _CHUNK)
    start = 0
    while start < npt:
        pts = points[start : start + chunk]
        if sa:
            zs = list(pts + 1j * eps)
            if not conj_trick:
                zs += list(pts - 1j * eps)
        else:
            e = np.exp(1j * pts)
            zs = list(r * e) + list(e / r)
        sols = resolvent_batch(op, xs, zs, rtol, n0=n_start, cap=cap, accept_floor=True)
        k = len(pts)
        # neighbouring points need similar truncations: start the next chunk lower
        n_start = max(8, min(s[0].n_used for s in sols) // 4)
        # keep the stored kernel vectors of one chunk within budget
        n_hi = max(s[0].n_used for s in sols)
        chunk = int(np.clip(_SWEEP_MEMORY // (16 * n_hi * nx * (len(zs) // k)), 1, _CHUNK))
        for i in range(k):
            for j in range(nx):
                if sa:
                    s1 = sols[i][j]
                    if conj_trick:
                        vec = s1.coeffs.imag / math.pi + 0j
                        bnd = s1.bound / math.pi
                    else:
                        s2 = sols[k + i][j]
                        m = max(s1.coeffs.size, s2.coeffs.size)
                        vec = (s1.vector(m) - s2.vector(m)) / (2j * math.pi)
                        bnd = (s1.bound + s2.bound) / (2 * math.pi)
                else:
                    s1, s2 = sols[i][j], sols[k + i][j]
                    m = max(s1.coeffs.size, s2.coeffs.size)
                    vec = (zs[i] * s1.vector(m) - zs[k + i] * s2.vector(m)) / (2 * math.pi)
                    bnd = (abs(zs[i]) * s1.bound + abs(zs[k + i]) * s2.bound) / (2 * math.pi)
                n_max = max(n_max, vec.size)
                idx = start + i
                bounds[j, idx] = bnd
                if diagonal:
                    inner[j, idx, 0] = np.dot(vec, np.conj(_heads([ys[j]], vec.size)[:, 0]))
                elif ys:
                    inner[j, idx, :] = vec @ np.conj(_heads(ys, vec.size))
                if w is not None:
                    if acc[j].shape[0] < vec.size:
                        acc[j] = np.pad(acc[j], ((0, vec.size - acc[j].shape[0]), (0, 0)))
                    acc[j][: vec.size] += vec[:, None] * w[idx][None, :]
                    acc_bound[j] += np.abs(w[idx]) * bnd
        start += k
    out = []
    for j in range(nx):
        weighted, wb = None, 0.0
        if w is not None:
            weighted = acc[j][:, 0] if flat_w else acc[j]
            wb = float(acc_bound[j, 0]) if flat_w else acc_bound[j]
        out.append(KernelSweep(points, eps, inner[j], bounds[j], weighted, wb, n_max))
    return out if multi else out[0]


def smoothed_kernel(
    op: ColumnDecayOperator,
    x: DecayVector,
    u_or_theta: float,
    eps: float,
    tol: float = 1e-10,
    cap: int = DEFAULT_CAP,
) -> SmoothedMeasureSample:
    """``K_H(u + i eps) x`` (self-adjoint) or ``S(1 - eps, theta) x`` (unitary)."""
    sw = kernel_sweep(op, x, [u_or_theta], eps, tol, weights=[1.0], cap=cap)
    return SmoothedMeasureSample(float(u_or_theta), eps, sw.weighted, float(sw.bounds[0]), op.kind == "u")


_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gl(order: int):
    hit = _GL_CACHE.get(order)
    if hit is None:
        hit = np.polynomial.legendre.leggauss(order)
        _GL_CACHE[order] = hit
    return hit


def gauss_panels(a: float, b: float, h: float, order: int = 8) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre rule on ``[a, b]``.

    Panel breaks sit on the global grid ``h * Z`` so that neighbouring
    intervals share nodes; the two end panels are partial.
    """
    if not b > a:
        return np.zeros(0), np.zeros(0)
    t, wt = _gl(order)
    k0 = math.floor(a / h) + 1
    k1 = math.ceil(b / h) - 1
    inner = np.arange(k0, k1 + 1) * h if k1 >= k0 else np.zeros(0)
    breaks = np.concatenate([[a], inner[(inner > a) & (inner < b)], [b]])
    lo, hi = breaks[:-1], breaks[1:]
    # drop slivers that would only repeat work
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    nodes = (mid[:, None] + half[:, None] * t[None, :]).ravel()
    weights = (half[:, None] * wt[None, :]).ravel()
    return nodes, weights


def stone_nodes(
    U: OpenRealSet,
    n: int,
    eps: float | None = None,
    order: int = 8,
    clip: float | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature for ``int_{U_n} g(u) du`` over the first ``n`` intervals.

    Each interval ``(a, b)`` is shrunk to ``(a + 1/n, b - 1/n)`` (skipped when
    empty), infinite ends are clipped to ``[-clip, clip]`` (default ``n``), and
    panels have width ``eps`` (default ``1/n``).
    """
    eps = eps or 1.0 / n
    clip = float(n) if clip is None else clip
    nodes, weights = [], []
    for a, b in U.first(n):
        a = max(a, -clip) + 1.0 / n
        b = min(b, clip) - 1.0 / n
        if b <= a:
            continue
        x, w = gauss_panels(a, b, eps, order)
        nodes.append(x)
        weights.append(w)
    if not nodes:
        return np.zeros(0), np.zeros(0)
    return np.concatenate(nodes), np.concatenate(weights)


@dataclass
class ProjectionResult:
    """Approximation of ``E_U x`` from the Stone quadrature.

    ``kernel_bound`` is the propagated resolvent error ``sum |w_k| bound_k``;
    quadrature and interior-shrink errors are not included.
    """

    coeffs: np.ndarray
    epsilon: float
    nodes: int
    kernel_bound: float

    def inner(self, y) -> complex:
        yy = y.head(self.coeffs.size) if isinstance(y, DecayVector) else np.asarray(y, complex)
        m = min(self.coeffs.size, yy.size)
        return complex(np.dot(self.coeffs[:m], np.conj(yy[:m])))


def spectral_projection(
    op: ColumnDecayOperator,
    x: DecayVector,
    U: OpenRealSet,
    n: int,
    tol: float = 1e-10,
    order: int = 8,
    eps: float | None = None,
    cap: int = DEFAULT_CAP,
) -> ProjectionResult:
    """``int_{U_n} K(u + i/n) x du``, converging to ``E_U x`` as ``n`` grows.

    For unitary operators ``U`` holds angular intervals and the disk kernel at
    radius ``1 - 1/n`` is integrated in the angle.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    eps = eps or 1.0 / n
    if op.kind == "u" and not eps < 1:
        raise ValueError("unitary projections need n >= 2")
    nodes, weights = stone_nodes(U, n, eps, order, clip=None if op.kind == "sa" else math.inf)
    if nodes.size == 0:
        return ProjectionResult(np.zeros(max(x.support or 1, 1), dtype=complex), eps, 0, 0.0)
    sw = kernel_sweep(op, x, nodes, eps, tol, weights=weights, cap=cap)
    return ProjectionResult(sw.weighted, eps, int(nodes.size), sw.weighted_bound)


def measure_of_set(
    op: ColumnDecayOperator,
    x: DecayVector,
    y: DecayVector,
    U: OpenRealSet,
    n: int,
    tol: float = 1e-10,
    order: int = 8,
    cap: int = DEFAULT_CAP,
) -> complex:
    """``mu_{x,y}(U)`` approximated by ``<spectral_projection(x, U, n), y>``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    eps = 1.0 / n
    nodes, weights = stone_nodes(U, n, eps, order, clip=None if op.kind == "sa" else math.inf)
    if nodes.size == 0:
        return 0j
    sw = kernel_sweep(op, x, nodes, eps, tol, ys=[y], cap=cap)
    return complex(np.dot(weights, sw.inner[:, 0]))


def _atom_scale(op: ColumnDecayOperator, eps: float) -> float:
    # value of the smoothing kernel at its centre, inverted
    if op.kind == "sa":
        return math.pi * eps
    r = radius_for(eps)
    return 2 * math.pi * (1 - r) / (1 + r)


def atom_weight(
    op: ColumnDecayOperator,
    x: DecayVector,
    point: float,
    eps: float,
    tol: float = 1e-12,
    cap: int = DEFAULT_CAP,
) -> float:
    """``mu_x({point})`` approximated by the kernel at ``point`` times ``pi * eps``.

    For unitary operators the factor is ``2 pi (1 - r) / (1 + r)`` so that a
    unit atom at ``point`` gives exactly 1.  ``tol`` bounds the resolvent
    contribution to the error of the returned weight.
    """
    scale = _atom_scale(op, eps)
    sw = kernel_sweep(op, x, [point], eps, tol / scale, ys=[x], cap=cap)
    return float(max(sw.inner[0, 0].real * scale, 0.0))


@dataclass
class Atom:
    location: float
    weight: float
    background: float


def find_atoms(
    op: ColumnDecayOperator,
    x: DecayVector,
    window: tuple[float, float],
    eps: float,
    grid: int | None = None,
    tol: float = 1e-10,
    ratio: float = 10.0,
    cap: int = DEFAULT_CAP,
) -> list[Atom]:
    """Peaks of the smoothed density that look like point masses.

    The smoothed density is sampled on ``window``; each local maximum is
    refined by parabolic steps and kept when ``pi * eps * peak`` exceeds
    ``ratio * eps * background``, the background being the smoothed density
    ``10 eps`` to either side.
    """
    a, b = window
    grid = grid or max(16, int(2 * (b - a) / eps) + 1)
    u = np.linspace(a, b, grid)
    sw = kernel_sweep(op, x, u, eps, tol, ys=[x], cap=cap)
    v = sw.inner[:, 0].real
    cand = [k for k in range(1, grid - 1) if v[k] >= v[k - 1] and v[k] > v[k + 1]]
    atoms = []
    h = u[1] - u[0]
    for k in cand:
        loc, step = u[k], h
        for _ in range(60):
            pts = np.array([loc - step, loc, loc + step])
            vals = kernel_sweep(op, x, pts, eps, tol, ys=[x], cap=cap).inner[:, 0].real
            den = vals[0] - 2 * vals[1] + vals[2]
            shift = 0.5 * step * (vals[0] - vals[2]) / den if den < 0 else 0.0
            shift = float(np.clip(shift, -step, step))
            loc += shift
            step = max(abs(shift), step / 4)
            if step < 1e-3 * eps:
                break
        peak = kernel_sweep(op, x, [loc - 10 * eps, loc, loc + 10 * eps], eps, tol, ys=[x], cap=cap).inner[:, 0].real
        weight = _atom_scale(op, eps) * peak[1]
        background = 0.5 * (peak[0] + peak[2])
        if weight > ratio * eps * max(background, 0.0):
            atoms.append(Atom(float(loc), float(weight), float(background)))
    return atoms


def richardson(values: Sequence[tuple[float, float]], order: int, rtol: float = 1e-9) -> float:
    """Richardson extrapolation on an ``eps, eps/2, eps/4, ...`` ladder.

    ``values`` are ``(eps_k, v_k)`` pairs; uses the last ``order + 1`` samples and
    eliminates the error terms ``eps, eps^2, ..., eps^order``.
    """
    if order < 0:
        raise ValueError("order must be >= 0")
    if len(values) < order + 1:
        raise ValueError(f"need at least {order + 1} samples for order {order}")
    pairs = list(values)[-(order + 1):]
    eps = np.array([p[0] for p in pairs], dtype=float)
    for e0, e1 in zip(eps, eps[1:]):
        if abs(e1 * 2 - e0) > rtol * e0:
            raise ValueError("eps values must halve at each step")
    table = [np.asarray(p[1]) for p in pairs]
    for j in range(1, order + 1):
        f = 2.0**j
        table = [(f * table[k + 1] - table[k]) / (f - 1) for k in range(len(table) - 1)]
    out = table[0]
    return float(out) if np.ndim(out) == 0 and np.isrealobj(out) else out


# 15-point Kronrod rule with its embedded 7-point Gauss rule
_XGK = np.array([
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0,
])
_WGK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714,
])
_WG7 = np.array([0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                 0.381830050505118944950369775488975, 0.417959183673469387755102040816327])
_KX = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_KW = np.concatenate([_WGK[:-1], _WGK[::-1]])
_GW = np.zeros(15)
_GW[[1, 3, 5, 7, 9, 11, 13]] = np.concatenate([_WG7[:-1], _WG7[::-1]])


@dataclass
class AdaptiveIntegral:
    """Accepted Kronrod panels of an adaptive kernel integration.

    ``inner[r, k, j] = <K(nodes[k]) xs[r], ys[j]>``; ``weights`` are the Kronrod
    weights, so ``weights @ (g(nodes)[:, None] * inner[r])`` integrates
    ``g(u) <K(u) x_r, y_j>``.  ``error`` is the sum of the panel estimates.
    """

    nodes: np.ndarray
    weights: np.ndarray
    inner: np.ndarray
    bounds: np.ndarray
    error: float
    panels: int


@dataclass
class GKResult:
    """Accepted 15-point panels of :func:`gauss_kronrod_adaptive`.

    ``values[k]`` is the integrand at ``nodes[k]``; ``extras`` holds any
    further per-node arrays returned by the evaluator (node axis first).
    """

    nodes: np.ndarray
    weights: np.ndarray
    values: np.ndarray
    extras: list
    error: float
    panels: int

    @property
    def integral(self) -> np.ndarray:
        return self.weights @ self.values


def gauss_kronrod_adaptive(
    evaluate,
    breaks,
    tol: float,
    max_width: float = math.inf,
    min_width: float = 0.0,
    max_panels: int = 200000,
) -> GKResult:
    """Adaptive 7/15 Gauss-Kronrod integration of a batched integrand.

    ``evaluate(nodes)`` returns either an array of shape ``(len(nodes), m)`` or
    a tuple ``(values, *extras)``.  All pending panels are evaluated in one
    call.  A panel is accepted when the largest difference of the two rules
    over the ``m`` components is at most ``tol`` times its share of the total
    length, or when it is no wider than ``min_width``.
    """
    breaks = np.unique(np.asarray(breaks, dtype=float))
    if breaks.size < 2:
        return GKResult(np.zeros(0), np.zeros(0), np.zeros((0, 0)), [], 0.0, 0)
    total = float(breaks[-1] - breaks[0])
    pending = []
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        k = max(1, int(math.ceil((hi - lo) / max_width - 1e-12)))
        edges = np.linspace(lo, hi, k + 1)
        pending += list(zip(edges[:-1], edges[1:]))
    acc_nodes, acc_w, acc_v, acc_x = [], [], [], []
    err_total = 0.0
    count = 0
    while pending:
        count += len(pending)
        if count > max_panels:
            raise RuntimeError(f"adaptive quadrature exceeded {max_panels} panels")
        lo = np.array([p[0] for p in pending])
        hi = np.array([p[1] for p in pending])
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        nodes = (mid[:, None] + half[:, None] * _KX[None, :]).ravel()
        out = evaluate(nodes)
        vals, extras = (out[0], out[1:]) if isinstance(out, tuple) else (out, ())
        vals = np.asarray(vals).reshape(nodes.size, -1)
        v3 = vals.reshape(len(pending), 15, -1)
        kr = np.einsum("pkm,k->pm", v3, _KW) * half[:, None]
        ga = np.einsum("pkm,k->pm", v3, _GW) * half[:, None]
        err = np.max(np.abs(kr - ga), axis=1) if v3.shape[-1] else np.zeros(len(pending))
        nxt = []
        for p in range(len(pending)):
            width = hi[p] - lo[p]
            if err[p] <= tol * width / total or width <= min_width:
                sl = slice(15 * p, 15 * p + 15)
                acc_nodes.append(nodes[sl])
                acc_w.append(half[p] * _KW)
                acc_v.append(vals[sl])
                acc_x.append([e[sl] for e in extras])
                err_total += float(err[p])
            else:
                nxt += [(lo[p], mid[p]), (mid[p], hi[p])]
        pending = nxt
    extras = [np.concatenate([x[i] for x in acc_x]) for i in range(len(acc_x[0]))]
    return GKResult(np.concatenate(acc_nodes), np.concatenate(acc_w), np.concatenate(acc_v), extras, err_total, len(acc_nodes))


def adaptive_kernel_integral(
    op: ColumnDecayOperator,
    xs: Sequence[DecayVector],
    ys: Sequence,
    eps: float,
    breaks,
    tol: float,
    g=None,
    max_width: float = math.inf,
    min_width: float | None = None,
    kernel_tol: float = 1e-8,
    cap: int = DEFAULT_CAP,
    max_panels: int = 200000,
) -> AdaptiveIntegral:
    """Adaptive 7/15 Gauss-Kronrod integration of ``g(u) <K(u + i eps) x_r, y_j>``.

    ``breaks`` are forced panel boundaries (kinks of ``g``); panels wider than
    ``max_width`` are split first.  Panels are refined on the largest rule
    difference over ``r, j`` (see :func:`gauss_kronrod_adaptive`); the default
    ``min_width`` is ``eps / 64``.  Only inner products are kept, never the
    kernel vectors.
    """
    g = g or (lambda u: np.ones_like(u))
    min_width = eps / 64 if min_width is None else min_width
    nx = len(xs)

    def evaluate(nodes):
        sw = kernel_sweep(op, list(xs), nodes, eps, kernel_tol, ys=ys, cap=cap)
        inner = np.stack([s.inner for s in sw], axis=1)  # (N, r, j)
        bnds = np.stack([s.bounds for s in sw], axis=1)
        return (inner * g(nodes)[:, None, None]).reshape(nodes.size, -1), inner, bnds

    res = gauss_kronrod_adaptive(evaluate, breaks, tol, max_width, min_width, max_panels)
    if res.nodes.size == 0:
        return AdaptiveIntegral(np.zeros(0), np.zeros(0), np.zeros((nx, 0, len(ys)), complex), np.zeros((nx, 0)), 0.0, 0)
    inner, bnds = res.extras
    return AdaptiveIntegral(res.nodes, res.weights, np.moveaxis(inner, 0, 1), np.moveaxis(bnds, 0, 1), res.error, res.panels)
