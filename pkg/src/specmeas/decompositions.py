"""Finite stages of the multi-limit towers that split spectral measures and
spectra into pure point, absolutely continuous and singular continuous parts.

Measures (self-adjoint operators, open sets ``U``):

* continuous part: time average of ``||Q_n2 e^{-iTs} chi(T) x||^2`` over
  ``s = j / n1``, ``j = 1..n1^2``, where ``Q_n`` removes the first ``n``
  coordinates and ``chi`` is the indicator of ``U`` with affine shoulders of
  width ``1/n1``.  ``e^{-iTs} chi(T) x`` comes from the Poisson calculus with
  smoothing ``1/n1^2``; only its first ``n2`` coordinates and its norm are needed.
* singular part: ``(pi n2 / 2) int f(t) chi(|F(t)|) dt`` with
  ``F(t) = Re <R(t + i/n1) x, x> / pi``, ``f`` a trapezoid inside ``U`` kept
  ``1/sqrt(n2)`` away from its boundary and ``chi`` rising from 0 at ``n2 - 1``
  to 1 at ``n2 + 1``.

Spectra: a bisection tree over ``[-n2, n2]`` whose interval decisions come from
thresholding a stage value with the two-interval rule ``J1 = [0, 1/n]``,
``J2 = [2/n, inf)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .operator_model import ColumnDecayOperator, DecayVector, OpenRealSet
from .poisson import adaptive_kernel_integral, gauss_kronrod_adaptive, gauss_panels, kernel_sweep, measure_of_set
from .resolvent import DEFAULT_CAP, resolvent_batch

__all__ = [
    "TowerStage",
    "IntervalTree",
    "TreeNode",
    "mollified_indicator",
    "continuous_part",
    "singular_part",
    "measure_decomposition",
    "two_interval_decision",
    "build_tree",
    "pp_spectrum_stage",
    "ac_spectrum_stage",
    "sc_spectrum_stage",
    "SpectralTowerContext",
]

KINDS = ("measure_c", "measure_s", "measure_pp", "measure_ac", "measure_sc", "set_pp", "set_ac", "set_sc")


@dataclass
class TowerStage:
    """Value of a tower at explicit stage indices."""

    indices: tuple
    value: object
    kind: str
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown stage kind {self.kind!r}")

    def to_json(self) -> dict:
        val = self.value
        if isinstance(val, list):
            val = [[float(a), float(b)] for a, b in val]
        else:
            val = float(val)
        return {"indices": list(self.indices), "kind": self.kind, "value": val,
                "meta": {k: v for k, v in self.meta.items() if isinstance(v, (int, float, str, bool, list))}}


def _require_sa(op: ColumnDecayOperator) -> None:
    if op.kind != "sa":
        raise ValueError("spectral decompositions are implemented for self-adjoint operators")


def _clipped_intervals(U: OpenRealSet, count: int, clip: float) -> list[tuple[float, float]]:
    out = []
    for a, b in U.first(count):
        a, b = max(a, -clip), min(b, clip)
        if b > a:
            out.append((a, b))
    return out


def mollified_indicator(u, intervals: Sequence[tuple[float, float]], width: float) -> np.ndarray:
    """Piecewise affine: 1 inside each interval except ``width``-wide shoulders
    falling to 0 at the endpoints (narrow intervals give a triangle)."""
    u = np.asarray(u, dtype=float)
    out = np.zeros(u.shape)
    for a, b in intervals:
        w = min(width, 0.5 * (b - a))
        out = np.maximum(out, np.clip(np.minimum(u - a, b - u) / w, 0.0, 1.0))
    return out


# ----------------------------------------------------------- continuous part


def _rage(op, xs, intervals, n1, n2, kernel_tol, cap):
    """``c[r, n-1]`` = time average of ``||Q_n e^{-iTs} chi(T) x_r||^2`` for ``n = 1..n2``."""
    delta = 1.0 / n1**2
    shoulder = 1.0 / n1
    nx = len(xs)
    if not intervals or nx == 0:
        return np.zeros((nx, n2)), np.zeros(nx), {"nodes": 0}
    basis = [DecayVector.basis(k) for k in range(1, n2 + 1)]
    ys = basis + list(xs)
    breaks = []
    for a, b in intervals:
        w = min(shoulder, 0.5 * (b - a))
        breaks += [a, a + w, b - w, b]
    chi = lambda u: mollified_indicator(u, intervals, shoulder)
    res = adaptive_kernel_integral(
        op, xs, ys, delta, breaks, tol=1e-3 / n1, g=chi, max_width=2.0 / n1,
        min_width=delta / 16, kernel_tol=kernel_tol, cap=cap,
    )
    cw = res.weights * chi(res.nodes)
    norm2 = np.array([float(np.real(cw @ (chi(res.nodes) * res.inner[r, :, n2 + r]))) for r in range(nx)])
    # P v(s) for s = j / n1, j = 1..n1^2, accumulated in blocks of time samples
    c = np.zeros((nx, n2))
    m = n1 * n1
    block = max(1, int(2e6 // max(res.nodes.size, 1)))
    for r in range(nx):
        A = cw[:, None] * res.inner[r, :, :n2]
        acc = np.zeros(n2)
        for j0 in range(1, m + 1, block):
            s = np.arange(j0, min(m, j0 + block - 1) + 1) / n1
            P = np.exp(-1j * np.outer(s, res.nodes)) @ A
            acc += np.cumsum(np.abs(P) ** 2, axis=1).sum(axis=0)
        # ||Q_n v||^2 = ||v||^2 - sum_{i <= n} |v_i|^2, averaged over the time grid
        c[r] = norm2[r] - acc / m
    meta = {"nodes": int(res.nodes.size), "quadrature_error": res.error, "delta": delta}
    return np.maximum(c, 0.0), norm2, meta


def continuous_part(
    op: ColumnDecayOperator,
    x: DecayVector,
    U: OpenRealSet,
    n1: int,
    n2: int,
    kernel_tol: float = 1e-6,
    cap: int = DEFAULT_CAP,
) -> TowerStage:
    """Stage ``(n1, n2)`` of the tower for ``<P_c E_U x, x>``.

    The first ``n1`` intervals of ``U`` are used, clipped to ``[-n1, n1]``.
    Negative values (possible only through rounding) are clipped to 0.
    """
    _require_sa(op)
    if n1 < 1 or n2 < 1:
        raise ValueError("stages must be >= 1")
    if x.norm_estimate() == 0:
        return TowerStage((n1, n2), 0.0, "measure_c", {"nodes": 0})
    c, norm2, meta = _rage(op, [x], _clipped_intervals(U, n1, n1), n1, n2, kernel_tol, cap)
    meta["norm2"] = float(norm2[0])
    meta["by_n"] = [float(v) for v in c[0]]
    return TowerStage((n1, n2), float(c[0, -1]), "measure_c", meta)


# ------------------------------------------------------------- singular part


def _trapezoids(intervals, n):
    """``f_n``: trapezoids supported ``1/sqrt(n)`` inside each interval, within ``[-n, n]``."""
    r = 1.0 / math.sqrt(n)
    pieces = []
    for a, b in intervals:
        lo, hi = max(a + r, -n), min(b - r, n)
        if hi > lo:
            pieces.append((lo, hi, min(r, 0.5 * (hi - lo))))

    def f(t):
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape)
        for lo, hi, w in pieces:
            out = np.maximum(out, np.clip(np.minimum(t - lo, hi - t) / w, 0.0, 1.0))
        return out

    return f, pieces


def _level_cut(v, n):
    """Continuous cutoff: 0 below ``n - 1``, 1 above ``n + 1``."""
    return np.clip((np.asarray(v) - (n - 1)) / 2.0, 0.0, 1.0)


def _resolvent_inner(op, x, ts, eps, tol, cap):
    out = np.zeros(len(ts), dtype=complex)
    n0 = 8
    conj = op.real and x.is_real
    for start in range(0, len(ts), 64):
        zs = list(np.asarray(ts[start : start + 64]) + 1j * eps)
        sols = resolvent_batch(op, [x], zs, tol, n0=n0, cap=cap, accept_floor=True)
        n0 = max(8, min(s[0].n_used for s in sols) // 4)
        for k, row in enumerate(sols):
            v = row[0].coeffs
            out[start + k] = np.dot(v, np.conj(x.head(v.size)))
    return out


def singular_part(
    op: ColumnDecayOperator,
    x: DecayVector,
    U: OpenRealSet,
    n1: int,
    n2: int,
    kernel_tol: float = 1e-8,
    cap: int = DEFAULT_CAP,
) -> TowerStage:
    """Stage ``(n1, n2)`` of the tower for ``mu_{x,s}(U)``.

    ``(pi n2 / 2) int f_{n2}(t) chi_{n2}(|F_{n1}(t)|) dt`` integrated adaptively
    on the support of ``f_{n2}`` (first ``n2`` intervals of ``U``).
    """
    _require_sa(op)
    if n1 < 1 or n2 < 2:
        raise ValueError("need n1 >= 1 and n2 >= 2")
    if x.norm_estimate() == 0:
        return TowerStage((n1, n2), 0.0, "measure_s", {"nodes": 0})
    f, pieces = _trapezoids(_clipped_intervals(U, n2, n2), n2)
    if not pieces:
        return TowerStage((n1, n2), 0.0, "measure_s", {"nodes": 0})
    eps = 1.0 / n1
    breaks = sorted({p for lo, hi, w in pieces for p in (lo, lo + w, hi - w, hi)})

    def evaluate(t):
        F = _resolvent_inner(op, x, t, eps, kernel_tol, cap).real / math.pi
        return (f(t) * _level_cut(np.abs(F), n2))[:, None]

    res = gauss_kronrod_adaptive(evaluate, breaks, tol=1e-4, max_width=eps / 2, min_width=eps / 256)
    value = 0.5 * math.pi * n2 * float(res.weights @ res.values[:, 0])
    return TowerStage((n1, n2), value, "measure_s", {"nodes": int(res.nodes.size), "quadrature_error": res.error})


def measure_decomposition(
    op: ColumnDecayOperator,
    x: DecayVector,
    U: OpenRealSet,
    n1: int,
    n2: int,
    singular_stages: tuple[int, int] | None = None,
    kernel_tol: float = 1e-6,
    cap: int = DEFAULT_CAP,
) -> dict:
    """``pp = mu - c``, ``ac = mu - s``, ``sc = s - pp`` at matched stages.

    ``mu`` is the Stone value at stage ``n1``; ``c`` the continuous part at
    ``(n1, n2)``; ``s`` the singular part at ``singular_stages`` (default
    ``(n1, n2)``).  Returns a dict of :class:`TowerStage` values.
    """
    _require_sa(op)
    mu = float(measure_of_set(op, x, x, U, n1, tol=1e-10, cap=cap).real)
    c = continuous_part(op, x, U, n1, n2, kernel_tol, cap)
    sn1, sn2 = singular_stages or (n1, n2)
    s = singular_part(op, x, U, sn1, sn2, cap=cap)
    pp, ac = mu - c.value, mu - s.value
    sc = s.value - pp
    idx = (n1, n2)
    return {
        "mu": mu,
        "c": c,
        "s": s,
        "pp": TowerStage(idx, pp, "measure_pp"),
        "ac": TowerStage(idx, ac, "measure_ac", {"singular_stages": [sn1, sn2]}),
        "sc": TowerStage(idx, sc, "measure_sc", {"singular_stages": [sn1, sn2]}),
    }


# -------------------------------------------------------------------- trees


def two_interval_decision(upsilon: Callable[[int], float], n1: int, level: int) -> tuple[int, int | None, float | None]:
    """Largest ``k <= n1`` with ``upsilon(k)`` in ``[0, 1/level]`` or ``[2/level, inf)``.

    Returns ``(decision, k, value)``; the decision is 1 only when that value
    lies in the upper interval.  No such ``k`` gives 0.
    """
    lo, hi = 1.0 / level, 2.0 / level
    for k in range(n1, 0, -1):
        v = upsilon(k)
        if 0.0 <= v <= lo:
            return 0, k, v
        if v >= hi:
            return 1, k, v
    return 0, None, None


@dataclass
class TreeNode:
    a: float
    b: float
    depth: int
    decision: int
    value: float | None = None
    children: list = field(default_factory=list)


@dataclass
class IntervalTree:
    """Bisection tree: root ``[-n, n]``, level 0 the unit intervals, children by
    midpoint bisection of intervals with decision 1, down to depth ``n``."""

    n: int
    top: list  # level-0 nodes

    def nodes(self):
        stack = list(self.top)
        while stack:
            node = stack.pop()
            yield node
            stack.extend(node.children)

    def leaves(self) -> list[tuple[float, float]]:
        """Leaves after pruning every leaf with decision 0."""
        out = []
        for node in self.nodes():
            if node.decision == 1 and not any(c.decision == 1 for c in node.children):
                out.append((node.a, node.b))
        return sorted(out)

    def union(self) -> list[tuple[float, float]]:
        """Retained leaves merged into disjoint closed intervals."""
        merged: list[list[float]] = []
        for a, b in self.leaves():
            if merged and a <= merged[-1][1]:
                merged[-1][1] = max(merged[-1][1], b)
            else:
                merged.append([a, b])
        return [(a, b) for a, b in merged]

    @property
    def tested(self) -> int:
        return sum(1 for _ in self.nodes())


def build_tree(decide: Callable[[float, float], tuple[int, float | None]], n: int) -> IntervalTree:
    """Run the bisection driver with ``decide(a, b) -> (bit, value)``."""
    top = []
    frontier = []
    for j in range(-n, n):
        bit, val = decide(float(j), float(j + 1))
        node = TreeNode(float(j), float(j + 1), 0, int(bit), val)
        top.append(node)
        frontier.append(node)
    for depth in range(1, n + 1):
        nxt = []
        for node in frontier:
            if node.decision != 1:
                continue
            m = 0.5 * (node.a + node.b)
            for a, b in ((node.a, m), (m, node.b)):
                bit, val = decide(a, b)
                child = TreeNode(a, b, depth, int(bit), val)
                node.children.append(child)
                nxt.append(child)
        frontier = nxt
    return IntervalTree(n, top)


class SpectralTowerContext:
    """Per-interval stage data for ``e_1, e_2, ...`` with caching.

    Kernel values at the Stone nodes (smoothing ``1/k``) are cached by node, so
    neighbouring and nested intervals share evaluations.
    """

    def __init__(self, op: ColumnDecayOperator, nvec: int, kernel_tol: float = 1e-6, cap: int = DEFAULT_CAP):
        _require_sa(op)
        self.op = op
        self.nvec = nvec
        self.kernel_tol = kernel_tol
        self.cap = cap
        self.xs = [DecayVector.basis(j) for j in range(1, nvec + 1)]
        self._nodes: dict[int, dict[float, np.ndarray]] = {}
        self._rage: dict = {}
        self.stats = {"kernel_nodes": 0, "rage_calls": 0}

    def diag_kernel(self, k: int, u: np.ndarray) -> np.ndarray:
        """``<K(u + i/k) e_j, e_j>`` for ``j = 1..nvec`` (shape ``(len(u), nvec)``)."""
        cache = self._nodes.setdefault(k, {})
        missing = np.array([v for v in dict.fromkeys(u.tolist()) if v not in cache])
        if missing.size:
            sw = kernel_sweep(self.op, self.xs, missing, 1.0 / k, self.kernel_tol, diagonal=True, cap=self.cap)
            vals = np.stack([s.inner[:, 0].real for s in sw], axis=1)
            for v, row in zip(missing.tolist(), vals):
                cache[v] = row
            self.stats["kernel_nodes"] += missing.size
        return np.array([cache[v] for v in u.tolist()]).reshape(len(u), self.nvec)

    def closed_measure(self, a: float, b: float, k: int) -> np.ndarray:
        """``mu_{e_j}([a, b])`` at stage ``k``: Stone integral over ``(a - k^-1/2, b + k^-1/2)``."""
        eta = 1.0 / math.sqrt(k)
        x, w = gauss_panels(a - eta, b + eta, 1.0 / k)
        return w @ self.diag_kernel(k, x)

    def ac_mass(self, a: float, b: float, k: int, levels: Sequence[int]) -> np.ndarray:
        """``int_a^b v chi_n(|v|) du`` with ``v = <K(u + i/k) e_j, e_j>`` and
        ``chi_n = 1`` on ``[0, n]``, 0 beyond ``n + 1``; shape ``(len(levels), nvec)``."""
        x, w = gauss_panels(a, b, 1.0 / k)
        v = self.diag_kernel(k, x)
        out = np.zeros((len(levels), self.nvec))
        for i, n in enumerate(levels):
            out[i] = w @ (v * np.clip(n + 1 - np.abs(v), 0.0, 1.0))
        return out

    def continuous(self, a: float, b: float, k: int, ncomp: int, nvec: int | None = None) -> np.ndarray:
        """``c[j, n-1]`` for ``e_j`` on ``[a, b]`` at accuracy ``k``, ``n <= ncomp``.

        The continuous part charges no endpoint, so the open window
        ``(a - k^-1/2, b + k^-1/2)`` of :meth:`closed_measure` is used; both
        stage values then see the same continuous mass.
        """
        nvec = nvec or self.nvec
        key = (a, b, k, ncomp, nvec)
        hit = self._rage.get(key)
        if hit is None:
            eta = 1.0 / math.sqrt(k)
            hit, _, _ = _rage(self.op, self.xs[:nvec], [(a - eta, b + eta)], k, ncomp, self.kernel_tol, self.cap)
            self._rage[key] = hit
            self.stats["rage_calls"] += 1
        return hit


def _stage_set(tree: IntervalTree, idx: tuple, kind: str, ctx: SpectralTowerContext) -> TowerStage:
    return TowerStage(idx, tree.union(), kind, {"leaves": tree.leaves(), "tested": tree.tested, **ctx.stats, "tree": tree})


def pp_spectrum_stage(op: ColumnDecayOperator, n1: int, n2: int, kernel_tol: float = 1e-6, cap: int = DEFAULT_CAP,
                      ctx: SpectralTowerContext | None = None) -> TowerStage:
    """Stage ``(n2, n1)`` for the point spectrum.

    Interval value ``max_{j <= n2} (mu_{e_j}([a,b]) - c_j)``, with the Stone value
    at stage ``k`` and the continuous part at ``(k, n2)`` on ``(a, b)``, clipped at 0.
    When every Stone value is ``<= 1/n2`` the value is already in the lower
    interval and the continuous part is not computed.
    """
    ctx = ctx or SpectralTowerContext(op, n2, kernel_tol, cap)

    def decide(a, b):
        def upsilon(k):
            mu = ctx.closed_measure(a, b, k)
            if mu.max() <= 1.0 / n2:
                return max(float(mu.max()), 0.0)
            c = ctx.continuous(a, b, k, n2)[:, -1]
            return max(float(np.max(mu - c)), 0.0)

        bit, _, val = two_interval_decision(upsilon, n1, n2)
        return bit, val

    tree = build_tree(decide, n2)
    return _stage_set(tree, (n1, n2), "set_pp", ctx)


def ac_spectrum_stage(op: ColumnDecayOperator, n1: int, n2: int, kernel_tol: float = 1e-6, cap: int = DEFAULT_CAP,
                      ctx: SpectralTowerContext | None = None) -> TowerStage:
    """Stage ``(n2, n1)`` for the absolutely continuous spectrum.

    Interval value ``max_{j <= n2} int_a^b v_j chi_{n2}(|v_j|) du`` with
    ``v_j = <K(u + i/k) e_j, e_j>``, clipped at 0.
    """
    ctx = ctx or SpectralTowerContext(op, n2, kernel_tol, cap)

    def decide(a, b):
        upsilon = lambda k: max(float(ctx.ac_mass(a, b, k, [n2])[0].max()), 0.0)
        bit, _, val = two_interval_decision(upsilon, n1, n2)
        return bit, val

    tree = build_tree(decide, n2)
    return _stage_set(tree, (n1, n2), "set_ac", ctx)


def sc_spectrum_stage(op: ColumnDecayOperator, n1: int, n2: int, n3: int, kernel_tol: float = 1e-6,
                      cap: int = DEFAULT_CAP, ctx: SpectralTowerContext | None = None) -> TowerStage:
    """Stage ``(n3, n2, n1)`` for the singular continuous spectrum.

    For ``e_j`` the value ``c_j(n) - ac_j(n)`` (continuous minus a.c. part,
    running minimum over ``n``) estimates ``mu_{e_j, sc}([a, b])``.  With
    ``Y(m, n, k) = max_{j <= m}`` of it, the interval decision is
    ``max_{m <= n3} min_{n <= n2}`` of the two-interval rule at level ``m``.
    The tree runs over ``[-n3, n3]`` to depth ``n3``.
    """
    ctx = ctx or SpectralTowerContext(op, n3, kernel_tol, cap)
    levels = list(range(1, n2 + 1))

    def table(a, b, k):
        c = ctx.continuous(a, b, k, n2, n3)  # (n3, n2)
        ac = ctx.ac_mass(a, b, k, levels)[:, :n3].T  # (n3, n2)
        diff = np.minimum.accumulate(c - ac, axis=1)
        return np.maximum(np.maximum.accumulate(diff, axis=0), 0.0)  # Y[m-1, n-1]

    def decide(a, b):
        cache: dict[int, np.ndarray] = {}

        def Y(k):
            if k not in cache:
                cache[k] = table(a, b, k)
            return cache[k]

        best = 0
        for m in range(1, n3 + 1):
            bits = []
            for n in range(1, n2 + 1):
                bit, _, _ = two_interval_decision(lambda k: float(Y(k)[m - 1, n - 1]), n1, m)
                bits.append(bit)
                if bit == 0:
                    break
            best = max(best, min(bits))
            if best:
                break
        return best, float(Y(n1)[:, -1].max())

    tree = build_tree(decide, n3)
    return _stage_set(tree, (n1, n2, n3), "set_sc", ctx)
