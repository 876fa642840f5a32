"""Jacobi (tridiagonal) operators from three-term recurrences, with their
orthogonality measures as references."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy import integrate, special

from ..operator_model import ColumnDecayOperator, Dispersion

__all__ = [
    "ReferenceMeasure",
    "jacobi_coefficients",
    "make_jacobi",
    "make_tridiagonal",
    "make_diagonal",
    "make_sparse_schrodinger",
]


@dataclass
class ReferenceMeasure:
    """Exact spectral measure of ``e_1`` where known.

    ``density`` is with respect to Lebesgue measure on the line, or to ``d theta``
    on the circle; ``atoms`` lists ``(location, weight)``.
    """

    density: Callable[[np.ndarray], np.ndarray] | None = None
    support: tuple[float, float] = (-math.inf, math.inf)
    atoms: list = field(default_factory=list)
    circle: bool = False
    notes: dict = field(default_factory=dict)

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        if self.density is None:
            return np.zeros_like(u)
        return self.density(u)


def make_tridiagonal(a: Callable[[np.ndarray], np.ndarray], b: Callable[[np.ndarray], np.ndarray], **kwargs) -> ColumnDecayOperator:
    """Self-adjoint tridiagonal operator with off-diagonals ``a_k`` and diagonal ``b_k``.

    ``a`` and ``b`` take arrays of 1-based indices.  Row ``k`` has ``b_k`` on the
    diagonal and ``a_k`` in column ``k + 1``.
    """

    def entry(i, j):
        if i == j:
            return float(b(np.array([i]))[0])
        if abs(i - j) == 1:
            return float(a(np.array([min(i, j)]))[0])
        return 0.0

    def block(m, n):
        size = max(m, n)
        k = np.arange(1, size + 1)
        diag = np.asarray(b(k), dtype=float)
        off = np.asarray(a(k[:-1]), dtype=float)
        full = sp.diags([off, diag, off], [-1, 0, 1], shape=(size, size), format="csr")
        return full[:m, :n]

    kwargs.setdefault("dispersion", Dispersion.shift(1))
    return ColumnDecayOperator(entry, kind="sa", block=block, real=True, **kwargs)


def jacobi_coefficients(family: str, params: dict) -> tuple[Callable, Callable]:
    """Recurrence coefficients ``(a_k, b_k)`` as vectorized functions of ``k >= 1``."""
    if family == "jacobi":
        al, be = float(params["a"]), float(params["b"])
        if al <= -1 or be <= -1:
            raise ValueError("jacobi needs alpha, beta > -1")
        s = al + be

        def a(k):
            k = np.asarray(k, dtype=float)
            out = np.empty_like(k)
            first = k == 1
            # the (2k+s-1) and (k+s) factors cancel at k = 1
            out[first] = 2 * np.sqrt((1 + al) * (1 + be) / ((2 + s) ** 2 * (3 + s)))
            kk = k[~first]
            num = kk * (kk + al) * (kk + be) * (kk + s)
            den = (2 * kk + s - 1) * (2 * kk + s) ** 2 * (2 * kk + s + 1)
            out[~first] = 2 * np.sqrt(num / den)
            return out

        def b(k):
            k = np.asarray(k, dtype=float)
            out = np.empty_like(k)
            first = k == 1
            out[first] = (be - al) / (2 + s)
            kk = k[~first]
            out[~first] = (be**2 - al**2) / ((2 * kk + s) * (2 * kk - 2 + s))
            return out

        return a, b
    if family == "laguerre":
        al = float(params["a"])
        if al <= -1:
            raise ValueError("laguerre needs alpha > -1")
        return (lambda k: np.sqrt(np.asarray(k, float) * (np.asarray(k, float) + al)),
                lambda k: 2 * np.asarray(k, float) + al - 1)
    if family == "charlier":
        al = float(params["a"])
        if al <= 0:
            raise ValueError("charlier needs alpha > 0")
        return (lambda k: np.sqrt(al * np.asarray(k, float)),
                lambda k: np.asarray(k, float) + al - 1)
    if family == "free":
        return (lambda k: np.full(np.shape(k), 0.5), lambda k: np.zeros(np.shape(k)))
    raise ValueError(f"unknown Jacobi family {family!r}")


@lru_cache(maxsize=64)
def _jacobi_norm(al: float, be: float) -> float:
    val, _ = integrate.quad(lambda x: 1.0, -1, 1, weight="alg", wvar=(be, al), epsabs=1e-14, epsrel=1e-13)
    return val


def make_jacobi(family: str = "jacobi", **params) -> tuple[ColumnDecayOperator, ReferenceMeasure]:
    """Jacobi operator for a named family and the spectral measure of ``e_1``.

    Families: ``jacobi(a, b)``, ``laguerre(a)``, ``charlier(a)``, ``free`` and
    ``custom`` (with callables ``a_k``, ``b_k``).
    """
    if family == "custom":
        a, b = params["a_k"], params["b_k"]
        op = make_tridiagonal(a, b, name="custom")
        return op, ReferenceMeasure()
    a, b = jacobi_coefficients(family, params)
    if family == "jacobi":
        al, be = float(params["a"]), float(params["b"])
        norm = _jacobi_norm(al, be)
        ref = ReferenceMeasure(
            density=lambda x: np.where(np.abs(x) <= 1, np.clip(1 - x, 0, None) ** al * np.clip(1 + x, 0, None) ** be / norm, 0.0),
            support=(-1.0, 1.0),
            notes={"normalisation": norm},
        )
        hint = (-1.0, 1.0)
    elif family == "laguerre":
        al = float(params["a"])
        g = special.gamma(al + 1)
        ref = ReferenceMeasure(
            density=lambda x: np.where(x >= 0, np.clip(x, 0, None) ** al * np.exp(-np.clip(x, 0, None)) / g, 0.0),
            support=(0.0, math.inf),
        )
        hint = (0.0, math.inf)
    elif family == "charlier":
        al = float(params["a"])
        atoms = [(float(m), math.exp(-al + m * math.log(al) - math.lgamma(m + 1))) for m in range(200)]
        ref = ReferenceMeasure(atoms=[t for t in atoms if t[1] > 0], support=(0.0, math.inf))
        hint = (0.0, math.inf)
    else:
        ref = ReferenceMeasure(
            density=lambda x: np.where(np.abs(x) <= 1, (2 / np.pi) * np.sqrt(np.clip(1 - x * x, 0, None)), 0.0),
            support=(-1.0, 1.0),
        )
        hint = (-1.0, 1.0)
    op = make_tridiagonal(a, b, bounded_hint=hint, name=family, params=dict(family=family, **params))
    return op, ref


def make_diagonal(values, name: str = "diag", fill: float = 0.0) -> ColumnDecayOperator:
    """Diagonal self-adjoint operator.

    ``values`` is a vectorized ``k -> d_k`` or a finite list, continued by
    ``fill`` beyond its end.
    """
    if callable(values):
        fn = values
    else:
        arr = np.asarray(values, dtype=float)

        def fn(k):
            k = np.asarray(k)
            out = np.full(k.shape, float(fill))
            inside = k <= arr.size
            out[inside] = arr[k[inside] - 1]
            return out

    hint = None if callable(values) else (float(min(arr.min(initial=fill), fill)), float(max(arr.max(initial=fill), fill)))
    op = make_tridiagonal(lambda k: np.zeros(np.shape(k)), fn, name=name, bounded_hint=hint)
    return op


def make_sparse_schrodinger(g: Callable[[int], float], gaps: Callable[[int], int] | None = None, jmax: int = 6) -> ColumnDecayOperator:
    """Discrete Schrodinger operator ``H_0 + v`` on the half line.

    ``H_0`` has diagonal 2 and off-diagonal -1; ``v(n) = sum_j g(j) delta_{n, m_j}``
    with ``m_j = gaps(j)`` (default ``j!``), truncated to ``j <= jmax``.
    """
    gaps = gaps or math.factorial
    sites = {}
    for j in range(1, jmax + 1):
        sites[int(gaps(j))] = sites.get(int(gaps(j)), 0.0) + float(g(j))

    def diag(k):
        k = np.asarray(k)
        out = np.full(k.shape, 2.0)
        for site, val in sites.items():
            out[k == site] += val
        return out

    gvals = list(sites.values()) or [0.0]
    hint = (min(0.0, min(gvals)), 4.0 + max(0.0, max(gvals)))
    sumsq = sum(float(g(j)) ** 2 for j in range(1, jmax + 1))
    op = make_tridiagonal(lambda k: np.full(np.shape(k), -1.0), diag, bounded_hint=hint, name="sparse_schrodinger")
    op.params.update(sites=sites, jmax=jmax, sum_g_squared_truncated=sumsq)
    return op
