"""CMV matrices built from Verblunsky coefficients, with reference measures on
the unit circle (angles in ``[-pi, pi)``, densities with respect to ``d theta``)."""
from __future__ import annotations

import math
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy import integrate

from ..operator_model import ColumnDecayOperator, Dispersion
from .jacobi import ReferenceMeasure

__all__ = ["cmv_entries", "make_cmv", "make_diagonal_unitary", "verblunsky"]


def verblunsky(family: str, params: dict) -> Callable[[np.ndarray], np.ndarray]:
    """Vectorized ``j -> alpha_j`` for ``j >= 0``."""
    if family == "rogers_szego":
        q = float(params["q"])
        if not 0 < q < 1:
            raise ValueError("rogers_szego needs 0 < q < 1")
        return lambda j: np.where(np.asarray(j) % 2 == 0, 1.0, -1.0) * q ** ((np.asarray(j, float) + 1) / 2)
    if family == "geronimus":
        a = complex(params["a"])
        if abs(a) >= 1:
            raise ValueError("geronimus needs |a| < 1")
        return lambda j: np.full(np.shape(j), a, dtype=complex)
    raise ValueError(f"unknown CMV family {family!r}")


def _theta_block(al: np.ndarray, rho: np.ndarray, j: int) -> np.ndarray:
    return np.array([[np.conj(al[j]), rho[j]], [rho[j], -al[j]]])


def cmv_entries(alphas: np.ndarray, size: int) -> sp.csr_matrix:
    """Leading ``size x size`` block of the CMV matrix as the product ``L M``.

    ``L = diag(Theta_0, Theta_2, ...)`` and ``M = diag(1, Theta_1, Theta_3, ...)``
    with ``Theta_j = [[conj(a_j), rho_j], [rho_j, -a_j]]``.  Entries in rows and
    columns ``< size`` are exact when ``alphas`` has at least ``size + 1`` terms.
    """
    big = size + 2
    al = np.zeros(big + 1, dtype=complex)
    al[: min(alphas.size, big + 1)] = alphas[: big + 1]
    rho = np.sqrt(1 - np.abs(al) ** 2)

    def assemble(first_block: int, offset: int):
        rows, cols, vals = [], [], []
        if offset:
            rows.append(0)
            cols.append(0)
            vals.append(1.0)
        j = first_block
        start = offset
        while start + 1 < big:
            th = _theta_block(al, rho, j)
            for r in range(2):
                for c in range(2):
                    rows.append(start + r)
                    cols.append(start + c)
                    vals.append(th[r, c])
            j += 2
            start += 2
        return sp.csr_matrix((vals, (rows, cols)), shape=(big, big), dtype=complex)

    L = assemble(0, 0)
    M = assemble(1, 1)
    return (L @ M).tocsr()[:size, :size]


def _rogers_szego_density(q: float) -> Callable:
    s2 = math.log(1 / q)

    def dens(theta):
        t = np.asarray(theta, dtype=float)
        t = np.mod(t + np.pi, 2 * np.pi) - np.pi
        out = np.zeros_like(t)
        for m in range(-6, 7):
            out += np.exp(-((t - 2 * np.pi * m) ** 2) / (2 * s2))
        return out / math.sqrt(2 * np.pi * s2)

    return dens


def _geronimus_density(a: complex) -> tuple[Callable, float, float]:
    theta_a = 2 * math.asin(abs(a))
    b = 2 * np.angle(1 + np.conj(a))
    c2 = math.cos(theta_a / 2) ** 2

    def dens(theta):
        t = np.asarray(theta, dtype=float)
        t = np.mod(t + np.pi, 2 * np.pi) - np.pi
        num = np.sqrt(np.clip(c2 - np.cos(t / 2) ** 2, 0, None))
        den = 2 * np.pi * abs(1 + a) * np.abs(np.sin((t - b) / 2))
        with np.errstate(divide="ignore", invalid="ignore"):
            val = np.where(np.abs(t) > theta_a, num / den, 0.0)
        return np.nan_to_num(val)

    return dens, theta_a, float(b)


def make_cmv(family: str = "rogers_szego", **params) -> tuple[ColumnDecayOperator, ReferenceMeasure]:
    """CMV operator for ``rogers_szego(q)``, ``geronimus(a)`` or ``custom`` (callable ``alpha``)."""
    if family == "custom":
        alpha_fn = params["alpha"]
        ref = ReferenceMeasure(circle=True, support=(-math.pi, math.pi))
    else:
        alpha_fn = verblunsky(family, params)
        if family == "rogers_szego":
            ref = ReferenceMeasure(density=_rogers_szego_density(float(params["q"])), support=(-math.pi, math.pi), circle=True)
        else:
            a = complex(params["a"])
            dens, theta_a, b = _geronimus_density(a)
            ref = ReferenceMeasure(density=dens, support=(-math.pi, math.pi), circle=True,
                                   notes={"theta_a": theta_a, "b": b, "has_atom": abs(a + 0.5) > 0.5})
            if abs(a + 0.5) > 0.5:
                # the printed a.c. weight is used on both sides of the threshold; the
                # missing mass sits at theta = b, in the middle of the gap
                pieces = [(-math.pi, -theta_a), (theta_a, math.pi)]
                mass = sum(integrate.quad(dens, lo, hi, limit=200, epsabs=1e-13, epsrel=1e-12)[0] for lo, hi in pieces)
                ref.atoms = [(b, 1.0 - mass)]
                ref.notes["atom_weight_from_mass_deficit"] = True

    def block(m, n):
        size = max(m, n)
        al = np.asarray(alpha_fn(np.arange(size + 3)), dtype=complex)
        return cmv_entries(al, size)[:m, :n]

    def entry(i, j):
        return block(max(i, j), max(i, j))[i - 1, j - 1]

    al0 = np.asarray(alpha_fn(np.arange(4)), dtype=complex)
    op = ColumnDecayOperator(
        entry,
        kind="u",
        dispersion=Dispersion.shift(2),
        block=block,
        real=bool(np.all(al0.imag == 0)) and family != "custom",
        name=family,
        params=dict(family=family, **{k: v for k, v in params.items() if not callable(v)}),
    )
    return op, ref


def make_diagonal_unitary(angles) -> ColumnDecayOperator:
    """``diag(e^{i theta_k})``; a finite list is continued by ``theta = 0``."""
    arr = np.asarray(angles, dtype=float)

    def vals(k):
        k = np.asarray(k)
        out = np.zeros(k.shape)
        inside = k <= arr.size
        out[inside] = arr[k[inside] - 1]
        return np.exp(1j * out)

    def block(m, n):
        size = max(m, n)
        full = sp.diags([vals(np.arange(1, size + 1))], [0], shape=(size, size), format="csr")
        return full[:m, :n]

    def entry(i, j):
        return complex(vals(np.array([i]))[0]) if i == j else 0.0

    return ColumnDecayOperator(entry, kind="u", dispersion=Dispersion.shift(1), block=block, name="diag_unitary")
