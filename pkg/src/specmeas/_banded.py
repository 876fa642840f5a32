"""Banded Householder least squares for shifted rectangular truncations.

A truncation of ``T - zI`` with ``m`` rows and ``n`` columns is stored row-wise:
row ``i`` keeps columns ``i - p .. i + p + q`` where ``p`` is the lower and ``q``
the upper bandwidth.  The extra ``p`` columns on the right hold the fill-in of
the triangular factor, so a QR factorization costs ``O(n p (p + q))``.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from numba import njit

__all__ = ["BandedBlock", "to_band", "solve_shifts"]

_UNIT_ROUNDOFF = np.finfo(float).eps / 2


class BandedBlock:
    """Row-wise band storage of an ``m x n`` sparse block."""

    def __init__(self, data: np.ndarray, p: int, q: int, n: int, nnz_row: int):
        self.data = data
        self.p = p
        self.q = q
        self.n = n
        self.nnz_row = nnz_row

    @property
    def m(self) -> int:
        return self.data.shape[0]


def to_band(block: sp.spmatrix, n: int) -> BandedBlock:
    """Convert a sparse ``m x n`` block to band storage (diagonal always kept)."""
    coo = sp.coo_matrix(block)
    m = coo.shape[0]
    rows, cols, vals = coo.row, coo.col, coo.data.astype(complex)
    keep = vals != 0
    rows, cols, vals = rows[keep], cols[keep], vals[keep]
    p = int(max(0, (rows - cols).max(initial=0)))
    q = int(max(0, (cols - rows).max(initial=0)))
    width = 2 * p + q + 1
    data = np.zeros((m, width), dtype=complex)
    np.add.at(data, (rows, cols - rows + p), vals)
    counts = np.bincount(rows, minlength=m)
    nnz_row = int(counts.max(initial=0)) + 1
    return BandedBlock(data, p, q, n, nnz_row)


@njit(cache=True)
def _solve_one(band, p, q, n, z, rhs, x_out):
    m, width = band.shape
    r = rhs.shape[1]
    a = band.copy()
    for i in range(min(n, m)):
        a[i, p] -= z
    b = rhs.copy()
    v = np.empty(p + 1, dtype=np.complex128)
    for j in range(n):
        last = min(j + p, m - 1)
        length = last - j + 1
        nrm2 = 0.0
        for t in range(length):
            val = a[j + t, p - t]
            v[t] = val
            nrm2 += val.real * val.real + val.imag * val.imag
        if nrm2 == 0.0:
            return False
        nrm = np.sqrt(nrm2)
        x0 = v[0]
        ax0 = abs(x0)
        phase = x0 / ax0 if ax0 > 0.0 else 1.0 + 0.0j
        alpha = -phase * nrm
        v[0] = x0 - alpha
        vnorm2 = nrm2 - ax0 * ax0 + abs(v[0]) ** 2
        if vnorm2 > 0.0:
            beta = 2.0 / vnorm2
            cmax = min(j + p + q, n - 1)
            for c in range(j, cmax + 1):
                s = 0.0 + 0.0j
                for t in range(length):
                    s += np.conj(v[t]) * a[j + t, c - j - t + p]
                s *= beta
                if s != 0.0:
                    for t in range(length):
                        a[j + t, c - j - t + p] -= v[t] * s
            for col in range(r):
                s = 0.0 + 0.0j
                for t in range(length):
                    s += np.conj(v[t]) * b[j + t, col]
                s *= beta
                for t in range(length):
                    b[j + t, col] -= v[t] * s
        a[j, p] = alpha
    for col in range(r):
        for j in range(n - 1, -1, -1):
            s = b[j, col]
            cmax = min(j + p + q, n - 1)
            for c in range(j + 1, cmax + 1):
                s -= a[j, c - j + p] * x_out[c, col]
            x_out[j, col] = s / a[j, p]
    return True


@njit(cache=True)
def _residuals(band, p, n, z, rhs, x, res_out, mag_out):
    # direct evaluation of ||A x - b|| and of || |A| |x| || per right-hand side
    m, width = band.shape
    r = rhs.shape[1]
    for col in range(r):
        acc = 0.0
        mag = 0.0
        for i in range(m):
            s = -rhs[i, col]
            sa = 0.0
            for k in range(width):
                c = i - p + k
                if c < 0 or c >= n:
                    continue
                val = band[i, k]
                if c == i:
                    val = val - z
                if val != 0.0:
                    s += val * x[c, col]
                    sa += abs(val) * abs(x[c, col])
            acc += s.real * s.real + s.imag * s.imag
            mag += sa * sa
        res_out[col] = np.sqrt(acc)
        mag_out[col] = np.sqrt(mag)


def solve_shifts(block: BandedBlock, zs, rhs: np.ndarray):
    """Least-squares solutions of ``P_m (T - z) P_n y = b`` for each shift.

    Returns
    -------
    xs : ndarray, shape (len(zs), n, r)
    residuals : ndarray, shape (len(zs), r)
    rounding : ndarray, shape (len(zs), r)
        Upper estimate of the floating-point error committed when evaluating
        the residual, so that ``residual + rounding`` bounds the exact residual
        of the stored solution.
    ok : ndarray of bool, False where the triangular factor was singular.
    """
    zs = np.atleast_1d(np.asarray(zs, dtype=complex))
    rhs = np.ascontiguousarray(rhs, dtype=complex)
    if rhs.ndim == 1:
        rhs = rhs[:, None]
    n, p, q = block.n, block.p, block.q
    r = rhs.shape[1]
    xs = np.zeros((zs.size, n, r), dtype=complex)
    res = np.full((zs.size, r), np.inf)
    rnd = np.zeros((zs.size, r))
    ok = np.zeros(zs.size, dtype=bool)
    bnorm = np.linalg.norm(rhs, axis=0)
    gamma = (block.nnz_row + 2) * _UNIT_ROUNDOFF
    mag = np.empty(r)
    for k, z in enumerate(zs):
        ok[k] = _solve_one(block.data, p, q, n, z, rhs, xs[k])
        if not ok[k]:
            xs[k] = 0
            continue
        _residuals(block.data, p, n, z, rhs, xs[k], res[k], mag)
        rnd[k] = gamma * (mag + bnorm)
    return xs, res, rnd, ok
