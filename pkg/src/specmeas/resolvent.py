"""Resolvent action ``R(z, T) x`` by rectangular least squares with a
residual-based error certificate.

For any ``y`` supported in the first ``n`` coordinates,

    ||y - R(z)x|| <= ||(T - z) y - x|| / dist(z, spectrum)

and the full residual is bounded by the truncated one plus the column and
vector tails ``c1*alpha(n)*||y|| + c2*beta(f(n))``.  The truncated residual is
evaluated directly, and a rounding allowance for that evaluation is added, so
the certificate applies to the floating-point vector that is returned.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from ._banded import BandedBlock, solve_shifts, to_band
from .operator_model import ColumnDecayOperator, DecayVector

__all__ = [
    "ResolventSolution",
    "ResolventNotConverged",
    "IncreaseN",
    "pd_test",
    "resolvent_action",
    "resolvent_action_adaptive",
    "resolvent_batch",
    "DEFAULT_CAP",
]

DEFAULT_CAP = 2**21
_BAND_MEMORY = 1.2e9
_SOLVE_MEMORY = 2e8


class IncreaseN(ArithmeticError):
    """The truncated system was singular at this ``n``."""


@dataclass
class ResolventSolution:
    """Approximation of ``R(z, T) x`` with certified error ``bound``."""

    z: complex
    coeffs: np.ndarray
    n_used: int
    residual: float
    rounding: float = 0.0
    tail: float = 0.0
    dist: float = 1.0
    bound: float = math.inf
    gate_passed: bool = True

    def vector(self, m: int) -> np.ndarray:
        out = np.zeros(m, dtype=complex)
        k = min(m, self.coeffs.size)
        out[:k] = self.coeffs[:k]
        return out


class ResolventNotConverged(RuntimeError):
    """Adaptive solve hit the truncation cap; ``result`` holds the last attempt."""

    def __init__(self, message: str, result=None):
        super().__init__(message)
        self.result = result


def pd_test(B: np.ndarray, eps: float) -> bool:
    """Decide ``sigma_min(M) > eps`` from ``B = M^* M`` by Cholesky on ``B - eps^2 I``."""
    B = np.asarray(B)
    if B.ndim != 2 or B.shape[0] != B.shape[1]:
        raise ValueError("pd_test needs a square matrix")
    shifted = B - (eps * eps) * np.eye(B.shape[0])
    try:
        np.linalg.cholesky(shifted)
    except np.linalg.LinAlgError:
        return False
    return True


def _pd_test_sparse(M: sp.csr_matrix, eps: float) -> bool:
    B = (M.conj().T @ M).tocsr()
    n = B.shape[0]
    if n <= 2000:
        return pd_test(B.toarray(), eps)
    coo = B.tocoo()
    upper = int((coo.col - coo.row).max(initial=0))
    ab = np.zeros((upper + 1, n), dtype=complex)
    keep = coo.col >= coo.row
    r, c, v = coo.row[keep], coo.col[keep], coo.data[keep]
    ab[upper + r - c, c] = v
    ab[upper] -= eps * eps
    try:
        sla.cholesky_banded(ab, lower=False)
    except np.linalg.LinAlgError:
        return False
    return True


def _band(op: ColumnDecayOperator, n: int) -> BandedBlock:
    cache = op.__dict__.setdefault("_band_cache", {})
    hit = cache.get(n)
    if hit is None:
        hit = to_band(op.truncation(n), n)
        if len(cache) > 24:
            cache.clear()
        cache[n] = hit
    return hit


def _check_z(op: ColumnDecayOperator, z: complex) -> None:
    if op.kind == "sa" and z.imag == 0:
        raise ValueError("self-adjoint operators need Im z != 0")
    if op.kind == "u" and (abs(z) == 0 or abs(z) == 1):
        raise ValueError("unitary operators need |z| not in {0, 1}")


def _gate(op, block: BandedBlock, n: int, z: complex, dist: float) -> bool:
    """Smallest singular value test on the truncated system.

    The threshold is ``min(1/n, dist/2)``.  When ``dist - c1*alpha(n)`` already
    exceeds it the test passes without computation, because
    ``sigma_min(P_f (T - z) P_n) >= dist - c1*alpha(n)`` for normal ``T``.
    """
    thr = min(1.0 / n, 0.5 * dist)
    if dist - op.c1 * op.alpha(n) > thr:
        return True
    M = rect_block(op, n, z)
    return _pd_test_sparse(M, thr)


def rect_block(op, n, z):
    M = op.truncation(n)
    return (M - complex(z) * sp.eye(M.shape[0], n, format="csr")).tocsr()


def _solve_at(op, xs, zs, n, dists):
    fn = op.f(n)
    block = _band(op, n)
    if block.data.size * 16 * 2 > _BAND_MEMORY:
        raise MemoryError(f"band storage for n={n} exceeds the memory budget")
    rhs = np.stack([x.head(fn) for x in xs], axis=1)
    # shifts are solved in groups so the dense solution stack stays bounded
    group = max(1, int(_SOLVE_MEMORY // (16 * block.n * len(xs))))
    out = []
    for g in range(0, len(zs), group):
        out += _collect(op, block, n, fn, xs, zs[g : g + group], dists[g : g + group], rhs)
    return out


def _collect(op, block, n, fn, xs, zs, dists, rhs):
    sol, res, rnd, ok = solve_shifts(block, zs, rhs)
    out = []
    for k, z in enumerate(zs):
        dist = dists[k]
        row = []
        gate = bool(ok[k]) and _gate(op, block, n, z, dist)
        for r, x in enumerate(xs):
            if not ok[k]:
                raise IncreaseN(f"singular truncation at n={n}, z={z}")
            if not gate:
                row.append(ResolventSolution(z, np.zeros(n, dtype=complex), n, math.inf, 0.0, math.inf, dist, math.inf, False))
                continue
            coeffs = sol[k, :, r].copy()
            tail = x.tail_bound(fn) + op.c1 * op.alpha(n) * float(np.linalg.norm(coeffs))
            bound = (tail + res[k, r] + rnd[k, r]) / dist
            row.append(ResolventSolution(z, coeffs, n, float(res[k, r]), float(rnd[k, r]), tail, dist, bound, True))
        out.append(row)
    return out


def _dists(op, zs, dist_lower_bound):
    if dist_lower_bound is None:
        return [op.dist_lower_bound(z) for z in zs]
    if np.ndim(dist_lower_bound) == 0:
        return [float(dist_lower_bound)] * len(zs)
    return [float(d) for d in dist_lower_bound]


def resolvent_action(
    op: ColumnDecayOperator,
    x: DecayVector,
    z: complex,
    n: int,
    dist_lower_bound: float | None = None,
) -> ResolventSolution:
    """Least-squares solution at fixed truncation size ``n``."""
    z = complex(z)
    _check_z(op, z)
    dists = _dists(op, [z], dist_lower_bound)
    if dists[0] <= 0:
        raise ValueError("distance lower bound must be positive")
    return _solve_at(op, [x], [z], int(n), dists)[0][0]


def resolvent_batch(
    op: ColumnDecayOperator,
    xs: Sequence[DecayVector],
    zs: Sequence[complex],
    tol: float,
    n0: int = 8,
    cap: int = DEFAULT_CAP,
    dist_lower_bound=None,
    fixed_n: int | None = None,
    accept_floor: bool = False,
) -> list[list[ResolventSolution]]:
    """Solve for every shift and right-hand side, doubling ``n`` per shift.

    Returns ``out[k][r]`` for shift ``zs[k]`` and vector ``xs[r]``; each shift
    stops at the first ``n`` where all its bounds are ``<= tol``.  With
    ``fixed_n`` a single truncation size is used and no tolerance is enforced.
    With ``accept_floor`` a shift also stops once the truncation and tail
    terms are below the rounding allowance, or once doubling ``n`` fails to
    halve the bound, since a larger ``n`` cannot lower it any further; such
    solutions keep their (larger) bound.
    """
    zs = [complex(z) for z in zs]
    for z in zs:
        _check_z(op, z)
    dists = _dists(op, zs, dist_lower_bound)
    if min(dists, default=1.0) <= 0:
        raise ValueError("distance lower bound must be positive")
    if fixed_n is not None:
        return _solve_at(op, xs, zs, int(fixed_n), dists)
    out: list = [None] * len(zs)
    pending = list(range(len(zs)))
    n = max(1, int(n0))
    while pending:
        try:
            rows = _solve_at(op, xs, [zs[k] for k in pending], n, [dists[k] for k in pending])
        except MemoryError as exc:
            k = pending[0]
            raise ResolventNotConverged(f"not converged at n={n} for z={zs[k]}: {exc}", out[k]) from exc
        still = []
        for k, row in zip(pending, rows):
            prev = out[k]
            out[k] = row
            worst = max(s.bound for s in row)
            if worst > tol:
                if accept_floor and all(s.gate_passed for s in row):
                    if all(s.tail + s.residual <= s.rounding for s in row):
                        continue
                    # doubling n no longer helps: the residual sits at its rounding floor
                    near = all(s.tail <= s.rounding and s.residual <= 100 * s.rounding for s in row)
                    if near and prev is not None and worst >= 0.5 * max(s.bound for s in prev):
                        continue
                still.append(k)
        pending = still
        if pending and 2 * n > cap:
            k = pending[0]
            worst = max(s.bound for s in out[k])
            raise ResolventNotConverged(
                f"not converged at cap n={n} for z={zs[k]}: bound {worst:.3e} > tol {tol:.3e}",
                out[k][0] if len(xs) == 1 else out[k],
            )
        n *= 2
    return out


def resolvent_action_adaptive(
    op: ColumnDecayOperator,
    x: DecayVector,
    z: complex,
    tol: float,
    n0: int = 8,
    cap: int = DEFAULT_CAP,
    dist_lower_bound: float | None = None,
) -> ResolventSolution:
    """Double ``n`` from ``n0`` until the certified bound is ``<= tol``."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    return resolvent_batch(op, [x], [z], tol, n0=n0, cap=cap, dist_lower_bound=dist_lower_bound)[0][0]
