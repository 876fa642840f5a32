"""Graph Laplacian on a Penrose rhombus tiling built with de Bruijn's pentagrid.

Every pair of grid lines from two of the five families meets in one point;
that point becomes one rhombus whose four corners are the integer vectors
``K = (K_0..K_4)`` of the neighbouring pentagrid cells, placed at
``sum_j K_j e_j``.  A vertex is reproduced exactly when all lines bounding its
cell are generated, which holds for every vertex within ``2.5 * (N - 3)`` of the
origin when the line indices run over ``-N..N``.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from ..operator_model import ColumnDecayOperator, Dispersion

__all__ = ["PenrosePatch", "build_patch", "make_penrose", "fit_dispersion"]

# generic offsets summing to zero, so no three grid lines meet
_GAMMA = np.array([0.1382, 0.2417, -0.3141, 0.4253])
_GAMMA = np.append(_GAMMA, -_GAMMA.sum())


@dataclass
class PenrosePatch:
    positions: np.ndarray  # (V, 2), sorted by distance from the origin
    adjacency: sp.csr_matrix  # symmetric 0/1
    radius: float

    @property
    def size(self) -> int:
        return self.positions.shape[0]

    @property
    def degrees(self) -> np.ndarray:
        return np.asarray(self.adjacency.sum(axis=1)).ravel().astype(int)

    def laplacian(self) -> sp.csr_matrix:
        """``(H_0 psi)_i = sum_{j ~ i} (psi_j - psi_i)``."""
        return (self.adjacency - sp.diags(self.degrees.astype(float))).tocsr()


def _cache_path(radius: float, gamma: np.ndarray) -> Path | None:
    root = os.environ.get("SPECMEAS_CACHE_DIR")
    if not root or not np.array_equal(gamma, _GAMMA):
        return None
    return Path(root) / f"penrose_r{float(radius)!r}.npz"


def build_patch(radius: float, gamma: np.ndarray = _GAMMA) -> PenrosePatch:
    """All tiling vertices within ``radius`` of the origin, ordered outward.

    With ``SPECMEAS_CACHE_DIR`` set, patches are stored there and reloaded.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    path = _cache_path(radius, gamma)
    if path is not None and path.exists():
        data = np.load(path)
        adj = sp.csr_matrix((data["data"], data["indices"], data["indptr"]), shape=tuple(data["shape"]))
        return PenrosePatch(data["positions"], adj, float(radius))
    patch = _build_patch(radius, gamma)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        a = patch.adjacency
        tmp = path.with_suffix(".tmp.npz")
        np.savez(tmp, positions=patch.positions, data=a.data, indices=a.indices, indptr=a.indptr, shape=np.array(a.shape))
        os.replace(tmp, path)
    return patch


def _build_patch(radius: float, gamma: np.ndarray) -> PenrosePatch:
    N = int(math.ceil(radius / 2.5)) + 4
    ang = 2 * np.pi * np.arange(5) / 5
    e = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    ks = np.arange(-N, N + 1)
    tuples, edges_a, edges_b = [], [], []
    corner = np.array([[0, 0], [1, 0], [1, 1], [0, 1]])
    for r in range(5):
        for s in range(r + 1, 5):
            kr, ks_ = np.meshgrid(ks, ks, indexing="ij")
            kr, ks_ = kr.ravel(), ks_.ravel()
            # solve P.e_r + g_r = k_r and P.e_s + g_s = k_s
            A = np.array([e[r], e[s]])
            rhs = np.stack([kr - gamma[r], ks_ - gamma[s]], axis=1)
            P = np.linalg.solve(A, rhs.T).T
            K = np.ceil(P @ e.T + gamma).astype(np.int64)
            quad = np.repeat(K[:, None, :], 4, axis=1)
            quad[:, :, r] = kr[:, None] + corner[None, :, 0]
            quad[:, :, s] = ks_[:, None] + corner[None, :, 1]
            tuples.append(quad)
    quads = np.concatenate(tuples, axis=0)  # (T, 4, 5)
    flat = quads.reshape(-1, 5)
    uniq, inv = np.unique(flat, axis=0, return_inverse=True)
    inv = inv.reshape(-1, 4)
    pos = uniq @ e
    dist = np.hypot(pos[:, 0], pos[:, 1])
    complete = np.all((uniq >= -N + 1) & (uniq <= N), axis=1)
    keep = dist <= radius
    if not np.all(complete[keep]):
        raise RuntimeError("pentagrid range too small for the requested radius")
    order = np.lexsort((np.arctan2(pos[:, 1], pos[:, 0]), np.round(dist, 12)))
    order = order[keep[order]]
    label = np.full(uniq.shape[0], -1)
    label[order] = np.arange(order.size)
    ea = np.concatenate([inv[:, k] for k in range(4)])
    eb = np.concatenate([inv[:, (k + 1) % 4] for k in range(4)])
    la, lb = label[ea], label[eb]
    ok = (la >= 0) & (lb >= 0)
    la, lb = la[ok], lb[ok]
    V = order.size
    adj = sp.coo_matrix((np.ones(la.size), (la, lb)), shape=(V, V)).tocsr()
    adj = ((adj + adj.T) > 0).astype(float).tocsr()
    return PenrosePatch(pos[order], adj, float(radius))


def fit_dispersion(H: sp.csr_matrix, upto: int | None = None) -> tuple[Dispersion, np.ndarray]:
    """Fit ``f(n) = ceil(n + c sqrt(n) + d)`` covering every edge of columns ``<= upto``.

    For each integer ``d`` the smallest covering ``c`` is found; the pair with the
    smallest total excess ``sum_n f(n) - n`` is returned with the measured profile.
    """
    coo = H.tocoo()
    V = H.shape[0]
    upto = upto or V
    last = np.zeros(V, dtype=np.int64)
    np.maximum.at(last, coo.col, coo.row + 1)
    prof = np.maximum.accumulate(last)[:upto]
    n = np.arange(1, upto + 1)
    excess = prof - n
    root = np.sqrt(n)
    total_root = float(root.sum())
    best = None
    for d in range(0, int(excess.max()) + 2):
        c = float(np.max((excess - d) / root))
        # nudge c up by a few ulps so ceil() cannot round below the profile
        c = float(np.nextafter(np.nextafter(c, np.inf), np.inf)) if c > 0 else 0.0
        cost = c * total_root + d * upto
        if best is None or cost < best[0]:
            best = (cost, c, d)
    disp = Dispersion.sqrt(best[1], best[2])
    assert all(disp(k) >= prof[k - 1] for k in range(1, upto + 1))
    return disp, prof


def make_penrose(radius: float = 30.0, sign: int = 1) -> ColumnDecayOperator:
    """``H_0`` (``sign=1``) or ``-H_0`` (``sign=-1``) on a patch of the given radius.

    Truncations need ``f(n) <= number of vertices``; larger requests raise.
    The dispersion is fitted over the columns whose rows all lie in the patch.
    """
    patch = build_patch(radius)
    H = (sign * patch.laplacian()).tocsr()
    V = patch.size
    dist = np.hypot(patch.positions[:, 0], patch.positions[:, 1])
    # columns whose neighbours (at distance 1) all lie inside the patch
    exact = int(np.searchsorted(dist, radius - 1.0, side="right"))
    disp, prof = fit_dispersion(H, exact)
    dmax = int(patch.degrees[:exact].max())

    def block(m, n):
        if m > V or n > exact:
            raise ValueError(
                f"patch of radius {radius} has {V} vertices and {exact} exact columns; requested {m} x {n} block"
            )
        return H[:m, :n]

    def entry(i, j):
        if min(i, j) > exact or max(i, j) > V:
            raise ValueError(f"patch of radius {radius} is too small for entry ({i}, {j})")
        return H[i - 1, j - 1]

    hint = (-2.0 * dmax, 0.0) if sign == 1 else (0.0, 2.0 * dmax)
    op = ColumnDecayOperator(entry, kind="sa", dispersion=disp, block=block, real=True,
                             bounded_hint=hint, name="penrose", params={"radius": radius, "sign": sign})
    op.patch = patch
    op.params["vertices"] = V
    fs = np.array([disp(k) for k in range(1, exact + 1)])
    op.params["exact_columns"] = exact
    op.params["max_n"] = int(np.searchsorted(fs, V, side="right"))
    return op
