"""Global collocation for densities with known support.

The density is expanded as ``sum_m a_m phi_m``; the Cauchy transform
``<R(z) x, y> = int rho(l) / (l - z) dl`` is matched at points ``z`` off the
support.  Transforms of the basis follow from its three-term recurrence

    phi_{m+1} = (alpha_m l + beta_m) phi_m + gamma_m phi_{m-1}
    hat_{m+1}(z) = alpha_m int phi_m + (alpha_m z + beta_m) hat_m(z) + gamma_m hat_{m-1}(z)

seeded by a closed form for ``hat_1``.  On the circle ``l = e^{i theta}``,
integrals are in ``d theta`` and the transform is ``int rho / (e^{i theta} - z)``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.integrate as si
import scipy.linalg as sl
import scipy.special as ss

from .operator_model import ColumnDecayOperator, DecayVector
from .resolvent import DEFAULT_CAP, resolvent_batch

__all__ = [
    "BasisFamily",
    "cauchy_transforms",
    "cauchy_quadrature",
    "CollocationResult",
    "collocate",
    "default_points",
    "reconstruct",
    "RecurrenceDriftWarning",
]

BASIS_KINDS = ("chebyshev", "laguerre", "fourier")


class RecurrenceDriftWarning(UserWarning):
    pass


@dataclass(frozen=True)
class BasisFamily:
    """Basis with a three-term recurrence.

    * ``chebyshev``: ``phi_m = T_{m-1}`` on ``[-1, 1]``.
    * ``laguerre``: ``phi_m = L_{m-1}(l) e^{-l/2}`` on ``[0, inf)``.
    * ``fourier``: ``phi_m = e^{i k theta}``, ``k = m - 1 - K`` for ``M = 2K + 1``
      functions, recurrence in ``l = e^{i theta}``.
    """

    kind: str

    def __post_init__(self):
        if self.kind not in BASIS_KINDS:
            raise ValueError(f"basis must be one of {BASIS_KINDS}")

    @property
    def real(self) -> bool:
        return self.kind != "fourier"

    def coefficients(self, M: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``alpha_m, beta_m, gamma_m`` for ``m = 1..M`` (index 0 is ``m = 1``)."""
        m = np.arange(1, M + 1, dtype=float)
        if self.kind == "chebyshev":
            alpha = np.where(m == 1, 1.0, 2.0)
            beta = np.zeros(M)
            gamma = np.where(m == 1, 0.0, -1.0)
        elif self.kind == "laguerre":
            alpha = -1.0 / m
            beta = (2 * m - 1) / m
            gamma = -(m - 1) / m
        else:
            alpha, beta, gamma = np.ones(M), np.zeros(M), np.zeros(M)
        return alpha, beta, gamma

    def masses(self, M: int) -> np.ndarray:
        """``int phi_m`` over the support (``d theta`` on the circle)."""
        k = np.arange(M)
        if self.kind == "chebyshev":
            out = np.zeros(M)
            even = k % 2 == 0
            out[even] = 2.0 / (1.0 - k[even] ** 2)
            return out
        if self.kind == "laguerre":
            return 2.0 * (-1.0) ** k
        K = (M - 1) // 2
        return np.where(k - K == 0, 2 * math.pi, 0.0)

    def seed(self, z, M: int) -> np.ndarray:
        """Closed form of ``hat_1(z)``."""
        z = np.asarray(z, dtype=complex)
        if self.kind == "chebyshev":
            return np.log((z - 1) / (z + 1))
        if self.kind == "laguerre":
            return np.exp(-z / 2) * ss.exp1(-z / 2)
        K = (M - 1) // 2
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(np.abs(z) > 1, -2 * math.pi * z ** (-K - 1.0), 0.0)

    def first(self, lam) -> np.ndarray:
        """``phi_1`` (``lam`` is ``theta`` for the Fourier basis)."""
        lam = np.asarray(lam)
        if self.kind == "chebyshev":
            return np.ones(lam.shape)
        if self.kind == "laguerre":
            return np.exp(-lam / 2)
        return np.ones(lam.shape, dtype=complex)

    def variable(self, lam) -> np.ndarray:
        return np.exp(1j * np.asarray(lam, float)) if self.kind == "fourier" else np.asarray(lam, float)

    def on_support(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        if self.kind == "chebyshev":
            return (z.imag == 0) & (np.abs(z.real) <= 1)
        if self.kind == "laguerre":
            return (z.imag == 0) & (z.real >= 0)
        return np.abs(np.abs(z) - 1) < 1e-14

    def direct(self, m: int, lam, M: int | None = None) -> np.ndarray:
        """``phi_m`` from its closed form (independent of the recurrence)."""
        lam = np.asarray(lam, float)
        if self.kind == "chebyshev":
            return ss.eval_chebyt(m - 1, lam)
        if self.kind == "laguerre":
            return ss.eval_laguerre(m - 1, lam) * np.exp(-lam / 2)
        if M is None:
            raise ValueError("the Fourier basis needs M")
        K = (M - 1) // 2
        return np.exp(1j * (m - 1 - K) * lam)


def cauchy_transforms(basis: BasisFamily, z, M: int) -> np.ndarray:
    """``hat_1..hat_M`` at ``z`` by forward recurrence; shape ``z.shape + (M,)``."""
    if M < 1:
        raise ValueError("M must be >= 1")
    if basis.kind == "fourier" and M % 2 == 0:
        raise ValueError("the Fourier basis needs odd M")
    z = np.asarray(z, dtype=complex)
    if np.any(basis.on_support(z)):
        raise ValueError("collocation point lies on the support")
    alpha, beta, gamma = basis.coefficients(M)
    mass = basis.masses(M)
    out = np.zeros(z.shape + (M,), dtype=complex)
    out[..., 0] = basis.seed(z, M)
    for m in range(1, M):  # builds hat_{m+1} from hat_m (index m-1)
        a, b, g = alpha[m - 1], beta[m - 1], gamma[m - 1]
        prev = out[..., m - 2] if m >= 2 else 0.0
        out[..., m] = a * mass[m - 1] + (a * z + b) * out[..., m - 1] + g * prev
    return out


def _quad_complex(f, lo, hi, points=None) -> complex:
    opts = {"limit": 2000, "epsabs": 1e-14, "epsrel": 1e-12}
    if points:
        opts["points"] = points
    with warnings.catch_warnings():
        # the requested accuracy is below what quad can certify; the values are still good
        warnings.simplefilter("ignore", si.IntegrationWarning)
        re = si.quad(lambda t: np.real(f(t)), lo, hi, **opts)[0]
        im = si.quad(lambda t: np.imag(f(t)), lo, hi, **opts)[0]
    return complex(re, im)


def cauchy_quadrature(basis: BasisFamily, m: int, z: complex, M: int | None = None) -> complex:
    """``hat_m(z)`` from the defining integral, independently of the recurrence.

    The pole is subtracted first, ``phi(l)/(l - z) = (phi(l) - phi(z))/(l - z) +
    phi(z)/(l - z)``, so points close to the support stay accurate.  Chebyshev:
    the first part is a polynomial, integrated exactly by Gauss-Legendre
    (points farther than 0.05 from ``[-1, 1]`` use the plain integral).
    Laguerre: adaptive quadrature of the smooth remainder.  Fourier: closed
    form of ``int e^{ik theta} / (e^{i theta} - z) d theta``.
    """
    z = complex(z)
    if basis.kind == "fourier":
        M = M or 2 * m + 1
        k = m - 1 - (M - 1) // 2
        if abs(z) < 1:
            return 2 * math.pi * z ** (k - 1) if k >= 1 else 0j
        return -2 * math.pi * z ** (k - 1) if k <= 0 else 0j
    if basis.kind == "chebyshev":
        if abs(z - min(max(z.real, -1.0), 1.0)) > 0.05:
            # far from [-1, 1] the subtraction cancels badly and the plain integral is benign
            f = lambda t: ss.eval_chebyt(m - 1, math.cos(t)) * math.sin(t) / (math.cos(t) - z)
            return _quad_complex(f, 0.0, math.pi, [math.acos(min(1.0, max(-1.0, z.real)))])
        c = np.zeros(m)
        c[-1] = 1.0
        pz = complex(np.polynomial.chebyshev.chebval(z, c))
        x, w = np.polynomial.legendre.leggauss(m + 2)
        smooth = complex(np.sum(w * (np.polynomial.chebyshev.chebval(x, c) - pz) / (x - z)))
        return smooth + pz * (np.log(1 - z) - np.log(-1 - z))
    c = np.zeros(m)
    c[-1] = 1.0
    phi = lambda v: np.polynomial.laguerre.lagval(v, c) * np.exp(-v / 2)
    pz = complex(phi(z))
    R = max(z.real, 0.0) + 10.0
    inner = _quad_complex(lambda t: (phi(t) - pz) / (t - z), 0.0, R, [z.real] if 0 < z.real < R else None)
    tail = _quad_complex(lambda t: phi(t) / (t - z), R, math.inf)
    return inner + pz * (np.log(R - z) - np.log(-z)) + tail


def default_points(basis: BasisFamily, M: int, eps: float) -> np.ndarray:
    """Chebyshev nodes ``+ i eps``; ``(k/M)^2 + i eps``; ``(1 +- eps) e^{2 pi i k / M}``."""
    k = np.arange(1, M + 1)
    if basis.kind == "chebyshev":
        return np.cos((2 * k - 1) * math.pi / (2 * M)) + 1j * eps
    if basis.kind == "laguerre":
        return (k / M) ** 2 + 1j * eps
    ring = np.exp(2j * math.pi * k / M)
    return np.concatenate([(1 - eps) * ring, (1 + eps) * ring])


@dataclass
class CollocationResult:
    coeffs: np.ndarray
    residual: float
    condition: float
    rank: int
    points: np.ndarray
    matrix: np.ndarray = field(repr=False)
    rhs: np.ndarray = field(repr=False)
    drift: float | None = None

    @property
    def rank_deficient(self) -> bool:
        return self.rank < self.coeffs.size


def _lstsq_pivoted(A: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, int, float]:
    Q, R, P = sl.qr(A, mode="economic", pivoting=True)
    d = np.abs(np.diag(R))
    if d.size == 0 or d[0] == 0:
        return np.zeros(A.shape[1], dtype=A.dtype), 0, math.inf
    rank = int(np.sum(d > max(A.shape) * np.finfo(float).eps * d[0]))
    cond = float(d[0] / d[rank - 1])
    z = sl.solve_triangular(R[:rank, :rank], (Q.conj().T @ b)[:rank])
    a = np.zeros(A.shape[1], dtype=np.result_type(A, b))
    a[P[:rank]] = z
    if rank < A.shape[1]:
        cond = math.inf
    return a, rank, cond


def collocate(
    op: ColumnDecayOperator | None,
    x: DecayVector | None,
    basis: BasisFamily,
    M: int,
    points=None,
    eps: float = 0.1,
    y: DecayVector | None = None,
    atoms: Sequence[tuple[float, float]] = (),
    rhs: Callable[[np.ndarray], np.ndarray] | None = None,
    tol: float = 1e-10,
    cap: int = DEFAULT_CAP,
    drift_check: bool = True,
) -> CollocationResult:
    """Least-squares coefficients ``a_1..a_M`` from Cauchy-transform collocation.

    The right-hand side is ``<R(z) x, y>`` (``y = x`` by default) minus the
    transforms of the listed ``atoms`` (location, weight), or ``rhs(z)`` for a
    synthetic problem.  With ``y = x`` and a real basis the real and imaginary
    parts are stacked so the coefficients come out real.  Pivoted QR; the
    condition estimate is the ratio of extreme pivots.
    """
    pts = default_points(basis, M, eps) if points is None else np.asarray(points, dtype=complex)
    if pts.size < M:
        raise ValueError("need at least M collocation points")
    A = cauchy_transforms(basis, pts, M)
    if rhs is not None:
        b = np.asarray(rhs(pts), dtype=complex)
        hermitian = False
    else:
        if op is None or x is None:
            raise ValueError("need an operator and vector, or a synthetic rhs")
        hermitian = y is None
        y = x if y is None else y
        b = np.zeros(pts.size, dtype=complex)
        n0 = 8
        for start in range(0, pts.size, 64):
            zs = list(pts[start : start + 64])
            sols = resolvent_batch(op, [x], zs, tol, n0=n0, cap=cap)
            n0 = max(8, min(s[0].n_used for s in sols) // 2)
            for k, row in enumerate(sols):
                v = row[0].coeffs
                b[start + k] = np.dot(v, np.conj(y.head(v.size)))
        for loc, w in atoms:
            at = np.exp(1j * loc) if basis.kind == "fourier" else loc
            b -= w / (at - pts)
    drift = None
    if drift_check and M >= 4:
        m = M // 4
        ref = cauchy_quadrature(basis, m, pts[0], M)
        drift = abs(A[0, m - 1] - ref) / max(abs(ref), 1.0)
        if drift > 1e-6:
            warnings.warn(f"forward recurrence drift {drift:.2e} at m={m}", RecurrenceDriftWarning, stacklevel=2)
    if hermitian and basis.real:
        As = np.vstack([A.real, A.imag])
        bs = np.concatenate([b.real, b.imag])
        a, rank, cond = _lstsq_pivoted(As, bs)
        residual = float(np.linalg.norm(As @ a - bs))
    else:
        a, rank, cond = _lstsq_pivoted(A, b)
        residual = float(np.linalg.norm(A @ a - b))
    return CollocationResult(a, residual, cond, rank, pts, A, b, drift)


def reconstruct(basis: BasisFamily, coeffs, grid) -> np.ndarray:
    """``sum_m a_m phi_m`` on ``grid`` by Clenshaw's recurrence.

    ``grid`` holds angles for the Fourier basis.  Complex output for Fourier
    or complex coefficients, real otherwise.
    """
    a = np.asarray(coeffs)
    M = a.size
    grid = np.asarray(grid, dtype=float)
    lam = basis.variable(grid)
    alpha, beta, gamma = basis.coefficients(M)
    b1 = np.zeros(grid.shape, dtype=np.result_type(a, lam))
    b2 = np.zeros_like(b1)
    for k in range(M - 1, -1, -1):
        g = gamma[k + 1] if k + 1 < M else 0.0
        b1, b2 = a[k] + (alpha[k] * lam + beta[k]) * b1 + g * b2, b1
    phi1 = basis.first(grid)
    if basis.kind == "fourier":
        K = (M - 1) // 2
        phi1 = np.exp(-1j * K * grid)
    return phi1 * b1
