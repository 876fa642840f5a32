import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from specmeas.collocation import (
    BasisFamily,
    RecurrenceDriftWarning,
    cauchy_quadrature,
    cauchy_transforms,
    collocate,
    default_points,
    reconstruct,
)
from specmeas.gallery import build
from specmeas.operator_model import DecayVector

KINDS = ["chebyshev", "laguerre", "fourier"]


def _span_points(kind, M):
    if kind == "laguerre":
        return np.linspace(0.2, 3 * M, 4 * M) + 0.5j
    return None


@pytest.mark.parametrize("kind", KINDS)
def test_reconstruct_matches_direct_sum(kind, rng):
    B = BasisFamily(kind)
    M = 21
    a = rng.normal(size=M)
    g = np.linspace(0, 5, 9) if kind == "laguerre" else np.linspace(-1, 1, 9)
    naive = sum(a[m - 1] * B.direct(m, g, M) for m in range(1, M + 1))
    assert np.max(np.abs(reconstruct(B, a, g) - naive)) < 1e-12


@pytest.mark.parametrize("kind,z", [("chebyshev", 0.3 + 0.7j), ("laguerre", 1 + 1j), ("fourier", 1.3 * np.exp(0.4j)),
                                    ("fourier", 0.7 * np.exp(0.4j))])
def test_cauchy_transforms_match_quadrature(kind, z):
    B = BasisFamily(kind)
    M = 21
    h = cauchy_transforms(B, z, M)
    for m in (1, 3, 8, 15, 21):
        assert abs(h[m - 1] - cauchy_quadrature(B, m, z, M)) < 1e-9


@given(st.sampled_from(KINDS), st.integers(2, 10), st.data())
def test_span_exactness(kind, M, data):
    if kind == "fourier" and M % 2 == 0:
        M += 1
    coeffs = np.array(data.draw(st.lists(st.floats(-1, 1), min_size=M, max_size=M)))
    B = BasisFamily(kind)
    r = collocate(None, None, B, M, points=_span_points(kind, M), eps=0.1,
                  rhs=lambda z: cauchy_transforms(B, z, M) @ coeffs)
    assert np.max(np.abs(r.coeffs - coeffs)) <= 1e-8


def test_rogers_szego_machine_precision():
    op, ref = build("rogers_szego", q=0.1)
    B = BasisFamily("fourier")
    r = collocate(op, DecayVector.basis(1), B, 41, eps=0.1)
    th = np.linspace(-math.pi, math.pi, 1001)
    assert np.max(np.abs(reconstruct(B, r.coeffs, th).real - ref(th))) <= 1e-9


def test_geronimus_with_atom_is_unstable():
    op, _ = build("geronimus", a=0.8)
    r = collocate(op, DecayVector.basis(1), BasisFamily("fourier"), 21, eps=0.1, drift_check=False)
    assert r.residual > 1e-2


def test_atoms_subtracted():
    # a pure atom at 0.5 plus nothing else: subtracting it leaves a zero density
    from specmeas.gallery import make_diagonal

    op = make_diagonal(lambda k: np.full(np.shape(k), 0.5))
    r = collocate(op, DecayVector.basis(1), BasisFamily("chebyshev"), 8, eps=0.1, atoms=[(0.5, 1.0)])
    assert np.max(np.abs(r.coeffs)) < 1e-8


def test_default_points():
    assert default_points(BasisFamily("fourier"), 5, 0.1).size == 10
    p = default_points(BasisFamily("chebyshev"), 4, 0.2)
    assert np.allclose(p.imag, 0.2)


def test_rejects_even_fourier_and_support_points():
    B = BasisFamily("fourier")
    with pytest.raises(ValueError):
        cauchy_transforms(B, 2.0, 4)
    with pytest.raises(ValueError):
        cauchy_transforms(BasisFamily("chebyshev"), 0.5, 4)
    with pytest.raises(ValueError):
        BasisFamily("hermite")


def test_drift_warning_far_from_support():
    # the wanted transform decays like rho^-m there while rounding grows like rho^m
    B = BasisFamily("chebyshev")
    pts = np.r_[3 + 0.1j, default_points(B, 80, 0.1)]
    with pytest.warns(RecurrenceDriftWarning):
        collocate(None, None, B, 80, points=pts, rhs=lambda z: cauchy_transforms(B, z, 80)[..., 0])


def test_no_drift_warning_near_support():
    B = BasisFamily("chebyshev")
    with warnings.catch_warnings():
        warnings.simplefilter("error", RecurrenceDriftWarning)
        collocate(None, None, B, 40, points=default_points(B, 40, 1e-6),
                  rhs=lambda z: cauchy_transforms(B, z, 40)[..., 0])


@pytest.mark.parametrize("kind,z", [("chebyshev", 0.2 + 1e-6j), ("laguerre", 2 + 1e-6j), ("fourier", (1 + 1e-6) * np.exp(2j))])
def test_cauchy_quadrature_close_to_support(kind, z):
    B = BasisFamily(kind)
    h = cauchy_transforms(B, z, 21)
    for m in (1, 5, 11, 21):
        assert abs(h[m - 1] - cauchy_quadrature(B, m, z, 21)) <= 1e-12 * max(1, abs(h[m - 1]))


def test_cauchy_quadrature_against_high_precision():
    mp = pytest.importorskip("mpmath")
    mp.mp.dps = 30
    z = mp.mpc(0.2, 1e-6)
    v = mp.quad(lambda x: mp.chebyt(4, x) / (x - z), [-1, 0.2 - 1e-4, 0.2, 0.2 + 1e-4, 1])
    assert abs(cauchy_quadrature(BasisFamily("chebyshev"), 5, complex(z)) - complex(v)) < 1e-12
