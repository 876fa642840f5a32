from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from specmeas.density import fit_slope, rate_study, rn_derivative, smoothed_density
from specmeas.gallery import build
from specmeas.operator_model import DecayVector, OpenRealSet


def test_knot_schedule_and_exact_knots():
    op, _ = build("free")
    d = rn_derivative(op, DecayVector.basis(1), DecayVector.basis(1), OpenRealSet([(-0.5, 0.5), (0.6, 0.9)]), 5)
    assert d.check_schedule()
    N = d.counts[0]
    assert d.rational_knot(1, N // 2) == Fraction(-0.5) + Fraction(1) * Fraction(N // 2, N)
    k = d.knots(2)
    assert np.all((k > 0.6) & (k < 0.9))


def test_interpolant_is_affine_between_knots():
    op, _ = build("jacobi", a=0.7, b=0.3)
    d = rn_derivative(op, DecayVector.basis(1), DecayVector.basis(1), OpenRealSet([(-0.5, 0.5)]), 3)
    k = d.knots(1)
    mid = 0.5 * (k[3] + k[4])
    v = d([k[3], mid, k[4]])
    assert v[1] == pytest.approx(0.5 * (v[0] + v[2]), abs=1e-14)


def test_short_intervals_get_no_knots():
    op, _ = build("free")
    d = rn_derivative(op, DecayVector.basis(1), DecayVector.basis(1), OpenRealSet([(0.0, 0.1)]), 5)
    assert d.counts == [0] and np.all(d([0.05]) == 0)


def test_rn_derivative_converges_free():
    op, ref = build("free")
    U = OpenRealSet([(-0.8, 0.8)])
    u = np.linspace(-0.6, 0.6, 7)
    errs = []
    for n in (10, 40):
        d = rn_derivative(op, DecayVector.basis(1), DecayVector.basis(1), U, n)
        errs.append(np.max(np.abs(d(u) - ref(u))))
    assert errs[1] < errs[0] / 2


def test_smoothed_density_richardson_improves():
    op, ref = build("jacobi", a=0.7, b=0.3)
    u = np.array([0.0, 0.3])
    raw = np.abs(smoothed_density(op, DecayVector.basis(1), u, 0.02).real - ref(u))
    ext = np.abs(smoothed_density(op, DecayVector.basis(1), u, 0.02, richardson_depth=1).real - ref(u))
    assert np.all(ext < raw / 5)


@given(st.floats(-3, 3), st.floats(0.5, 3))
def test_fit_slope_power_law(logc, p):
    eps = np.logspace(-3, -1, 6)
    assert fit_slope(eps, np.exp(logc) * eps**p) == pytest.approx(p, abs=1e-9)


def test_rate_study_shapes_and_errors():
    op, ref = build("jacobi", a=0.7, b=0.3)
    with pytest.raises(ValueError):
        rate_study(op, ref, [0.0], [0.1, 0.05])
    st_ = rate_study(op, ref, [0.0], [0.1, 0.05, 0.025], 1, l1_window=(-0.5, 0.5), l1_nodes=40)
    assert st_.errors.shape == (2, 3, 1) and st_.l1_errors.shape == (2, 3)
    assert len(st_.rows()) == 4
