import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st

from specmeas.gallery import build, make_diagonal
from specmeas.operator_model import DecaySequence, DecayVector
from specmeas.resolvent import (
    ResolventNotConverged,
    pd_test,
    resolvent_action,
    resolvent_action_adaptive,
    resolvent_batch,
)


def decaying_x():
    # ||P_n x - x||^2 = sum_{k>n} k^-4 <= 1/(3 n^3)
    return DecayVector(lambda k: 1.0 / k**2, beta=DecaySequence.power(1.5), c2=1 / math.sqrt(3))


def exact_diag_resolvent(d, z, m):
    k = np.arange(1, m + 1)
    return (1.0 / k**2) / (d(k) - z)


@given(
    st.floats(-2, 2), st.floats(0.1, 3), st.floats(-1, 1), st.floats(-3, 0), st.sampled_from([1, -1])
)
def test_certificate_bounds_true_error_diagonal(shift, scale, re, log_im, sign):
    d = lambda k: shift + scale * np.sin(1.3 * np.asarray(k, float))
    op = make_diagonal(d)
    z = complex(re, sign * 10**log_im)
    sol = resolvent_action_adaptive(op, decaying_x(), z, 1e-6)
    m = 200000
    exact = exact_diag_resolvent(d, z, m)
    got = sol.vector(m)
    assert np.linalg.norm(got - exact) <= sol.bound
    assert sol.bound <= 1e-6


def test_free_jacobi_against_continued_fraction():
    # m(z) = <R(z) e1, e1> for a_k = 1/2, b_k = 0 is 2(sqrt(z^2-1) - z) on the principal sheet
    op, _ = build("free")
    for z in (0.3 + 0.1j, -0.7 + 0.01j, 2.0 + 0.5j):
        sol = resolvent_action_adaptive(op, DecayVector.basis(1), z, 1e-10)
        w = np.sqrt(complex(z) ** 2 - 1)
        if (w / z).real < 0:
            w = -w
        exact = 2 * (w - z)
        assert abs(sol.coeffs[0] - exact) <= sol.bound + 1e-12


def test_fixed_truncation_matches_dense_lstsq():
    op, _ = build("jacobi", a=0.7, b=0.3)
    z = 0.2 + 0.3j
    n = 30
    sol = resolvent_action(op, DecayVector.basis(1), z, n)
    A = op.truncation(n).toarray() - z * np.eye(n + 1, n)
    b = np.zeros(n + 1)
    b[0] = 1
    ref = np.linalg.lstsq(A, b, rcond=None)[0]
    assert np.allclose(sol.coeffs, ref, atol=1e-12)


def test_batch_matches_single():
    op, _ = build("charlier", a=1.0)
    zs = [0.5 + 0.2j, 1.5 + 0.05j]
    xs = [DecayVector.basis(1), DecayVector.basis(2)]
    out = resolvent_batch(op, xs, zs, 1e-9)
    for k, z in enumerate(zs):
        for r, x in enumerate(xs):
            single = resolvent_action_adaptive(op, x, z, 1e-9)
            m = max(single.coeffs.size, out[k][r].coeffs.size)
            assert np.linalg.norm(single.vector(m) - out[k][r].vector(m)) <= 1e-8


def test_real_axis_rejected_for_self_adjoint():
    op, _ = build("free")
    with pytest.raises(ValueError):
        resolvent_action_adaptive(op, DecayVector.basis(1), 0.5, 1e-8)


def test_cap_raises_not_converged():
    op, _ = build("laguerre", a=0.5)
    with pytest.raises(ResolventNotConverged):
        resolvent_action_adaptive(op, DecayVector.basis(1), 1 + 1e-3j, 1e-12, cap=64)


def test_bad_tolerance():
    op, _ = build("free")
    with pytest.raises(ValueError):
        resolvent_action_adaptive(op, DecayVector.basis(1), 1j, 0.0)


def test_pd_test():
    assert pd_test(np.diag([2.0, 3.0]), 1.0)
    assert not pd_test(np.diag([0.5, 3.0]), 1.0)


def test_unitary_resolvent_inside_and_outside():
    op, _ = build("rogers_szego", q=0.5)
    for z in (0.5 + 0.1j, 1.8 - 0.3j):
        sol = resolvent_action_adaptive(op, DecayVector.basis(1), z, 1e-10)
        n = sol.coeffs.size + 2
        A = op.block(n + 3, n).toarray() - z * np.eye(n + 3, n)
        r = A @ sol.vector(n) - np.eye(n + 3)[:, 0]
        assert np.linalg.norm(r) <= 1e-8
