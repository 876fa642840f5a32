import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from specmeas.expr import ExpressionError, compile_expression
from specmeas.funcalc import (
    BoundedFunctionSpec,
    ContourSpec,
    apply_cb_function,
    apply_holomorphic,
    evolve,
)
from specmeas.gallery import build, make_diagonal
from specmeas.operator_model import DecayVector


def diag_op(vals):
    vals = np.asarray(vals, float)
    op = make_diagonal(lambda k: vals[np.minimum(np.asarray(k), vals.size) - 1])
    op.bounded_hint = (float(vals.min()), float(vals.max()))
    return op


@given(st.floats(-2, 2), st.floats(-2, 2), st.lists(st.floats(-1, 1), min_size=3, max_size=3),
       st.lists(st.floats(-1, 1), min_size=3, max_size=3))
def test_cb_linearity(a, b, xs, ys):
    op, _ = build("free")
    F = BoundedFunctionSpec(lambda u: np.exp(-u * u), lipschitz=1.0)
    x, y = DecayVector.from_array(np.r_[xs, 1.0]), DecayVector.from_array(np.r_[ys, 1.0])
    combo = DecayVector.from_array(a * np.r_[xs, 1.0] + b * np.r_[ys, 1.0])
    n = 8
    fx, fy, fc = (apply_cb_function(op, v, F, n, 1e-9).coeffs for v in (x, y, combo))
    m = max(fx.size, fy.size, fc.size)
    pad = lambda c: np.pad(c, (0, m - c.size))
    assert np.linalg.norm(pad(fc) - a * pad(fx) - b * pad(fy)) <= 1e-3


def test_cb_converges_on_diagonal():
    op = diag_op([-0.5, 0.3, 0.9])
    x = DecayVector.from_array([1.0, 1.0, 1.0])
    F = lambda u: np.cos(u)
    errs = []
    for n in (4, 8, 16):
        c = apply_cb_function(op, x, F, n, 1e-10).coeffs[:3]
        errs.append(np.max(np.abs(c - np.cos([-0.5, 0.3, 0.9]))))
    assert errs[2] < errs[1] < errs[0]


def test_holomorphic_rectangle_diagonal_exact():
    op = diag_op([-0.5, 0.3, 0.9])
    x = DecayVector.from_array([1.0, 2.0, 3.0])
    w = lambda z: np.exp(np.asarray(z))
    res = apply_holomorphic(op, x, ContourSpec.rectangle(-1.5, 2.0, 1.0, w, spectrum=(-0.5, 0.9)), 1e-10)
    assert np.allclose(res.coeffs[:3], np.exp([-0.5, 0.3, 0.9]) * [1, 2, 3], atol=1e-9)
    assert res.bound < 1e-8


def test_schrodinger_norm_preserved():
    op, _ = build("free")
    for t in (0.5, 2.0, 5.0):
        u = evolve(op, DecayVector.basis(1), "schrodinger", t, tol=1e-8)
        assert np.linalg.norm(u.coeffs) == pytest.approx(1.0, abs=1e-3)


def test_schrodinger_unbounded_uses_stage():
    op, _ = build("laguerre", a=0.5)
    with pytest.raises(ValueError):
        evolve(op, DecayVector.basis(1), "schrodinger", 1.0)


def test_fractional_diffusion_keyhole_on_diagonal():
    op = diag_op([0.0, 0.25, 1.0, 2.0])
    x = DecayVector.from_array([1.0, 1.0, 1.0, 1.0])
    u = evolve(op, x, "fractional_diffusion", 1.0, alpha=0.5, tol=1e-8)
    expect = np.exp(-np.sqrt([0.0, 0.25, 1.0, 2.0]))
    # the keyhole cuts a small disk out around 0, so a zero mode is only reproduced roughly
    assert np.allclose(u.coeffs[1:4], expect[1:], atol=1e-7)
    assert abs(u.coeffs[0] - 1.0) < 1e-2


def test_evolve_rejects():
    op, _ = build("free")
    with pytest.raises(ValueError):
        evolve(op, DecayVector.basis(1), "heat", 1.0)
    with pytest.raises(ValueError):
        evolve(op, DecayVector.basis(1), "schrodinger", -1.0)


def test_evolve_zero_time_identity():
    op, _ = build("free")
    u = evolve(op, DecayVector.basis(2), "schrodinger", 0.0)
    assert np.array_equal(u.coeffs, [0, 1])


def test_contour_validation():
    w = lambda z: z
    with pytest.raises(ValueError):
        ContourSpec.rectangle(0, 1, 1, w, spectrum=(-1, 0.5))
    with pytest.raises(ValueError):
        ContourSpec.keyhole(1.0, 0.5, w, delta=1.0)


def test_keyhole_encloses_positive_axis():
    c = ContourSpec.keyhole(3.0, 1.0, lambda z: np.ones_like(z), delta=1e-3, nodes=32)
    zs, ws = c.quadrature()
    # winding number about 1.0 is 1, about -1.0 is 0
    assert abs(np.sum(ws / (zs - 1.0)) / (2j * math.pi) - 1) < 1e-10
    assert abs(np.sum(ws / (zs + 1.0)) / (2j * math.pi)) < 1e-10


def test_expression_language():
    f = compile_expression("exp(-l^2) + 2*i*window(l, 0, 1)")
    v = f(np.array([0.0, 2.0]))
    assert v[0] == pytest.approx(1 + 2j) and v[1] == pytest.approx(math.exp(-4))
    g = compile_expression("cos(t*x)", t=2.0)
    assert g(np.array([0.5]))[0] == pytest.approx(math.cos(1.0))
    assert compile_expression("cap(l, 0, 1, 0.5)")(np.array([-0.25]))[0] == pytest.approx(0.5)


@pytest.mark.parametrize("bad", ["__import__('os')", "l.real", "foo(l)", "l +", "[l]", "exp(l, base=2)"])
def test_expression_rejects(bad):
    with pytest.raises(ExpressionError):
        compile_expression(bad)


@given(st.floats(-5, 5), st.floats(-5, 5))
def test_expression_matches_numpy(a, b):
    f = compile_expression(f"({a!r})*l^2 + sin(l) - ({b!r})")
    u = np.linspace(-2, 2, 9)
    assert np.allclose(f(u), a * u**2 + np.sin(u) - b)
