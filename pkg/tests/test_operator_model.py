import io
import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st

from specmeas.operator_model import (
    ColumnDecayOperator,
    DecaySequence,
    DecayVector,
    Dispersion,
    OpenRealSet,
    check_hermitian,
    read_matrix_text,
    rect_truncation,
    tail_norm_estimate,
    write_matrix_text,
)


def tridiag(n_extra=1):
    def entry(i, j):
        if i == j:
            return 1.0 / i
        if abs(i - j) == 1:
            return 0.5
        return 0.0

    return ColumnDecayOperator(entry, dispersion=Dispersion.shift(n_extra), real=True, name="tri")


def test_dispersion_forms():
    assert Dispersion.shift(2)(10) == 12
    assert Dispersion.sqrt(2.0, 1.0)(16) == math.ceil(16 + 8 + 1)
    tab = Dispersion.from_table([3, 4, 6])
    assert [tab(k) for k in (1, 2, 3, 4, 5)] == [3, 4, 6, 7, 8]


def test_dispersion_rejects_non_growth():
    with pytest.raises(ValueError):
        Dispersion.shift(0)
    with pytest.raises(ValueError):
        Dispersion.from_table([1, 3])


@given(st.integers(1, 50), st.floats(0, 5), st.floats(0, 5))
def test_dispersion_describe_roundtrip(b, c, d):
    for disp in (Dispersion.shift(b), Dispersion.sqrt(c, d)):
        back = Dispersion.parse(disp.describe())
        assert all(back(n) == disp(n) for n in (1, 2, 7, 100))


@given(st.floats(0.1, 4), st.floats(0.05, 0.95))
def test_decay_sequence_roundtrip(p, r):
    for seq in (DecaySequence.power(p), DecaySequence.geometric(r), DecaySequence.zero()):
        back = DecaySequence.parse(seq.describe())
        assert back(7) == seq(7)


def test_entry_is_one_based_and_cached():
    op = tridiag()
    assert op.entry(1, 1) == 1.0
    assert op.entry(2, 1) == 0.5
    with pytest.raises(IndexError):
        op.entry(0, 1)


def test_truncation_shape_and_values():
    op = tridiag(2)
    M = op.truncation(5).toarray()
    assert M.shape == (7, 5)
    assert M[0, 0] == 1.0 and M[1, 0] == 0.5 and M[6, 4] == 0.0


def test_rect_truncation_shift():
    op = tridiag()
    z = 0.3 + 0.2j
    A = rect_truncation(op, 4, z).toarray()
    B = op.truncation(4).toarray() - z * np.eye(5, 4)
    assert np.allclose(A, B)


def test_tail_norm_estimate_zero_for_banded():
    assert tail_norm_estimate(tridiag(), 10, 30) == 0.0


def test_check_hermitian():
    op = tridiag()
    assert check_hermitian(op, [(i, j) for i in range(1, 6) for j in range(1, 6)])


def test_decay_vector_head_and_tail():
    x = DecayVector(lambda k: 1.0 / k**2, beta=DecaySequence.power(1.5), c2=1.0)
    h = x.head(4)
    assert np.allclose(h, [1, 1 / 4, 1 / 9, 1 / 16])
    true_tail = math.sqrt(sum(k**-4 for k in range(5, 100000)))
    assert x.tail_bound(4) >= true_tail


def test_basis_and_from_array():
    e3 = DecayVector.basis(3)
    assert np.array_equal(e3.head(5), [0, 0, 1, 0, 0])
    assert e3.tail_bound(3) == 0.0
    v = DecayVector.from_array([1, 2j, 0, 0])
    assert v.support == 2 and not v.is_real
    with pytest.raises(ValueError):
        DecayVector.basis(0)


def test_open_set_parse():
    U = OpenRealSet.parse("(0.5,1.5);(2,inf)")
    assert U.first(5) == [(0.5, 1.5), (2.0, math.inf)]
    assert U.contains(1.0) and not U.contains(1.5) and U.contains(1e9)


@pytest.mark.parametrize("bad", ["", "(1,0)", "(0,2);(1,3)", "[0,1]", "(a,b)"])
def test_open_set_rejects(bad):
    with pytest.raises(ValueError):
        OpenRealSet.parse(bad)


def test_lazy_open_set():
    U = OpenRealSet(lambda m: (2 * m, 2 * m + 1) if m <= 3 else None)
    assert U.first(10) == [(2.0, 3.0), (4.0, 5.0), (6.0, 7.0)]
    with pytest.raises(ValueError):
        U.intervals()


@given(st.lists(st.tuples(st.integers(1, 8), st.integers(1, 6), st.floats(-5, 5), st.floats(-5, 5)), max_size=20))
def test_matrix_text_roundtrip(entries):
    data = {(i, j): complex(a, b) for i, j, a, b in entries if i <= j + 2}

    def entry(i, j):
        return data.get((i, j), 0.0)

    op = ColumnDecayOperator(entry, dispersion=Dispersion.shift(2), alpha=DecaySequence.power(2.0), c1=0.5)
    buf = io.StringIO()
    write_matrix_text(op, 6, buf)
    back = read_matrix_text(io.StringIO(buf.getvalue()))
    assert back.dispersion(6) == 8 and back.c1 == 0.5 and back.alpha(3) == op.alpha(3)
    assert (back.truncation(6) != op.truncation(6)).nnz == 0


def test_matrix_text_errors():
    with pytest.raises(ValueError):
        read_matrix_text(io.StringIO("1 1 0 0\n"))
    with pytest.raises(ValueError):
        read_matrix_text(io.StringIO("# kind=sa f=n+1 alpha=0 c1=0\n1 1 0\n"))


def test_block_builder_shape_checked():
    op = ColumnDecayOperator(lambda i, j: 0.0, block=lambda m, n: sp.csr_matrix((m + 1, n)))
    with pytest.raises(ValueError):
        op.truncation(3)


def test_dist_lower_bound():
    op = ColumnDecayOperator(lambda i, j: 0.0, bounded_hint=(-1.0, 1.0))
    assert op.dist_lower_bound(3 + 0.1j) == pytest.approx(abs(3 + 0.1j - 1))
    u = ColumnDecayOperator(lambda i, j: 0.0, kind="u")
    assert u.dist_lower_bound(0.5) == pytest.approx(0.5)
