import pickle

import pytest
from hypothesis import given
from hypothesis import strategies as st
from strategies import scalars

from d4dr.scalars import (
    I,
    SQRT2,
    Echelon,
    InconsistentSystemError,
    LinearSystem,
    Scalar,
    is_real_rational,
    mpq,
    normalize,
    scalar_arith,
    scalar_from_json,
    scalar_to_json,
    solve_linear_system,
)


def test_i_squared_relation():
    assert scalar_arith(1 + I, 1 - I, "mul") == 2


def test_sqrt2_squared():
    assert scalar_arith(SQRT2, SQRT2, "mul") == 2


def test_inverse_of_sqrt2_is_rationalized():
    assert scalar_arith(SQRT2, None, "inv") == Scalar(0, 0, mpq(1, 2), 0)


def test_inverse_of_zero_raises():
    with pytest.raises(ZeroDivisionError):
        scalar_arith(Scalar(), None, "inv")


def test_lowest_terms_and_positive_denominator():
    s = Scalar(mpq(4, -6), mpq(10, 4))
    assert (s.a.numerator, s.a.denominator) == (-2, 3)
    assert (s.b.numerator, s.b.denominator) == (5, 2)


def test_real_rational_predicate():
    assert is_real_rational(mpq(3, 7)) and Scalar(2).is_real_rational()
    assert not (I * SQRT2).is_real_rational()
    assert normalize(Scalar(mpq(1, 3))) == mpq(1, 3)


def test_i_times_sqrt2_commutes():
    assert I * SQRT2 == SQRT2 * I == Scalar(0, 0, 0, 1)


def test_json_encoding_order():
    assert scalar_to_json(Scalar(mpq(1, 2), -1, 0, mpq(3, 4))) == ["1/2", "-1/1", "0/1", "3/4"]


@given(scalars())
def test_json_round_trip(x):
    assert scalar_from_json(scalar_to_json(x)) == x


@given(scalars())
def test_pickle_round_trip(x):
    assert pickle.loads(pickle.dumps(x)) == x


@given(scalars(), scalars(), scalars())
def test_field_axioms(x, y, z):
    assert (x * y) * z == x * (y * z)
    assert (x + y) + z == x + (y + z)
    assert x * (y + z) == x * y + x * z
    assert x * y == y * x


@given(scalars(nonzero=True))
def test_multiplicative_inverse(x):
    assert x * x.inverse() == 1


# -- linear systems ------------------------------------------------------------


def test_identity_system():
    sol = solve_linear_system(LinearSystem.from_dense([[1, 0], [0, 1]], [1, 0]))
    assert sol.particular == [1, 0] and sol.nullspace == []


def test_single_equation_nullspace():
    sol = solve_linear_system(LinearSystem.from_dense([[1, 1]], [0]))
    assert sol.nullity == 1
    (v,) = sol.nullspace
    # basis vector is proportional to (1, -1)
    assert v[0] + v[1] == 0 and v[0] != 0


def test_inconsistent_system():
    with pytest.raises(InconsistentSystemError):
        solve_linear_system(LinearSystem.from_dense([[1], [1]], [1, 2]))


def test_row_length_checked():
    with pytest.raises(ValueError):
        LinearSystem.from_dense([[1, 2], [1]], [0, 0])


def test_complex_coefficients():
    # (1 + i) x = 2  ->  x = 1 - i
    sol = solve_linear_system(LinearSystem.from_dense([[1 + I]], [2]))
    assert sol.particular == [1 - I]


@given(
    st.lists(st.lists(st.integers(-3, 3), min_size=4, max_size=4), min_size=1, max_size=5),
    st.lists(st.integers(-3, 3), min_size=4, max_size=4),
    st.lists(st.integers(-2, 2), min_size=4, max_size=4),
)
def test_solutions_satisfy_every_row(matrix, x0, combo):
    # consistent by construction: rhs = A x0
    rhs = [sum(a * x for a, x in zip(row, x0)) for row in matrix]
    sol = solve_linear_system(LinearSystem.from_dense(matrix, rhs))
    x = list(sol.particular)
    for c, v in zip(combo, sol.nullspace):
        x = [xi + c * vi for xi, vi in zip(x, v)]
    for row, b in zip(matrix, rhs):
        assert sum(a * xi for a, xi in zip(row, x)) == b
    # rank-nullity
    assert sol.nullity >= 4 - len(matrix)


def test_echelon_reduces_to_normal_form():
    e = Echelon()
    assert e.insert({0: 1, 1: 1}) == 1
    assert e.insert({0: 2, 1: 2}) is None
    assert e.reduce({1: 1}) == {0: -1}
    assert len(e) == 1
