import pytest
import sympy as sp
from hypothesis import given, settings
from strategies import diffpolys

from d4dr.diffpoly import EPS, HBAR, LocalFunctional, const, d_x, grading, var
from d4dr.dr_classical import D4, eta_bracket, is_trivial_functional
from d4dr.dr_quantum import (
    commutator_term,
    polylog_ctilde,
    polylog_series_check,
    polylog_signed,
    polylog_table,
    quantum_bracket,
    quantum_dilaton_inverse,
    quantum_recursion_step,
    unit_derivative_defects,
)
from d4dr.dr_classical import NotDRTypeError
from d4dr.fixtures import load
from d4dr.parse import parse
from d4dr.scalars import I, mpq

# -- polylogarithm coefficients --------------------------------------------------------

Z = sp.symbols("z")


def li(d):
    """Li_{-d}(z) as a rational function (independent oracle)."""
    return sp.expand_func(sp.polylog(-d, Z))


def test_ctilde_single_exponent():
    assert polylog_ctilde(1) == [1]
    assert polylog_ctilde(3) == [0, 0, 1]


def test_ctilde_11():
    # C~_1, C~_2, C~_3 for Li_{-1}^2
    assert polylog_ctilde(1, 1) == [mpq(-1, 6), 0, mpq(1, 6)]


def test_signed_11():
    assert polylog_signed(1, 1) == [mpq(1, 6), 0, mpq(1, 6)]


def test_ctilde_is_order_independent():
    assert polylog_ctilde(2, 1, 3) == polylog_ctilde(1, 2, 3) == polylog_ctilde((3, 2, 1))


def test_ctilde_rejects_bad_input():
    with pytest.raises(ValueError):
        polylog_ctilde(0, 1)
    with pytest.raises(ValueError):
        polylog_ctilde()


def test_table_size():
    # sorted tuples of positive integers with n <= 3 and sum <= 6
    table = polylog_table(3, 6)
    assert len(table) == 22
    assert all(len(ct) == len(ds) - 1 + sum(ds) for ds, ct in table.items())


@pytest.mark.parametrize("ds", sorted(polylog_table(3, 6)))
def test_decomposition_as_rational_functions(ds):
    ct = polylog_ctilde(*ds)
    lhs = sp.Mul(*[li(d) for d in ds])
    rhs = sum(sp.Rational(int(c.numerator), int(c.denominator)) * li(j) for j, c in enumerate(ct, 1))
    assert sp.cancel(lhs - rhs) == 0


@pytest.mark.parametrize("ds", sorted(polylog_table(3, 6)))
def test_decomposition_as_series(ds):
    assert polylog_series_check(*ds)


# -- star commutator ---------------------------------------------------------------------


@settings(max_examples=25)
@given(diffpolys(max_terms=2, max_jet=2, max_deg=2, max_eps=1), diffpolys(max_terms=2, max_jet=2, max_deg=2, max_eps=1))
def test_first_order_is_classical_bracket(f, g):
    assert commutator_term(f, g, 1) == eta_bracket(f, g)


@settings(max_examples=25)
@given(diffpolys(max_terms=3, max_jet=2, max_deg=3, max_eps=1))
def test_commutator_with_quadratic_is_dx(f):
    # the quadratic Hamiltonian generates translations, with no quantum corrections
    assert quantum_bracket(f, D4.quadratic()) == (HBAR * d_x(f))


@settings(max_examples=25)
@given(diffpolys(max_terms=2, max_jet=2, max_deg=3, max_eps=0), diffpolys(max_terms=2, max_jet=2, max_deg=3, max_eps=0))
def test_commutator_antisymmetric_mod_dx(f, g):
    assert is_trivial_functional(quantum_bracket(f, g) + quantum_bracket(g, f))


def test_second_order_term_of_cubic():
    # [u^3 u^3 /2 ... ]: a quadratic f against a quadratic g has an hbar^2 term
    f = var("u", 3) ** 2
    t = commutator_term(f, f, 2)
    assert is_trivial_functional(t)
    assert quantum_bracket(f, f, hbar_cap=1) == HBAR * eta_bracket(f, f)


def test_dilaton_counts_hbar_twice():
    f = (HBAR * var("u", 1)).scale(I)
    assert quantum_dilaton_inverse(f) == f.scale(mpq(1, 2))
    with pytest.raises(NotDRTypeError):
        quantum_dilaton_inverse(var("u", 1))


# -- quantum DR-type solve -----------------------------------------------------------------


def test_correction_matches_stored(quantum_solution):
    assert quantum_solution.hamiltonian.correction == load("quantum_correction")


def test_correction_coefficients(quantum_solution):
    X = quantum_solution.hamiltonian.correction
    assert X.terms[next(iter(parse("hbar*u1_0").terms))] == I * mpq(-1, 6)
    assert X.terms[next(iter(parse("eps^4*hbar*u3_0").terms))] == I * mpq(-13, 9072)


def test_correction_is_linear_in_hbar(quantum_solution):
    X = quantum_solution.hamiltonian.correction
    assert X.truncate(hbar_max=0) == const(0)
    assert X.truncate(hbar_max=1) == X


def test_classical_limit(quantum_solution):
    ham = quantum_solution.hamiltonian
    assert LocalFunctional(ham.classical_limit()) == LocalFunctional(load("dr_g11"))


def test_solve_is_unique(quantum_solution):
    assert quantum_solution.nullity_before_normalization == 0


def test_correction_weight(quantum_solution):
    rep = grading(quantum_solution.hamiltonian.correction, "cohft_weight")
    assert rep.homogeneous and rep.degree == D4.hamiltonian_weight(1, 1)


# -- quantum hierarchy ------------------------------------------------------------------------


def test_g11_reproduced(quantum_table, quantum_solution):
    assert LocalFunctional(quantum_table[(1, 1)]) == quantum_solution.hamiltonian.functional


def test_recursion_step_reproduces_table(quantum_table, quantum_solution):
    G11 = quantum_solution.hamiltonian.density
    assert quantum_recursion_step(quantum_table[(4, 0)], G11) == quantum_table[(4, 1)]


def test_table_gradings(quantum_table):
    for (a, d), G in quantum_table.items():
        rep = grading(G, "cohft_weight")
        assert rep.homogeneous and rep.degree == D4.hamiltonian_weight(a, d), (a, d)


def test_unit_derivative_holds_modulo_constants(quantum_table):
    # the kernel-free normalization of the recursion leaves constant defects only
    defects = unit_derivative_defects(quantum_table)
    assert defects == {
        (1, 1): (HBAR).scale(I * mpq(-1, 6)),
        (3, 1): (EPS**4 * HBAR).scale(I * mpq(-13, 45360)),
    }


def test_commutativity(quantum_commutativity_failures):
    assert quantum_commutativity_failures == []
