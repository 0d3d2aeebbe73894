from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from strategies import diffpolys, small_rationals

from d4dr.diffpoly import (
    EPS,
    HBAR,
    AlphabetError,
    LocalFunctional,
    MiuraError,
    apply_miura,
    cohft_weight,
    const,
    d_x,
    differential_degree,
    dx_exactness,
    grading,
    monomial_parts,
    partial,
    quotient_basis,
    reduce_modulo_dx,
    var,
    variational_derivative,
)
from d4dr.parse import parse
from d4dr.scalars import I, mpq


def u(a, k=0):
    return var("u", a, k)


# -- arithmetic ----------------------------------------------------------------


def test_square_of_a_field():
    assert u(1) * u(1) == u(1) ** 2
    assert len((u(1) * u(1)).terms) == 1


def test_eps_powers():
    assert EPS * EPS == parse("eps^2")


def test_difference_of_squares():
    assert (u(2) + u(4)) * (u(2) - u(4)) == u(2) ** 2 - u(4) ** 2


def test_no_zero_coefficients_stored():
    f = u(1) - u(1)
    assert not f and f.terms == {}


def test_cross_alphabet_arithmetic_is_an_error():
    with pytest.raises(AlphabetError):
        u(1) + var("ut", 1)


# -- derivations ---------------------------------------------------------------


def test_dx_of_a_field():
    assert d_x(u(1)) == u(1, 1)


def test_dx_leibniz():
    assert d_x(u(1) * u(2)) == u(1, 1) * u(2) + u(1) * u(2, 1)


def test_dx_of_a_constant():
    assert d_x(const(mpq(7, 3))) == const(0)


def test_partial_examples():
    assert partial(u(3) * u(3, 1) ** 2, ("u", 3, 1)) == (u(3) * u(3, 1)).scale(2)
    assert partial(EPS**2 * u(3, 2), ("u", 3, 2)) == EPS**2
    assert partial(u(1), ("u", 2, 0)) == const(0)


def test_variational_derivative_examples():
    assert variational_derivative(u(1) ** 2 * mpq(1, 2), ("u", 1)) == u(1)
    assert variational_derivative(u(1) * u(1, 2), ("u", 1)) == u(1, 2).scale(2)
    assert variational_derivative(u(1, 1) ** 2, ("u", 1)) == u(1, 2).scale(-2)


# -- gradings ------------------------------------------------------------------


def test_differential_degree_of_dispersive_term():
    assert differential_degree(EPS**2 * u(3, 2)) == 0


def test_cohft_weight_of_cubic_term():
    assert cohft_weight(u(1) * u(2) ** 2) == Fraction(7, 3)


def test_cohft_weight_quantum_term():
    assert cohft_weight((HBAR * u(1)).scale(I)) == Fraction(7, 3)


def test_grading_reports_inhomogeneity():
    rep = grading(u(1) + u(3), "cohft_weight")
    assert not rep.homogeneous and rep.degree is None
    assert sorted(rep.per_monomial.values()) == [Fraction(1, 3), Fraction(1)]


# -- exactness -----------------------------------------------------------------


def test_exact_first_jet():
    ex = dx_exactness(u(1, 1))
    assert ex.exact and ex.antiderivative == u(1)


def test_exact_product():
    ex = dx_exactness(u(1) * u(1, 1))
    assert ex.exact and ex.antiderivative == (u(1) ** 2).scale(mpq(1, 2))


def test_non_exact_with_witness():
    ex = dx_exactness(u(1, 1) ** 2)
    assert not ex.exact
    fam, vd = ex.witness
    assert fam == ("u", 1) and vd == u(1, 2).scale(-2)


def test_exactness_rejects_constants():
    with pytest.raises(ValueError):
        dx_exactness(u(1, 1) + EPS)


# -- Miura transformations -----------------------------------------------------


def test_miura_chain_rule():
    subst = {("ut", 1): u(1) + EPS * u(1, 1)}
    assert apply_miura(var("ut", 1, 1), subst, "u") == u(1, 1) + EPS * u(1, 2)


def test_identity_miura():
    f = parse("u1_0*u2_3 + eps^2*u3_1^2")
    assert apply_miura(f, {("u", a): u(a) for a in (1, 2, 3, 4)}) == f


def test_non_invertible_miura_rejected():
    with pytest.raises(MiuraError):
        apply_miura(var("ut", 1), {("ut", 1): u(1, 1)}, "u")
    with pytest.raises(MiuraError):
        apply_miura(var("ut", 1), {("ut", 1): u(1) + u(2), ("ut", 2): (u(1) + u(2)).scale(2)}, "u")


def test_ds_inverse_miura_image_of_s3():
    from d4dr.ds_d4 import normal_coordinates

    _, s_of_ut = normal_coordinates()
    assert apply_miura(var("s", 3), s_of_ut, "ut", check=False) == var("ut", 3).scale(mpq(1, 2))


# -- quotient by total derivatives ---------------------------------------------


def test_quotient_basis_removes_exact_relations():
    # u u_2 = d(u u_1) - (u_1)^2 : one class for two monomials
    mons = [next(iter(f.terms)) for f in (u(1) * u(1, 2), u(1, 1) ** 2)]
    assert len(quotient_basis(mons)) == 1


def test_reduce_modulo_dx_kills_total_derivatives():
    f = parse("u1_0*u3_1*u2_0 + u4_2^2")
    assert reduce_modulo_dx(d_x(f)) == const(0)


# -- randomized properties -----------------------------------------------------


@settings(max_examples=100)
@given(diffpolys(tag="ut", max_terms=3, max_jet=2, max_deg=2), st.data())
def test_miura_commutes_with_dx(f, data):
    # triangular substitution with invertible dispersionless part
    subst = {}
    for a in (1, 2, 3, 4):
        c = data.draw(small_rationals.filter(bool))
        extra = data.draw(diffpolys(tag="u", max_terms=2, max_jet=2, max_deg=2, max_eps=2))
        extra = extra.filter(lambda m: monomial_parts(m)[0] > 0)  # dispersive terms only
        subst[("ut", a)] = u(a).scale(c) + extra
    lhs = d_x(apply_miura(f, subst, "u"))
    rhs = apply_miura(d_x(f), subst, "u")
    assert lhs == rhs


@given(diffpolys())
def test_variational_derivative_kills_total_derivatives(g):
    df = d_x(g)
    for a in (1, 2, 3, 4):
        assert not variational_derivative(df, ("u", a))


@given(diffpolys(), diffpolys())
def test_local_functional_blind_to_total_derivatives(f, g):
    assert LocalFunctional(f) == LocalFunctional(f + d_x(g))
    assert LocalFunctional(f + EPS**2) == LocalFunctional(f)


@given(diffpolys(), diffpolys())
def test_reduce_modulo_dx_is_canonical(f, g):
    f = f.field_part()
    r = reduce_modulo_dx(f)
    assert reduce_modulo_dx(f + d_x(g)) == r
    assert LocalFunctional(r) == LocalFunctional(f)


@given(diffpolys(max_eps=0))
def test_grading_shift_under_dx(f):
    hom = [m for m in f.terms]
    for m in hom:
        single = f.filter(lambda mm, m=m: mm == m)
        assert differential_degree(d_x(single)) == differential_degree(single) + 1
        assert cohft_weight(d_x(single)) == cohft_weight(single)
