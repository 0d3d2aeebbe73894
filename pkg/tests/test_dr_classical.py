import json
from fractions import Fraction

import pytest
from hypothesis import given, settings
from strategies import diffpolys

from d4dr.diffpoly import LocalFunctional, const, d_x, grading, monomial_parts, reduce_modulo_dx, var
from d4dr.dr_classical import (
    D4,
    SYMMETRIES,
    NotDRTypeError,
    apply_linear_symmetry,
    dilaton_D,
    dr_recursion_step,
    eta_bracket,
    eta_operator,
    functional_bracket,
    genus0_g11,
    inverse_dilaton_minus_one,
    is_trivial_functional,
    parity_scan,
    restrict_subhierarchy,
    to_normal_coordinates,
    transform_hamiltonian_operator,
)
from d4dr.ds_d4 import poisson_matrix_first, tau_density
from d4dr.fixtures import load
from d4dr.parse import parse
from d4dr.scalars import mpq


def coeff(f, text):
    return f.terms.get(next(iter(parse(text).terms)))


# -- CohFT data --------------------------------------------------------------------


def test_metric_and_inverse():
    assert D4.eta_inv == {(1, 3): 6, (3, 1): 6, (2, 2): 6, (4, 4): 2}


def test_quadratic_hamiltonian():
    assert D4.quadratic() == parse("1/6*u1_0*u3_0 + 1/12*u2_0^2 + 1/4*u4_0^2")


def test_hamiltonian_weights():
    assert D4.hamiltonian_weight(1, 1) == Fraction(7, 3)
    assert D4.hamiltonian_weight(3, -1) == 1


def test_restricted_cohft():
    sub = D4.restrict({2, 4})
    assert sub.fields == (1, 3) and sub.killed == (2, 4)
    assert all(v.index in (1, 3) for m in sub.potential.terms for v, _ in monomial_parts(m)[2])


# -- bracket and dilaton -------------------------------------------------------------


def test_bracket_with_quadratic_is_translation():
    assert eta_bracket(var("u", 3), D4.quadratic()) == var("u", 3, 1)


@given(diffpolys(max_terms=3, max_jet=2, max_deg=2, max_eps=0))
def test_quadratic_generates_dx(f):
    assert eta_bracket(f, D4.quadratic()) == d_x(f)


def test_self_bracket_vanishes_mod_dx():
    f = var("u", 1) ** 2
    assert is_trivial_functional(eta_bracket(f, f))


@settings(max_examples=30)
@given(diffpolys(max_terms=2, max_jet=2, max_deg=2, max_eps=0), diffpolys(max_terms=2, max_jet=2, max_deg=2, max_eps=0))
def test_bracket_antisymmetric_mod_dx(f, g):
    assert is_trivial_functional(eta_bracket(f, g) + eta_bracket(g, f))


@settings(max_examples=30)
@given(diffpolys(max_terms=2, max_jet=2, max_deg=3, max_eps=0), diffpolys(max_terms=2, max_jet=2, max_deg=3, max_eps=0))
def test_gradient_bracket_agrees_mod_dx(f, g):
    assert is_trivial_functional(functional_bracket(f, g) - eta_bracket(f, g))


def test_trivial_functional_predicate():
    assert is_trivial_functional(d_x(parse("u1_0*u3_2")))
    assert not is_trivial_functional(parse("u1_1^2"))


def test_dilaton_counts_fields_and_eps():
    assert dilaton_D(parse("eps^2*u3_2*u1_0")) == parse("4*eps^2*u1_0*u3_2")
    assert dilaton_D(const(5)) == const(0)


def test_inverse_dilaton():
    f = parse("u1_0*u2_0 + eps^2*u3_0*u3_2")
    assert dilaton_D(inverse_dilaton_minus_one(f)) - inverse_dilaton_minus_one(f) == f


# -- genus 0 ---------------------------------------------------------------------------


def test_genus0_coefficients():
    g0 = genus0_g11().density
    assert coeff(g0, "u1_0*u2_0^2") == mpq(1, 12)
    assert coeff(g0, "u3_0^7") == mpq(1, 326592)


def test_genus0_is_stored_hamiltonian():
    assert genus0_g11() == LocalFunctional(load("dr_g11_genus0"))


def test_potential_symmetries():
    F = D4.potential
    for name in ("Z2", "Z3"):
        assert apply_linear_symmetry(F, SYMMETRIES[name]) == F


# -- DR-type solve -------------------------------------------------------------------


def test_solve_nullity_and_normalization(dr_solution):
    assert dr_solution.nullity_before_normalization == 1
    r = reduce_modulo_dx(dr_solution.density)
    assert coeff(r, "eps^2*u1_1^2") == mpq(-1, 6)


def test_solve_matches_stored_hamiltonian(dr_solution):
    assert dr_solution.g11 == LocalFunctional(load("dr_g11"))


def test_solve_top_dispersive_term(g11):
    assert coeff(reduce_modulo_dx(g11), "eps^10*u3_5^2") == mpq(-1, 7776)


def test_solve_dispersionless_limit(g11):
    assert LocalFunctional(g11.eps_part(0)) == genus0_g11()


def test_solve_report_is_serializable(dr_solution):
    rep = json.loads(json.dumps(dr_solution.report()))
    assert rep["nullity_before_normalization"] == 1
    assert [o["eps_order"] for o in rep["orders"]] == sorted(o["eps_order"] for o in rep["orders"])


# -- recursion ------------------------------------------------------------------------


def test_recursion_start(dr_table):
    assert dr_table[(1, -1)] == var("u", 3).scale(mpq(1, 6))
    assert dr_table[(4, -1)] == var("u", 4).scale(mpq(1, 2))


def test_recursion_step_reproduces_table(dr_table, g11):
    assert dr_recursion_step(dr_table[(2, 0)], g11) == dr_table[(2, 1)]


def test_h40_from_recursion(dr_table):
    assert coeff(dr_table[(4, 0)], "eps^6*u4_6") == mpq(1, 112)
    assert coeff(dr_table[(4, 0)], "u1_0*u4_0") == mpq(1, 2)


def test_g10_generates_dx(dr_table):
    # g-bar_{1,0} is the quadratic Hamiltonian whose flow is d_x
    assert LocalFunctional(dr_table[(1, 0)]) == LocalFunctional(D4.quadratic())


def test_unit_derivative(dr_table):
    assert dr_table.check_unit_derivative() == []


def test_hamiltonian_gradings(dr_table):
    for (a, d), g in dr_table.table.items():
        rep = grading(g, "cohft_weight")
        assert rep.homogeneous and rep.degree == D4.hamiltonian_weight(a, d), (a, d)


def test_even_eps_powers(dr_table):
    for g in dr_table.table.values():
        assert all(monomial_parts(m)[0] % 2 == 0 for m in g.terms)


def test_commutativity_low_degrees(dr_table):
    assert dr_table.commutativity_failures(1) == []


def test_commutativity_up_to_degree_two(classical_commutativity_failures):
    assert classical_commutativity_failures == []


def test_non_commuting_pair_is_detected(dr_table):
    # sanity check of the detector: g11 does not commute with a perturbation
    f = dr_table[(1, 0)] + parse("u2_0^2*u4_0")
    assert not is_trivial_functional(functional_bracket(f, dr_table[(3, 0)]))


# -- normal coordinates ------------------------------------------------------------------


def test_identity_miura_keeps_operator():
    ident = {("ut", a): var("u", a) for a in (1, 2, 3, 4)}
    K = transform_hamiltonian_operator(eta_operator(), ident)
    assert sorted(K.entries) == sorted(D4.eta_inv)
    for (a, b), c in D4.eta_inv.items():
        assert K.entry(a, b) == {1: const(c)}


def test_normal_miura_matches_stored(dr_miura):
    for a in (1, 2, 3, 4):
        assert dr_miura[("ut", a)] == load(f"dr_normal_miura{a}")


def test_normal_operator_equals_ds_bracket(dr_miura):
    K = transform_hamiltonian_operator(eta_operator(), dr_miura)
    K_ds = poisson_matrix_first()
    assert K.diff(K_ds) == []
    assert K == load("dr_normal_operator")


def test_hamiltonian_in_normal_coordinates(g11, dr_miura):
    gn = to_normal_coordinates(g11, dr_miura)
    assert LocalFunctional(gn) == LocalFunctional(tau_density(1, 1))


# -- foldings ----------------------------------------------------------------------------


def test_b3_restriction(g11, dr_table):
    r = restrict_subhierarchy(g11, {4}, max_d=2, full_table=dr_table)
    assert r.closure_violations == []
    assert r.reduced_operator == load("b3_operator")


def test_g2_restriction(g11, dr_table):
    r = restrict_subhierarchy(g11, {2, 4}, max_d=2, full_table=dr_table)
    assert r.cohft.fields == (1, 3) and r.closure_violations == []
    assert r.reduced_operator == load("g2_operator")


def test_g11_is_z2_even(g11):
    assert parity_scan(reduce_modulo_dx(g11)) == []


def test_restriction_rejects_bad_kill_sets(g11):
    with pytest.raises(ValueError):
        restrict_subhierarchy(g11, set())
    with pytest.raises(ValueError):
        restrict_subhierarchy(g11, {7})


@pytest.mark.parametrize("kill", [{4}, {2, 4}])
def test_folding_loci_close_in_genus_zero(kill):
    assert restrict_subhierarchy(genus0_g11(), kill, max_d=0).closure_violations == []


def test_non_invariant_locus_is_rejected():
    # u^2 = 0 alone is not preserved by the flows
    with pytest.raises(NotDRTypeError, match="not closed"):
        restrict_subhierarchy(genus0_g11(), {2}, max_d=0)


@pytest.mark.parametrize("kill", [{1}, {3}, {2, 3}])
def test_degenerate_restriction_is_rejected(kill):
    with pytest.raises(ValueError, match="degenerate"):
        restrict_subhierarchy(genus0_g11(), kill, max_d=0)
