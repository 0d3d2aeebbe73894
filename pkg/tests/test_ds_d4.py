import functools

import pytest
from hypothesis import given, settings
from strategies import diffpolys

from d4dr.diffpoly import EPS, LocalFunctional, apply_miura, const, monomial_parts, var
from d4dr.ds_d4 import (
    TABLE,
    DSConfig,
    adjoint,
    bracket_density,
    bracket_ds,
    build_lax,
    build_lax_v,
    ds_data,
    flow_derivative,
    normal_coordinates,
    poisson_matrix_first,
    present,
    s_of_v,
    tau_density,
    tau_density_s,
)
from d4dr.parse import parse
from d4dr.psido import TruncationError
from d4dr.scalars import SQRT2, is_real_rational, mpq

ZERO = LocalFunctional(const(0))


@functools.lru_cache(maxsize=None)
def density_v(a, p):
    """h_{a,p} in the v-alphabet (raw eps), the alphabet of the DS brackets."""
    return apply_miura(tau_density_s(a, p), s_of_v(), "v", check=False)


# -- Lax operators ---------------------------------------------------------------


def test_free_lax_operator():
    L = build_lax("s").L
    consts = {k: c.constant_part() for k, c in L.coeffs.items() if c.constant_part()}
    assert consts == {6: const(1)}


@pytest.mark.parametrize("alphabet", ["s", "v"])
def test_extended_lax_is_skew(alphabet):
    Lt = build_lax(alphabet).Lt
    total = adjoint(Lt) + Lt
    assert not any(total.coeffs.values())


def test_vtilde3_in_v_coordinates():
    assert present(build_lax_v().vt_of_v[3]) == (EPS * var("v", 3, 1)).scale(SQRT2 * mpq(5, 4))


def test_unknown_lax_alphabet():
    with pytest.raises(ValueError):
        build_lax("u")


# -- normal coordinates ------------------------------------------------------------


def test_ut4_is_twice_rho():
    fwd, _ = normal_coordinates()
    assert fwd[("ut", 4)] == var("rho").scale(2)


def test_inverse_miura_s3_and_s2():
    _, inv = normal_coordinates()
    assert inv[("s", 3)] == var("ut", 3).scale(mpq(1, 2))
    assert inv[("s", 2)] == parse("1/2*ut2_0 + 1/8*ut3_0^2 - 1/2*ut3_2*eps^2", "ut")


def test_normal_coordinate_round_trip():
    data = ds_data()
    for key, f in data.ut_of_s.items():
        assert apply_miura(f, data.s_of_ut, "ut", check=False) == var(*key)


def test_insufficient_truncation_is_reported():
    shallow = DSConfig(root_floor=-5, lax_floor=-6, bracket_floor=-6)
    with pytest.raises(TruncationError, match="res P"):
        tau_density(1, 0, shallow)


# -- tau-symmetric densities -------------------------------------------------------


def test_h3_minus1():
    assert tau_density(3, -1) == var("ut", 1).scale(mpq(1, 6))


def test_h40_leading_part():
    h = tau_density(4, 0).eps_part(0)
    expected = parse("1/2*ut1_0*ut4_0 + 1/12*ut2_0*ut3_0*ut4_0 + 1/216*ut3_0^3*ut4_0", "ut")
    assert LocalFunctional(h) == LocalFunctional(expected)


def test_h11_top_dispersive_term():
    assert tau_density(1, 1).eps_part(12) == (EPS**12 * var("ut", 3, 12)).scale(mpq(41, 393120))


def test_densities_are_real_rational():
    for a, p in TABLE:
        assert all(is_real_rational(c) for c in tau_density(a, p).terms.values())


def test_densities_have_even_eps_powers():
    for a, p in TABLE:
        assert all(monomial_parts(m)[0] % 2 == 0 for m in tau_density(a, p).terms)


def test_tau_symmetry():
    K = poisson_matrix_first()
    T = {k: tau_density(*k) for k in TABLE}
    cells = [(a, 0) for a in (1, 2, 3, 4)] + [(1, 1)]
    for x in cells:
        for y in cells:
            lhs = flow_derivative(T[(x[0], x[1] - 1)], T[y], K)
            rhs = flow_derivative(T[(y[0], y[1] - 1)], T[x], K)
            assert lhs == rhs, (x, y)


# -- brackets ----------------------------------------------------------------------


@settings(max_examples=10)
@given(diffpolys(tag="v", fields=(1, 2, 3), max_terms=2, max_jet=2, max_deg=2, max_eps=0))
def test_bracket_antisymmetry(f):
    assert bracket_ds(f, f) == ZERO


def test_bracket_is_antisymmetric_in_arguments():
    f, g = parse("v1_0*v3_0", "v"), parse("v2_0^2 + v3_1^2", "v")
    assert bracket_ds(f, g) + bracket_ds(g, f) == ZERO


def test_hamiltonians_commute():
    cells = [(a, 0) for a in (1, 2, 3, 4)] + [(1, 1)]
    for i, x in enumerate(cells):
        for y in cells[i + 1 :]:
            assert bracket_ds(density_v(*x), density_v(*y)) == ZERO, (x, y)


@pytest.mark.parametrize("text", ["v3_0", "v1_0*v3_0", "v2_0^2*v3_0", "rho_0^2*v3_0"])
def test_bi_hamiltonian_recursion_for_h4(text):
    # {f, h_{4,0}}_1 = (0 + 1/2 + mu_4)^{-1} {f, h_{4,-1}}_2 with mu_4 = 0
    f = parse(text, "v")
    lhs = bracket_ds(f, density_v(4, 0), 1)
    rhs = bracket_ds(f, density_v(4, -1), 2).scale(2)
    assert lhs == rhs
    if text == "v3_0":
        # the natural densities agree exactly as well
        assert bracket_density(f, density_v(4, 0), 1) == bracket_density(f, density_v(4, -1), 2).scale(2)


def test_bracket_rejects_unknown_kind():
    with pytest.raises(ValueError):
        bracket_density(var("v", 1), var("v", 2), which=3)


# -- first Poisson matrix --------------------------------------------------------------


@pytest.fixture(scope="module")
def K():
    return poisson_matrix_first()


def test_k44(K):
    assert K.entry(4, 4) == {1: const(2)}


def test_k_mu4_vanishes(K):
    for mu in (1, 2, 3):
        assert not K.entry(mu, 4) and not K.entry(4, mu)


def test_k11(K):
    e = K.entry(1, 1)
    assert e == {
        1: (EPS**2 * var("ut", 3, 2)).scale(mpq(1, 6)),
        2: (EPS**2 * var("ut", 3, 1)).scale(mpq(1, 2)),
        3: (EPS**2 * var("ut", 3)).scale(mpq(1, 3)),
        5: (EPS**4).scale(mpq(4, 15)),
    }


def test_poisson_matrix_antisymmetric(K):
    assert K.is_antisymmetric()
