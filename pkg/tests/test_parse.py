import json

import pytest
from hypothesis import given
from strategies import diffpolys

from d4dr.diffpoly import EPS, HBAR, const, d_x, var
from d4dr.parse import ParseError, from_json, parse, render, to_json
from d4dr.scalars import I, SQRT2, Scalar, mpq


def test_rational_times_fields():
    assert parse("1/12 * u1 * u2^2") == (var("u", 1) * var("u", 2) ** 2).scale(mpq(1, 12))


def test_index_out_of_range():
    with pytest.raises(ParseError, match="index out of range"):
        parse("u5_0")


def test_unknown_prefix():
    with pytest.raises(ParseError, match="unknown"):
        parse("w1_0")


def test_syntax_error_reports_position():
    with pytest.raises(ParseError) as exc:
        parse("u1_0 * (u2_0 + ")
    assert exc.value.pos >= 0


def test_symbols_and_dx():
    f = parse("I*sqrt2*hbar*eps^2*dx(u3_0^2)")
    assert f == (HBAR * EPS**2 * d_x(var("u", 3) ** 2)).scale(I * SQRT2)


def test_rho_and_s4():
    assert parse("s4") == var("rho") ** 2
    assert parse("rho_1") == var("rho", 0, 1)


def test_latex_of_normal_coordinate():
    assert render(var("ut", 3, 2), "latex") == "{\\widetilde u}^3_2"


def test_zero_renders_as_zero():
    assert render(const(0)) == "0"


def test_json_schema():
    f = parse("-1/2*eps^2*hbar*u1_0*u3_2^2")
    (row,) = json.loads(render(f, "json"))
    assert row == {"coeff": ["-1/2", "0/1", "0/1", "0/1"], "eps": 2, "hbar": 1, "vars": [["u", 1, 0, 1], ["u", 3, 2, 2]]}
    assert from_json(to_json(f)) == f


def test_complex_coefficients_round_trip():
    f = parse("(1/2 + 3/4*I*sqrt2)*u1_1 - I*u2_0")
    assert f.terms[next(iter(parse("u1_1").terms))] == Scalar(mpq(1, 2), 0, 0, mpq(3, 4))
    assert parse(render(f)) == f


@given(diffpolys(hbar=True))
def test_print_parse_round_trip(f):
    text = render(f)
    assert parse(text) == f
    assert render(parse(text)) == text


@given(diffpolys(tag="ut"))
def test_json_round_trip(f):
    assert from_json(to_json(f)) == f
