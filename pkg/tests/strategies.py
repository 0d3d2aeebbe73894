"""Hypothesis strategies for scalars and differential polynomials."""
from __future__ import annotations

from hypothesis import strategies as st

from d4dr.diffpoly import const, monomial
from d4dr.scalars import Scalar, mpq

small_rationals = st.fractions(min_value=-5, max_value=5, max_denominator=7).map(lambda f: mpq(f.numerator, f.denominator))


@st.composite
def scalars(draw, nonzero=False):
    parts = [draw(small_rationals) for _ in range(4)]
    s = Scalar(*parts)
    if nonzero and not s:
        s = Scalar(1, *parts[1:])
    return s


@st.composite
def diffpolys(draw, tag="u", fields=(1, 2, 3, 4), max_terms=4, max_jet=3, max_deg=3, max_eps=2, hbar=False):
    """Random polynomial in one alphabet (no constant term unless drawn)."""
    f = const(0)
    for _ in range(draw(st.integers(1, max_terms))):
        n = draw(st.integers(1, max_deg))
        factors = [((tag, draw(st.sampled_from(fields)), draw(st.integers(0, max_jet))), 1) for _ in range(n)]
        eps = draw(st.integers(0, max_eps))
        hb = draw(st.integers(0, 1)) if hbar else 0
        c = draw(small_rationals.filter(bool))
        f = f + monomial(eps, hb, factors, c)
    return f
