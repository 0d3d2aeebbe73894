import re

import pytest

from d4dr.diffpoly import DiffPoly
from d4dr.ds_d4 import PoissonMatrix
from d4dr.fixtures import FIXTURES, by_anchor, get, load
from d4dr.verify import CHECKS, SUITES, consumed_fixtures


@pytest.mark.parametrize("fx", FIXTURES, ids=lambda f: f.name)
def test_fixture_parses(fx):
    obj = load(fx.name)
    if fx.kind == "matrix":
        assert isinstance(obj, PoissonMatrix) and obj.is_antisymmetric()
    else:
        assert isinstance(obj, DiffPoly) and obj


def test_names_are_unique():
    names = [f.name for f in FIXTURES]
    assert len(names) == len(set(names))


def test_anchors_are_neutral_tags():
    for f in FIXTURES:
        assert re.fullmatch(r"[a-z0-9]+(-[a-z0-9]+)*", f.anchor), f.anchor
        assert f in by_anchor(f.anchor)


def test_every_fixture_is_consumed_by_a_check():
    assert consumed_fixtures() == {f.name for f in FIXTURES}


def test_checks_reference_known_fixtures_and_suites():
    for c in CHECKS:
        assert c.suite in SUITES
        for name in c.fixtures:
            get(name)


def test_unknown_fixture():
    with pytest.raises(KeyError):
        get("nope")
