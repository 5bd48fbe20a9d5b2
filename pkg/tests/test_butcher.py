import warnings
from fractions import Fraction as Fr

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from petrov_rk.butcher import (
    REGISTRY_NAMES,
    ButcherTableau,
    dump_tableau,
    from_G,
    matrix_G,
    parse_tableau,
    registry_get,
    rk2_alpha,
)

NAMED = [n for n in REGISTRY_NAMES if n != "rk2-alpha"]


@pytest.mark.parametrize("name", NAMED)
def test_registry_consistent(name):
    tab = registry_get(name)
    assert tab.consistency_issues() == []
    assert tab.name == name
    for i in range(tab.s):
        assert all(tab.a[i][j] == 0 for j in range(i, tab.s))


@pytest.mark.parametrize("name,s", [("forward-euler", 1), ("explicit-midpoint", 2), ("rk3-classic", 3), ("rk4-classic", 4)])
def test_stage_counts(name, s):
    assert registry_get(name).s == s


def test_rk4_coefficients():
    tab = registry_get("rk4-classic")
    assert tab.b == (Fr(1, 6), Fr(1, 3), Fr(1, 3), Fr(1, 6))
    assert tab.c == (0, Fr(1, 2), Fr(1, 2), 1)


@pytest.mark.parametrize("alpha", [Fr(1), Fr(1, 2), Fr(2, 3), Fr(-1, 3)])
def test_rk2_alpha_family(alpha):
    tab = rk2_alpha(alpha)
    assert tab.a[1][0] == alpha
    assert tab.b == (1 - 1 / (2 * alpha), 1 / (2 * alpha))
    assert tab.consistency_issues() == []


def test_rk2_alpha_variants():
    assert registry_get("rk2-alpha(1/2)").a == registry_get("explicit-midpoint").a
    assert registry_get("rk2-alpha", alpha=1).b == registry_get("explicit-trapezoidal").b


def test_rk2_alpha_zero_rejected():
    with pytest.raises(ValueError):
        rk2_alpha(0)
    with pytest.raises(ValueError):
        registry_get("rk2-alpha")


def test_unknown_name():
    with pytest.raises(KeyError):
        registry_get("rk5-nonexistent")


def test_implicit_rejected():
    with pytest.raises(ValueError, match="not explicit"):
        ButcherTableau.from_lists([[Fr(1, 2), 0], [0, 0]], [1, 0], [Fr(1, 2), 0])


def test_inconsistent_warns():
    with pytest.warns(UserWarning):
        ButcherTableau.from_lists([[0, 0], [1, 0]], [1, 1], [0, 1])


def test_matrix_G_rows():
    tab = registry_get("rk3-classic")
    G = matrix_G(tab)
    assert list(G[0]) == list(tab.b)
    assert list(G[2]) == list(tab.a[2])


@pytest.mark.parametrize("name", NAMED)
def test_from_G_roundtrip(name):
    tab = registry_get(name)
    back = from_G(matrix_G(tab).tolist(), tab.c)
    assert back.a == tab.a and back.b == tab.b


def test_parse_errors():
    with pytest.raises(ValueError):
        parse_tableau("s = 2\nb = 1/2, 1/2\nc = 0, 1\n")
    with pytest.raises(ValueError):
        parse_tableau("s = 2\na = 1, 2\nb = 1/2, 1/2\nc = 0, 1\n")


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 5).flatmap(
    lambda s: st.tuples(
        st.just(s),
        st.lists(st.fractions(max_denominator=30, min_value=-3, max_value=3),
                 min_size=s * (s - 1) // 2, max_size=s * (s - 1) // 2),
        st.lists(st.fractions(max_denominator=30, min_value=-3, max_value=3), min_size=s, max_size=s),
    )))
def test_dump_parse_roundtrip(data):
    s, lower, b = data
    a = [[Fr(0)] * s for _ in range(s)]
    it = iter(lower)
    for i in range(1, s):
        for j in range(i):
            a[i][j] = next(it)
    c = [sum(row) for row in a]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        tab = ButcherTableau.from_lists(a, b, c, name="t")
        back = parse_tableau(dump_tableau(tab))
    assert (back.a, back.b, back.c, back.name) == (tab.a, tab.b, tab.c, tab.name)
