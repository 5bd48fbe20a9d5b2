from fractions import Fraction as Fr

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from petrov_rk.basis import (
    BasisPair,
    CoefficientSystem,
    SolveOptions,
    certify_tables,
    check_conditions,
    format_basis,
    jacobian,
    parse_basis,
    recovered_tableau,
    residual,
    solve,
    solve_report,
)
from petrov_rk.butcher import registry_get, rk2_alpha
from petrov_rk.fixtures import FIXTURES, rk2_solution_1, rk2_solution_2

RATIONAL = [n for n in FIXTURES if "complex" not in n]
COMPLEX = [n for n in FIXTURES if "complex" in n]


@pytest.mark.parametrize("name", RATIONAL)
def test_rational_fixture_exact(name):
    pair = FIXTURES[name]()
    assert pair.mode == "rational"
    assert residual(pair).norm == 0
    assert check_conditions(pair).norm == 0


@pytest.mark.parametrize("name", COMPLEX)
def test_complex_fixture(name):
    pair = FIXTURES[name]()
    assert residual(pair).norm <= 1e-10
    assert check_conditions(pair).norm <= 1e-10
    assert not pair.is_real()


def test_complex_fixtures_conjugate():
    a, b = FIXTURES["rk3/complex-3"](), FIXTURES["rk3/complex-4"]()
    np.testing.assert_array_equal(a.C.conj(), b.C)


@pytest.mark.parametrize("alpha", [Fr(1), Fr(1, 2), Fr(3), Fr(-2, 5)])
@pytest.mark.parametrize("build", [rk2_solution_1, rk2_solution_2])
def test_rk2_solutions_for_any_alpha(alpha, build):
    assert residual(build(alpha)).norm == 0


def test_endpoint_conditions_of_rk2_solution():
    pair = rk2_solution_1(1)
    trial, test = pair.trial(), pair.test()
    assert [p(1) for p in trial] == [0, 1]
    assert [p(0) for p in trial] == [1, 0]
    assert [p(1) for p in test] == [1, 0]


@pytest.mark.parametrize("name", list(FIXTURES))
def test_matrix_form_equals_condition_form(name):
    pair = FIXTURES[name]().to_float("complex")
    np.testing.assert_allclose(residual(pair).vector(), check_conditions(pair).vector(), atol=1e-11)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 4), st.integers(0, 4), st.integers(0, 2 ** 32 - 1))
def test_condition_oracle_on_random_pairs(s, d, seed):
    rng = np.random.default_rng(seed)
    tab = registry_get(["forward-euler", "explicit-midpoint", "rk3-classic", "rk4-classic"][s - 1])
    pair = BasisPair(rng.normal(size=(s, d + 1)), rng.normal(size=(s, d + 1)), tab, "real")
    a, b = residual(pair).vector(), check_conditions(pair).vector()
    np.testing.assert_allclose(a, b, atol=1e-10 * (1 + np.abs(a).max()))
    # the flattened kernel uses the same ordering
    np.testing.assert_allclose(CoefficientSystem.from_tableau(tab, d).residual(pair.vector()), a, atol=1e-10)


@pytest.mark.parametrize("s,d", [(1, 0), (2, 2), (3, 3), (4, 4), (3, 1)])
def test_jacobian_matches_finite_differences(s, d):
    tab = registry_get(["forward-euler", "explicit-midpoint", "rk3-classic", "rk4-classic"][s - 1])
    system = CoefficientSystem.from_tableau(tab, d)
    rng = np.random.default_rng(s * 10 + d)
    h = 1e-6
    for _ in range(10):
        x = rng.uniform(-1, 1, system.n_unknowns)
        J = system.jacobian(x)
        fd = np.empty_like(J)
        for k in range(x.size):
            e = np.zeros_like(x)
            e[k] = h
            fd[:, k] = (system.residual(x + e) - system.residual(x - e)) / (2 * h)
        assert np.linalg.norm(J - fd) <= 1e-6 * np.linalg.norm(J)


def test_jacobian_needs_floating_pair():
    with pytest.raises(ValueError):
        jacobian(rk2_solution_1(1))
    assert jacobian(rk2_solution_1(1).to_float()).shape == (12, 12)


def test_solutions_are_singular_roots():
    # every known solution is a multiple root of the square two-stage system
    J = jacobian(rk2_solution_2(1).to_float())
    assert np.linalg.matrix_rank(J) < 12


def test_extended_precision_residual_matches():
    pair = FIXTURES["rk3/real-2"]().to_float()
    system = CoefficientSystem.from_tableau(pair.tableau, pair.d)
    rng = np.random.default_rng(1)
    x = pair.vector() + 1e-3 * rng.normal(size=pair.vector().size)
    with mpmath.workdps(40):
        X = np.array([mpmath.mpf(v) for v in x], dtype=object)
        r = np.array([float(v) for v in system.residual_mp(X)])
    np.testing.assert_allclose(r, system.residual(x), atol=1e-12)


@pytest.mark.parametrize("name", list(FIXTURES))
def test_basis_file_roundtrip(name):
    pair = FIXTURES[name]()
    back = parse_basis(format_basis(pair))
    assert back.mode == pair.mode
    assert back.tableau.a == pair.tableau.a and back.tableau.b == pair.tableau.b
    if pair.mode == "rational":
        assert back.C.tolist() == pair.C.tolist() and back.D.tolist() == pair.D.tolist()
    else:
        assert back.distance(pair) == 0.0


def test_parse_basis_shape_error():
    text = format_basis(rk2_solution_1(1)).replace("C = 1, -1, 0; 0, 1, 0", "C = 1, -1; 0, 1")
    with pytest.raises(ValueError):
        parse_basis(text)


@pytest.mark.parametrize("name", RATIONAL)
def test_recovered_tableau(name):
    pair = FIXTURES[name]()
    tab = recovered_tableau(pair)
    assert tab.a == pair.tableau.a and tab.b == pair.tableau.b


def test_certify_tables_and_negative_control():
    results = certify_tables()
    assert len(results) == len(FIXTURES) and all(r.passed for r in results)
    bad = certify_tables(corrupt="rk4/solution-1")
    assert [r.name for r in bad if not r.passed] == ["rk4/solution-1"]
    with pytest.raises(KeyError):
        certify_tables(corrupt="nope")


def test_solve_forward_euler():
    sols = solve(registry_get("forward-euler"), 0, SolveOptions(starts=10))
    assert len(sols) == 1
    assert sols[0].C.tolist() == [[1]] and sols[0].D.tolist() == [[1]]


def test_solve_explicit_midpoint_finds_both_tables():
    rep = solve_report(rk2_alpha(Fr(1, 2)), 2, SolveOptions(starts=80, seed=3))
    assert len(rep.solutions) == 2
    assert all(p.mode == "rational" for p in rep.solutions)
    known = [rk2_solution_1(Fr(1, 2)), rk2_solution_2(Fr(1, 2))]
    for k in known:
        assert any(p.C.tolist() == k.C.tolist() and p.D.tolist() == k.D.tolist() for p in rep.solutions)


def test_solve_is_deterministic():
    tab = rk2_alpha(1)
    a = solve(tab, 2, SolveOptions(starts=30, seed=11))
    b = solve(tab, 2, SolveOptions(starts=30, seed=11))
    assert [format_basis(p) for p in a] == [format_basis(p) for p in b]


def test_solve_options_validated():
    with pytest.raises(ValueError):
        SolveOptions(mode="rational")
    with pytest.raises(ValueError):
        SolveOptions(starts=0)


def test_pair_shape_validation():
    with pytest.raises(ValueError):
        BasisPair(np.zeros((2, 3)), np.zeros((2, 2)), rk2_alpha(1), "real")
    with pytest.raises(ValueError):
        BasisPair(np.zeros((3, 3)), np.zeros((3, 3)), rk2_alpha(1), "real")
