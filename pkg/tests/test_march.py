import csv
import math
from fractions import Fraction as Fr

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from petrov_rk.basis import recovered_tableau
from petrov_rk.butcher import registry_get, rk2_alpha
from petrov_rk.fem1d import Mesh1D, SemidiscreteSystem, assemble, l2_project, prolongation
from petrov_rk.fixtures import FIXTURES
from petrov_rk.march import (
    MarchState,
    amplification_polynomial,
    classical_rk_step,
    convergence_study,
    manufactured_case,
    max_eigenvalue,
    run,
    semidiscrete_solution,
    stability_limit,
    variational_step,
    write_convergence_csv,
    write_run_csv,
)

NAMES = ["forward-euler", "explicit-trapezoidal", "explicit-midpoint", "rk3-classic", "rk4-classic"]


def random_system(seed, n, forced=False):
    rng = np.random.default_rng(seed)
    Q = rng.normal(size=(n, n))
    B = rng.normal(size=(n, n))
    M = Q @ Q.T + n * np.eye(n)
    K = B @ B.T
    load = None
    if forced:
        v, w = rng.normal(size=n), rng.normal(size=n)
        load = lambda t: v * np.cos(3 * t) + w * t  # noqa: E731
    return SemidiscreteSystem.from_matrices(M, K, load), rng.normal(size=n)


def scalar_step(tab, z):
    sys = SemidiscreteSystem.from_matrices([[1.0]], [[z]])
    return classical_rk_step(sys, tab, MarchState(0, 0.0, np.array([1.0]), 1.0)).u[0]


def test_forward_euler_closed_form():
    mesh = Mesh1D(11)
    sys = assemble(mesh, lambda x, t: np.sin(3 * x) + t)
    u0 = l2_project(mesh, lambda x: x * (1 - x))
    tau = 1e-3
    new = variational_step(sys, registry_get("forward-euler"), MarchState(0, 0.2, u0, tau))
    expect = u0 - tau * sys.solve_mass(sys.K @ u0 - sys.load_at(0.2))
    np.testing.assert_allclose(new.u, expect, rtol=1e-14, atol=1e-16)


@pytest.mark.parametrize("name", NAMES)
def test_no_dynamics_no_change(name):
    n = 6
    sys = SemidiscreteSystem.from_matrices(np.eye(n) * 2 + 0.5 * np.eye(n, k=1) + 0.5 * np.eye(n, k=-1),
                                           np.zeros((n, n)))
    u0 = np.arange(1.0, n + 1)
    new = variational_step(sys, registry_get(name), MarchState(0, 0.0, u0, 0.7))
    np.testing.assert_allclose(new.u, u0, rtol=1e-15)
    assert np.array_equal(new.stages[0], u0)


def test_rk4_random_system_matches_oracle():
    sys, u0 = random_system(0, 5)
    tab = registry_get("rk4-classic")
    st0 = MarchState(0, 0.0, u0, 0.05)
    a, b = variational_step(sys, tab, st0).u, classical_rk_step(sys, tab, st0).u
    assert np.max(np.abs(a - b)) <= 1e-13 * np.max(np.abs(b))


@pytest.mark.parametrize("name,coeffs", [
    ("forward-euler", [1, -1]),
    ("explicit-midpoint", [1, -1, 0.5]),
    ("explicit-trapezoidal", [1, -1, 0.5]),
    ("rk3-classic", [1, -1, 0.5, -1 / 6]),
    ("rk4-classic", [1, -1, 0.5, -1 / 6, 1 / 24]),
])
def test_amplification_factor(name, coeffs):
    tab = registry_get(name)
    np.testing.assert_allclose(amplification_polynomial(tab), coeffs, rtol=1e-15)
    for z in (0.1, 0.8, 2.3):
        assert scalar_step(tab, z) == pytest.approx(np.polynomial.polynomial.polyval(z, coeffs), rel=1e-14)


@pytest.mark.parametrize("name,limit", [
    ("forward-euler", 2.0), ("explicit-midpoint", 2.0), ("rk3-classic", 2.5127453266),
    ("rk4-classic", 2.7852935634),
])
def test_stability_limit(name, limit):
    assert stability_limit(registry_get(name)) == pytest.approx(limit, abs=1e-9)


tableaus = st.one_of(
    st.sampled_from(NAMES).map(registry_get),
    st.fractions(min_value=Fr(1, 10), max_value=3, max_denominator=20).map(rk2_alpha),
)


@settings(max_examples=60, deadline=None)
@given(tableaus, st.integers(0, 2 ** 32 - 1), st.integers(1, 10), st.floats(0.01, 1.0), st.booleans())
def test_equivalence_property(tab, seed, n, frac, forced):
    sys, u0 = random_system(seed, n, forced)
    tau = frac / max_eigenvalue(sys)
    var = cls = MarchState(0, 0.3, u0, tau)
    for _ in range(3):
        var, cls = variational_step(sys, tab, var), classical_rk_step(sys, tab, cls)
        assert np.max(np.abs(var.u - cls.u)) <= 1e-12 * max(np.max(np.abs(cls.u)), 1e-300)


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(NAMES), st.integers(0, 2 ** 32 - 1), st.floats(-3, 3), st.floats(-3, 3))
def test_linearity(name, seed, alpha, beta):
    tab = registry_get(name)
    sys, u = random_system(seed, 6)
    v = np.random.default_rng(seed + 1).normal(size=6)
    tau = 0.5 / max_eigenvalue(sys)
    step = lambda w: variational_step(sys, tab, MarchState(0, 0.0, w, tau)).u  # noqa: E731
    lhs = step(alpha * u + beta * v)
    rhs = alpha * step(u) + beta * step(v)
    scale = max(np.max(np.abs(lhs)), np.max(np.abs(rhs)), 1e-300)
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * scale + 1e-15 * (abs(alpha) + abs(beta)) * np.max(np.abs(u) + np.abs(v))


@pytest.mark.parametrize("name", NAMES[1:])
def test_first_order_consistency_richardson(name):
    tab = registry_get(name)
    sys, u0 = random_system(3, 8)
    lam = max_eigenvalue(sys)

    def defect(tau):
        u1 = variational_step(sys, tab, MarchState(0, 0.0, u0, tau)).u
        return np.linalg.norm(u1 - (u0 - tau * sys.solve_mass(sys.K @ u0)))

    tau = 0.05 / lam
    assert defect(tau) / defect(tau / 2) == pytest.approx(4.0, abs=0.3)


@pytest.mark.parametrize("fixture", [n for n in FIXTURES if "complex" not in n])
def test_recovered_tableau_steps_identically(fixture):
    pair = FIXTURES[fixture]()
    mesh = Mesh1D(9)
    sys = assemble(mesh, lambda x, t: np.exp(-t) * x)
    u0 = l2_project(mesh, lambda x: np.sin(np.pi * x))
    st0 = MarchState(0, 0.0, u0, 1e-3)
    a = variational_step(sys, pair.tableau, st0).u
    b = variational_step(sys, recovered_tableau(pair), st0).u
    assert np.array_equal(a, b)


def test_stage_zero_is_previous_solution():
    sys, u0 = random_system(5, 4)
    st1 = variational_step(sys, registry_get("rk4-classic"), MarchState(0, 0.0, u0, 0.01))
    assert np.array_equal(st1.stages[0], u0)
    assert len(st1.stages) == 4 and st1.k == 1 and st1.t == pytest.approx(0.01)


def test_run_requires_steps():
    sys, u0 = random_system(0, 3)
    with pytest.raises(ValueError):
        run(sys, registry_get("forward-euler"), 1.0, 0, u0)


def test_divergence_detected():
    mesh = Mesh1D(21)
    sys = assemble(mesh)
    u0 = l2_project(mesh, lambda x: np.sin(np.pi * x)) + 1e-3 * np.random.default_rng(0).normal(size=20)
    tau = 4.0 / max_eigenvalue(sys)
    rep = run(sys, registry_get("forward-euler"), 200 * tau, 200, u0, oracle=False)
    assert rep.diverged
    assert len(rep.times) < 200


def test_stable_run_not_flagged():
    mesh = Mesh1D(21)
    sys = assemble(mesh)
    u0 = l2_project(mesh, lambda x: np.sin(np.pi * x))
    tau = 1.0 / max_eigenvalue(sys)
    rep = run(sys, registry_get("forward-euler"), 100 * tau, 100, u0)
    assert not rep.diverged and rep.errors.size == 100


def test_integral_source_only_for_one_stage():
    sys, u0 = random_system(0, 3, forced=True)
    with pytest.raises(ValueError):
        variational_step(sys, registry_get("rk4-classic"), MarchState(0, 0.0, u0, 0.1), source="integral")
    with pytest.raises(ValueError):
        variational_step(sys, registry_get("forward-euler"), MarchState(0, 0.0, u0, 0.1), source="bogus")


def test_integral_source_equals_sampled_for_constant_load():
    n = 4
    sys = SemidiscreteSystem.from_matrices(np.eye(n), np.eye(n), lambda t: np.ones(n))
    st0 = MarchState(0, 0.0, np.zeros(n), 0.1)
    tab = registry_get("forward-euler")
    a = variational_step(sys, tab, st0, source="integral").u
    b = variational_step(sys, tab, st0).u
    np.testing.assert_allclose(a, b, rtol=1e-15)


@pytest.mark.parametrize("name", ["forward-euler", "rk4-classic"])
def test_dynamic_mesh_same_mesh_is_static(name):
    mesh = Mesh1D(8)
    sys = assemble(mesh, lambda x, t: x * t)
    u0 = l2_project(mesh, lambda x: x * (1 - x))
    st0 = MarchState(0, 0.1, u0, 1e-3)
    tab = registry_get(name)
    a = variational_step(sys, tab, st0).u
    b = variational_step(sys, tab, st0, next_system=assemble(Mesh1D(8), lambda x, t: x * t)).u
    np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-16)


def test_dynamic_mesh_refinement_transfers_exactly():
    coarse, fine = Mesh1D(4), Mesh1D(16)
    u0 = np.array([0.3, -1.0, 2.0])
    st0 = MarchState(0, 0.0, u0, 0.0)
    new = variational_step(assemble(coarse), registry_get("rk3-classic"), st0, next_system=assemble(fine))
    # with tau = 0 the update is the L2 projection, exact for nested spaces
    P = prolongation(coarse, fine)
    np.testing.assert_allclose(new.u, (P @ np.r_[0, u0, 0])[1:-1], atol=1e-14)


def test_dynamic_mesh_coarsening_is_projection():
    fine, coarse = Mesh1D(8), Mesh1D(4)
    f = lambda x: np.sin(np.pi * x)  # noqa: E731
    u_fine = l2_project(fine, f)
    new = variational_step(assemble(fine), registry_get("forward-euler"),
                           MarchState(0, 0.0, u_fine, 0.0), next_system=assemble(coarse)).u
    # projecting the fine projection onto the coarse space equals the coarse projection
    np.testing.assert_allclose(new, l2_project(coarse, f), atol=1e-14)


def test_semidiscrete_solution_against_fine_march():
    case = manufactured_case("decay", t_end=0.01)
    mesh = Mesh1D(16)
    sys = assemble(mesh, case.f)
    u0 = l2_project(mesh, lambda x: case.u(x, 0))
    ref = semidiscrete_solution(sys, case, u0)
    num = run(sys, registry_get("rk4-classic"), case.t_end, 200, u0, oracle=False).final_u
    assert np.max(np.abs(num - ref)) <= 1e-12


def test_unknown_case():
    with pytest.raises(KeyError):
        manufactured_case("nope")


def test_exact_reference_shows_spatial_floor():
    rows = convergence_study(registry_get("rk4-classic"), "high-mode", (16, 32), reference="exact")
    # the temporal error is invisible next to the spatial error of the high mode
    assert rows[0].error_L2 == pytest.approx(rows[1].error_L2, rel=1e-3)


def test_csv_outputs(tmp_path):
    rows = convergence_study(registry_get("explicit-midpoint"), "high-mode", (16, 32, 64), n_elements=256)
    write_convergence_csv(rows, tmp_path / "c.csv")
    data = list(csv.DictReader(open(tmp_path / "c.csv")))
    assert list(data[0]) == ["level", "tau", "h", "error_L2", "observed_order"]
    assert data[0]["observed_order"] == "" and math.isfinite(float(data[2]["observed_order"]))

    sys, u0 = random_system(0, 3)
    rep = run(sys, registry_get("rk4-classic"), 0.1, 5, u0)
    write_run_csv(rep, tmp_path / "r.csv")
    data = list(csv.reader(open(tmp_path / "r.csv")))
    assert data[0] == ["step", "t", "diff_vs_oracle"] and len(data) == 6
