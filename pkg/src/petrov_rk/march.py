"""Time marching of the semidiscrete heat equation.

:func:`variational_step` advances ``M u' + K u = F(t)`` with the stage
equations of the variational scheme, where every stage is a mass solve::

    M U_i = M U_1 - tau * sum_{j<i} a_ij (K U_j - F_j),   i = 2..s
    M u+  = M U_1 - tau * sum_i   b_i  (K U_i - F_i)

:func:`classical_rk_step` is the textbook explicit Runge-Kutta method applied
to ``u' = M^{-1}(F - K u)`` and serves as the oracle.  The two coincide up to
round-off; :func:`run` marches both and records the per-step difference.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.linalg as sla

from .butcher import ButcherTableau
from .fem1d import (
    Mesh1D,
    SemidiscreteSystem,
    assemble,
    assemble_mixed_mass,
    assemble_mixed_stiffness,
    l2_project,
    load_vector,
)

log = logging.getLogger(__name__)

__all__ = [
    "CASES",
    "ConvergenceRow",
    "ManufacturedCase",
    "MarchState",
    "RunReport",
    "amplification_polynomial",
    "classical_rk_step",
    "convergence_study",
    "equivalence_run",
    "manufactured_case",
    "max_eigenvalue",
    "run",
    "semidiscrete_solution",
    "stability_limit",
    "stable_tau",
    "variational_step",
    "write_convergence_csv",
    "write_run_csv",
]

_GX, _GW = np.polynomial.legendre.leggauss(5)


@dataclass
class MarchState:
    """Solution at the start of a step.

    ``stages`` holds the stage vectors of the step that produced ``u``;
    ``stages[0]`` is the previous ``u``.
    """

    k: int
    t: float
    u: np.ndarray
    tau: float
    stages: list = field(default_factory=list)


@dataclass
class RunReport:
    times: np.ndarray
    errors: np.ndarray  # max-norm difference to the oracle, per step
    rel_errors: np.ndarray
    final_u: np.ndarray
    oracle_u: Optional[np.ndarray] = None
    final_error_L2: float = math.nan
    observed_order: float = math.nan
    diverged: bool = False

    @property
    def max_error(self) -> float:
        return float(np.max(self.errors)) if self.errors.size else 0.0

    @property
    def max_rel_error(self) -> float:
        return float(np.max(self.rel_errors)) if self.rel_errors.size else 0.0


def _stage_loads(system: SemidiscreteSystem, c: np.ndarray, t: float, tau: float) -> list:
    return [system.load_at(t + ci * tau) for ci in c]


def _integral_load(system: SemidiscreteSystem, t: float, tau: float) -> np.ndarray:
    # time average of the load over [t, t + tau], 5-point Gauss
    ts = t + 0.5 * tau * (_GX + 1.0)
    return sum(0.5 * w * system.load_at(ti) for ti, w in zip(ts, _GW))


def variational_step(system: SemidiscreteSystem, tab: ButcherTableau, state: MarchState,
                     tau: float | None = None, next_system: SemidiscreteSystem | None = None,
                     source: str = "sampled") -> MarchState:
    """One step of the variational scheme.

    Parameters
    ----------
    system : SemidiscreteSystem
        Spatial discretisation of the current step (stages live here).
    tab : ButcherTableau
    state : MarchState
    tau : float, optional
        Step size; defaults to ``state.tau``.
    next_system : SemidiscreteSystem, optional
        Discretisation of the next step on a nested mesh.  The final update
        is then tested against the new space with mixed mass and stiffness
        matrices.
    source : {"sampled", "integral"}
        ``"integral"`` replaces the sampled load by its time average over the
        step; only defined for one-stage tableaus.
    """
    tau = state.tau if tau is None else float(tau)
    a, b, c = tab.arrays()
    s = tab.s
    if source == "integral":
        if s != 1:
            raise ValueError("the integral source option is only defined for s = 1")
        loads = [_integral_load(system, state.t, tau)]
    elif source == "sampled":
        loads = _stage_loads(system, c, state.t, tau)
    else:
        raise ValueError(f"unknown source option {source!r}")

    U = [state.u]
    MU1 = system.M @ state.u
    R = [system.K @ state.u - loads[0]]  # K U_j - F_j
    for i in range(1, s):
        rhs = MU1.copy()
        for j in range(i):
            if a[i, j] != 0.0:
                rhs -= tau * a[i, j] * R[j]
        U.append(system.solve_mass(rhs))
        R.append(system.K @ U[i] - loads[i])

    if next_system is None:
        rhs = MU1.copy()
        for i in range(s):
            rhs -= tau * b[i] * R[i]
        u_new = system.solve_mass(rhs)
    else:
        new_mesh, old_mesh = next_system.mesh, system.mesh
        M_mix = assemble_mixed_mass(new_mesh, old_mesh)
        K_mix = assemble_mixed_stiffness(new_mesh, old_mesh)
        new_loads = _stage_loads(next_system, c, state.t, tau)
        rhs = M_mix @ state.u
        for i in range(s):
            rhs -= tau * b[i] * (K_mix @ U[i] - new_loads[i])
        u_new = next_system.solve_mass(rhs)
    return MarchState(state.k + 1, state.t + tau, u_new, tau, U)


def classical_rk_step(system: SemidiscreteSystem, tab: ButcherTableau, state: MarchState,
                      tau: float | None = None) -> MarchState:
    """Textbook explicit Runge-Kutta step for ``u' = M^{-1}(F - K u)``."""
    tau = state.tau if tau is None else float(tau)
    a, b, c = tab.arrays()
    s = tab.s
    loads = _stage_loads(system, c, state.t, tau)
    U, slopes = [], []
    for i in range(s):
        Ui = state.u.copy()
        for j in range(i):
            if a[i, j] != 0.0:
                Ui += tau * a[i, j] * slopes[j]
        U.append(Ui)
        slopes.append(system.solve_mass(loads[i] - system.K @ Ui))
    u_new = state.u.copy()
    for i in range(s):
        u_new += tau * b[i] * slopes[i]
    return MarchState(state.k + 1, state.t + tau, u_new, tau, U)


def run(system: SemidiscreteSystem, tab: ButcherTableau, t_end: float, n_steps: int,
        u0: np.ndarray, oracle: bool = True, t0: float = 0.0,
        divergence_factor: float = 1e6) -> RunReport:
    """March from ``t0`` to ``t_end`` with uniform steps.

    With ``oracle=True`` the classical scheme runs alongside and the
    per-step max-norm difference is recorded.  The march stops early, with
    ``diverged`` set, once the solution norm exceeds `divergence_factor`
    times its initial value.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be at least 1")
    tau = (t_end - t0) / n_steps
    u0 = np.asarray(u0, dtype=float)
    norm0 = max(np.linalg.norm(u0), np.finfo(float).tiny)
    var = MarchState(0, t0, u0.copy(), tau)
    ref = MarchState(0, t0, u0.copy(), tau)
    times, errs, rels = [], [], []
    diverged = False
    for _ in range(n_steps):
        var = variational_step(system, tab, var)
        times.append(var.t)
        if oracle:
            ref = classical_rk_step(system, tab, ref)
            diff = float(np.max(np.abs(var.u - ref.u))) if var.u.size else 0.0
            scale = float(np.max(np.abs(ref.u))) if ref.u.size else 0.0
            errs.append(diff)
            rels.append(diff / scale if scale > 0 else diff)
        if not np.all(np.isfinite(var.u)) or np.linalg.norm(var.u) > divergence_factor * norm0:
            diverged = True
            log.warning("divergence at step %d (t = %g)", var.k, var.t)
            break
    return RunReport(
        times=np.array(times),
        errors=np.array(errs),
        rel_errors=np.array(rels),
        final_u=var.u,
        oracle_u=ref.u if oracle else None,
        diverged=diverged,
    )


# -- stability ---------------------------------------------------------------

def amplification_polynomial(tab: ButcherTableau) -> np.ndarray:
    """Ascending coefficients of ``R(z)`` for ``u' = -lambda u``, ``z = lambda tau``.

    ``R(z) = 1 + sum_k (-z)^k b^T A^(k-1) 1``.
    """
    a, b, _ = tab.arrays()
    coeffs = [1.0]
    v = np.ones(tab.s)
    for k in range(1, tab.s + 1):
        coeffs.append((-1) ** k * float(b @ v))
        v = a @ v
    return np.array(coeffs)


def stability_limit(tab: ButcherTableau, z_max: float = 50.0) -> float:
    """Largest ``r`` with ``|R(z)| <= 1`` for all real ``z`` in ``[0, r]``."""
    R = np.polynomial.Polynomial(amplification_polynomial(tab))
    grid = np.linspace(0.0, z_max, 200_001)
    bad = np.nonzero(np.abs(R(grid)) > 1.0 + 1e-12)[0]
    bad = bad[bad > 0]
    if bad.size == 0:
        return z_max
    lo, hi = grid[bad[0] - 1], grid[bad[0]]
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if abs(R(mid)) <= 1.0:
            lo = mid
        else:
            hi = mid
    return lo


def max_eigenvalue(system: SemidiscreteSystem) -> float:
    """Largest eigenvalue of ``M^{-1} K``."""
    M, K = system.dense()
    n = M.shape[0]
    return float(sla.eigh(K, M, eigvals_only=True, subset_by_index=[n - 1, n - 1])[0])


def stable_tau(system: SemidiscreteSystem, tab: ButcherTableau, safety: float = 0.5) -> float:
    return safety * stability_limit(tab) / max_eigenvalue(system)


# -- manufactured solutions --------------------------------------------------

@dataclass(frozen=True)
class ManufacturedCase:
    """Separable solution ``u = exp(-mu t) sin(m pi x)`` on [0, 1].

    The source is ``f = u_t - u_xx = (kappa - mu) exp(-mu t) sin(m pi x)``
    with ``kappa = (m pi)**2``; ``mu = kappa`` gives the unforced mode.
    """

    name: str
    m: int
    mu: float
    t_end: float

    @property
    def kappa(self) -> float:
        return (self.m * math.pi) ** 2

    def shape(self, x):
        return np.sin(self.m * np.pi * x)

    def amplitude(self, t: float) -> float:
        """Time factor of the source."""
        return (self.kappa - self.mu) * math.exp(-self.mu * t)

    def u(self, x, t):
        return np.exp(-self.mu * t) * self.shape(x)

    def f(self, x, t):
        return self.amplitude(t) * self.shape(x)

    @property
    def forced(self) -> bool:
        return self.kappa != self.mu


CASES = {
    # the textbook e^{-t} sin(pi x) case; far too slow for a temporal study
    # on a fine mesh because the explicit step is bounded by h^2
    "decay": dict(m=1, mu=1.0, t_end=1.0),
    "free-decay": dict(m=1, mu=math.pi ** 2, t_end=0.1),
    # a resolved high mode with kappa*tau = O(1) at stable step sizes
    "high-mode": dict(m=200, mu=0.5 * (200 * math.pi) ** 2, t_end=8e-6),
}


def manufactured_case(name: str, **overrides) -> ManufacturedCase:
    try:
        params = dict(CASES[name])
    except KeyError:
        raise KeyError(f"unknown case {name!r}; known: {', '.join(CASES)}") from None
    params.update(overrides)
    return ManufacturedCase(name, int(params["m"]), float(params["mu"]), float(params["t_end"]))


def semidiscrete_solution(system: SemidiscreteSystem, case: ManufacturedCase, u0: np.ndarray,
                          t_end: float | None = None, eig=None) -> np.ndarray:
    """Exact solution of ``M w' + K w = F(t)`` at `t_end` for a separable case.

    Uses the ``M``-orthonormal eigenpairs of ``(K, M)``; the source integral
    against each mode is evaluated in closed form.
    """
    T = case.t_end if t_end is None else t_end
    if eig is None:
        M, K = system.dense()
        eig = sla.eigh(K, M)
    lam, V = eig
    coef = V.T @ (system.M @ u0)
    out = np.exp(-lam * T) * coef
    if case.forced:
        L = load_vector(system.mesh, case.shape)
        x = (lam - case.mu) * T
        # int_0^T exp(-lam (T-s)) exp(-mu s) ds = exp(-mu T) T (1 - exp(-x))/x
        with np.errstate(divide="ignore", invalid="ignore"):
            phi = np.where(np.abs(x) < 1e-12, 1.0, -np.expm1(-x) / x)
        out += (V.T @ L) * (case.kappa - case.mu) * math.exp(-case.mu * T) * T * phi
    return V @ out


# -- studies -----------------------------------------------------------------

@dataclass
class ConvergenceRow:
    level: int
    n_steps: int
    tau: float
    h: float
    error_L2: float
    observed_order: float


def convergence_study(tab: ButcherTableau, case: ManufacturedCase | str = "high-mode",
                      refinements: Sequence[int] = (16, 32, 64, 128, 256),
                      n_elements: int = 512, lumped: bool = False,
                      reference: str = "semidiscrete") -> list[ConvergenceRow]:
    """Final-time L2 error for a sequence of uniform step counts.

    Parameters
    ----------
    reference : {"semidiscrete", "exact"}
        ``"semidiscrete"`` compares with the exact solution of the spatially
        discrete system, which isolates the temporal error.  ``"exact"``
        compares with the L2 projection of the exact solution and therefore
        also contains the (tau independent) spatial error.
    """
    if isinstance(case, str):
        case = manufactured_case(case)
    mesh = Mesh1D(n_elements)
    system = assemble(mesh, case.f if case.forced else None, lumped=lumped)
    mass = assemble(mesh).M
    u0 = l2_project(mesh, lambda x: case.u(x, 0.0))
    if reference == "semidiscrete":
        target = semidiscrete_solution(system, case, u0)
    elif reference == "exact":
        target = l2_project(mesh, lambda x: case.u(x, case.t_end))
    else:
        raise ValueError(f"unknown reference {reference!r}")
    tau_ok = stable_tau(system, tab, safety=1.0)
    rows: list[ConvergenceRow] = []
    prev = None
    for level, n in enumerate(refinements):
        tau = case.t_end / n
        if tau > tau_ok:
            log.warning("level %d: tau = %.3g exceeds the stability limit %.3g", level, tau, tau_ok)
        rep = run(system, tab, case.t_end, n, u0, oracle=False)
        e = rep.final_u - target
        err = float(np.sqrt(e @ (mass @ e)))
        order = math.log2(prev / err) if prev is not None and err > 0 else math.nan
        rows.append(ConvergenceRow(level, n, tau, float(mesh.h.max()), err, order))
        prev = err
    return rows


def equivalence_run(tab: ButcherTableau, dofs: int = 20, steps: int = 100, seed: int = 0,
                    forced: bool = False, lumped: bool = False, safety: float = 0.5,
                    dump=None) -> RunReport:
    """Variational versus classical stepping on the heat semidiscretisation.

    The initial state is the projection of ``sin(pi x)`` plus seeded noise
    so that every discrete mode is excited; ``forced`` switches on the
    source of the ``decay`` manufactured case.
    """
    mesh = Mesh1D(dofs + 1)
    source = manufactured_case("decay").f if forced else None
    system = assemble(mesh, source, lumped=lumped)
    if dump is not None:
        system.dump(dump)
    rng = np.random.default_rng(seed)
    u0 = l2_project(mesh, lambda x: np.sin(np.pi * x)) + 0.1 * rng.standard_normal(dofs)
    tau = stable_tau(system, tab, safety)
    return run(system, tab, steps * tau, steps, u0, oracle=True)


def write_convergence_csv(rows: Sequence[ConvergenceRow], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["level", "tau", "h", "error_L2", "observed_order"])
        for r in rows:
            w.writerow([r.level, repr(r.tau), repr(r.h), repr(r.error_L2),
                        "" if math.isnan(r.observed_order) else repr(r.observed_order)])


def write_run_csv(report: RunReport, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "t", "diff_vs_oracle"])
        for k, (t, e) in enumerate(zip(report.times, report.errors), start=1):
            w.writerow([k, repr(float(t)), repr(float(e))])
