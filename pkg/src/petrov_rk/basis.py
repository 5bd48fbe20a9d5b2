"""Trial/test bases for the variational form of explicit Runge-Kutta methods.

A basis pair stores two ``s x (d+1)`` coefficient matrices: row ``i`` of ``C``
holds the ascending coefficients of the trial polynomial ``phi_i`` and row
``j`` of ``D`` those of the test polynomial ``psi_j`` on [0, 1].  The pair
reproduces a tableau ``(a, b)`` when

    C e1 = e1,  D 1 = e1,  D A C^T - B C^T = E,  D F C^T = G

with the moment matrices ``A`` and ``F`` from :mod:`petrov_rk.poly`, ``B`` the
matrix whose first row is all ones, ``E`` the identity with its first column
replaced by ``-1`` and ``G`` from :func:`petrov_rk.butcher.matrix_G`.

The system is bilinear in ``(C, D)``.  Its solutions are typically *multiple*
roots (the Jacobian is singular there), which limits plain floating Newton to
roughly the cube root of machine precision.  :func:`solve` therefore runs the
floating multi-start, groups converged points, refines one point per group
with an extrapolated Newton iteration in extended precision and only then
deduplicates and snaps to rationals.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import mpmath
import numpy as np

from .butcher import ButcherTableau, dump_tableau, from_G, matrix_G, parse_tableau
from .poly import Polynomial, derivative, evaluate, integrate_product, matrix_A, matrix_F

log = logging.getLogger(__name__)

__all__ = [
    "BasisPair",
    "CoefficientSystem",
    "ConditionResidual",
    "SingularJacobianError",
    "SolveOptions",
    "SolveReport",
    "certify_tables",
    "check_conditions",
    "format_basis",
    "jacobian",
    "parse_basis",
    "rational_polish",
    "read_basis",
    "recovered_tableau",
    "residual",
    "solve",
    "solve_report",
    "write_basis",
]


class SingularJacobianError(RuntimeError):
    """Raised when the Jacobian is rank deficient at every start."""


# ---------------------------------------------------------------------------
# data types


@dataclass
class BasisPair:
    """Coefficient matrices of a trial/test basis.

    Attributes
    ----------
    C, D : ndarray, shape (s, d+1)
        Trial and test coefficients (object arrays of ``Fraction`` in
        rational mode, float or complex arrays otherwise).
    tableau : ButcherTableau
    mode : {"rational", "real", "complex"}
    """

    C: np.ndarray
    D: np.ndarray
    tableau: ButcherTableau
    mode: str = "rational"

    def __post_init__(self):
        if self.mode == "rational":
            self.C = _as_fraction_array(self.C)
            self.D = _as_fraction_array(self.D)
        else:
            dtype = float if self.mode == "real" else complex
            self.C = np.asarray(self.C, dtype=dtype)
            self.D = np.asarray(self.D, dtype=dtype)
        if self.C.ndim != 2 or self.C.shape != self.D.shape:
            raise ValueError(f"C and D must share a 2-d shape, got {self.C.shape} and {self.D.shape}")
        if self.C.shape[0] != self.tableau.s:
            raise ValueError(f"{self.C.shape[0]} basis rows for a {self.tableau.s}-stage tableau")

    @property
    def s(self) -> int:
        return self.C.shape[0]

    @property
    def d(self) -> int:
        return self.C.shape[1] - 1

    def trial(self) -> list[Polynomial]:
        return [Polynomial(list(row), self.mode) for row in self.C]

    def test(self) -> list[Polynomial]:
        return [Polynomial(list(row), self.mode) for row in self.D]

    def to_float(self, mode: str | None = None) -> "BasisPair":
        """Floating copy; the mode defaults to ``"real"`` for rational pairs."""
        if mode is None:
            mode = "real" if self.mode == "rational" else self.mode
        dtype = float if mode == "real" else complex
        conv = (lambda a: np.array([[dtype(v) for v in row] for row in a], dtype=dtype))
        return BasisPair(conv(self.C), conv(self.D), self.tableau, mode)

    def conjugate(self) -> "BasisPair":
        if self.mode != "complex":
            return self
        return BasisPair(self.C.conj(), self.D.conj(), self.tableau, "complex")

    def vector(self) -> np.ndarray:
        """Flattened unknown vector ``[C.ravel(), D.ravel()]``."""
        return np.concatenate([self.C.ravel(), self.D.ravel()])

    def distance(self, other: "BasisPair") -> float:
        """Maximum absolute coefficient difference."""
        a = self.to_float("complex").vector()
        b = other.to_float("complex").vector()
        return float(np.max(np.abs(a - b)))

    def is_real(self) -> bool:
        return self.mode != "complex" or not np.any(self.C.imag) and not np.any(self.D.imag)


def _as_fraction_array(a) -> np.ndarray:
    a = np.asarray(a, dtype=object)
    out = np.empty(a.shape, dtype=object)
    for idx, v in np.ndenumerate(a):
        if isinstance(v, (float, complex)):
            raise TypeError("rational basis pairs need exact entries")
        out[idx] = Fraction(v)
    return out


@dataclass
class ConditionResidual:
    """Residual blocks of the coefficient system.

    ``norm`` is the maximum absolute entry over all blocks (a ``Fraction``
    in rational mode).
    """

    r_endpoint_trial: np.ndarray
    r_endpoint_test: np.ndarray
    r_derivative: np.ndarray
    r_integral: np.ndarray
    norm: object

    def certified(self, tol: float = 0.0) -> bool:
        return self.norm <= tol

    def vector(self) -> np.ndarray:
        return np.concatenate([
            np.ravel(self.r_endpoint_trial), np.ravel(self.r_endpoint_test),
            np.ravel(self.r_derivative), np.ravel(self.r_integral),
        ])


def _max_abs(blocks) -> object:
    m = 0
    for blk in blocks:
        for v in np.ravel(blk):
            m = max(m, abs(v))
    return m if isinstance(m, Fraction) else (Fraction(m) if isinstance(m, int) else float(m))


def system_matrices(s: int, d: int, mode: str = "rational"):
    """Return ``(A, F, B, E)`` for `s` stages and degree `d`."""
    A = matrix_A(d, mode)
    F = matrix_F(d, mode)
    if mode == "rational":
        B = np.full((s, d + 1), Fraction(0), dtype=object)
        B[0, :] = Fraction(1)
        E = np.full((s, s), Fraction(0), dtype=object)
        for i in range(s):
            E[i, i] = Fraction(1)
        E[:, 0] = Fraction(-1)
    else:
        B = np.zeros((s, d + 1))
        B[0, :] = 1.0
        E = np.eye(s)
        E[:, 0] = -1.0
    return A, F, B, E


def residual(pair: BasisPair) -> ConditionResidual:
    """Evaluate the four residual blocks of the matrix-form system."""
    s, d = pair.s, pair.d
    A, F, B, E = system_matrices(s, d, pair.mode)
    G = matrix_G(pair.tableau)
    if pair.mode != "rational":
        G = G.astype(float)
    C, D = pair.C, pair.D
    if pair.mode == "rational":
        e1 = np.array([Fraction(int(i == 0)) for i in range(s)], dtype=object)
    else:
        e1 = np.eye(s)[0]
    blocks = (
        C[:, 0] - e1,
        D.sum(axis=1) - e1,
        D.dot(A).dot(C.T) - B.dot(C.T) - E,
        D.dot(F).dot(C.T) - G,
    )
    return ConditionResidual(*blocks, norm=_max_abs(blocks))


def recovered_tableau(pair: BasisPair) -> ButcherTableau:
    """Tableau read back from a basis through ``G = D F C^T``.

    Only exact (rational) pairs are supported; ``c`` is taken from the pair's
    own tableau since the basis does not determine it.
    """
    if pair.mode != "rational":
        raise ValueError("recovered_tableau needs a rational basis pair")
    F = matrix_F(pair.d, "rational")
    G = pair.D.dot(F).dot(pair.C.T)
    return from_G(G.tolist(), pair.tableau.c, name=f"{pair.tableau.name} (recovered)")


def check_conditions(pair: BasisPair) -> ConditionResidual:
    """Evaluate every condition one by one with polynomial arithmetic.

    This is an independent oracle for :func:`residual`: it never forms the
    moment matrices and instead integrates products of the basis polynomials.
    The block layout matches :func:`residual` entry for entry.
    """
    s = pair.s
    mode = pair.mode
    phi, psi = pair.trial(), pair.test()
    dphi = [derivative(p) for p in phi]
    G = matrix_G(pair.tableau)
    one = Fraction(1) if mode == "rational" else (1.0 if mode == "real" else 1 + 0j)
    zero = one * 0
    dtype = object if mode == "rational" else (float if mode == "real" else complex)
    delta = lambda i, j: one if i == j else zero  # noqa: E731

    r_trial = np.array([evaluate(phi[i], 0) - delta(i, 0) for i in range(s)], dtype=dtype)
    r_test = np.array([evaluate(psi[j], 1) - delta(j, 0) for j in range(s)], dtype=dtype)
    r_der = np.empty((s, s), dtype=dtype)
    r_int = np.empty((s, s), dtype=dtype)
    for j in range(s):
        for i in range(s):
            pairing = integrate_product(psi[j], dphi[i])
            if j == 0:
                # first test function: jump term enters, target is -1 for i = 1
                r_der[j, i] = pairing - evaluate(phi[i], 1) + delta(i, 0)
            elif i == 0:
                r_der[j, i] = pairing + one
            else:
                r_der[j, i] = pairing - delta(i, j)
            g = G[j, i] if mode == "rational" else type(one)(G[j, i])
            r_int[j, i] = integrate_product(psi[j], phi[i]) - g
    blocks = (r_trial, r_test, r_der, r_int)
    return ConditionResidual(*blocks, norm=_max_abs(blocks))


# ---------------------------------------------------------------------------
# floating and extended-precision kernels


class CoefficientSystem:
    """The coefficient system as a map from the flattened unknown vector.

    Parameters
    ----------
    G : array_like, shape (s, s)
        Right-hand side of the integral block (exact entries are kept for the
        extended-precision kernels).
    d : int
        Polynomial degree.
    """

    def __init__(self, G, d: int):
        G = np.asarray(G, dtype=object)
        self.s = s = G.shape[0]
        self.d = d
        self.G_exact = np.array([[Fraction(v) for v in row] for row in G], dtype=object)
        self.G = self.G_exact.astype(float)
        self.A, self.F, self.B, self.E = system_matrices(s, d, "real")
        self.nc = s * (d + 1)
        self.n_unknowns = 2 * self.nc
        self.n_equations = 2 * s + 2 * s * s
        self._e1 = np.eye(s)[0]
        self._mp_cache = {}

    @classmethod
    def from_tableau(cls, tab: ButcherTableau, d: int) -> "CoefficientSystem":
        return cls(matrix_G(tab), d)

    def split(self, x):
        s, d = self.s, self.d
        return x[: self.nc].reshape(s, d + 1), x[self.nc:].reshape(s, d + 1)

    def residual(self, x: np.ndarray) -> np.ndarray:
        C, D = self.split(x)
        return np.concatenate([
            C[:, 0] - self._e1,
            D.sum(axis=1) - self._e1,
            (D @ self.A @ C.T - self.B @ C.T - self.E).ravel(),
            (D @ self.F @ C.T - self.G).ravel(),
        ])

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        s, d, nc = self.s, self.d, self.nc
        C, D = self.split(x)
        eye = np.eye(s)
        J = np.zeros((self.n_equations, self.n_unknowns), dtype=np.result_type(x, float))
        for i in range(s):
            J[i, i * (d + 1)] = 1.0
            J[s + i, nc + i * (d + 1): nc + (i + 1) * (d + 1)] = 1.0
        r0 = 2 * s
        for P, Q in ((D @ self.A - self.B, self.A @ C.T), (D @ self.F, self.F @ C.T)):
            # d/dC[i', n] of (D M C^T)[j, i] is delta(i, i') (D M)[j, n]
            J[r0: r0 + s * s, :nc] = np.einsum("ik,jn->jikn", eye, P).reshape(s * s, nc)
            # d/dD[j', m] of (D M C^T)[j, i] is delta(j, j') (M C^T)[m, i]
            J[r0: r0 + s * s, nc:] = np.einsum("jl,mi->jilm", eye, Q).reshape(s * s, nc)
            r0 += s * s
        return J

    # extended precision ---------------------------------------------------

    def _mp_mats(self):
        key = mpmath.mp.prec
        if key not in self._mp_cache:
            s, d = self.s, self.d
            mpf = mpmath.mpf
            A = np.array([[mpf(0) if n == 0 else mpf(n) / (m + n) for n in range(d + 1)]
                          for m in range(d + 1)], dtype=object)
            F = np.array([[mpf(1) / (m + n + 1) for n in range(d + 1)] for m in range(d + 1)],
                         dtype=object)
            G = np.array([[mpf(g.numerator) / g.denominator for g in row] for row in self.G_exact],
                         dtype=object)
            self._mp_cache[key] = (A, F, G)
        return self._mp_cache[key]

    def residual_mp(self, X: np.ndarray) -> np.ndarray:
        """Residual of an object array of mpmath numbers."""
        A, F, G = self._mp_mats()
        s = self.s
        C, D = self.split(X)
        out = np.empty(self.n_equations, dtype=object)
        out[:s] = C[:, 0]
        out[0] -= 1
        out[s: 2 * s] = D.sum(axis=1)
        out[s] -= 1
        DA = D.dot(A)
        der = DA.dot(C.T)
        der[0, :] -= C.sum(axis=1)
        der[:, 0] += 1
        der[1:, 1:] -= np.eye(s - 1, dtype=int)
        out[2 * s: 2 * s + s * s] = der.ravel()
        out[2 * s + s * s:] = (D.dot(F).dot(C.T) - G).ravel()
        return out

    def jacobian_mp(self, X: np.ndarray) -> np.ndarray:
        A, F, _ = self._mp_mats()
        s, d, nc = self.s, self.d, self.nc
        C, D = self.split(X)
        J = np.empty((self.n_equations, self.n_unknowns), dtype=object)
        J[:] = 0
        for i in range(s):
            J[i, i * (d + 1)] = 1
            J[s + i, nc + i * (d + 1): nc + (i + 1) * (d + 1)] = 1
        P1 = D.dot(A)
        P1[0, :] -= 1
        r0 = 2 * s
        for P, Q in ((P1, A.dot(C.T)), (D.dot(F), F.dot(C.T))):
            for j in range(s):
                for i in range(s):
                    row = r0 + j * s + i
                    J[row, i * (d + 1): (i + 1) * (d + 1)] = P[j]
                    J[row, nc + j * (d + 1): nc + (j + 1) * (d + 1)] = Q[:, i]
            r0 += s * s
        return J


def jacobian(pair: BasisPair) -> np.ndarray:
    """Analytic Jacobian of the flattened residual at a floating pair."""
    if pair.mode == "rational":
        raise ValueError("jacobian needs a floating pair; use pair.to_float()")
    return CoefficientSystem.from_tableau(pair.tableau, pair.d).jacobian(pair.vector())


# ---------------------------------------------------------------------------
# solver


@dataclass
class SolveOptions:
    """Options of the multi-start Newton solver.

    Attributes
    ----------
    starts : int
        Number of random starting points.
    seed : int
        Seed of the start generator; each start gets its own child stream.
    mode : {"real", "complex"}
    box : float
        Starts are uniform in ``[-box, box]`` (real) or in the complex disk
        of radius `box`.
    damping : bool
        Backtracking line search (halve the step until the residual norm
        decreases).
    max_halvings, max_iter : int
    newton_tol : float
        Residual 2-norm at which the floating phase hands over a point.
    tol : float
        Certification tolerance on the max-norm residual.
    cluster_tol : float
        Relative radius used to group floating points before refinement.
    refine_dps : int
        Decimal digits of the extended-precision refinement.
    dedup_tol : float
        Maximum coefficient difference for two solutions to be identified.
    snap_tol, max_denominator :
        Rational polish parameters.
    """

    starts: int = 200
    seed: int = 0
    mode: str = "real"
    box: float = 5.0
    damping: bool = True
    max_halvings: int = 30
    max_iter: int = 100
    newton_tol: float = 1e-8
    tol: float = 1e-12
    cluster_tol: float = 1e-2
    refine_dps: int = 100
    refine_max_iter: int = 80
    refine_tries: int = 3
    dedup_tol: float = 1e-8
    snap_tol: float = 1e-6
    max_denominator: int = 10_000

    def __post_init__(self):
        if self.mode not in ("real", "complex"):
            raise ValueError("solver mode must be 'real' or 'complex'")
        if self.starts < 1:
            raise ValueError("starts must be positive")


@dataclass
class SolveReport:
    solutions: list
    starts: int = 0
    converged: int = 0
    clusters: int = 0
    singular_starts: int = 0
    residuals: list = field(default_factory=list)
    elapsed: float = 0.0


def _draw_start(rng: np.random.Generator, n: int, opts: SolveOptions) -> np.ndarray:
    if opts.mode == "real":
        return rng.uniform(-opts.box, opts.box, n)
    r = opts.box * np.sqrt(rng.uniform(0.0, 1.0, n))
    theta = rng.uniform(0.0, 2 * np.pi, n)
    return r * np.exp(1j * theta)


def _step(J: np.ndarray, r: np.ndarray) -> np.ndarray:
    if J.shape[0] == J.shape[1]:
        try:
            return np.linalg.solve(J, -r)
        except np.linalg.LinAlgError:
            pass
    return np.linalg.lstsq(J, -r, rcond=None)[0]


def _newton(system: CoefficientSystem, x: np.ndarray, opts: SolveOptions):
    """Damped Newton from `x`; returns ``(x, residual 2-norm)``."""
    r = system.residual(x)
    nr = np.linalg.norm(r)
    for _ in range(opts.max_iter):
        if nr <= opts.newton_tol or not np.isfinite(nr):
            break
        dx = _step(system.jacobian(x), r)
        lam = 1.0
        xn, rn = x + dx, system.residual(x + dx)
        if opts.damping:
            for _ in range(opts.max_halvings):
                if np.linalg.norm(rn) < nr:
                    break
                lam *= 0.5
                xn = x + lam * dx
                rn = system.residual(xn)
            else:
                if np.linalg.norm(rn) >= nr:
                    break  # no descent along the Newton direction: stalled
        x, r, nr = xn, rn, np.linalg.norm(rn)
    return x, nr


def _mp_solve(M: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Gaussian elimination with partial pivoting on object arrays."""
    M = M.copy()
    b = b.copy()
    n = M.shape[0]
    for k in range(n):
        p = k + max(range(n - k), key=lambda q: abs(M[k + q, k]))
        if M[p, k] == 0:
            raise ZeroDivisionError("singular matrix in extended precision")
        if p != k:
            M[[k, p]] = M[[p, k]]
            b[[k, p]] = b[[p, k]]
        f = M[k + 1:, k] / M[k, k]
        M[k + 1:, k:] -= np.outer(f, M[k, k:])
        b[k + 1:] -= f * b[k]
    x = np.empty(n, dtype=object)
    for k in range(n - 1, -1, -1):
        x[k] = (b[k] - M[k, k + 1:].dot(x[k + 1:])) / M[k, k]
    return x


def _mp_newton_step(system: CoefficientSystem, X: np.ndarray, conj) -> np.ndarray:
    R = system.residual_mp(X)
    J = system.jacobian_mp(X)
    if J.shape[0] == J.shape[1]:
        return _mp_solve(J, -R)
    JH = np.vectorize(conj, otypes=[object])(J.T)
    if J.shape[0] > J.shape[1]:
        return _mp_solve(JH.dot(J), -JH.dot(R))
    return JH.dot(_mp_solve(J.dot(JH), -R))


def _refine(system: CoefficientSystem, x: np.ndarray, opts: SolveOptions):
    """Extended-precision Newton with extrapolation for multiple roots.

    Near a multiple root Newton converges linearly, the step norm shrinking
    by a steady ratio ``r``.  Once two consecutive ratios agree, the step is
    stretched by ``1/(1-r)``, which removes the leading error term (Aitken
    style).  Returns ``(x, residual max-norm, converged)`` with `x` rounded to
    floating point; `converged` means the last plain step was below 1e-15
    relative to the coefficient scale.
    """
    cplx = opts.mode == "complex"
    with mpmath.workdps(opts.refine_dps):
        make = mpmath.mpc if cplx else mpmath.mpf
        conj = mpmath.conj if cplx else (lambda v: v)
        X = np.array([make(complex(v)) if cplx else make(float(np.real(v))) for v in x], dtype=object)
        hist = []
        last_extrap = -10
        converged = False
        for it in range(opts.refine_max_iter):
            try:
                DX = _mp_newton_step(system, X, conj)
            except ZeroDivisionError:
                break
            nd = max(abs(v) for v in DX)
            scale = 1 + max(abs(v) for v in X)
            hist.append(nd)
            lam = 1
            if it - last_extrap >= 3 and len(hist) >= 3 and hist[-2] > 0 and hist[-3] > 0:
                r1, r2 = hist[-1] / hist[-2], hist[-2] / hist[-3]
                if 0.3 < r1 < 0.95 and abs(r1 - r2) < 0.05 * r1:
                    lam = 1 / (1 - r1)
                    last_extrap = it
            X = X + lam * DX
            if not mpmath.isfinite(nd) or nd > 1e12 * scale:
                break
            if nd <= 1e-15 * scale and lam == 1:
                converged = True
                break
        R = system.residual_mp(X)
        rnorm = float(max(abs(v) for v in R))
        out = np.array([complex(v) for v in X]) if cplx else np.array([float(v) for v in X])
    return out, rnorm, converged


def _cluster(points, tol):
    """Greedy grouping by relative max-norm distance; input sorted by quality."""
    groups = []
    for x in points:
        for g in groups:
            y = g[0]
            if np.max(np.abs(x - y)) <= tol * (1 + max(np.max(np.abs(x)), np.max(np.abs(y)))):
                g.append(x)
                break
        else:
            groups.append([x])
    return groups


def _snap(v: float, opts: SolveOptions):
    f = Fraction(v).limit_denominator(opts.max_denominator)
    return f if abs(float(f) - v) <= opts.snap_tol else None


def rational_polish(pair: BasisPair, opts: SolveOptions | None = None) -> BasisPair | None:
    """Snap a floating pair to nearby small rationals and certify exactly.

    Returns the exact pair when every coefficient lies within
    ``opts.snap_tol`` of a fraction with denominator at most
    ``opts.max_denominator`` and the exact residual vanishes; otherwise
    ``None``.
    """
    opts = opts or SolveOptions()
    if pair.mode == "rational":
        return pair
    vals = pair.vector().astype(complex)
    if np.any(np.abs(vals.imag) > opts.snap_tol):
        return None
    snapped = [_snap(v, opts) for v in vals.real]
    if any(f is None for f in snapped):
        return None
    nc = pair.C.size
    shape = pair.C.shape
    exact = BasisPair(np.array(snapped[:nc], dtype=object).reshape(shape),
                      np.array(snapped[nc:], dtype=object).reshape(shape), pair.tableau, "rational")
    return exact if residual(exact).norm == 0 else None


def _sort_key(pair: BasisPair):
    v = pair.to_float("complex").vector()
    return tuple(np.round(np.concatenate([v.real, v.imag]), 9))


def solve_report(tab: ButcherTableau, d: int | None = None, opts: SolveOptions | None = None) -> SolveReport:
    """Multi-start solve returning the solutions and solver statistics.

    See :func:`solve` for the algorithm.
    """
    opts = opts or SolveOptions()
    d = tab.s if d is None else d
    if d < 0:
        raise ValueError("degree must be non-negative")
    t0 = time.perf_counter()
    system = CoefficientSystem.from_tableau(tab, d)
    n = system.n_unknowns
    full_rank = min(system.n_equations, n)

    candidates = []
    singular = 0
    for child in np.random.SeedSequence(opts.seed).spawn(opts.starts):
        rng = np.random.default_rng(child)
        x0 = _draw_start(rng, n, opts)
        if np.linalg.matrix_rank(system.jacobian(x0)) < full_rank:
            singular += 1
        x, nr = _newton(system, x0, opts)
        if np.isfinite(nr) and nr <= opts.newton_tol:
            candidates.append((nr, x))
    if singular == opts.starts:
        raise SingularJacobianError("Jacobian singular at every start")

    candidates.sort(key=lambda c: c[0])
    groups = _cluster([x for _, x in candidates], opts.cluster_tol)

    refined = []
    for g in groups:
        for x in g[: opts.refine_tries]:
            xr, rn, ok = _refine(system, x, opts)
            if ok and rn <= opts.tol:
                refined.append((rn, xr))
                break

    mode = opts.mode
    found: list[tuple[float, BasisPair]] = []
    for rn, x in sorted(refined, key=lambda c: c[0]):
        if mode == "complex":
            scale = 1 + np.max(np.abs(x))
            if np.max(np.abs(x.imag)) <= opts.dedup_tol * scale:
                x = x.real.astype(complex)
        C, D = system.split(x)
        pair = BasisPair(C.copy(), D.copy(), tab, mode)
        if any(pair.distance(q) <= opts.dedup_tol for _, q in found):
            continue
        found.append((rn, pair))

    solutions, residuals = [], []
    for rn, pair in found:
        exact = rational_polish(pair, opts)
        if exact is not None:
            pair, rn = exact, 0.0
        solutions.append(pair)
        residuals.append(rn)
    order = sorted(range(len(solutions)), key=lambda k: _sort_key(solutions[k]))
    solutions = [solutions[k] for k in order]
    residuals = [residuals[k] for k in order]
    if not solutions:
        log.warning("no solution found with %d starts", opts.starts)
    return SolveReport(
        solutions=solutions, starts=opts.starts, converged=len(candidates), clusters=len(groups),
        singular_starts=singular, residuals=residuals, elapsed=time.perf_counter() - t0,
    )


def solve(tab: ButcherTableau, d: int | None = None, opts: SolveOptions | None = None) -> list[BasisPair]:
    """Find trial/test bases reproducing `tab` at polynomial degree `d`.

    The floating phase runs damped Newton (least-squares steps when the
    system is not square) from ``opts.starts`` random points.  Converged
    points are grouped, one point per group is refined in extended precision,
    refined points closer than ``opts.dedup_tol`` are merged and each
    survivor is offered to :func:`rational_polish`.

    Returns
    -------
    list of BasisPair
        Distinct certified solutions in lexicographic coefficient order; an
        empty list when the budget is exhausted.
    """
    return solve_report(tab, d, opts).solutions


# ---------------------------------------------------------------------------
# basis files


def _fmt_entry(v, mode: str) -> str:
    if mode == "rational":
        return str(v)
    if mode == "real":
        return repr(float(v))
    return repr(complex(v))


def _parse_entry(text: str, mode: str):
    text = text.strip()
    if mode == "rational":
        return Fraction(text)
    if mode == "real":
        return float(Fraction(text)) if "/" in text else float(text)
    return complex(text.replace(" ", ""))


def format_basis(pair: BasisPair) -> str:
    """Serialize `pair` as ``key = value`` text (rows separated by ``;``)."""
    rows = lambda M: "; ".join(", ".join(_fmt_entry(v, pair.mode) for v in row) for row in M)  # noqa: E731
    lines = [
        f"s = {pair.s}",
        f"d = {pair.d}",
        f"tableau = {pair.tableau.name}",
        f"mode = {pair.mode}",
        f"C = {rows(pair.C)}",
        f"D = {rows(pair.D)}",
    ]
    # embed the tableau so the file is self-contained
    lines += ["tableau_" + ln for ln in dump_tableau(pair.tableau).splitlines()
              if not ln.startswith("name")]
    return "\n".join(lines) + "\n"


def parse_basis(text: str) -> BasisPair:
    fields = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"malformed basis line: {raw!r}")
        k, v = line.split("=", 1)
        fields[k.strip()] = v.strip()
    try:
        s, d, mode = int(fields["s"]), int(fields["d"]), fields["mode"]
        tab_text = "\n".join(
            f"{k[len('tableau_'):]} = {v}" for k, v in fields.items() if k.startswith("tableau_")
        )
        tab = parse_tableau(tab_text, name=fields.get("tableau", "custom"))
        tab = ButcherTableau(tab.a, tab.b, tab.c, fields.get("tableau", tab.name))

        def matrix(key):
            rows = [r for r in fields[key].split(";")]
            M = [[_parse_entry(v, mode) for v in r.split(",")] for r in rows]
            if len(M) != s or any(len(r) != d + 1 for r in M):
                raise ValueError(f"{key} must be {s} x {d + 1}")
            return np.array(M, dtype=object if mode == "rational" else None)

        return BasisPair(matrix("C"), matrix("D"), tab, mode)
    except KeyError as exc:
        raise ValueError(f"basis file misses key {exc}") from None


def write_basis(pair: BasisPair, path) -> None:
    Path(path).write_text(format_basis(pair), encoding="utf-8")


def read_basis(path) -> BasisPair:
    return parse_basis(Path(path).read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# certification of the embedded tables


@dataclass
class FixtureResult:
    name: str
    mode: str
    matrix_norm: float
    condition_norm: float
    passed: bool

    @property
    def exact(self) -> bool:
        return self.mode == "rational"


def certify_tables(corrupt: str | None = None, tol: float = 1e-10) -> list[FixtureResult]:
    """Certify every embedded solution table.

    Rational fixtures must have an exactly vanishing residual, both in the
    matrix form and condition by condition; complex fixtures must stay below
    `tol`.  ``corrupt`` names a fixture whose first test coefficient is
    perturbed (negative control).
    """
    from .fixtures import FIXTURES

    results = []
    for name, build in FIXTURES.items():
        pair = build()
        if name == corrupt:
            D = pair.D.copy()
            D[-1, 0] = D[-1, 0] + (Fraction(1, 1000) if pair.mode == "rational" else 1e-3)
            pair = replace(pair, D=D)
        rm = residual(pair).norm
        rc = check_conditions(pair).norm
        if pair.mode == "rational":
            ok = rm == 0 and rc == 0
        else:
            ok = rm <= tol and rc <= tol
        results.append(FixtureResult(name, pair.mode, float(rm), float(rc), bool(ok)))
    if corrupt is not None and corrupt not in FIXTURES:
        raise KeyError(f"unknown fixture {corrupt!r}")
    return results


def fixture_names() -> list[str]:
    from .fixtures import FIXTURES
    return list(FIXTURES)


def pairs_close(a: BasisPair, b: BasisPair, tol: float) -> bool:
    return a.s == b.s and a.d == b.d and a.distance(b) <= tol


def sequence_to_pair(C: Sequence[Sequence], D: Sequence[Sequence], tab: ButcherTableau,
                     mode: str = "rational") -> BasisPair:
    return BasisPair(np.array(C, dtype=object), np.array(D, dtype=object), tab, mode)

