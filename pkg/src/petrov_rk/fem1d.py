"""Piecewise-linear finite elements for the 1D heat equation.

The semidiscrete system is ``M u' + K u = F(t)`` on the interior nodes of an
interval with homogeneous Dirichlet conditions.  Mass solves use a banded
Cholesky factorization that is computed once per system.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

__all__ = [
    "Mesh1D",
    "SemidiscreteSystem",
    "assemble",
    "assemble_mixed_mass",
    "assemble_mixed_stiffness",
    "gauss_points",
    "l2_project",
    "load_vector",
    "prolongation",
]

_GAUSS_X, _GAUSS_W = np.polynomial.legendre.leggauss(5)


def gauss_points(a: float, b: float, n: int = 5):
    """Gauss-Legendre nodes and weights on ``[a, b]``."""
    x, w = (_GAUSS_X, _GAUSS_W) if n == 5 else np.polynomial.legendre.leggauss(n)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


class Mesh1D:
    """Mesh of an interval.

    Parameters
    ----------
    n_elements : int
    x_left, x_right : float
    nodes : array_like, optional
        Explicit node coordinates; overrides the uniform default.
    """

    def __init__(self, n_elements: int, x_left: float = 0.0, x_right: float = 1.0, nodes=None):
        if nodes is None:
            if n_elements < 1:
                raise ValueError("need at least one element")
            nodes = np.linspace(x_left, x_right, n_elements + 1)
        nodes = np.asarray(nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 2:
            raise ValueError("a mesh needs at least two nodes")
        if np.any(np.diff(nodes) <= 0):
            raise ValueError("degenerate element: nodes must be strictly increasing")
        self.nodes = nodes
        self.n_elements = nodes.size - 1
        self.x_left = float(nodes[0])
        self.x_right = float(nodes[-1])

    @property
    def h(self) -> np.ndarray:
        return np.diff(self.nodes)

    @property
    def n_interior(self) -> int:
        return self.n_elements - 1

    @property
    def interior_nodes(self) -> np.ndarray:
        return self.nodes[1:-1]

    def refine(self, factor: int = 2) -> "Mesh1D":
        """Split every element into `factor` equal pieces."""
        if factor < 1:
            raise ValueError("refinement factor must be positive")
        pieces = [np.linspace(a, b, factor + 1)[:-1] for a, b in zip(self.nodes[:-1], self.nodes[1:])]
        return Mesh1D(0, nodes=np.concatenate(pieces + [self.nodes[-1:]]))

    def __repr__(self):
        return f"Mesh1D(n_elements={self.n_elements}, x=[{self.x_left}, {self.x_right}])"


def _full_matrices(mesh: Mesh1D, lumped: bool = False):
    h = mesh.h
    n = mesh.nodes.size
    main_m = np.zeros(n)
    main_m[:-1] += h / 3
    main_m[1:] += h / 3
    off_m = h / 6
    main_k = np.zeros(n)
    main_k[:-1] += 1 / h
    main_k[1:] += 1 / h
    off_k = -1 / h
    if lumped:
        M = sp.diags(main_m + np.r_[off_m, 0] + np.r_[0, off_m])
    else:
        M = sp.diags([off_m, main_m, off_m], [-1, 0, 1])
    K = sp.diags([off_k, main_k, off_k], [-1, 0, 1])
    return M.tocsr(), K.tocsr()


def _interior(A: sp.spmatrix) -> sp.csr_matrix:
    return A[1:-1, 1:-1].tocsr()


def load_vector(mesh: Mesh1D, g: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """Interior load vector ``(g, phi_i)`` by 5-point Gauss per element."""
    a, b = mesh.nodes[:-1], mesh.nodes[1:]
    half = 0.5 * (b - a)
    x = a[:, None] + half[:, None] * (_GAUSS_X[None, :] + 1.0)
    w = half[:, None] * _GAUSS_W[None, :]
    gx = np.asarray(g(x), dtype=float) * w
    lam = (x - a[:, None]) / (2 * half[:, None])  # local coordinate in [0, 1]
    full = np.zeros(mesh.nodes.size)
    np.add.at(full, np.arange(mesh.n_elements), np.sum(gx * (1 - lam), axis=1))
    np.add.at(full, np.arange(1, mesh.n_elements + 1), np.sum(gx * lam, axis=1))
    return full[1:-1]


def _bandwidth(A: sp.spmatrix) -> int:
    coo = sp.coo_matrix(A)
    nz = coo.data != 0
    return int(np.max(np.abs(coo.row[nz] - coo.col[nz]), initial=0))


@dataclass
class SemidiscreteSystem:
    """``M u' + K u = F(t)`` on the interior degrees of freedom.

    Attributes
    ----------
    M, K : scipy.sparse.csr_matrix
    load : callable or None
        ``load(t)`` returns the interior load vector; ``None`` means ``F = 0``.
    mesh : Mesh1D or None
        ``None`` for purely algebraic systems.
    lumped : bool
    """

    M: sp.csr_matrix
    K: sp.csr_matrix
    load: Optional[Callable[[float], np.ndarray]]
    mesh: Optional[Mesh1D]
    lumped: bool = False
    _factor: object = field(default=None, init=False, repr=False)

    def __post_init__(self):
        n = self.M.shape[0]
        if n == 0:
            self._factor = ("empty", None)
            return
        if self.lumped:
            d = self.M.diagonal()
            if np.any(d <= 0):
                raise np.linalg.LinAlgError("lumped mass matrix is not positive")
            self._factor = ("diag", d)
        elif _bandwidth(self.M) <= 1:
            ab = np.zeros((2, n))
            ab[1] = self.M.diagonal()
            ab[0, 1:] = self.M.diagonal(1)
            # raises LinAlgError when M is not positive definite
            self._factor = ("band", sla.cholesky_banded(ab))
        else:
            # general SPD matrices (used by the algebraic tests)
            self._factor = ("dense", sla.cho_factor(self.M.toarray()))

    @classmethod
    def from_matrices(cls, M, K, load=None) -> "SemidiscreteSystem":
        """Wrap arbitrary SPD `M` and symmetric `K` (dense or sparse)."""
        M = sp.csr_matrix(np.atleast_2d(M) if not sp.issparse(M) else M)
        K = sp.csr_matrix(np.atleast_2d(K) if not sp.issparse(K) else K)
        if M.shape != K.shape or M.shape[0] != M.shape[1]:
            raise ValueError("M and K must be square and of equal size")
        return cls(M, K, load, None)

    @property
    def n_dofs(self) -> int:
        return self.M.shape[0]

    def solve_mass(self, rhs: np.ndarray) -> np.ndarray:
        kind, f = self._factor
        if kind == "diag":
            return rhs / f if rhs.ndim == 1 else rhs / f[:, None]
        if kind == "empty":
            return rhs.copy()
        if kind == "dense":
            return sla.cho_solve(f, rhs)
        return sla.cho_solve_banded((f, False), rhs)

    def load_at(self, t: float) -> np.ndarray:
        if self.load is None:
            return np.zeros(self.n_dofs)
        return np.asarray(self.load(t), dtype=float)

    def dense(self) -> tuple[np.ndarray, np.ndarray]:
        return self.M.toarray(), self.K.toarray()

    def dump(self, path) -> None:
        """Write ``M`` and ``K`` as dense text (debugging aid)."""
        M, K = self.dense()
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"# M ({M.shape[0]}x{M.shape[1]})\n")
            np.savetxt(fh, M, fmt="%.17g")
            fh.write(f"# K ({K.shape[0]}x{K.shape[1]})\n")
            np.savetxt(fh, K, fmt="%.17g")


def assemble(mesh: Mesh1D, source: Optional[Callable] = None, lumped: bool = False) -> SemidiscreteSystem:
    """Assemble mass, stiffness and load on the interior nodes.

    Parameters
    ----------
    mesh : Mesh1D
    source : callable, optional
        ``source(x, t)``, vectorised in ``x``.
    lumped : bool
        Row-sum lumping of the mass matrix.
    """
    Mf, Kf = _full_matrices(mesh, lumped)
    M, K = _interior(Mf), _interior(Kf)
    # symmetrise exactly (assembly already is, this guards against round-off in future edits)
    M = ((M + M.T) * 0.5).tocsr()
    K = ((K + K.T) * 0.5).tocsr()
    load = None
    if source is not None:
        load = lambda t: load_vector(mesh, lambda x: source(x, t))  # noqa: E731
    return SemidiscreteSystem(M, K, load, mesh, lumped)


def l2_project(mesh: Mesh1D, g: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """L2 projection of `g` onto the interior hat functions (consistent mass)."""
    system = assemble(mesh)
    return system.solve_mass(load_vector(mesh, g))


def _nesting(coarse: Mesh1D, fine: Mesh1D) -> None:
    ratio = fine.n_elements / coarse.n_elements
    k = int(round(np.log2(ratio))) if ratio >= 1 else -1
    if k < 0 or 2 ** k * coarse.n_elements != fine.n_elements:
        raise ValueError("meshes are not nested dyadic refinements of each other")
    scale = max(1.0, abs(coarse.x_right - coarse.x_left))
    idx = np.searchsorted(fine.nodes, coarse.nodes)
    idx = np.clip(idx, 0, fine.nodes.size - 1)
    if np.max(np.abs(fine.nodes[idx] - coarse.nodes)) > 1e-12 * scale:
        raise ValueError("coarse nodes are not contained in the fine mesh")


def prolongation(coarse: Mesh1D, fine: Mesh1D) -> np.ndarray:
    """Matrix mapping coarse nodal values to fine nodal values (all nodes)."""
    _nesting(coarse, fine)
    P = np.zeros((fine.nodes.size, coarse.nodes.size))
    for j in range(coarse.nodes.size):
        e = np.zeros(coarse.nodes.size)
        e[j] = 1.0
        P[:, j] = np.interp(fine.nodes, coarse.nodes, e)
    return P


def _mixed(mesh_test: Mesh1D, mesh_trial: Mesh1D, which: int) -> sp.csr_matrix:
    if mesh_test.n_elements <= mesh_trial.n_elements:
        coarse, fine, test_is_coarse = mesh_test, mesh_trial, True
    else:
        coarse, fine, test_is_coarse = mesh_trial, mesh_test, False
    P = sp.csr_matrix(prolongation(coarse, fine))
    Af = _full_matrices(fine)[which]
    # coarse hats are exact linear combinations of fine hats, so the
    # fine-mesh element integrals are exact for the mixed products
    A = (P.T @ Af) if test_is_coarse else (Af @ P)
    return A.tocsr()[1:-1, 1:-1].tocsr()


def assemble_mixed_mass(mesh_test: Mesh1D, mesh_trial: Mesh1D) -> sp.csr_matrix:
    """Mixed mass ``int phi_i^test phi_j^trial`` between nested meshes.

    Rows follow the interior test nodes, columns the interior trial nodes.
    Identical meshes reproduce :func:`assemble` exactly.
    """
    if mesh_test.n_elements == mesh_trial.n_elements and np.array_equal(mesh_test.nodes, mesh_trial.nodes):
        return assemble(mesh_test).M
    return _mixed(mesh_test, mesh_trial, 0)


def assemble_mixed_stiffness(mesh_test: Mesh1D, mesh_trial: Mesh1D) -> sp.csr_matrix:
    """Mixed stiffness ``int (phi_i^test)' (phi_j^trial)'`` between nested meshes."""
    if mesh_test.n_elements == mesh_trial.n_elements and np.array_equal(mesh_test.nodes, mesh_trial.nodes):
        return assemble(mesh_test).K
    return _mixed(mesh_test, mesh_trial, 1)
