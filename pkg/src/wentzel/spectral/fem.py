"""P1 finite-element assembly and the discrete Dirichlet-to-Neumann map."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from ..errors import MeshError, SingularSystemError
from .mesh import TriMesh


@dataclass(frozen=True, eq=False)
class DiscreteFunction:
    """Nodal values of a P1 function on a mesh.

    ``boundary_index`` lists the global ids of boundary vertices so that the
    boundary trace can be extracted without the mesh.
    """

    values: np.ndarray
    boundary_index: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if not np.all(np.isfinite(v)):
            raise ValueError("function values must be finite")
        object.__setattr__(self, "values", v)

    @cached_property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.values != 0.0)

    @cached_property
    def boundary_values(self) -> np.ndarray:
        return self.values[self.boundary_index]

    @cached_property
    def boundary_support(self) -> np.ndarray:
        """Global ids of boundary vertices where the function is nonzero."""
        return self.boundary_index[self.boundary_values != 0.0]

    def scaled(self, c: float) -> "DiscreteFunction":
        return DiscreteFunction(c * self.values, self.boundary_index)


def p1_stiffness(vertices: np.ndarray, triangles: np.ndarray) -> sparse.csr_matrix:
    """Cotangent (P1) stiffness matrix."""
    p = vertices[triangles]
    # edge vectors opposite each local vertex
    e = np.stack([p[:, 2] - p[:, 1], p[:, 0] - p[:, 2], p[:, 1] - p[:, 0]], axis=1)
    area2 = e[:, 1, 0] * e[:, 2, 1] - e[:, 1, 1] * e[:, 2, 0]
    if np.any(area2 <= 0):
        raise MeshError("degenerate triangle in assembly")
    local = np.einsum("tid,tjd->tij", e, e) / (2.0 * area2)[:, None, None]
    rows = np.repeat(triangles, 3, axis=1).ravel()
    cols = np.tile(triangles, (1, 3)).ravel()
    n = len(vertices)
    return sparse.csr_matrix((local.ravel(), (rows, cols)), shape=(n, n))


@dataclass(frozen=True, eq=False)
class Assembly:
    """Discrete forms of the three integrals of the Rayleigh quotient.

    ``A_omega`` acts on all vertices; ``A_gamma`` and ``M_gamma`` act on
    boundary unknowns ordered as ``boundary_index_map``. ``M_gamma`` is the
    diagonal of the lumped boundary mass.
    """

    mesh: TriMesh
    A_omega: sparse.csr_matrix
    A_gamma: sparse.csr_matrix
    M_gamma: np.ndarray
    boundary_index_map: np.ndarray

    @cached_property
    def interior_index(self) -> np.ndarray:
        mask = np.ones(self.mesh.nv, dtype=bool)
        mask[self.boundary_index_map] = False
        return np.flatnonzero(mask)

    @cached_property
    def _blocks(self):
        b, i = self.boundary_index_map, self.interior_index
        A = self.A_omega
        return A[b][:, b], A[b][:, i].tocsr(), A[i][:, i].tocsc()

    @cached_property
    def _interior_lu(self):
        _, _, A_II = self._blocks
        if A_II.shape[0] == 0:
            return None
        try:
            lu = splu(A_II)
        except RuntimeError as exc:
            raise SingularSystemError(f"interior block is singular: {exc}") from exc
        diag = np.abs(lu.U.diagonal())
        if diag.min() <= 1e-13 * diag.max():
            raise SingularSystemError("interior block is numerically singular")
        return lu

    def solve_interior(self, rhs: np.ndarray) -> np.ndarray:
        lu = self._interior_lu
        if lu is None:
            return np.zeros((0,) + rhs.shape[1:])
        return lu.solve(rhs)

    @cached_property
    def dtn(self) -> np.ndarray:
        return schur_dtn(self)


def assemble(mesh: TriMesh) -> Assembly:
    """Assemble bulk stiffness, boundary stiffness and lumped boundary mass."""
    A = p1_stiffness(mesh.vertices, mesh.triangles)
    bidx = mesh.boundary_vertices
    local = np.full(mesh.nv, -1, dtype=np.int64)
    local[bidx] = np.arange(len(bidx))
    e = local[mesh.boundary_edges]
    ell = mesh.boundary_edge_lengths
    if np.any(ell <= 0):
        raise MeshError("zero-length boundary edge")
    nb = len(bidx)
    w = 1.0 / ell
    rows = np.r_[e[:, 0], e[:, 1], e[:, 0], e[:, 1]]
    cols = np.r_[e[:, 0], e[:, 1], e[:, 1], e[:, 0]]
    vals = np.r_[w, w, -w, -w]
    A_gamma = sparse.csr_matrix((vals, (rows, cols)), shape=(nb, nb))
    M = np.zeros(nb)
    np.add.at(M, e[:, 0], 0.5 * ell)
    np.add.at(M, e[:, 1], 0.5 * ell)
    return Assembly(mesh, A, A_gamma, M, bidx)


def schur_dtn(assembly: Assembly, block: int = 128) -> np.ndarray:
    """Dense discrete DtN operator ``S = A_GG - A_GI A_II^{-1} A_IG``.

    Columns are formed in blocks against a single sparse LU factorization of
    the interior block; the result is symmetrized.
    """
    A_GG, A_GI, _ = assembly._blocks
    S = A_GG.toarray()
    nb = S.shape[0]
    A_IG = A_GI.T.tocsc()
    if A_IG.shape[0]:
        for start in range(0, nb, block):
            cols = slice(start, min(nb, start + block))
            X = assembly.solve_interior(A_IG[:, cols].toarray())
            S[:, cols] -= A_GI @ X
    asym = np.abs(S - S.T).max()
    if asym > 1e-9 * max(1.0, np.abs(S).max()):
        raise SingularSystemError(f"Schur complement not symmetric (defect {asym:.3e})")
    return 0.5 * (S + S.T)


def extend_columns(assembly: Assembly, boundary_values: np.ndarray) -> np.ndarray:
    """Harmonic extension of each column of an ``(nb, m)`` array; returns ``(nv, m)``."""
    ub = np.asarray(boundary_values, dtype=float)
    if ub.shape[0] != len(assembly.boundary_index_map):
        raise ValueError("boundary data length does not match the boundary")
    if not np.all(np.isfinite(ub)):
        raise ValueError("boundary data must be finite")
    _, A_GI, _ = assembly._blocks
    u = np.zeros((assembly.mesh.nv,) + ub.shape[1:])
    u[assembly.boundary_index_map] = ub
    if len(assembly.interior_index):
        u[assembly.interior_index] = -assembly.solve_interior(A_GI.T @ ub)
    return u


def harmonic_extend(assembly: Assembly, boundary_values) -> DiscreteFunction:
    """Discrete harmonic extension: interior values solve ``A_II u_I = -A_IG u_G``."""
    ub = np.asarray(boundary_values, dtype=float)
    if ub.ndim != 1:
        raise ValueError("boundary data must be a vector; use extend_columns for blocks")
    return DiscreteFunction(extend_columns(assembly, ub), assembly.boundary_index_map)
