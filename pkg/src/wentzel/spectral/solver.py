"""Reference Wentzel eigensolver on boundary unknowns, plus the disk oracle."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from ..errors import ConfigError
from .fem import Assembly, assemble, extend_columns
from .mesh import TriMesh


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Eigenpairs of ``(S + beta A_gamma) u = lambda M_gamma u``.

    ``boundary_eigenvectors`` has one M_gamma-orthonormal column per
    eigenvalue; ``eigenvectors`` holds the harmonic extensions to all
    vertices.
    """

    beta: float
    eigenvalues: np.ndarray
    boundary_eigenvectors: np.ndarray
    eigenvectors: np.ndarray


def _as_assembly(mesh_or_assembly) -> Assembly:
    if isinstance(mesh_or_assembly, Assembly):
        return mesh_or_assembly
    if isinstance(mesh_or_assembly, TriMesh):
        return assemble(mesh_or_assembly)
    raise TypeError(f"expected TriMesh or Assembly, got {type(mesh_or_assembly).__name__}")


def wentzel_operator(assembly: Assembly, beta: float) -> np.ndarray:
    """Dense boundary operator ``S + beta * A_gamma``."""
    return assembly.dtn + beta * assembly.A_gamma.toarray()


def solve_wentzel(mesh_or_assembly, beta: float, count: int) -> Spectrum:
    """Lowest ``count`` Wentzel eigenpairs of a mesh.

    The harmonic constraint in the bulk is eliminated exactly through the
    Schur complement, leaving a dense symmetric-definite pencil with a
    diagonal mass matrix.
    """
    if not beta >= 0:
        raise ConfigError(f"beta must be nonnegative, got {beta}")
    asm = _as_assembly(mesh_or_assembly)
    nb = len(asm.boundary_index_map)
    if not 1 <= count <= nb:
        raise ConfigError(f"count must be in [1, {nb}] for this mesh, got {count}")
    L = wentzel_operator(asm, beta)
    # scale to the identity-mass problem; M_gamma is diagonal positive
    s = 1.0 / np.sqrt(asm.M_gamma)
    evals, w = la.eigh(s[:, None] * L * s[None, :], subset_by_index=[0, count - 1])
    vecs = s[:, None] * w
    full = extend_columns(asm, vecs)
    return Spectrum(float(beta), evals, vecs, full)


def disk_oracle(beta: float, count: int, radius: float = 1.0) -> np.ndarray:
    """Exact spectrum of the disk of given radius: 0 and ``beta m^2/R^2 + m/R`` twice."""
    if beta < 0:
        raise ConfigError("beta must be nonnegative")
    out = [0.0]
    m = 1
    while len(out) < count:
        lam = beta * m * m / radius**2 + m / radius
        out += [lam, lam]
        m += 1
    return np.array(sorted(out)[:count])


def scaling_check(mesh: TriMesh, beta: float, c: float, count: int, tol: float = 1e-8) -> float:
    """Max relative defect of ``c * lambda_k(c Omega, beta) = lambda_k(Omega, beta / c)``.

    Eigenvalues below ``tol`` times the largest one (the zero mode) are
    compared relative to the largest eigenvalue instead of themselves.
    """
    if not c > 0:
        raise ConfigError("scale factor must be positive")
    big = solve_wentzel(mesh.scaled(c), beta, count).eigenvalues
    ref = solve_wentzel(mesh, beta / c, count).eigenvalues
    scale = max(np.abs(ref).max(), np.finfo(float).tiny)
    denom = np.where(np.abs(ref) > tol * scale, np.abs(ref), scale)
    return float(np.max(np.abs(c * big - ref) / denom))
