"""Plateau test functions, discrete Rayleigh quotients and min-max certificates."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
from scipy.spatial.distance import cdist

from .decomposition import CMCapacitor, SphericalCapacitor, build_capacitors
from .errors import ConfigError, NumericError, SupportsOverlap, ZeroBoundaryMass
from .mms import FiniteMetricMeasureSpace, space_from_mesh
from .spectral.fem import Assembly, DiscreteFunction, assemble, extend_columns
from .spectral.mesh import TriMesh


def _targets(space, targets):
    if targets is None:
        return None
    if space.coords is None:
        raise ConfigError("evaluating at external targets needs space coordinates")
    return np.asarray(targets, dtype=float)


def _wrap(values, boundary_index):
    if boundary_index is None:
        boundary_index = np.arange(len(values))
    return DiscreteFunction(values, np.asarray(boundary_index))


def plateau_spherical(space: FiniteMetricMeasureSpace, cap: SphericalCapacitor, targets=None,
                      boundary_index=None) -> DiscreteFunction:
    """``f = min{1, 2 - d(x_j, .)/r_j}`` on ``B(x_j, 2 r_j)``, zero outside.

    By default ``f`` is evaluated at the points of ``space``; ``targets``
    (coordinates, e.g. all mesh vertices) evaluates it elsewhere with the
    Euclidean distance to the center.
    """
    pts = _targets(space, targets)
    if pts is None:
        d = space.dist_matrix[cap.center]
    else:
        d = cdist(pts, space.coords[[cap.center]])[:, 0]
    return _wrap(np.clip(2.0 - d / cap.r_j, 0.0, 1.0), boundary_index)


def plateau_cm(space: FiniteMetricMeasureSpace, cap: CMCapacitor, targets=None,
               boundary_index=None) -> DiscreteFunction:
    """``phi = 1 - d(A, .)/r`` on the open r-neighbourhood of ``A``, zero outside."""
    if not cap.r_used > 0:
        raise ConfigError("capacitor radius must be positive")
    pts = _targets(space, targets)
    if pts is None:
        d = space.dist_matrix[np.asarray(cap.A)].min(axis=0)
    else:
        d = space.distances_to(pts, cap.A)
    return _wrap(np.maximum(0.0, 1.0 - d / cap.r_used), boundary_index)


def plateau(space, cap, targets=None, boundary_index=None) -> DiscreteFunction:
    fn = plateau_spherical if isinstance(cap, SphericalCapacitor) else plateau_cm
    return fn(space, cap, targets, boundary_index)


@dataclass(frozen=True)
class QuotientBreakdown:
    bulk_energy: float
    boundary_energy: float
    boundary_mass: float
    quotient: float


def _values(assembly: Assembly, f):
    v = f.values if isinstance(f, DiscreteFunction) else np.asarray(f, dtype=float)
    if v.shape != (assembly.mesh.nv,):
        raise ConfigError("function must have one value per mesh vertex")
    return v


def rayleigh_quotient(assembly: Assembly, beta: float, f) -> QuotientBreakdown:
    """Bulk energy, boundary energy, boundary mass and their quotient."""
    if beta < 0:
        raise ConfigError("beta must be nonnegative")
    v = _values(assembly, f)
    g = v[assembly.boundary_index_map]
    mass = float(g @ (assembly.M_gamma * g))
    if not mass > 0:
        raise ZeroBoundaryMass("function vanishes on the boundary")
    # energies of PSD forms; clip round-off below zero
    bulk = max(float(v @ (assembly.A_omega @ v)), 0.0)
    bnd = max(float(g @ (assembly.A_gamma @ g)), 0.0)
    return QuotientBreakdown(bulk, bnd, mass, (bulk + beta * bnd) / mass)


def element_owner(assembly: Assembly, fns) -> np.ndarray:
    """Per triangle, the index of the single function nonzero there (-1 if none).

    Raises SupportsOverlap if two functions are nonzero on the same triangle.
    """
    tri = assembly.mesh.triangles
    owner = np.full(len(tri), -1)
    for i, f in enumerate(fns):
        hit = (_values(assembly, f)[tri] != 0).any(axis=1)
        clash = hit & (owner >= 0)
        if clash.any():
            raise SupportsOverlap(f"functions {owner[clash][0]} and {i} share a mesh element")
        owner[hit] = i
    return owner


def minmax_bound_from_family(assembly: Assembly, beta: float, fns) -> float:
    """Upper bound on the eigenvalue of index ``len(fns) - 1`` from disjointly supported functions.

    On the span of functions with pairwise element-disjoint supports the
    quotient of a combination is a weighted mean of the individual
    quotients, so the largest one bounds the min-max value.
    """
    if len(fns) == 0:
        raise ConfigError("empty family")
    element_owner(assembly, fns)
    return max(rayleigh_quotient(assembly, beta, f).quotient for f in fns)


def ritz_values(assembly: Assembly, beta: float, fns) -> np.ndarray:
    """Eigenvalues of the pencil projected onto the span of ``fns``.

    The j-th value bounds the eigenvalue of index j for any linearly
    independent family.
    """
    V = np.column_stack([_values(assembly, f) for f in fns])
    G = V[assembly.boundary_index_map]
    K = V.T @ (assembly.A_omega @ V) + beta * (G.T @ (assembly.A_gamma @ G))
    M = G.T @ (assembly.M_gamma[:, None] * G)
    K = 0.5 * (K + K.T)
    M = 0.5 * (M + M.T)
    try:
        return la.eigh(K, M, eigvals_only=True)
    except la.LinAlgError as exc:
        raise NumericError(f"test functions are linearly dependent on the boundary: {exc}") from exc


@dataclass(eq=False)
class Certificate:
    """Certified upper bounds ``lambda_j <= bounds[j]`` for ``j = 0..k``."""

    k: int
    beta: float
    bounds: np.ndarray
    method: str
    family_kind: str
    trace: dict = field(default_factory=dict)

    @property
    def bound(self) -> float:
        return float(self.bounds[self.k])


def _mesh_assembly(mesh_or_assembly):
    if isinstance(mesh_or_assembly, Assembly):
        return mesh_or_assembly
    if isinstance(mesh_or_assembly, TriMesh):
        return assemble(mesh_or_assembly)
    raise TypeError("expected TriMesh or Assembly")


def _disjoint_pick(assembly, fns, order, need):
    """Greedy element-disjoint subfamily in the given order."""
    tri = assembly.mesh.triangles
    used = np.zeros(len(tri), dtype=bool)
    chosen = []
    for i in order:
        hit = (fns[i].values[tri] != 0).any(axis=1)
        if np.any(hit & used):
            continue
        used |= hit
        chosen.append(i)
        if len(chosen) == need:
            break
    return chosen


def certified_upper_bounds(mesh_or_assembly, beta: float, k: int, N: int, r0: float = 0.1,
                           harmonic: bool = False, budget: int = 1000) -> Certificate:
    """Certified bounds on ``lambda_0..lambda_k`` from a capacitor family.

    Builds ``K = 4k`` capacitors on the boundary vertices with
    ``alpha = |Gamma| / (16 k N^2)``, evaluates their plateau functions on
    the mesh and keeps the capacitors whose support covers at most a
    ``1/k`` share of both the area and the boundary length. The ``k + 1``
    element-disjoint functions of smallest quotient then certify every
    index up to ``k``. If the filtered family is too small, the whole
    family is used; if disjointness still fails, the Ritz values of the
    span are used instead. Both fallbacks are recorded in the trace.

    With ``harmonic=True`` the bounds are the Ritz values of the harmonic
    extensions of the plateau traces, which are never larger.
    """
    if k < 1:
        raise ConfigError("k must be at least 1")
    if beta < 0:
        raise ConfigError("beta must be nonnegative")
    asm = _mesh_assembly(mesh_or_assembly)
    mesh = asm.mesh
    space = space_from_mesh(mesh)
    K = 4 * k
    alpha = mesh.vol_gamma / (16 * k * N * N)
    family = build_capacitors(space, K, r0, N, alpha=alpha, budget=budget)
    bidx = mesh.boundary_vertices
    fns = [plateau(space, c, mesh.vertices, bidx) for c in family.capacitors]
    q = np.array([rayleigh_quotient(asm, beta, f).quotient for f in fns])

    area = mesh.vertex_areas
    vol_b = np.array([area[f.support].sum() for f in fns])
    len_b = np.array([space.measure(c.B) for c in family.capacitors])
    keep = (vol_b <= mesh.vol_omega / k * (1 + 1e-12)) & (len_b <= mesh.vol_gamma / k * (1 + 1e-12))

    trace = {"K": K, "alpha": alpha, "N": N, "r0": r0, "family_kind": family.kind,
             "r_tilde0": family.r_tilde0, "n_selected": int(keep.sum()),
             "selection_fallback": False, "ritz_fallback": False, "family_trace": family.trace}
    by_q = np.argsort(q, kind="stable")
    chosen = _disjoint_pick(asm, fns, [i for i in by_q if keep[i]], k + 1)
    if len(chosen) < k + 1:
        trace["selection_fallback"] = True
        chosen = _disjoint_pick(asm, fns, list(by_q), k + 1)
    trace["chosen"] = [int(i) for i in chosen]

    if harmonic:
        pool = chosen if len(chosen) == k + 1 else list(by_q)
        ext = extend_columns(asm, np.column_stack([fns[i].boundary_values for i in pool]))
        bounds = ritz_values(asm, beta, list(ext.T))[: k + 1]
        method = "ritz-harmonic"
    elif len(chosen) == k + 1:
        sel = [fns[i] for i in chosen]
        minmax_bound_from_family(asm, beta, sel)  # re-checks disjointness
        bounds = np.sort(q[chosen])
        method = "disjoint"
    else:
        trace["ritz_fallback"] = True
        bounds = ritz_values(asm, beta, fns)[: k + 1]
        method = "ritz"
    return Certificate(k, float(beta), np.asarray(bounds, dtype=float), method, family.kind, trace)


def certified_envelope(certs: dict[int, Certificate]) -> dict[int, float]:
    """Combine runs for several k: ``b_k = min over runs k' >= k of bounds_{k'}[k]``.

    Every run certifies all indices up to its own k, so the minimum is
    still a certified bound and it is nondecreasing in k.
    """
    out = {}
    for k in sorted(certs):
        out[k] = min(float(c.bounds[k]) for kk, c in certs.items() if kk >= k)
    return out
