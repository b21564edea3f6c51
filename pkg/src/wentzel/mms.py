"""Finite metric measure spaces and the geometric estimators used by the bounds.

A :class:`FiniteMetricMeasureSpace` is a finite set of points with a
distance and a measure carried by a designated boundary subset. All balls
are open: ``B(x, r) = {y : d(x, y) < r}``.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, fields
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .errors import ConfigError


def unit_ball_volume(d: int) -> float:
    """Volume of the unit ball of R^d."""
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


def sphere_area(n: int) -> float:
    """Volume of the unit sphere S^{n-1} in R^n."""
    return 2 * math.pi ** (n / 2) / math.gamma(n / 2)


class FiniteMetricMeasureSpace:
    """Points, a symmetric distance and nonnegative weights.

    Parameters
    ----------
    coords : (n, d) array, optional
        Coordinates; the distance is Euclidean unless ``dist`` is given.
    weights : (n,) array
        Point masses. Positive weights must lie in ``boundary_mask``.
    boundary_mask : (n,) bool array, optional
        Points allowed to carry mass. Defaults to ``weights > 0``.
    dim_n : int
        Ambient dimension used by scale-dependent quantities.
    dist : (n, n) array, optional
        Explicit distance matrix.
    """

    def __init__(self, coords=None, weights=None, boundary_mask=None, dim_n: int = 2, dist=None):
        if coords is None and dist is None:
            raise ConfigError("need coordinates or a distance matrix")
        self.coords = None if coords is None else np.array(coords, dtype=float)
        if self.coords is not None and self.coords.ndim == 1:
            self.coords = self.coords[:, None]
        n = len(self.coords) if self.coords is not None else len(dist)
        if n == 0:
            raise ConfigError("empty space")
        self.weights = np.ones(n) if weights is None else np.array(weights, dtype=float)
        if self.weights.shape != (n,):
            raise ConfigError("weights must have one entry per point")
        if boundary_mask is None:
            boundary_mask = self.weights > 0
        self.boundary_mask = np.array(boundary_mask, dtype=bool)
        self.dim_n = int(dim_n)
        self._dist = None if dist is None else np.array(dist, dtype=float)
        for arr in (self.coords, self.weights, self.boundary_mask, self._dist):
            if arr is not None:
                arr.setflags(write=False)
        self._validate()

    def _validate(self):
        n = self.n_points
        if self.dim_n < 2:
            raise ConfigError("dimension must be at least 2")
        if np.any(self.weights < 0) or not np.all(np.isfinite(self.weights)):
            raise ConfigError("weights must be finite and nonnegative")
        if np.any((self.weights > 0) & ~self.boundary_mask):
            raise ConfigError("positive weight outside the boundary mask")
        if self.total_measure <= 0:
            raise ConfigError("total measure must be positive")
        if self._dist is not None:
            D = self._dist
            if D.shape != (n, n):
                raise ConfigError("distance matrix has the wrong shape")
            scale = max(float(D.max()), 1e-300)
            if np.any(D < 0) or np.any(np.abs(np.diag(D)) > 0):
                raise ConfigError("distances must be nonnegative with zero diagonal")
            if np.abs(D - D.T).max() > 1e-12 * scale:
                raise ConfigError("distance matrix is not symmetric")

    @property
    def n_points(self) -> int:
        return len(self.weights)

    @cached_property
    def dist_matrix(self) -> np.ndarray:
        D = self._dist if self._dist is not None else cdist(self.coords, self.coords)
        D = np.array(D)
        D.setflags(write=False)
        return D

    def dist(self, i: int, j: int) -> float:
        return float(self.dist_matrix[i, j])

    @cached_property
    def total_measure(self) -> float:
        return float(self.weights.sum())

    @cached_property
    def diameter(self) -> float:
        return float(self.dist_matrix.max())

    @property
    def max_weight(self) -> float:
        return float(self.weights.max())

    def measure(self, members) -> float:
        return float(self.weights[np.asarray(members, dtype=np.int64)].sum())

    def triangle_defect(self, n_samples: int = 2000, seed: int = 0) -> float:
        """Largest ``d(i,k) - d(i,j) - d(j,k)`` over random triples, relative to the diameter."""
        rng = np.random.default_rng(seed)
        i, j, k = rng.integers(0, self.n_points, size=(3, n_samples))
        D = self.dist_matrix
        gap = D[i, k] - D[i, j] - D[j, k]
        return float(max(gap.max(), 0.0) / max(self.diameter, 1e-300))

    def distances_to(self, targets: np.ndarray, members) -> np.ndarray:
        """Euclidean distance from each target coordinate to the nearest member point."""
        if self.coords is None:
            raise ConfigError("space has no coordinates")
        pts = self.coords[np.asarray(members, dtype=np.int64)]
        out = np.full(len(targets), np.inf)
        for start in range(0, len(pts), 256):
            out = np.minimum(out, cdist(targets, pts[start : start + 256]).min(axis=1))
        return out

    def checksum(self) -> str:
        return hashlib.sha256(space_to_text(self).encode()).hexdigest()


@dataclass(frozen=True)
class Ball:
    center: int
    radius: float
    members: np.ndarray
    measure: float


def _check_point(space: FiniteMetricMeasureSpace, x) -> int:
    if isinstance(x, (bool, np.bool_)) or int(x) != x or not 0 <= int(x) < space.n_points:
        raise ConfigError(f"invalid point id {x!r}")
    return int(x)


def ball(space: FiniteMetricMeasureSpace, x: int, r: float) -> Ball:
    """Open ball ``{y : d(x, y) < r}`` and its measure."""
    x = _check_point(space, x)
    if r < 0:
        raise ConfigError("radius must be nonnegative")
    members = np.flatnonzero(space.dist_matrix[x] < r)
    return Ball(x, float(r), members, space.measure(members))


def ball_measures(space: FiniteMetricMeasureSpace, r: float, centers=None, weights=None) -> np.ndarray:
    """Open-ball measures ``mu(B(x, r))`` for every center (default: all points)."""
    D = space.dist_matrix if centers is None else space.dist_matrix[np.asarray(centers)]
    w = space.weights if weights is None else weights
    return (D < r) @ w


def covering_number(space: FiniteMetricMeasureSpace, r: float, epsilon: float = 4.0,
                    sample_centers: Iterable[int] | None = None) -> int:
    """Largest greedy r/epsilon-net over the balls ``B(x, r)``.

    Points of each ball are scanned in id order and kept when farther than
    ``r / epsilon`` from every kept point, so the kept points cover the
    ball with closed balls of radius ``r / epsilon``.
    """
    if space.n_points == 0:
        raise ConfigError("empty space")
    if not r > 0 or not epsilon > 1:
        raise ConfigError("need r > 0 and epsilon > 1")
    D = space.dist_matrix
    centers = range(space.n_points) if sample_centers is None else sample_centers
    sep = r / epsilon
    best = 0
    for x in centers:
        members = np.flatnonzero(D[_check_point(space, x)] < r)
        sub = D[np.ix_(members, members)]
        covered = np.zeros(len(members), dtype=bool)
        count = 0
        for i in range(len(members)):
            if covered[i]:
                continue
            count += 1
            covered |= sub[i] <= sep
        best = max(best, count)
    return best


def radial_profile(space: FiniteMetricMeasureSpace, r_grid: Sequence[float]) -> list[tuple[float, float]]:
    """``(r, sup_x mu(B(x, r)))`` for each radius, maximized over all points."""
    r_grid = np.asarray(r_grid, dtype=float)
    if np.any(r_grid <= 0) or np.any(np.diff(r_grid) <= 0):
        raise ConfigError("r_grid must be increasing and positive")
    return [(float(r), float(ball_measures(space, r).max())) for r in r_grid]


def tau(space: FiniteMetricMeasureSpace, alpha: float, active_mask=None, rtol: float = 1e-12) -> float:
    """``sup{r > 0 : mu_A(B(x, r)) <= alpha for all x in A}`` on the active set A.

    Balls are measured with the measure restricted to A. The supremum is
    attained at a pairwise distance; 0 is returned when an atom (or a
    cluster of coincident points) already exceeds ``alpha``, and
    ``2 * diameter`` when no ball ever exceeds it. Measures within
    ``rtol`` of ``alpha`` count as not exceeding it, so round-off in
    summed weights cannot turn an exact tie into a violation.
    """
    if alpha < 0:
        raise ConfigError("alpha must be nonnegative")
    cap = 2.0 * space.diameter
    active = np.ones(space.n_points, dtype=bool) if active_mask is None else np.asarray(active_mask, dtype=bool)
    idx = np.flatnonzero(active)
    if len(idx) == 0:
        return cap
    w = space.weights[idx]
    limit = alpha * (1 + rtol)
    if w.sum() <= limit:
        return cap
    D = space.dist_matrix[np.ix_(idx, idx)]
    order = np.argsort(D, axis=1, kind="stable")
    Ds = np.take_along_axis(D, order, axis=1)
    cum = np.cumsum(w[order], axis=1)
    over = cum > limit
    hit = over.any(axis=1)
    first = np.argmax(over, axis=1)
    radii = np.where(hit, Ds[np.arange(len(idx)), first], np.inf)
    value = radii.min()
    return float(value) if np.isfinite(value) else cap


def log_grid(r_min: float, r_max: float, per_decade: int = 64) -> np.ndarray:
    decades = math.log10(r_max / r_min)
    return np.logspace(math.log10(r_min), math.log10(r_max), max(2, int(math.ceil(per_decade * decades)) + 1))


def concentration_constant(space: FiniteMetricMeasureSpace, r_min: float, r_max: float,
                           per_decade: int = 64) -> float:
    """Sampled ``sup mu(B(x, r)) / r^{n-1}`` over boundary centers and a log grid of radii."""
    if not 0 < r_min < r_max <= 1:
        raise ConfigError("need 0 < r_min < r_max <= 1")
    centers = np.flatnonzero(space.boundary_mask)
    if len(centers) == 0:
        raise ConfigError("empty boundary")
    p = space.dim_n - 1
    best = space.max_weight / r_max**p
    for r in log_grid(r_min, r_max, per_decade):
        best = max(best, float(ball_measures(space, r, centers).max()) / r**p)
    return best


def distance_to_boundary(space: FiniteMetricMeasureSpace) -> np.ndarray:
    return space.dist_matrix[:, space.weights > 0].min(axis=1)


def fit_nardulli(space: FiniteMetricMeasureSpace, r_grid: Sequence[float]) -> tuple[float, float]:
    """Smallest ``C0 >= 0`` with ``mu(B(x,R)) <= (1 + 2 R C0) w_{n-1} (2R)^{n-1}`` on the grid.

    Only pairs with ``d(x, boundary) <= R`` are constrained. ``R0`` is the
    largest grid radius, the range over which the fit was checked.
    """
    r_grid = np.asarray(r_grid, dtype=float)
    if len(r_grid) == 0 or np.any(r_grid <= 0):
        raise ConfigError("r_grid must be nonempty and positive")
    omega = unit_ball_volume(space.dim_n - 1)
    p = space.dim_n - 1
    dgam = distance_to_boundary(space)
    c0 = 0.0
    for R in r_grid:
        eligible = np.flatnonzero(dgam <= R)
        if len(eligible) == 0:
            continue
        mu = ball_measures(space, R, eligible).max()
        c0 = max(c0, (mu / (omega * (2 * R) ** p) - 1.0) / (2 * R))
    return float(c0), float(r_grid.max())


def nardulli_holds(space: FiniteMetricMeasureSpace, r_grid, c0: float, r0: float, rtol: float = 1e-12) -> bool:
    omega = unit_ball_volume(space.dim_n - 1)
    dgam = distance_to_boundary(space)
    for R in np.asarray(r_grid, dtype=float):
        if R > r0:
            continue
        eligible = np.flatnonzero(dgam <= R)
        if len(eligible) == 0:
            continue
        rhs = (1 + 2 * R * c0) * omega * (2 * R) ** (space.dim_n - 1)
        if ball_measures(space, R, eligible).max() > rhs * (1 + rtol):
            return False
    return True


# ----------------------------------------------------------------------------
# intersection index


def _crossings(loops: list[np.ndarray], normals: np.ndarray, offsets: np.ndarray, tol: float) -> np.ndarray:
    """Transversal crossing counts of lines ``normal . p = offset`` with closed loops.

    Vertices lying on a line are pushed to either side; the larger count
    (a nearby transversal line) is kept.
    """
    best = None
    for side in (1.0, -1.0):
        total = np.zeros(len(offsets), dtype=np.int64)
        for loop in loops:
            s = loop @ normals.T - offsets[None, :]
            sign = np.where(np.abs(s) <= tol, side, np.sign(s))
            total += (sign != np.roll(sign, -1, axis=0)).sum(axis=0)
        best = total if best is None else np.maximum(best, total)
    return best


def _drop_collinear(loop: np.ndarray, tol: float) -> np.ndarray:
    prev, nxt = np.roll(loop, 1, axis=0), np.roll(loop, -1, axis=0)
    a, b = loop - prev, nxt - loop
    cross = np.abs(a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0])
    keep = cross > tol * np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1)
    return loop[keep] if keep.sum() >= 3 else loop


def intersection_index(polyline, num_lines: int = 256, rng_seed: int = 0, batch: int = 4096) -> int:
    """Sampled supremum of transversal line crossings with a closed polygon.

    ``polyline`` is an ``(m, 2)`` vertex array or a list of such loops.
    Lines are random (uniform angle, uniform offset across the bounding
    box) plus every line through two distinct edge midpoints.
    """
    if isinstance(polyline, np.ndarray) and polyline.ndim == 2:
        loops = [polyline.astype(float)]
    elif len(polyline) and np.ndim(polyline[0]) == 1:
        loops = [np.asarray(polyline, dtype=float)]
    else:
        loops = [np.asarray(p, dtype=float) for p in polyline]
    if num_lines < 1:
        raise ConfigError("num_lines must be positive")
    for loop in loops:
        x, y = loop[:, 0], loop[:, 1]
        area = 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))
        if len(loop) < 3 or area <= 1e-14 * np.ptp(loop, axis=0).max() ** 2:
            raise ConfigError("degenerate polygon (zero area)")
    pts = np.concatenate(loops)
    scale = float(np.ptp(pts, axis=0).max())
    tol = 1e-12 * scale
    loops = [_drop_collinear(loop, 1e-12) for loop in loops]

    rng = np.random.default_rng(rng_seed)
    theta = rng.uniform(0.0, np.pi, num_lines)
    normals = np.c_[np.cos(theta), np.sin(theta)]
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    corners = np.array([[lo[0], lo[1]], [hi[0], lo[1]], [lo[0], hi[1]], [hi[0], hi[1]]])
    proj = corners @ normals.T
    offsets = rng.uniform(proj.min(axis=0), proj.max(axis=0))
    best = int(_crossings(loops, normals, offsets, tol).max())

    mids = np.concatenate([0.5 * (loop + np.roll(loop, -1, axis=0)) for loop in loops])
    i, j = np.triu_indices(len(mids), k=1)
    for start in range(0, len(i), batch):
        a, b = mids[i[start : start + batch]], mids[j[start : start + batch]]
        d = b - a
        norm = np.linalg.norm(d, axis=1)
        ok = norm > tol
        nrm = np.c_[-d[ok, 1], d[ok, 0]] / norm[ok, None]
        off = np.einsum("ij,ij->i", nrm, a[ok])
        if len(off):
            best = max(best, int(_crossings(loops, nrm, off, tol).max()))
    return max(best, 2)


# ----------------------------------------------------------------------------
# geometry summary


@dataclass
class GeometrySummary:
    """Geometric inputs of the closed-form bounds."""

    n: int
    vol_omega: float
    vol_gamma: float
    kappa: float = 0.0
    c_tilde: float | None = None
    c0: float | None = None
    r0_nardulli: float | None = None
    i_gamma: int | None = None

    def __post_init__(self):
        if self.n < 2:
            raise ConfigError("dimension must be at least 2")
        if not (self.vol_omega > 0 and self.vol_gamma > 0):
            raise ConfigError("volumes must be positive")
        if self.kappa < 0:
            raise ConfigError("kappa must be nonnegative")
        if self.c_tilde is not None and self.c_tilde < 0:
            raise ConfigError("c_tilde must be nonnegative")
        if self.i_gamma is not None and (self.i_gamma < 2 or self.i_gamma % 2):
            raise ConfigError("i_gamma must be an even integer >= 2")

    @property
    def omega_n_minus_1(self) -> float:
        return unit_ball_volume(self.n - 1)

    def to_json(self) -> str:
        d = asdict(self)
        d["omega_n_minus_1"] = self.omega_n_minus_1
        return json.dumps(d, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "GeometrySummary":
        raw = json.loads(text)
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in raw.items() if k in names})


# ----------------------------------------------------------------------------
# plain-text space format: "n_points dim_n" then "x y [z] weight is_boundary"


def space_to_text(space: FiniteMetricMeasureSpace) -> str:
    if space.coords is None:
        raise ConfigError("only coordinate spaces can be exported")
    lines = ["# wentzel space: x y [z] weight is_boundary", f"{space.n_points} {space.dim_n}"]
    for c, w, b in zip(space.coords, space.weights, space.boundary_mask):
        lines.append(" ".join(f"{v:.17g}" for v in c) + f" {w:.17g} {int(b)}")
    return "\n".join(lines) + "\n"


def write_space(space: FiniteMetricMeasureSpace, path) -> None:
    Path(path).write_text(space_to_text(space))


def read_space(path) -> FiniteMetricMeasureSpace:
    rows = []
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            rows.append(line.split())
    try:
        n, dim = int(rows[0][0]), int(rows[0][1])
        data = np.array([[float(v) for v in r] for r in rows[1 : 1 + n]])
    except (IndexError, ValueError) as exc:
        raise ConfigError(f"malformed space file {path}: {exc}") from exc
    if data.shape[0] != n or data.shape[1] < 3:
        raise ConfigError(f"malformed space file {path}")
    return FiniteMetricMeasureSpace(data[:, :-2], data[:, -2], data[:, -1] > 0.5, dim_n=dim)


def space_from_mesh(mesh) -> FiniteMetricMeasureSpace:
    """Boundary vertices of a mesh with lumped boundary-length weights.

    Point ``i`` is ``mesh.boundary_vertices[i]``; distances are Euclidean.
    """
    bidx = mesh.boundary_vertices
    local = np.full(mesh.nv, -1, dtype=np.int64)
    local[bidx] = np.arange(len(bidx))
    e = local[mesh.boundary_edges]
    w = np.zeros(len(bidx))
    np.add.at(w, e[:, 0], 0.5 * mesh.boundary_edge_lengths)
    np.add.at(w, e[:, 1], 0.5 * mesh.boundary_edge_lengths)
    return FiniteMetricMeasureSpace(mesh.vertices[bidx], w, np.ones(len(bidx), dtype=bool), dim_n=2)
