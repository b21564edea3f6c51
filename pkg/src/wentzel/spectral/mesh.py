"""Planar triangle meshes: generation, validation and the ASCII mesh format."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np
import triangle

from ..errors import MeshError

SHAPES = ("disk", "square", "ellipse", "annulus", "polygon")


@dataclass(frozen=True, eq=False)
class TriMesh:
    """A 2-D triangulation with ordered boundary loops.

    Parameters
    ----------
    vertices : (nv, 2) array
        Vertex coordinates.
    triangles : (nt, 3) int array
        Counterclockwise vertex index triples.
    boundary_loops : list of int arrays
        Closed vertex cycles; the domain lies to the left of every loop.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_loops: list = field(default_factory=list)

    def __post_init__(self):
        v = np.ascontiguousarray(self.vertices, dtype=float)
        t = np.ascontiguousarray(self.triangles, dtype=np.int64)
        loops = [np.asarray(loop, dtype=np.int64) for loop in self.boundary_loops]
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)
        object.__setattr__(self, "boundary_loops", loops)
        v.setflags(write=False)
        t.setflags(write=False)

    @property
    def nv(self) -> int:
        return len(self.vertices)

    @property
    def nt(self) -> int:
        return len(self.triangles)

    @cached_property
    def triangle_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @cached_property
    def vol_omega(self) -> float:
        return float(self.triangle_areas.sum())

    @cached_property
    def boundary_vertices(self) -> np.ndarray:
        """Global ids of boundary vertices, loops concatenated in order."""
        if not self.boundary_loops:
            return np.zeros(0, dtype=np.int64)
        return np.concatenate(self.boundary_loops)

    @cached_property
    def boundary_edges(self) -> np.ndarray:
        """(ne, 2) array of directed boundary edges following the loops."""
        edges = [np.c_[loop, np.roll(loop, -1)] for loop in self.boundary_loops]
        return np.concatenate(edges) if edges else np.zeros((0, 2), dtype=np.int64)

    @cached_property
    def boundary_edge_lengths(self) -> np.ndarray:
        e = self.boundary_edges
        return np.linalg.norm(self.vertices[e[:, 1]] - self.vertices[e[:, 0]], axis=1)

    @cached_property
    def vol_gamma(self) -> float:
        return float(self.boundary_edge_lengths.sum())

    @cached_property
    def vertex_areas(self) -> np.ndarray:
        """Lumped area per vertex (one third of each adjacent triangle)."""
        out = np.zeros(self.nv)
        np.add.at(out, self.triangles.ravel(), np.repeat(self.triangle_areas / 3.0, 3))
        return out

    def scaled(self, c: float) -> "TriMesh":
        """Copy of the mesh with coordinates multiplied by ``c > 0``."""
        if not c > 0:
            raise MeshError(f"scale factor must be positive, got {c}")
        return TriMesh(self.vertices * c, self.triangles, [loop.copy() for loop in self.boundary_loops])

    def validate(self) -> None:
        """Raise :class:`MeshError` unless every TriMesh invariant holds."""
        if self.nt == 0 or self.nv < 3:
            raise MeshError("empty mesh")
        if self.triangles.min() < 0 or self.triangles.max() >= self.nv:
            raise MeshError("triangle index out of range")
        scale = np.ptp(self.vertices, axis=0).max()
        if np.any(self.triangle_areas <= 1e-14 * scale**2):
            raise MeshError("degenerate or clockwise triangle")
        t = self.triangles
        und = np.sort(np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]]), axis=1)
        edges, counts = np.unique(und, axis=0, return_counts=True)
        if counts.max() > 2:
            raise MeshError("non-manifold edge")
        free = {tuple(e) for e in edges[counts == 1]}
        loop_edges = {tuple(sorted(e)) for e in self.boundary_edges.tolist()}
        if free != loop_edges or len(loop_edges) != len(self.boundary_edges):
            raise MeshError("boundary loops do not match the free edges of the triangulation")
        bv = self.boundary_vertices
        if len(np.unique(bv)) != len(bv):
            raise MeshError("boundary loops are not simple")
        # directed loop edges must run along their triangle (domain on the left)
        directed = {tuple(e) for e in np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]]).tolist()}
        if not all(tuple(e) in directed for e in self.boundary_edges.tolist()):
            raise MeshError("boundary loop orientation disagrees with triangle orientation")
        used = np.zeros(self.nv, dtype=bool)
        used[t.ravel()] = True
        if not used.all():
            raise MeshError("unreferenced vertices")
        euler = self.nv - len(edges) + self.nt
        if euler != 2 - len(self.boundary_loops):
            raise MeshError(f"Euler characteristic {euler} inconsistent with {len(self.boundary_loops)} loops")


# ----------------------------------------------------------------------------
# generation


def _ring(n: int, radius: float, center=(0.0, 0.0), phase: float = 0.0) -> np.ndarray:
    t = phase + 2.0 * np.pi * np.arange(n) / n
    return np.c_[center[0] + radius * np.cos(t), center[1] + radius * np.sin(t)]


def _ellipse_points(n: int, a: float, b: float) -> np.ndarray:
    """``n`` points on the ellipse equally spaced in arc length."""
    s = np.linspace(0.0, 2.0 * np.pi, 20 * n + 1)
    pts = np.c_[a * np.cos(s), b * np.sin(s)]
    arc = np.r_[0.0, np.cumsum(np.linalg.norm(np.diff(pts, axis=0), axis=1))]
    target = arc[-1] * np.arange(n) / n
    t = np.interp(target, arc, s)
    return np.c_[a * np.cos(t), b * np.sin(t)]


def _resample_polygon(corners: np.ndarray, n: int) -> np.ndarray:
    """Points along a closed polygon, corners kept, spacing at most perimeter/n."""
    nxt = np.roll(corners, -1, axis=0)
    lengths = np.linalg.norm(nxt - corners, axis=1)
    h = lengths.sum() / n
    out = []
    for p, q, ell in zip(corners, nxt, lengths):
        m = max(1, int(math.ceil(ell / h - 1e-9)))
        s = np.arange(m)[:, None] / m
        out.append(p + s * (q - p))
    return np.concatenate(out)


def _signed_area(poly: np.ndarray) -> float:
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def random_star_polygon(n_vertices: int = 9, seed: int = 0, r_min: float = 0.55, r_max: float = 1.0) -> np.ndarray:
    """A random simple polygon, star-shaped with respect to the origin."""
    rng = np.random.default_rng(seed)
    gaps = rng.uniform(0.5, 1.5, n_vertices)
    angles = 2.0 * np.pi * np.cumsum(gaps) / gaps.sum()
    radii = rng.uniform(r_min, r_max, n_vertices)
    return np.c_[radii * np.cos(angles), radii * np.sin(angles)]


def star_decagon(outer: float = 1.0, inner: float = 0.382) -> np.ndarray:
    """Regular five-pointed star as a 10-vertex polygon."""
    t = np.pi / 2 + np.pi * np.arange(10) / 5
    r = np.where(np.arange(10) % 2 == 0, outer, inner)
    return np.c_[r * np.cos(t), r * np.sin(t)]


def _triangulate(loops: list[np.ndarray], holes: list, max_area: float | None, min_angle: float) -> TriMesh:
    pts = np.concatenate(loops)
    segs, offset, idx_loops = [], 0, []
    for loop in loops:
        ids = offset + np.arange(len(loop))
        segs.append(np.c_[ids, np.roll(ids, -1)])
        idx_loops.append(ids)
        offset += len(loop)
    data = {"vertices": pts, "segments": np.concatenate(segs)}
    if holes:
        data["holes"] = np.asarray(holes, dtype=float)
    opts = f"pq{min_angle:g}Y"
    if max_area is not None:
        opts += f"a{max_area:.17g}"
    out = triangle.triangulate(data, opts)
    verts = out["vertices"]
    tris = out["triangles"].astype(np.int64)
    if len(verts) < len(pts) or not np.array_equal(verts[: len(pts)], pts):
        raise MeshError("mesher moved boundary vertices")
    p = verts[tris]
    area = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0])
    flip = area < 0
    tris[flip] = tris[flip][:, [0, 2, 1]]
    mesh = TriMesh(verts, tris, idx_loops)
    mesh.validate()
    return mesh


def gen_mesh(shape: str, resolution: int, **params) -> TriMesh:
    """Generate a quality triangle mesh.

    ``resolution`` is the number of boundary vertices on the outer loop
    (for squares and polygons the count is rounded up so that corners are
    vertices). Interior vertices are added by constrained Delaunay
    refinement; by default the interior is graded, with triangle areas
    capped at ``max_area`` (default ``(grade * h)^2`` with ``h`` the
    boundary spacing and ``grade=2``).
    """
    if shape not in SHAPES:
        raise MeshError(f"unknown shape {shape!r}; expected one of {SHAPES}")
    if int(resolution) != resolution or resolution < 4:
        raise MeshError(f"resolution must be an integer >= 4, got {resolution}")
    resolution = int(resolution)
    grade = float(params.pop("grade", 2.0))
    max_area = params.pop("max_area", None)
    min_angle = float(params.pop("min_angle", 30.0))
    holes: list = []

    if shape == "disk":
        radius = float(params.pop("radius", 1.0))
        center = tuple(params.pop("center", (0.0, 0.0)))
        if radius <= 0:
            raise MeshError("disk radius must be positive")
        loops = [_ring(resolution, radius, center)]
    elif shape == "square":
        side = float(params.pop("side", 1.0))
        if side <= 0:
            raise MeshError("square side must be positive")
        m = max(1, int(math.ceil(resolution / 4)))
        corners = side * np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
        loops = [_resample_polygon(corners, 4 * m)]
    elif shape == "ellipse":
        a = float(params.pop("a", 1.25))
        b = float(params.pop("b", 0.8))
        if a <= 0 or b <= 0:
            raise MeshError("ellipse semi-axes must be positive")
        loops = [_ellipse_points(resolution, a, b)]
    elif shape == "annulus":
        r_in = float(params.pop("r_in", 0.5))
        r_out = float(params.pop("r_out", 1.0))
        if not 0 < r_in < r_out:
            raise MeshError("annulus radii must satisfy 0 < r_in < r_out")
        n_in = max(4, int(round(resolution * r_in / r_out)))
        inner = _ring(n_in, r_in)[::-1]
        loops = [_ring(resolution, r_out), inner]
        holes = [(0.0, 0.0)]
    else:
        corners = np.asarray(params.pop("vertices"), dtype=float)
        if corners.ndim != 2 or corners.shape[1] != 2 or len(corners) < 3:
            raise MeshError("polygon needs an (m, 2) vertex array with m >= 3")
        area = _signed_area(corners)
        if abs(area) < 1e-12:
            raise MeshError("degenerate polygon")
        if area < 0:
            corners = corners[::-1]
        from shapely.geometry import Polygon

        if not Polygon(corners).is_valid:
            raise MeshError("polygon is not simple")
        loops = [_resample_polygon(corners, resolution)]
    if params:
        raise MeshError(f"unused parameters for {shape}: {sorted(params)}")

    outer = loops[0]
    h = np.linalg.norm(np.roll(outer, -1, axis=0) - outer, axis=1).max()
    if max_area is None:
        max_area = (grade * h) ** 2
    return _triangulate(loops, holes, max_area, min_angle)


# ----------------------------------------------------------------------------
# ASCII format: header "nv nt nl", vertex lines, triangle lines, loop lines


def write_mesh(mesh: TriMesh, path) -> None:
    lines = ["# wentzel mesh: nv nt nl / x y / i j k / len i1 ... i_len",
             f"{mesh.nv} {mesh.nt} {len(mesh.boundary_loops)}"]
    lines += [f"{x:.17g} {y:.17g}" for x, y in mesh.vertices]
    lines += [f"{i} {j} {k}" for i, j, k in mesh.triangles]
    lines += [" ".join(str(v) for v in [len(loop), *loop.tolist()]) for loop in mesh.boundary_loops]
    Path(path).write_text("\n".join(lines) + "\n")


def _data_lines(text: str) -> list[list[str]]:
    out = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            out.append(line.split())
    return out


def read_mesh(path) -> TriMesh:
    rows = _data_lines(Path(path).read_text())
    try:
        nv, nt, nl = (int(x) for x in rows[0])
        verts = np.array([[float(x) for x in r] for r in rows[1 : 1 + nv]])
        tris = np.array([[int(x) for x in r] for r in rows[1 + nv : 1 + nv + nt]], dtype=np.int64)
        loops = []
        for r in rows[1 + nv + nt : 1 + nv + nt + nl]:
            n = int(r[0])
            if len(r) != n + 1:
                raise MeshError("loop length mismatch")
            loops.append(np.array([int(x) for x in r[1:]], dtype=np.int64))
    except (IndexError, ValueError) as exc:
        raise MeshError(f"malformed mesh file {path}: {exc}") from exc
    if verts.shape != (nv, 2) or tris.shape != (nt, 3) or len(loops) != nl:
        raise MeshError(f"malformed mesh file {path}")
    mesh = TriMesh(verts, tris, loops)
    mesh.validate()
    return mesh


def polygon_loops(mesh: TriMesh) -> list[np.ndarray]:
    """Boundary loops as coordinate arrays."""
    return [mesh.vertices[loop] for loop in mesh.boundary_loops]


def shape_mesh(spec: str, resolution: int) -> TriMesh:
    """Build a mesh from a short shape spec such as ``disk`` or ``ellipse:a=2,b=1``."""
    name, _, rest = spec.partition(":")
    params: dict = {}
    for item in filter(None, rest.split(",")):
        key, _, value = item.partition("=")
        params[key.strip()] = float(value)
    if name == "polygon":
        seed = int(params.pop("seed", 0))
        nverts = int(params.pop("n", 9))
        params["vertices"] = random_star_polygon(nverts, seed)
    elif name == "star":
        name = "polygon"
        params["vertices"] = star_decagon(params.pop("outer", 1.0), params.pop("inner", 0.382))
    return gen_mesh(name, resolution, **params)


__all__: Sequence[str] = (
    "TriMesh", "gen_mesh", "read_mesh", "write_mesh", "random_star_polygon",
    "star_decagon", "polygon_loops", "shape_mesh", "SHAPES",
)
