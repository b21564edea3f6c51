"""End-to-end comparison of computed spectra, certificates and closed-form bounds."""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .bounds import bound_report, check_dominance, constants, weyl_constant
from .errors import ConfigError, ConstructionError
from .mms import (
    FiniteMetricMeasureSpace,
    GeometrySummary,
    concentration_constant,
    covering_number,
    fit_nardulli,
    intersection_index,
    log_grid,
    space_from_mesh,
)
from .rayleigh import certified_envelope, certified_upper_bounds
from .spectral import assemble, read_mesh, shape_mesh, solve_wentzel
from .spectral.mesh import TriMesh, polygon_loops

CSV_HEADER = ["k", "lambda", "certified", "weyl", "thm_general", "thm_ricci", "cor", "euclid", "dom_ok"]


def parse_k_range(text: str) -> tuple[int, int]:
    """``"5"`` or ``"1..8"`` to an inclusive range."""
    try:
        if ".." in text:
            lo, hi = (int(v) for v in text.split(".."))
        else:
            lo = hi = int(text)
    except ValueError as exc:
        raise ConfigError(f"bad k range {text!r}; use K or K1..K2") from exc
    if lo < 1 or hi < lo:
        raise ConfigError(f"k range {text!r} must satisfy 1 <= K1 <= K2")
    return lo, hi


@dataclass
class RunConfig:
    beta: float
    k_min: int = 1
    k_max: int = 10
    shape: str | None = "disk"
    resolution: int = 240
    mesh_path: str | None = None
    n_cover: str | int = "auto"
    r0: float = 0.1
    kappa: float = 0.0
    seed: int = 0
    out: str | None = None
    fmt: str = "csv"
    certify: bool = True
    rtol: float = 1e-8
    per_decade: int = 64

    def __post_init__(self):
        if not (isinstance(self.beta, (int, float)) and math.isfinite(self.beta) and self.beta >= 0):
            raise ConfigError(f"beta must be a finite nonnegative number, got {self.beta}")
        if self.k_min < 1 or self.k_max < self.k_min:
            raise ConfigError("k range must be nonempty and start at 1 or above")
        if self.mesh_path is None and self.shape is None:
            raise ConfigError("need a mesh file or a shape")
        if self.fmt not in ("csv", "json"):
            raise ConfigError("format must be csv or json")
        if not 0 < self.r0 <= 0.1:
            raise ConfigError("r0 must lie in (0, 1/10]")
        if self.kappa < 0:
            raise ConfigError("kappa must be nonnegative")
        if isinstance(self.n_cover, str) and self.n_cover not in ("auto", "paper"):
            try:
                self.n_cover = int(self.n_cover)
            except ValueError as exc:
                raise ConfigError("n_cover must be auto, paper or a positive integer") from exc
        if isinstance(self.n_cover, int) and self.n_cover < 1:
            raise ConfigError("n_cover must be positive")

    @property
    def ks(self) -> np.ndarray:
        return np.arange(self.k_min, self.k_max + 1)

    def load_mesh(self) -> TriMesh:
        if self.mesh_path is not None:
            return read_mesh(self.mesh_path)
        return shape_mesh(self.shape, self.resolution)


@dataclass
class SweepRow:
    k: int
    lambda_solver: float
    certified: float
    weyl: float
    thm_general: float
    thm_ricci: float
    cor: float
    euclid: float
    dom_ok: bool
    flags: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)

    def csv_fields(self) -> list[str]:
        vals = [self.lambda_solver, self.certified, self.weyl, self.thm_general, self.thm_ricci, self.cor, self.euclid]
        return [str(self.k)] + [f"{v:.17g}" for v in vals] + ["true" if self.dom_ok else "false"]


@dataclass
class SweepResult:
    rows: list[SweepRow]
    geometry: GeometrySummary
    N: int
    exit_code: int
    notes: dict = field(default_factory=dict)


def boundary_spacing(mesh: TriMesh) -> float:
    return float(mesh.boundary_edge_lengths.max())


def summarize_geometry(mesh: TriMesh, kappa: float = 0.0, seed: int = 0, per_decade: int = 64,
                       space: FiniteMetricMeasureSpace | None = None) -> GeometrySummary:
    """Volumes plus the measured concentration, Nardulli and intersection constants.

    Radii below ``16 h`` (``h`` the largest boundary edge) resolve the
    polygon rather than the curve, so the sampled radius range starts
    there (or at half the range when the mesh is very coarse).
    """
    space = space_from_mesh(mesh) if space is None else space
    r_max = 1.0
    r_min = min(0.5 * r_max, 16 * boundary_spacing(mesh))
    c_tilde = concentration_constant(space, r_min, r_max, per_decade)
    # Nardulli centers range over all vertices, interior ones with zero weight
    bidx = mesh.boundary_vertices
    w = np.zeros(mesh.nv)
    w[bidx] = space.weights
    full = FiniteMetricMeasureSpace(mesh.vertices, w, w > 0, dim_n=2)
    c0, r0 = fit_nardulli(full, log_grid(r_min, r_max, 16))
    i_gamma = intersection_index(polygon_loops(mesh), num_lines=256, rng_seed=seed)
    return GeometrySummary(2, mesh.vol_omega, mesh.vol_gamma, kappa, c_tilde, c0, r0, i_gamma)


def resolve_n_cover(n_cover, space: FiniteMetricMeasureSpace, kappa: float = 0.0) -> int:
    """Covering constant used for certification.

    ``"auto"`` measures the largest greedy r/4-net over unit balls;
    ``"paper"`` uses the volume-comparison bound ``2^{5n} e^{4(n-1) kappa}``.
    """
    if n_cover == "auto":
        return covering_number(space, 1.0, 4.0)
    if n_cover == "paper":
        return int(math.ceil(constants(space.dim_n, kappa).N_bound))
    return int(n_cover)


def run_sweep(config: RunConfig) -> SweepResult:
    """Solve, certify and evaluate every bound for each k of the configuration."""
    t0 = time.perf_counter()
    mesh = config.load_mesh()
    asm = assemble(mesh)
    ks = config.ks
    nb = len(mesh.boundary_vertices)
    if config.k_max + 1 > nb:
        raise ConfigError(f"k_max={config.k_max} needs more than {nb} boundary vertices")
    spec = solve_wentzel(asm, config.beta, config.k_max + 1)
    t_solve = time.perf_counter() - t0

    space = space_from_mesh(mesh)
    geom = summarize_geometry(mesh, config.kappa, config.seed, config.per_decade, space)
    N = resolve_n_cover(config.n_cover, space, config.kappa)
    notes = {}

    certs = {}
    t_cert = {}
    if config.certify:
        for k in ks:
            t1 = time.perf_counter()
            try:
                certs[int(k)] = certified_upper_bounds(asm, config.beta, int(k), N, config.r0)
            except ConstructionError as exc:
                notes[f"certified[k={k}]"] = f"{type(exc).__name__}: {exc}"
            t_cert[int(k)] = time.perf_counter() - t1
    env = certified_envelope(certs) if certs else {}
    certified = np.array([env.get(int(k), np.nan) for k in ks])

    report = bound_report(geom, config.beta, ks, spec.eigenvalues[ks], certified)
    notes.update(report.notes)
    flags = check_dominance(spec, report, config.rtol)
    rows = []
    for i, k in enumerate(ks):
        f = {name: bool(v[i]) for name, v in flags.items()}
        rows.append(SweepRow(
            int(k), float(report.lam[i]), float(certified[i]), float(report.weyl[i]),
            float(report.thm_general[i]), float(report.thm_ricci[i]), float(report.cor[i]),
            float(report.euclid[i]), all(f.values()), f,
            {"solve": t_solve, "certify": t_cert.get(int(k), 0.0)},
        ))
    code = 0 if all(r.dom_ok for r in rows) else 1
    return SweepResult(rows, geom, N, code, notes)


def rows_to_csv(rows: list[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow(r.csv_fields())
    return buf.getvalue()


def rows_from_csv(text: str) -> list[SweepRow]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if header != CSV_HEADER:
        raise ConfigError(f"unexpected sweep header {header}")
    rows = []
    for rec in reader:
        if not rec:
            continue
        vals = [float(v) for v in rec[1:8]]
        rows.append(SweepRow(int(rec[0]), *vals, rec[8] == "true"))
    return rows


def result_to_json(result: SweepResult) -> str:
    def clean(v):
        return None if isinstance(v, float) and not math.isfinite(v) else v

    rows = [{k: clean(v) for k, v in asdict(r).items()} for r in result.rows]
    doc = {"geometry": json.loads(result.geometry.to_json()), "N": result.N, "rows": rows,
           "notes": result.notes, "exit_code": result.exit_code}
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def write_result(result: SweepResult, path, fmt: str = "csv") -> None:
    text = rows_to_csv(result.rows) if fmt == "csv" else result_to_json(result)
    Path(path).write_text(text)


def weyl_fit(rows: list[SweepRow], n: int = 2) -> dict:
    """Least-squares slope of lambda_k against k^{2/(n-1)} over the upper half of k.

    The reference slope ``beta C_n^2`` is read off the Weyl column; the
    ratio is omitted when it vanishes (beta = 0), and the whole fit when
    fewer than two rows are available.
    """
    rows = sorted(rows, key=lambda r: r.k)
    top = rows[len(rows) // 2:]
    if len(top) < 2:
        return {}
    p = 2 / (n - 1)
    x = np.array([r.k for r in top], dtype=float) ** p
    y = np.array([r.lambda_solver for r in top])
    slope, intercept = np.polyfit(x, y, 1)
    out = {"slope": float(slope), "intercept": float(intercept), "k_from": top[0].k, "k_to": top[-1].k}
    ref = top[-1].weyl / top[-1].k ** p
    if ref > 0:
        out["reference"] = float(ref)
        out["ratio"] = float(slope / ref)
    return out


def report(rows: list[SweepRow], n: int = 2, geometry: GeometrySummary | None = None,
           title: str | None = None) -> str:
    """Plain-text summary of a sweep table."""
    if not rows:
        raise ConfigError("empty table")
    lines = [title or "Wentzel sweep summary", ""]
    if geometry is not None:
        g = geometry
        lines.append(f"|Omega| = {g.vol_omega:.6g}, |Gamma| = {g.vol_gamma:.6g}, n = {g.n}, kappa = {g.kappa:g}")
        lines.append(f"C~ = {g.c_tilde:.6g}, C0 = {g.c0:.6g}, R0 = {g.r0_nardulli:.6g}, i(Gamma) = {g.i_gamma}")
        lines.append(f"Weyl constant C_n = {weyl_constant(g.n, g.vol_gamma):.6g}")
    ks = [r.k for r in rows]
    lines.append(f"k = {min(ks)}..{max(ks)} ({len(rows)} rows)")
    n_fail = sum(not r.dom_ok for r in rows)
    lines.append("dominance: all bounds hold" if n_fail == 0 else f"dominance: {n_fail} row(s) FAIL")
    cert = [r for r in rows if math.isfinite(r.certified)]
    if cert:
        ratio = [r.certified / r.lambda_solver for r in cert if r.lambda_solver > 0]
        if ratio:
            lines.append(f"certified / lambda: min {min(ratio):.4g}, max {max(ratio):.4g}")
    else:
        lines.append("certified bounds: none (construction not possible at this resolution)")
    fit = weyl_fit(rows, n)
    if not fit:
        lines.append("Weyl slope: omitted (need at least two rows in the upper half of k)")
    else:
        s = f"Weyl slope over k = {fit['k_from']}..{fit['k_to']}: {fit['slope']:.6g}"
        if "ratio" in fit:
            s += f" (beta C_n^2 = {fit['reference']:.6g}, ratio {fit['ratio']:.4f})"
        else:
            s += " (absolute; no Weyl reference for beta = 0)"
        lines.append(s)
    return "\n".join(lines) + "\n"
