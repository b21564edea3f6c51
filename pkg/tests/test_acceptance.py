"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` (the verdict lines are
written to the terminal even when output capture is on).
"""

import math
import time

import numpy as np
import pytest

from wentzel.bounds import constants, thm_bound_general, thm_bound_ricci
from wentzel.decomposition import SphericalCapacitor, build_capacitors, verify_family
from wentzel.errors import CMConstructionFailed, HypothesisViolated, MeasureTooAtomic, SupportsOverlap
from wentzel.mms import FiniteMetricMeasureSpace, concentration_constant, intersection_index, space_from_mesh
from wentzel.rayleigh import certified_upper_bounds, element_owner, plateau, rayleigh_quotient
from wentzel.spectral import (
    assemble,
    disk_oracle,
    gen_mesh,
    random_star_polygon,
    scaling_check,
    solve_wentzel,
    star_decagon,
)
from wentzel.sweep import summarize_geometry

from conftest import circle_points


@pytest.fixture
def verdict(capsys):
    """Run ``body() -> (ok, detail)`` and print one verdict line whatever happens."""

    def run(label, body):
        try:
            ok, detail = body()
        except Exception as exc:
            ok, detail = False, f"{type(exc).__name__}: {exc}"
            with capsys.disabled():
                print(f"\n{label}: FAIL ({detail})")
            raise
        with capsys.disabled():
            print(f"\n{label}: {'PASS' if ok else 'FAIL'} ({detail})")
        assert ok, detail

    return run


def example_meshes(res=672):
    return {
        "disk": gen_mesh("disk", res),
        "square": gen_mesh("square", res),
        "ellipse": gen_mesh("ellipse", res),
        "star": gen_mesh("polygon", res, vertices=random_star_polygon(9, seed=0)),
    }


def test_criterion_1_disk_steklov(verdict):
    def body():
        t0 = time.perf_counter()
        mesh = gen_mesh("disk", 240)
        lam = solve_wentzel(mesh, 0.0, 7).eigenvalues
        dt = time.perf_counter() - t0
        exact = disk_oracle(0.0, 7)
        err = float(np.max(np.abs(lam[1:] - exact[1:]) / exact[1:]))
        nb = len(mesh.boundary_vertices)
        return nb >= 240 and err <= 1e-2 and dt <= 10, f"max rel err {err:.2e}, {nb} boundary vertices, {dt:.2f} s"

    verdict("criterion 1 (disk Steklov)", body)


def test_criterion_2_disk_wentzel(verdict):
    def body():
        lam = solve_wentzel(gen_mesh("disk", 240), 1.0, 7).eigenvalues
        exact = disk_oracle(1.0, 7)
        assert list(exact) == [0, 2, 2, 6, 6, 12, 12]
        err = float(np.max(np.abs(lam[1:] - exact[1:]) / exact[1:]))
        ok = err <= 2e-2 and abs(lam[0]) <= 1e-8 * (1 + lam[1])
        return ok, f"max rel err {err:.2e}, lambda_0 = {lam[0]:.1e}"

    verdict("criterion 2 (disk Wentzel)", body)


def test_criterion_3_weyl_slope(verdict):
    def body():
        lam = solve_wentzel(gen_mesh("disk", 480), 1.0, 41).eigenvalues
        k = np.arange(20, 41)
        slope = np.polyfit(k.astype(float) ** 2, lam[k], 1)[0]
        rel = abs(slope - 0.25) / 0.25
        return rel <= 0.10, f"slope {slope:.4f} vs 1/4, rel dev {rel:.2%}"

    verdict("criterion 3 (Weyl slope)", body)


def test_criterion_4_certificates(verdict):
    def body():
        t0 = time.perf_counter()
        worst = math.inf
        count = 0
        for name, mesh in example_meshes().items():
            asm = assemble(mesh)
            for beta in (0.0, 1.0):
                lam = solve_wentzel(asm, beta, 11).eigenvalues
                for k in range(1, 11):
                    b = certified_upper_bounds(asm, beta, k, N=2).bound
                    if not np.isfinite(b):
                        return False, f"non-finite bound for {name}, beta={beta}, k={k}"
                    worst = min(worst, b / lam[k])
                    count += 1
        dt = time.perf_counter() - t0
        ok = worst >= 1 - 1e-8 and dt <= 60
        return ok, f"{count} certificates, min bound/lambda {worst:.4f}, {dt:.1f} s"

    verdict("criterion 4 (certificate validity)", body)


def test_criterion_5_theorem_dominance(verdict):
    def body():
        meshes = example_meshes(240)
        meshes["annulus"] = gen_mesh("annulus", 240)
        meshes["star decagon"] = gen_mesh("polygon", 240, vertices=star_decagon())
        ks = np.arange(1, 11)
        worst = math.inf
        for name, mesh in meshes.items():
            geom = summarize_geometry(mesh)
            for beta in (0.0, 1.0):
                lam = solve_wentzel(mesh, beta, 11).eigenvalues[ks]
                for fn in (thm_bound_general, thm_bound_ricci):
                    b = np.asarray(fn(geom, beta, ks), dtype=float)
                    if not np.all(b >= lam):
                        return False, f"{fn.__name__} below lambda on {name}, beta={beta}"
                    worst = min(worst, float(np.min(b / lam)))
        return True, f"{len(meshes)} meshes, min bound/lambda {worst:.2e}"

    verdict("criterion 5 (theorem dominance)", body)


def test_criterion_6_decomposition_postconditions(verdict):
    def body():
        rng = np.random.default_rng(20201102)
        built = errors = spherical = 0
        for _ in range(200):
            n = int(rng.integers(20, 501))
            s = FiniteMetricMeasureSpace(rng.uniform(0, 1, (n, 2)), rng.uniform(0.05, 1, n))
            K = int(rng.integers(1, 7))
            N = int(rng.integers(1, 4))
            r0 = float(rng.uniform(0.01, 0.1))
            try:
                fam = build_capacitors(s, K, r0, N)
            except (MeasureTooAtomic, CMConstructionFailed, HypothesisViolated):
                errors += 1
                continue
            rep = verify_family(s, fam)
            if not rep.ok:
                return False, f"verify_family failed: {rep.details}"
            if fam.kind == "spherical":
                spherical += 1
                if not s.total_measure - fam.trace[-1]["mu_C"] > s.total_measure / 2:
                    return False, "trace inequality violated"
            built += 1
        return True, f"{built} valid families ({spherical} spherical), {errors} declared errors"

    verdict("criterion 6 (decomposition postconditions)", body)


def test_criterion_7_constant_table(verdict):
    def body():
        t = constants(2, 0.0)
        got = (t.N_bound, t.c_nk, t.A_prop, t.B_prop, t.C_prop)
        want = (1024, 2, 2**32, 2**29, 819200)
        return got == want, f"N={t.N_bound:g}, c={t.c_nk:g}, A={t.A_prop:g}, B={t.B_prop:g}, C={t.C_prop:g}"

    verdict("criterion 7 (constant table)", body)


def test_criterion_8_concentration(verdict):
    def body():
        n = 720
        s = FiniteMetricMeasureSpace(circle_points(n), np.full(n, 2 * math.pi / n))
        h = 2 * math.sin(math.pi / n)
        c = concentration_constant(s, 16 * h, 1.0)
        rel = abs(c - 2 * math.pi / 3) / (2 * math.pi / 3)
        square = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], float)
        idx = [intersection_index(circle_points(64)), intersection_index(square)]
        ok = rel <= 0.02 and idx == [2, 2]
        return ok, f"C~ = {c:.4f} (rel dev {rel:.2%}), convex indices {idx}"

    verdict("criterion 8 (concentration constant)", body)


def test_criterion_9_scaling(verdict):
    def body():
        worst = 0.0
        for shape in ("disk", "square"):
            m = gen_mesh(shape, 120)
            for c in (0.5, 2.0, 3.0):
                for beta in (0.0, 1.0):
                    worst = max(worst, scaling_check(m, beta, c, 8))
        return worst <= 1e-2, f"max deviation {worst:.1e}"

    verdict("criterion 9 (scaling law)", body)


def test_criterion_10_disjoint_minmax(verdict):
    def body():
        mesh = gen_mesh("disk", 240)
        asm = assemble(mesh)
        space = space_from_mesh(mesh)
        D = space.dist_matrix
        nb = space.n_points
        rng = np.random.default_rng(7)

        def bump(c, r):
            cap = SphericalCapacitor(c, r, np.flatnonzero(D[c] < r), np.flatnonzero(D[c] < 2 * r), 0.0)
            return plateau(space, cap, mesh.vertices, mesh.boundary_vertices)

        pairs, worst = 0, -math.inf
        while pairs < 100:
            i, j = rng.integers(0, nb, 2)
            f, g = bump(int(i), rng.uniform(0.05, 0.4)), bump(int(j), rng.uniform(0.05, 0.4))
            try:
                element_owner(asm, [f, g])
            except SupportsOverlap:
                continue
            beta = float(rng.uniform(0, 2))
            qf = rayleigh_quotient(asm, beta, f).quotient
            qg = rayleigh_quotient(asm, beta, g).quotient
            for a, b in rng.normal(size=(5, 2)):
                q = rayleigh_quotient(asm, beta, a * f.values + b * g.values).quotient
                worst = max(worst, q - max(qf, qg))
            pairs += 1
        return worst <= 1e-12, f"100 pairs, max excess {worst:.1e}"

    verdict("criterion 10 (disjoint-support min-max)", body)
