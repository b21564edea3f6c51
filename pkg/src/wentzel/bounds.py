"""Closed-form eigenvalue bounds, the Weyl asymptote and dominance checks.

All bounds share the shape ``a * x^{2/(n-1)} + b * x^{2/n} + c`` with
``x = k / |Gamma|``; they differ in the constants and in the geometric
quantities entering ``a, b, c``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .mms import GeometrySummary, sphere_area, unit_ball_volume


@dataclass(frozen=True)
class ConstantTable:
    n: int
    kappa: float
    c0: float | None
    r0_nardulli: float | None
    N_bound: float
    c_nk: float
    A_prop: float
    B_prop: float
    C_prop: float
    A_n: float
    B_n: float
    C_n: float
    B_final: float
    C_final: float
    A_thm1: float | None
    B_thm1: float | None
    C_thm1: float | None


def _prop_constants(n: int, kappa: float):
    e = math.exp
    c_nk = 2.0**n / n * e(2 * (n - 1) * kappa)
    A = 2.0 ** (16 * n) * e(8 * (n - 1) * kappa)
    B = 2.0 ** (14 * n) * e(8 * (n - 1) * kappa) * c_nk ** (2 / n)
    C = 25 * 2.0 ** (5 * (n + 1)) * e(4 * (n - 1) * kappa)
    return c_nk, A, B, C


def _thm1_A(n: int, kappa: float) -> float:
    return 2.0 ** (28 * n) * unit_ball_volume(n - 1) ** (2 / (n - 1)) * math.exp(8 * (n - 1) * kappa)


def _thm1_B(n: int, kappa: float, c0: float) -> float:
    w = unit_ball_volume(n - 1)
    return 2.0 ** (24 * n) * (c0 * w) ** (2 / n) * math.exp(8 * (n - 1) * kappa) + 2.0 ** (24 * n) * math.exp(
        12 * (n - 1) * kappa
    )


def _thm1_C(n: int, kappa: float, r0_nardulli: float) -> float:
    # r0 = min(1, R0) / 10, so 1 / r0^2 = 100 / min(1, R0)^2
    return 100 * 2.0 ** (10 * n) * math.exp(4 * (n - 1) * kappa) / min(1.0, r0_nardulli) ** 2


def constants(n: int, kappa: float = 0.0, c0: float | None = None, r0_nardulli: float | None = None) -> ConstantTable:
    """Every constant of the bounds for dimension ``n`` and curvature parameter ``kappa``.

    The dimension-only constants ``A_n, B_n, C_n`` are the curvature-dependent
    ones evaluated at ``kappa = 1``. The Nardulli-based constants are None
    unless ``c0`` and ``r0_nardulli`` are given.
    """
    if n < 2 or int(n) != n:
        raise ConfigError("n must be an integer >= 2")
    if kappa < 0:
        raise ConfigError("kappa must be nonnegative")
    n = int(n)
    c_nk, A, B, C = _prop_constants(n, kappa)
    _, A1, B1, C1 = _prop_constants(n, 1.0)
    N_bound = 2.0 ** (5 * n) * math.exp(4 * (n - 1) * kappa)
    have_c0 = c0 is not None
    have_r0 = r0_nardulli is not None
    if have_c0 and c0 < 0:
        raise ConfigError("c0 must be nonnegative")
    if have_r0 and not r0_nardulli > 0:
        raise ConfigError("r0 must be positive")
    return ConstantTable(
        n=n, kappa=float(kappa), c0=c0, r0_nardulli=r0_nardulli,
        N_bound=N_bound, c_nk=c_nk, A_prop=A, B_prop=B, C_prop=C,
        A_n=A1, B_n=B1, C_n=C1, B_final=B1 * (kappa + 1), C_final=C1 * (kappa**3 + 1),
        A_thm1=_thm1_A(n, 1.0),
        B_thm1=_thm1_B(n, kappa, c0) if have_c0 else None,
        C_thm1=_thm1_C(n, kappa, r0_nardulli) if have_r0 else None,
    )


def weyl_constant(n: int, vol_gamma: float) -> float:
    return 2 * math.pi / (unit_ball_volume(n - 1) * vol_gamma) ** (1 / (n - 1))


def weyl_asymptote(n: int, beta: float, vol_gamma: float, k) -> float:
    """Leading Weyl term ``beta * C_n^2 * k^{2/(n-1)}``."""
    if np.any(np.asarray(k) < 1):
        raise ConfigError("k must be at least 1")
    return beta * weyl_constant(n, vol_gamma) ** 2 * np.asarray(k, dtype=float) ** (2 / (n - 1))


def _check(geom: GeometrySummary, beta: float, k):
    if beta < 0:
        raise ConfigError("beta must be nonnegative")
    if np.any(np.asarray(k) < 1):
        raise ConfigError("k must be at least 1")
    return geom.n, geom.vol_omega / geom.vol_gamma, np.asarray(k, dtype=float) / geom.vol_gamma


@dataclass(frozen=True)
class _Terms:
    """``a x^{2/(n-1)} + b x^{2/n} + c`` with ``x = k / |Gamma|``."""

    n: int
    a: float
    b: float
    c: float

    def value(self, x):
        n = self.n
        return self.a * x ** (2 / (n - 1)) + self.b * x ** (2 / n) + self.c

    def corollary(self, x):
        # b x^{2/n} <= x^{2/(n-1)} + b^n, by splitting at x = b^{n(n-1)/2}
        return (self.a + 1) * x ** (2 / (self.n - 1)) + self.b**self.n + self.c


def _general_terms(geom: GeometrySummary, beta: float, c_tilde: float | None = None) -> _Terms:
    c_tilde = geom.c_tilde if c_tilde is None else c_tilde
    if c_tilde is None:
        raise ConfigError("the general bound needs the concentration constant c_tilde")
    n, kap = geom.n, geom.kappa
    rho = geom.vol_omega / geom.vol_gamma
    t = constants(n, kap)
    a = t.A_n * (kap * rho + beta) * c_tilde ** (2 / (n - 1))
    b = t.B_final * rho ** (1 - 2 / n)
    c = t.C_final * (rho + beta)
    return _Terms(n, a, b, c)


def _ricci_terms(geom: GeometrySummary, beta: float) -> _Terms:
    if geom.c0 is None or geom.r0_nardulli is None:
        raise ConfigError("the Ricci bound needs the Nardulli constants c0 and r0")
    n, kap = geom.n, geom.kappa
    rho = geom.vol_omega / geom.vol_gamma
    t = constants(n, kap, geom.c0, geom.r0_nardulli)
    a = t.A_thm1 * (kap * rho + beta)
    b = t.B_thm1 * (rho ** (1 - 2 / n) + rho + beta)
    c = t.C_thm1 * (rho + beta)
    return _Terms(n, a, b, c)


def thm_bound_general(geom: GeometrySummary, beta: float, k):
    """Bound for domains with controlled boundary concentration ``c_tilde``."""
    _, _, x = _check(geom, beta, k)
    return _general_terms(geom, beta).value(x)


def thm_bound_ricci(geom: GeometrySummary, beta: float, k):
    """Bound in terms of the Nardulli constants ``(c0, r0)`` instead of ``c_tilde``."""
    _, _, x = _check(geom, beta, k)
    return _ricci_terms(geom, beta).value(x)


def cor_bound(geom: GeometrySummary, beta: float, k, which: str = "general"):
    """Two-term form ``(a + 1) x^{2/(n-1)} + B(Omega, beta)`` of either theorem.

    The middle term is absorbed by ``b x^{2/n} <= x^{2/(n-1)} + b^n``, so
    ``B(Omega, beta) = b^n + c``.
    """
    _, _, x = _check(geom, beta, k)
    if which == "general":
        terms = _general_terms(geom, beta)
    elif which == "ricci":
        terms = _ricci_terms(geom, beta)
    else:
        raise ConfigError(f"unknown bound {which!r}")
    return terms.corollary(x)


def cor_constant(geom: GeometrySummary, beta: float, which: str = "general") -> float:
    """``B(Omega, beta)``, the k-free part of :func:`cor_bound`."""
    terms = _general_terms(geom, beta) if which == "general" else _ricci_terms(geom, beta)
    return terms.b**terms.n + terms.c


def c_tilde_from_index(n: int, i_gamma: int) -> float:
    """Concentration constant implied by the intersection index: ``(i/2) |S^{n-1}|``."""
    return i_gamma / 2 * sphere_area(n)


def euclid_bound(geom: GeometrySummary, beta: float, k):
    """Euclidean-domain bound driven by the intersection index ``i_gamma``."""
    if geom.i_gamma is None:
        raise ConfigError("the Euclidean bound needs the intersection index i_gamma")
    if geom.kappa != 0:
        raise ConfigError("the Euclidean bound requires kappa = 0")
    _, _, x = _check(geom, beta, k)
    return _general_terms(geom, beta, c_tilde_from_index(geom.n, geom.i_gamma)).corollary(x)


BOUND_NAMES = ("thm_general", "thm_ricci", "cor", "euclid")


@dataclass
class BoundReport:
    """Per-k table of eigenvalues and bounds; missing entries are NaN."""

    ks: np.ndarray
    beta: float
    lam: np.ndarray
    certified: np.ndarray
    weyl: np.ndarray
    thm_general: np.ndarray
    thm_ricci: np.ndarray
    cor: np.ndarray
    euclid: np.ndarray
    notes: dict = field(default_factory=dict)


def bound_report(geom: GeometrySummary, beta: float, ks, lam=None, certified=None) -> BoundReport:
    """Evaluate every bound whose inputs are present in ``geom``."""
    ks = np.asarray(ks, dtype=int)
    nan = np.full(len(ks), np.nan)
    notes = {}

    def attempt(name, fn):
        try:
            return np.asarray(fn(), dtype=float) * np.ones(len(ks))
        except ConfigError as exc:
            notes[name] = str(exc)
            return nan.copy()

    return BoundReport(
        ks=ks, beta=float(beta),
        lam=nan.copy() if lam is None else np.asarray(lam, dtype=float),
        certified=nan.copy() if certified is None else np.asarray(certified, dtype=float),
        weyl=weyl_asymptote(geom.n, beta, geom.vol_gamma, ks) * np.ones(len(ks)),
        thm_general=attempt("thm_general", lambda: thm_bound_general(geom, beta, ks)),
        thm_ricci=attempt("thm_ricci", lambda: thm_bound_ricci(geom, beta, ks)),
        cor=attempt("cor", lambda: cor_bound(geom, beta, ks)),
        euclid=attempt("euclid", lambda: euclid_bound(geom, beta, ks)),
        notes=notes,
    )


def check_dominance(spectrum, report: BoundReport, rtol: float = 1e-8) -> dict[str, np.ndarray]:
    """Per bound and per k: ``bound >= lambda_k (1 - rtol)``.

    ``spectrum`` is a Spectrum or an array indexed by k (``lambda_0`` first).
    The Weyl term is asymptotic and never flagged. Bounds that were not
    evaluated (NaN) pass vacuously.
    """
    vals = getattr(spectrum, "eigenvalues", spectrum)
    vals = np.asarray(vals, dtype=float)
    if report.ks.max() >= len(vals):
        raise ConfigError("spectrum does not cover the report's k range")
    lam = vals[report.ks]
    flags = {}
    for name in ("certified",) + BOUND_NAMES:
        b = getattr(report, name)
        flags[name] = ~np.isfinite(b) | (b >= lam * (1 - rtol))
    return flags
