"""Built-in problems with known answers, runnable as a pass/fail suite."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import HypothesisError, PerieigError
from .expr import CompiledExpr, parse_expr
from .fields import ProblemSpec, time_average
from .limits import compute_limit, limit_elliptic, limit_linear_drift, limit_degenerate
from .ode import ClampedField, clamped_period_map, find_clamped_periodic, find_periodic_solutions, interior_orbits
from .pde import (
    SchemeConfig,
    build_period_map,
    default_resolution,
    principal_eigenpair,
    rescaled_dirichlet_eigenvalue,
)

__all__ = [
    "CatalogEntry",
    "CatalogOutcome",
    "ENTRIES",
    "SELECTORS",
    "select",
    "run_catalog",
    "format_outcomes",
    "eigenvalue",
    "KAPPA_DRIFT",
    "KAPPA_V",
    "Q_ORBIT_DRIFT",
    "FIG_B",
    "FIG_V",
    "STRIP_DRIFT",
    "MIXED_DRIFT",
    "FLAT_DRIFT",
    "GAUGE_DRIFTS",
    "BOWL_DRIFT",
    "BOWL_POTENTIALS",
    "ROBIN_V",
    "pure_diffusion_problem",
]

# drift potentials and potentials used across the suite
KAPPA_DRIFT = "-(x-0.45)^2"
KAPPA_V = "sin(2*pi*t)*cos(pi*x) + x"
Q_ORBIT_DRIFT = "-(0.4*pi*cos(2*pi*t))*x + 6*(x-(0.5+0.2*sin(2*pi*t)))^2/2"
FIG_B = "-pi*sin(2*pi*t)"
# quadratic well plus a time-periodic tilt; minimizing translate is interior for alpha < 1
FIG_V = "(x-0.6)^2 + 0.5*x*cos(2*pi*t)"
STRIP_DRIFT = "(-pos(0.3-x)^3/3 + pos(x-0.6)^3/3)*(1 + 0.5*sin(2*pi*t))"
MIXED_DRIFT = Q_ORBIT_DRIFT
FLAT_DRIFT = "-(x-0.5)^4"
GAUGE_DRIFTS = ("-(x-0.45)^2", "x", Q_ORBIT_DRIFT)
BOWL_DRIFT = "(x-0.5)^2"
# candidates (V_hat(0), V_hat(0.5) + 2, V_hat(1)) are (0, 3, 2) and (4, 2.5, 5)
BOWL_POTENTIALS = {"boundary": "2*x", "interior": "16*(x-0.5)^2 + x"}
ROBIN_V = "cos(pi*x) + sin(2*pi*t)"


def pure_diffusion_problem(c: float, V: str = ROBIN_V) -> ProblemSpec:
    bc = f"robin:{c}"
    return ProblemSpec.from_strings("0", V, bc_left=bc, bc_right=bc)


def eigenvalue(problem: ProblemSpec, D: float, scheme: SchemeConfig | None = None, tol: float = 1e-10) -> float:
    pmap = build_period_map(problem, D, scheme or default_resolution(D, problem))
    return principal_eigenpair(pmap, tol, eigenfunction=False).lambda_


@dataclass
class CatalogOutcome:
    name: str
    passed: bool
    detail: str
    seconds: float


@dataclass
class CatalogEntry:
    name: str
    groups: tuple[str, ...]
    check: Callable[[], tuple[bool, str]]

    def run(self) -> CatalogOutcome:
        start = time.perf_counter()
        try:
            ok, detail = self.check()
        except PerieigError as exc:
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        return CatalogOutcome(self.name, bool(ok), detail, time.perf_counter() - start)


def _close(value, target, tol, label="value"):
    gap = abs(value - target)
    return gap <= tol, f"{label}={value:.12g} target={target:.12g} gap={gap:.3g} tol={tol:g}"


# ----------------------------------------------------------------------------
# exact identities
# ----------------------------------------------------------------------------


def _gauge():
    worst = 0.0
    for m in GAUGE_DRIFTS:
        for c in (-2.0, 0.0, 7.0):
            p = ProblemSpec.from_strings(m, repr(c))
            for D in (1e-2, 1e-3):
                worst = max(worst, abs(eigenvalue(p, D, SchemeConfig(64, 256)) - c))
    return worst <= 1e-9, f"max |lambda - c| = {worst:.3g}"


def _constant_preserved():
    worst = 0.0
    for m in GAUGE_DRIFTS:
        pmap = build_period_map(ProblemSpec.from_strings(m, "0"), 1e-3, SchemeConfig(128, 512))
        worst = max(worst, float(np.max(np.abs(pmap.apply(np.ones(pmap.n)) - 1.0))))
    return worst <= 1e-12, f"max deviation {worst:.3g}"


def _x_free_potential():
    p = ProblemSpec.from_strings(KAPPA_DRIFT, "sin(2*pi*t)")
    return _close(eigenvalue(p, 1e-2, SchemeConfig(128, 512)), 0.0, 1e-8, "lambda")


def _time_average_cos2():
    v = time_average(CompiledExpr(parse_expr("cos(2*pi*t)^2")), 0.3, 1.0)
    return _close(v, 0.5, 1e-10, "average")


def _curvature_signs():
    lim = limit_elliptic(ProblemSpec.from_strings("x", "x").fields())
    ok = lim.ledger[0].value == math.inf and lim.attaining.label == "boundary[1]"
    return ok, f"ledger {[(c.label, c.value) for c in lim.ledger]}"


# ----------------------------------------------------------------------------
# limit formulas against the eigenvalue solver
# ----------------------------------------------------------------------------


def _study_gap(problem: ProblemSpec, D: float, tol: float, mode: str = "auto"):
    limit = compute_limit(problem, mode).value
    lam = eigenvalue(problem, D)
    return _close(lam, limit, tol, f"lambda({D:g})")


def _elliptic_solver():
    return _close(eigenvalue(ProblemSpec.from_strings("x", "x"), 1e-3), 1.0, 0.1, "lambda(1e-3)")


def _kappa_study():
    p = ProblemSpec.from_strings(KAPPA_DRIFT, KAPPA_V)
    limit = compute_limit(p).value
    gaps = [abs(eigenvalue(p, D) - limit) for D in (1e-2, 3e-3, 1e-3, 3e-4)]
    ok = abs(limit - 0.45) <= 1e-8 and gaps[-1] <= 5e-2 and gaps[0] >= 2.0 * gaps[-1]
    return ok, "gaps " + ", ".join(f"{g:.3g}" for g in gaps)


def _bowl(which):
    def check():
        return _study_gap(ProblemSpec.from_strings(BOWL_DRIFT, BOWL_POTENTIALS[which]), 3e-4, 5e-2)

    return check


def _q_orbit():
    p = ProblemSpec.from_strings(Q_ORBIT_DRIFT, "x")
    orbit = interior_orbits(find_periodic_solutions(p.fields()))
    if len(orbit) != 1:
        return False, f"expected one interior orbit, found {len(orbit)}"
    o = orbit[0]
    err = float(np.max(np.abs(o.samples - (0.5 + 0.2 * np.sin(2 * np.pi * o.t)))))
    mult = abs(o.multiplier - math.exp(-6.0))
    ok, detail = _study_gap(p, 3e-4, 5e-2)
    return ok and err <= 1e-6 and mult <= 1e-5, f"{detail}; orbit sup error {err:.3g}; multiplier error {mult:.3g}"


def _fig(alpha):
    def check():
        p = ProblemSpec.linear(FIG_B, alpha, FIG_V)
        return _study_gap(p, 3e-4, 5e-2)

    return check


def _fig_structures():
    parts = []
    low = limit_linear_drift(FIG_B, 0.5, "x")
    t = low.attaining.detail
    ok_low = low.theorem_used == "linear_drift_translate" and abs(t["y"] - t["y_lo"]) < 1e-9
    parts.append(f"alpha=0.5 translate y={t['y']:.6g} on [{t['y_lo']:.6g}, {t['y_hi']:.6g}]")
    mid = limit_linear_drift(FIG_B, 1.0, "x")
    t = mid.attaining.detail
    ok_mid = mid.theorem_used == "linear_drift_translate" and abs(t["y_hi"] - t["y_lo"]) < 1e-9
    parts.append(f"alpha=1 translate pinned between both walls (interval width {t['y_hi'] - t['y_lo']:.2g})")
    high = limit_linear_drift(FIG_B, 2.0, "x")
    w = high.attaining.detail["wall_fraction"]
    ok_high = high.theorem_used == "linear_drift_clamped" and w > 0.1
    parts.append(f"alpha=2 clamped orbit on a wall for {w:.3f} of the period")
    return ok_low and ok_mid and ok_high, "; ".join(parts)


def _remark_continuity():
    a = limit_linear_drift(FIG_B, 1.0, FIG_V, branch="translate").value
    b = limit_linear_drift(FIG_B, 1.0, FIG_V, branch="clamped").value
    return _close(a, b, 1e-6, "translate vs clamped")


def _robin(c):
    def check():
        return _study_gap(pure_diffusion_problem(c), 3e-4, 5e-2)

    return check


def _rescaled():
    rho = parse_expr("1")
    mus = {R: rescaled_dirichlet_eigenvalue(rho, R) for R in (2.0, 4.0, 8.0)}
    ok = abs(mus[8.0] - 1.0) <= 1e-2 and all(mu >= 1.0 - 1e-3 for mu in mus.values())
    return ok, ", ".join(f"mu_{R:g}={mu:.6g}" for R, mu in mus.items())


def _strip():
    lim = limit_degenerate(ProblemSpec.from_strings(STRIP_DRIFT, "cos(pi*x)").fields())
    strips = [c for c in lim.ledger if c.source == "degenerate_interval"]
    if len(strips) != 1:
        return False, f"expected one strip, found {len(strips)}"
    return _close(strips[0].value, math.cos(0.6 * math.pi), 1e-6, "strip minimum")


def _mixed():
    try:
        limit_degenerate(ProblemSpec.from_strings(MIXED_DRIFT, "x").fields())
    except HypothesisError as exc:
        return exc.code == "mixed_interval", f"raised {exc.code}"
    return False, "no diagnostic raised"


def _flat():
    try:
        compute_limit(ProblemSpec.from_strings(FLAT_DRIFT, "x"), "nondegenerate")
    except HypothesisError as exc:
        return exc.code == "degenerate_orbit", f"raised {exc.code}"
    return False, "no diagnostic raised"


def _clamped_threshold_orbit():
    cf = ClampedField(parse_expr(FIG_B), 1.0)
    o = find_clamped_periodic(cf)
    err = float(np.max(np.abs(o.samples - (0.5 - 0.5 * np.cos(2 * np.pi * o.t)))))
    return err <= 1e-6, f"sup distance {err:.3g}"


def _clamped_wall():
    cf = ClampedField(parse_expr(FIG_B), 2.0)
    out = clamped_period_map(cf, 1.0)
    return 0.0 <= out < 1.0, f"map(1) = {out:.6g}"


ENTRIES: list[CatalogEntry] = [
    CatalogEntry("gauge-constant-V", ("trivial",), _gauge),
    CatalogEntry("constant-preservation", ("trivial",), _constant_preserved),
    CatalogEntry("x-free-zero-mean-V", ("trivial",), _x_free_potential),
    CatalogEntry("time-average-cos2", ("trivial",), _time_average_cos2),
    CatalogEntry("boundary-curvature-classes", ("trivial",), _curvature_signs),
    CatalogEntry("elliptic-increasing-drift", ("limits",), _elliptic_solver),
    CatalogEntry("interior-maximum-study", ("limits",), _kappa_study),
    CatalogEntry("bowl-boundary-wins", ("limits",), _bowl("boundary")),
    CatalogEntry("bowl-interior-wins", ("limits",), _bowl("interior")),
    CatalogEntry("q-orbit", ("limits", "orbits"), _q_orbit),
    CatalogEntry("fig1.1-structures", ("fig1.1",), _fig_structures),
    CatalogEntry("fig1.1-alpha-0.5", ("fig1.1",), _fig(0.5)),
    CatalogEntry("fig1.1-alpha-1", ("fig1.1",), _fig(1.0)),
    CatalogEntry("fig1.1-alpha-2", ("fig1.1",), _fig(2.0)),
    CatalogEntry("fig1.1-threshold-continuity", ("fig1.1",), _remark_continuity),
    CatalogEntry("clamped-threshold-orbit", ("orbits",), _clamped_threshold_orbit),
    CatalogEntry("clamped-wall", ("orbits",), _clamped_wall),
    CatalogEntry("rescaled-dirichlet", ("limits",), _rescaled),
    CatalogEntry("robin-c1", ("robin",), _robin(1.0)),
    CatalogEntry("robin-c0.5", ("robin",), _robin(0.5)),
    CatalogEntry("robin-c0", ("robin",), _robin(0.0)),
    CatalogEntry("degenerate-strip", ("limits",), _strip),
    CatalogEntry("diagnostic-mixed-interval", ("diagnostics",), _mixed),
    CatalogEntry("diagnostic-degenerate-orbit", ("diagnostics",), _flat),
]

SELECTORS = ("all", "trivial", "fig1.1", "limits", "orbits", "robin", "diagnostics")


def select(selector: str = "all") -> list[CatalogEntry]:
    if selector == "all":
        return list(ENTRIES)
    chosen = [e for e in ENTRIES if selector in e.groups or e.name == selector]
    if not chosen:
        names = ", ".join(e.name for e in ENTRIES)
        raise ValueError(f"unknown selector {selector!r}; groups: {', '.join(SELECTORS)}; entries: {names}")
    return chosen


def run_catalog(selector: str = "all", progress: Callable[[CatalogOutcome], None] | None = None) -> list[CatalogOutcome]:
    outcomes = []
    for entry in select(selector):
        outcome = entry.run()
        outcomes.append(outcome)
        if progress is not None:
            progress(outcome)
    return outcomes


def format_outcomes(outcomes: list[CatalogOutcome]) -> str:
    lines = [f"{'PASS' if o.passed else 'FAIL'}  {o.name:<32} {o.seconds:7.2f}s  {o.detail}" for o in outcomes]
    failed = sum(not o.passed for o in outcomes)
    lines.append(f"{len(outcomes) - failed}/{len(outcomes)} passed")
    return "\n".join(lines)
