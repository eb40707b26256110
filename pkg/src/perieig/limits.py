"""Closed-form small-diffusion limits of the principal eigenvalue.

Every evaluator returns a :class:`LimitResult` whose ledger lists all
candidates (orbits, boundary points, degenerate intervals) with extended-real
values, so it is visible why a candidate wins or is excluded.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .errors import DegenerateOrbitError, HypothesisError
from .expr import Expr, parse_expr
from .fields import DEFAULT_NT, FieldCalculus, ProblemSpec, positive_part, simpson, time_average
from .ode import (
    DEGENERATE_TOL,
    ClampedField,
    PeriodicOrbit,
    find_clamped_periodic,
    find_periodic_solutions,
    interior_orbits,
)

__all__ = [
    "BoundaryCurvature",
    "LimitCandidate",
    "HypothesisCheck",
    "LimitResult",
    "DegenerateStructure",
    "boundary_curvature",
    "limit_elliptic",
    "limit_nondegenerate",
    "detect_structure",
    "limit_degenerate",
    "limit_linear_drift",
    "compute_limit",
    "LIMIT_MODES",
]

LIMIT_MODES = ("auto", "elliptic", "nondegenerate", "degenerate", "linear")
T_GRID = 512


@dataclass(frozen=True)
class BoundaryCurvature:
    kind: str  # finite | plus_infinity | minus_infinity
    value: float | None = None
    mean_slope: float = 0.0

    @property
    def extended(self) -> float:
        if self.kind == "plus_infinity":
            return math.inf
        if self.kind == "minus_infinity":
            return -math.inf
        return float(self.value)


@dataclass(frozen=True)
class LimitCandidate:
    source: str  # interior_orbit | boundary | kappa | degenerate_interval | translate | clamped_orbit
    index: int | None
    value: float
    detail: Mapping = field(default_factory=dict)

    @property
    def label(self) -> str:
        return self.source if self.index is None else f"{self.source}[{self.index}]"


@dataclass(frozen=True)
class HypothesisCheck:
    name: str
    passed: bool
    detail: str = ""

    def __str__(self):
        return f"[{'pass' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


@dataclass
class LimitResult:
    value: float
    attaining: LimitCandidate
    ledger: list[LimitCandidate]
    theorem_used: str
    hypothesis_report: list[HypothesisCheck]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("source,value,attaining\n")
        for cand in self.ledger:
            buf.write(f"{cand.label},{_fmt(cand.value)},{int(cand is self.attaining)}\n")
        return buf.getvalue()

    def report(self) -> str:
        lines = [f"limit = {_fmt(self.value)}  ({self.theorem_used})", f"attained by {self.attaining.label}"]
        lines.append("candidates:")
        for cand in self.ledger:
            mark = "*" if cand is self.attaining else " "
            extra = ", ".join(f"{k}={_fmt(v) if isinstance(v, float) else v}" for k, v in cand.detail.items())
            lines.append(f" {mark} {cand.label:<24} {_fmt(cand.value):>24}  {extra}")
        lines.append("hypotheses:")
        lines.extend(f"  {check}" for check in self.hypothesis_report)
        return "\n".join(lines)


def _fmt(v: float) -> str:
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return f"{v:.17g}"


def _finalize(ledger, theorem, report) -> LimitResult:
    finite = [c for c in ledger if math.isfinite(c.value)]
    if not finite:
        raise HypothesisError("no_finite_candidate", "every candidate is +inf", report)
    best = min(finite, key=lambda c: c.value)
    return LimitResult(best.value, best, list(ledger), theorem, list(report))


def _fail_if_needed(report, code):
    bad = [c for c in report if not c.passed]
    if bad:
        raise HypothesisError(code, "; ".join(f"{c.name}: {c.detail}" for c in bad), report)


def _vhat(fields: FieldCalculus, x, n_t: int = DEFAULT_NT):
    return time_average(fields.V, x, fields.T, n_t)


def boundary_curvature(
    fields: FieldCalculus, side: str, tol: float = 1e-8, n_t: int = DEFAULT_NT
) -> BoundaryCurvature:
    """Averaged boundary curvature with the one-sided slope convention.

    Left end: mean slope > tol gives +inf, < -tol gives -inf.  Right end:
    the orientation flips.  Otherwise the averaged second derivative.
    """
    if side not in ("left", "right"):
        raise ValueError("side must be 'left' or 'right'")
    if not tol > 0:
        raise ValueError("tol must be positive")
    xb = 0.0 if side == "left" else 1.0
    slope = time_average(fields.dm, xb, fields.T, n_t)
    outward = slope if side == "left" else -slope
    if outward > tol:
        return BoundaryCurvature("plus_infinity", None, slope)
    if outward < -tol:
        return BoundaryCurvature("minus_infinity", None, slope)
    return BoundaryCurvature("finite", time_average(fields.d2m, xb, fields.T, n_t), slope)


def _boundary_candidates(fields, tol, n_t=DEFAULT_NT) -> list[LimitCandidate]:
    out = []
    for index, side in ((0, "left"), (1, "right")):
        curv = boundary_curvature(fields, side, tol, n_t)
        vhat = _vhat(fields, float(index), n_t)
        out.append(
            LimitCandidate(
                "boundary",
                index,
                vhat + positive_part(curv.extended),
                {"V_hat": vhat, "curvature": curv.kind if curv.kind != "finite" else curv.value},
            )
        )
    return out


def _pointwise_wall_checks(fields, tol) -> list[HypothesisCheck]:
    ts = np.linspace(0.0, fields.T, T_GRID, endpoint=False)
    checks = []
    for xb in (0.0, 1.0):
        low = float(np.min(np.abs(fields.dm(np.full_like(ts, xb), ts))))
        checks.append(
            HypothesisCheck(f"m_x({xb:g},t) nonzero for all t", low > tol, f"min |m_x| = {low:.3g}")
        )
    return checks


# ----------------------------------------------------------------------------
# time-independent coefficients
# ----------------------------------------------------------------------------


def _critical_points(fields: FieldCalculus, tol: float = 1e-8, n: int = 1024) -> list[float]:
    xs = np.linspace(0.0, 1.0, n)
    zeros_t = np.zeros_like(xs)
    d = fields.dm(xs, zeros_t)

    def mprime(x):
        return float(fields.dm(x, 0.0))

    roots = [float(x) for x, v in zip(xs[1:-1], d[1:-1]) if v == 0.0]
    for i in np.flatnonzero(d[:-1] * d[1:] < 0):
        roots.append(brentq(mprime, xs[i], xs[i + 1], xtol=1e-14, rtol=4 * np.finfo(float).eps))
    # zeros where m' touches 0 without changing sign
    a = np.abs(d)
    for k in range(1, n - 1):
        if d[k] == 0.0 or d[k - 1] * d[k + 1] < 0 or d[k - 1] * d[k] < 0 or d[k] * d[k + 1] < 0:
            continue
        if a[k] <= a[k - 1] and a[k] <= a[k + 1]:
            res = minimize_scalar(
                lambda x: abs(mprime(x)), bounds=(xs[k - 1], xs[k + 1]), method="bounded", options={"xatol": 1e-13}
            )
            if abs(mprime(res.x)) < tol:
                roots.append(float(res.x))
    return sorted(roots)


def limit_elliptic(fields: FieldCalculus, tol: float = 1e-8) -> LimitResult:
    """Limit for time-independent ``m`` and ``V``: minimum of ``V + [m'']_+`` over
    the critical points of ``m`` and the two ends."""
    report = [
        HypothesisCheck(
            "m and V independent of t",
            fields.time_independent,
            "no t in m or V" if fields.time_independent else "t appears in m or V",
        )
    ]
    _fail_if_needed(report, "time_dependent")
    for xb in (0.0, 1.0):
        slope = float(fields.dm(xb, 0.0))
        report.append(HypothesisCheck(f"m'({xb:g}) nonzero", abs(slope) > tol, f"m'({xb:g}) = {slope:.6g}"))
    roots = _critical_points(fields, tol)
    for x in roots:
        curv = float(fields.d2m(x, 0.0))
        report.append(
            HypothesisCheck(f"critical point {x:.10g} nondegenerate", abs(curv) > tol, f"m'' = {curv:.6g}")
        )
    if any(not c.passed for c in report):
        code = "degenerate_critical_point" if any(
            not c.passed and c.name.startswith("critical") for c in report
        ) else "vanishing_boundary_derivative"
        _fail_if_needed(report, code)

    ledger = []
    for i, x in enumerate(roots):
        curv = float(fields.d2m(x, 0.0))
        v = float(fields.V(x, 0.0))
        ledger.append(LimitCandidate("interior_orbit", i, v + positive_part(curv), {"x": x, "m_xx": curv}))
    ledger.extend(_boundary_candidates(fields, tol))
    return _finalize(ledger, "elliptic", report)


# ----------------------------------------------------------------------------
# periodic orbits of the drift ODE
# ----------------------------------------------------------------------------


def _orbit_average(fields: FieldCalculus, orbit: PeriodicOrbit) -> float:
    vals = fields.V(orbit.samples, orbit.t) + np.maximum(fields.d2m(orbit.samples, orbit.t), 0.0)
    return float(simpson(vals, fields.T)) / fields.T


def limit_nondegenerate(
    fields: FieldCalculus,
    orbits: list[PeriodicOrbit] | None = None,
    tol: float = 1e-8,
    scan_n: int = 128,
) -> LimitResult:
    """Orbit-based limit: minimum over periodic orbits of the averaged
    ``V + [m_xx]_+`` together with the two boundary candidates; with no
    interior orbit only the boundary candidates remain."""
    report = _pointwise_wall_checks(fields, tol)
    for side in ("left", "right"):
        curv = boundary_curvature(fields, side, tol)
        report.append(
            HypothesisCheck(
                f"averaged slope at {side} end",
                True,
                f"mean m_x = {curv.mean_slope:.6g} -> {curv.kind}",
            )
        )
    _fail_if_needed(report, "vanishing_boundary_derivative")
    if orbits is None:
        orbits = find_periodic_solutions(fields, scan_n=scan_n, allow_degenerate=True)
    inner = interior_orbits(orbits)
    for i, orb in enumerate(inner):
        ok = abs(orb.multiplier - 1.0) >= DEGENERATE_TOL
        report.append(
            HypothesisCheck(f"orbit {i} nondegenerate", ok, f"y0 = {orb.y0:.10g}, multiplier = {orb.multiplier:.8g}")
        )
    if any(not c.passed for c in report):
        bad = [c for c in report if not c.passed]
        raise DegenerateOrbitError("; ".join(c.detail for c in bad), orbits, report)

    ledger = []
    for i, orb in enumerate(inner):
        ledger.append(
            LimitCandidate(
                "interior_orbit",
                i,
                _orbit_average(fields, orb),
                {"y0": orb.y0, "multiplier": orb.multiplier},
            )
        )
    ledger.extend(_boundary_candidates(fields, tol))
    theorem = "orbits" if inner else "no_interior_orbit"
    return _finalize(ledger, theorem, report)


# ----------------------------------------------------------------------------
# degenerate structure: vertical zero lines and zero strips of m_x
# ----------------------------------------------------------------------------


@dataclass
class DegenerateStructure:
    kappas: list[float]  # every kappa, including 0, 1 and strip edges, sorted
    strips: list[tuple[float, float]]  # intervals where m_x vanishes identically
    signs: list[int]  # sign of m_x on each gap between consecutive kappas (0 for strips)


def _colmax_fn(fields: FieldCalculus, ts: np.ndarray):
    def colmax(x: float) -> float:
        return float(np.max(np.abs(fields.dm(np.full_like(ts, x), ts))))

    return colmax


def _polish_line(fields: FieldCalculus, ts: np.ndarray, a: float, b: float, guess: float) -> float:
    """Sharpen a zero line of ``m_x`` with brentq at the time of largest sign change."""
    ga = np.broadcast_to(fields.dm(np.full_like(ts, a), ts), ts.shape)
    gb = np.broadcast_to(fields.dm(np.full_like(ts, b), ts), ts.shape)
    flip = ga * gb < 0
    if not np.any(flip):
        return guess
    k = int(np.argmax(np.where(flip, np.minimum(np.abs(ga), np.abs(gb)), -1.0)))
    t0 = float(ts[k])
    return float(brentq(lambda x: float(fields.dm(x, t0)), a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps))


def detect_structure(
    fields: FieldCalculus, tol: float = 1e-8, n_x: int = 1024, n_t: int = T_GRID, edge_tol: float = 1e-14
) -> DegenerateStructure:
    """Locate the zero set of ``m_x`` as vertical lines (points) and strips.

    Raises ``HypothesisError('mixed_interval')`` when a gap between features
    is neither sign-definite nor identically zero.
    """
    xs = np.linspace(0.0, 1.0, n_x)
    ts = np.linspace(0.0, fields.T, n_t, endpoint=False)
    grid = fields.dm(xs[:, None], ts[None, :])
    grid = np.broadcast_to(grid, (n_x, n_t))
    colmax = np.max(np.abs(grid), axis=1)
    colmax_at = _colmax_fn(fields, ts)
    zero = colmax < tol

    points: list[float] = [0.0, 1.0]
    strips: list[tuple[float, float]] = []
    blocked = zero.copy()

    def refine_edge(inside: float, outside: float) -> float:
        inner_val = colmax_at(inside)
        level = edge_tol if inner_val <= edge_tol else tol
        for _ in range(60):
            mid = 0.5 * (inside + outside)
            if colmax_at(mid) <= level:
                inside = mid
            else:
                outside = mid
        return 0.5 * (inside + outside)

    i = 0
    while i < n_x:
        if not zero[i]:
            i += 1
            continue
        j = i
        while j + 1 < n_x and zero[j + 1]:
            j += 1
        if j - i > 2:
            lo = 0.0 if i == 0 else refine_edge(xs[i], xs[i - 1])
            hi = 1.0 if j == n_x - 1 else refine_edge(xs[j], xs[j + 1])
            strips.append((lo, hi))
        else:
            a, b = xs[max(i - 1, 0)], xs[min(j + 1, n_x - 1)]
            res = minimize_scalar(colmax_at, bounds=(a, b), method="bounded", options={"xatol": 1e-13})
            guess = float(res.x) if colmax_at(res.x) < tol else float(xs[(i + j) // 2])
            points.append(_polish_line(fields, ts, a, b, guess))
        i = j + 1

    # isolated zeros between grid nodes: local minima of the column maximum
    for k in range(1, n_x - 1):
        if zero[k] or zero[k - 1] or zero[k + 1]:
            continue
        if colmax[k] <= colmax[k - 1] and colmax[k] <= colmax[k + 1]:
            res = minimize_scalar(
                colmax_at, bounds=(xs[k - 1], xs[k + 1]), method="bounded", options={"xatol": 1e-13}
            )
            if colmax_at(res.x) < tol:
                points.append(_polish_line(fields, ts, xs[k - 1], xs[k + 1], float(res.x)))
                blocked[k] = True

    for lo, hi in strips:
        points.extend([lo, hi])
    kappas = sorted(set(round(p, 13) for p in points))
    kappas = [float(k) for k in kappas]

    signs = []
    for a, b in zip(kappas[:-1], kappas[1:]):
        if any(abs(a - lo) < 1e-12 and abs(b - hi) < 1e-12 for lo, hi in strips):
            signs.append(0)
            continue
        inside = (xs > a) & (xs < b) & ~zero
        sample_x = xs[inside]
        if sample_x.size == 0:
            sample_x = np.array([0.5 * (a + b)])
        vals = np.broadcast_to(fields.dm(sample_x[:, None], ts[None, :]), (sample_x.size, n_t))
        lo_abs = float(np.min(np.abs(vals)))
        s_max, s_min = float(np.max(vals)), float(np.min(vals))
        if lo_abs > tol and (s_min > 0 or s_max < 0):
            signs.append(1 if s_min > 0 else -1)
            continue
        raise HypothesisError(
            "mixed_interval",
            f"m_x changes sign or vanishes partially on ({a:.6g}, {b:.6g}); "
            f"min |m_x| = {lo_abs:.3g}, range [{s_min:.3g}, {s_max:.3g}]",
            [HypothesisCheck(f"interval ({a:.6g}, {b:.6g}) is of type A or B", False, "mixed sign")],
        )
    return DegenerateStructure(kappas, strips, signs)


def _interval_min(f, a: float, b: float, n: int = 512) -> tuple[float, float]:
    """Minimum of a scalar function on [a, b]: uniform scan then golden-section."""
    ys = np.linspace(a, b, n)
    vals = np.array([f(y) for y in ys])
    k = int(np.argmin(vals))
    best_y, best_v = float(ys[k]), float(vals[k])
    lo, hi = ys[max(k - 1, 0)], ys[min(k + 1, n - 1)]
    if hi > lo:
        res = minimize_scalar(f, bounds=(lo, hi), method="bounded", options={"xatol": 1e-10})
        if res.fun < best_v:
            best_y, best_v = float(res.x), float(res.fun)
    return best_y, best_v


def limit_degenerate(fields: FieldCalculus, tol: float = 1e-8) -> LimitResult:
    """Limit when ``m_x`` vanishes on vertical lines and on strips.

    Candidates: every kappa with ``V_hat + [m_xx_hat]_+`` (the two ends use
    the boundary convention) and, for each strip, the minimum of ``V_hat``.
    """
    structure = detect_structure(fields, tol)
    report = [
        HypothesisCheck(
            "gaps between zero lines are sign-definite or identically zero",
            True,
            f"{len(structure.kappas)} kappa(s), {len(structure.strips)} strip(s)",
        )
    ]
    ledger = []
    bounds = _boundary_candidates(fields, tol)
    ledger.append(bounds[0])
    interior = [k for k in structure.kappas if 0.0 < k < 1.0]
    for i, k in enumerate(interior):
        vhat = _vhat(fields, k)
        curv = time_average(fields.d2m, k, fields.T)
        ledger.append(LimitCandidate("kappa", i, vhat + positive_part(curv), {"x": k, "m_xx_hat": curv}))
    ledger.append(bounds[1])

    def vhat_scalar(x):
        return float(_vhat(fields, float(x), 512))

    for i, (a, b) in enumerate(structure.strips):
        y, _ = _interval_min(vhat_scalar, a, b)
        value = float(_vhat(fields, y))
        ledger.append(LimitCandidate("degenerate_interval", i, value, {"a": a, "b": b, "argmin": y}))
    return _finalize(ledger, "degenerate", report)


# ----------------------------------------------------------------------------
# linear drifts m = alpha b(t) x
# ----------------------------------------------------------------------------


def limit_linear_drift(
    b: Expr | str,
    alpha: float,
    V: Expr | str,
    T: float = 1.0,
    params: Mapping[str, float] | None = None,
    tol: float = 1e-8,
    n_t: int = DEFAULT_NT,
    branch: str | None = None,
) -> LimitResult:
    """Limit for ``m = alpha b(t) x``.

    Nonzero mean of ``b``: the downstream wall.  Zero mean and ``alpha`` at or
    below ``1 / (max P - min P)``: the best translate ``y + alpha P(t)`` that
    stays inside [0, 1].  Larger ``alpha``: the periodic orbit of the clamped
    dynamics.  ``branch`` ('translate' or 'clamped') forces a zero-mean branch.
    """
    params = dict(params or {})
    if isinstance(b, str):
        b = parse_expr(b, params)
    if isinstance(V, str):
        V = parse_expr(V, params)
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    cf = ClampedField(b, float(alpha), T, params)
    fields = FieldCalculus(float(alpha) * b * parse_expr("x"), V, T, params)
    b_hat = time_average(lambda x, t: cf.b_at(t) + 0.0 * x, 0.0, T, n_t)
    report = [HypothesisCheck("alpha > 0", True, f"alpha = {alpha:g}")]

    if abs(b_hat) > tol and branch is None:
        report.append(HypothesisCheck("mean of b nonzero", True, f"b_hat = {b_hat:.6g}"))
        ledger = _boundary_candidates(fields, tol, n_t)
        return _finalize(ledger, "linear_drift_mean", report)

    report.append(HypothesisCheck("mean of b vanishes", abs(b_hat) <= tol, f"b_hat = {b_hat:.3g}"))
    ts, P = cf.primitive(n_t)
    p_hi, p_lo = float(P.max()), float(P.min())
    spread = p_hi - p_lo
    theta = math.inf if spread <= 1e-14 else 1.0 / spread
    if branch is None:
        branch = "translate" if alpha <= theta * (1.0 + 1e-12) else "clamped"
    if branch not in ("translate", "clamped"):
        raise ValueError("branch must be 'translate' or 'clamped'")
    detail = {"P_max": p_hi, "P_min": p_lo, "threshold": theta}

    if branch == "translate":
        lo, hi = -alpha * p_lo, 1.0 - alpha * p_hi
        if hi < lo - 1e-12:
            raise HypothesisError(
                "above_threshold", f"alpha={alpha:g} exceeds the threshold {theta:.12g}", report
            )
        hi = max(hi, lo)

        def J(y):
            return float(simpson(fields.V(alpha * P + y, ts), T)) / T

        if hi - lo < 1e-14:
            y_best, v_best = lo, J(lo)
        else:
            y_best, v_best = _interval_min(J, lo, hi, 256)
            for y in (lo, hi):
                if J(y) < v_best:
                    y_best, v_best = y, J(y)
        ledger = [
            LimitCandidate("translate", None, v_best, dict(detail, y=y_best, y_lo=lo, y_hi=hi)),
        ]
        return _finalize(ledger, "linear_drift_translate", report)

    orbit = find_clamped_periodic(cf, n_steps=n_t)
    value = float(simpson(fields.V(orbit.samples, orbit.t), T)) / T
    walls = float(np.mean((orbit.samples <= 0.0) | (orbit.samples >= 1.0)))
    ledger = [LimitCandidate("clamped_orbit", None, value, dict(detail, y0=orbit.y0, wall_fraction=walls))]
    return _finalize(ledger, "linear_drift_clamped", report)


# ----------------------------------------------------------------------------
# mode selection
# ----------------------------------------------------------------------------


def compute_limit(problem: ProblemSpec, mode: str = "auto", tol: float = 1e-8) -> LimitResult:
    """Evaluate the limit formula selected by ``mode`` for ``problem``."""
    if mode not in LIMIT_MODES:
        raise ValueError(f"unknown limit mode {mode!r}")
    fields = problem.fields()
    neumann = problem.bc_left.c == 1.0 and problem.bc_right.c == 1.0

    if mode == "auto":
        if problem.linear_drift is not None:
            mode = "linear"
        else:
            try:
                strips = detect_structure(fields, tol).strips
            except HypothesisError:
                strips = []
            if strips:
                mode = "degenerate"
            elif fields.time_independent and neumann:
                mode = "elliptic"
            else:
                mode = "nondegenerate"

    if not neumann:
        # off Neumann only the pure-diffusion case is covered: minimum of V_hat
        structure = detect_structure(fields, tol)
        if structure.strips != [(0.0, 1.0)]:
            raise HypothesisError(
                "boundary_condition",
                "limit formulas with drift assume Neumann ends; "
                "non-Neumann ends are only supported when m_x vanishes identically",
            )
        mode = "degenerate"

    if mode == "linear":
        if problem.linear_drift is None:
            raise HypothesisError("not_linear", "problem has no linear-drift marker")
        ld = problem.linear_drift
        return limit_linear_drift(ld.b, ld.alpha, problem.V, problem.T, problem.params, tol)
    if mode == "elliptic":
        return limit_elliptic(fields, tol)
    if mode == "degenerate":
        return limit_degenerate(fields, tol)
    return limit_nondegenerate(fields, tol=tol)
