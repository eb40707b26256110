"""Acceptance criteria 1-9.  One pass/fail line per criterion is printed in
the terminal summary (see conftest)."""

import math
import time

import numpy as np
import pytest

from perieig.catalog import (
    BOWL_DRIFT,
    BOWL_POTENTIALS,
    FIG_B,
    FIG_V,
    FLAT_DRIFT,
    GAUGE_DRIFTS,
    KAPPA_DRIFT,
    KAPPA_V,
    MIXED_DRIFT,
    Q_ORBIT_DRIFT,
    STRIP_DRIFT,
    eigenvalue,
    pure_diffusion_problem,
)
from perieig.cli import main
from perieig.config import StudyConfig
from perieig.expr import Var, parse_expr
from perieig.fields import ProblemSpec
from perieig.limits import compute_limit, limit_linear_drift
from perieig.ode import ClampedField, clamped_period_map, find_periodic_solutions, integrate_drift, interior_orbits
from perieig.pde import SchemeConfig, build_period_map, dense_principal_eigenvalue, principal_eigenpair
from perieig.pde import rescaled_dirichlet_eigenvalue
from perieig.study import run_study

pytestmark = pytest.mark.slow


def test_c1_gauge_identities(record_property):
    start = time.perf_counter()
    worst = 0.0
    for m in GAUGE_DRIFTS:
        for c in (-2.0, 0.0, 7.0):
            problem = ProblemSpec.from_strings(m, repr(c))
            for D in (1e-2, 1e-3):
                worst = max(worst, abs(eigenvalue(problem, D) - c))
    elapsed = time.perf_counter() - start
    record_property("measured", f"max |lambda - c| = {worst:.2e}, {elapsed:.2f}s")
    assert worst <= 1e-9
    assert elapsed < 5.0


def test_c2_interior_critical_point_study(record_property):
    start = time.perf_counter()
    cfg = StudyConfig(ProblemSpec.from_strings(KAPPA_DRIFT, KAPPA_V), diffusions=(1e-2, 3e-3, 1e-3, 3e-4))
    report = run_study(cfg)
    elapsed = time.perf_counter() - start
    gaps = report.gaps
    record_property("measured", "gaps " + ", ".join(f"{g:.2e}" for g in gaps) + f", {elapsed:.1f}s")
    assert report.limit_value == pytest.approx(0.45, abs=1e-8)
    assert gaps[-1] <= 5e-2
    assert gaps[0] >= 2.0 * gaps[-1]
    assert elapsed < 60.0


@pytest.mark.parametrize("which", ["boundary", "interior"])
def test_c3_bowl_attaining_candidate_switches(which, record_property):
    problem = ProblemSpec.from_strings(BOWL_DRIFT, BOWL_POTENTIALS[which])
    result = compute_limit(problem)
    values = sorted(c.value for c in result.ledger)
    assert len(values) == 3
    assert min(b - a for a, b in zip(values, values[1:])) >= 0.5
    expected = "interior_orbit" if which == "interior" else "boundary"
    assert result.attaining.source == expected
    lam = eigenvalue(problem, 3e-4)
    record_property("measured", f"limit {result.value:.4g} via {result.attaining.label}, gap {abs(lam - result.value):.2e}")
    assert abs(lam - result.value) <= 5e-2


def test_c4_nonconstant_orbit(record_property):
    problem = ProblemSpec.from_strings(Q_ORBIT_DRIFT, "x")
    orbits = interior_orbits(find_periodic_solutions(problem.fields()))
    assert len(orbits) == 1
    orbit = orbits[0]
    sup = float(np.max(np.abs(orbit.samples - (0.5 + 0.2 * np.sin(2 * np.pi * orbit.t)))))
    mult = abs(orbit.multiplier - math.exp(-6.0))
    limit = compute_limit(problem)
    gap = abs(eigenvalue(problem, 3e-4) - limit.value)
    record_property("measured", f"gap {gap:.2e}, orbit sup error {sup:.1e}, multiplier error {mult:.1e}")
    assert sup <= 1e-6
    assert mult <= 1e-5
    assert gap <= 5e-2


@pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0])
def test_c5_linear_drift_family(alpha, record_property):
    limit = limit_linear_drift(FIG_B, alpha, FIG_V)
    lam = eigenvalue(ProblemSpec.linear(FIG_B, alpha, FIG_V), 3e-4)
    record_property("measured", f"{limit.theorem_used}: limit {limit.value:.5g}, lambda {lam:.5g}, gap {abs(lam - limit.value):.2e}")
    assert abs(lam - limit.value) <= 5e-2


def test_c5_threshold_cross_branch(record_property):
    for V in ("x", FIG_V):
        a = limit_linear_drift(FIG_B, 1.0, V, branch="translate").value
        b = limit_linear_drift(FIG_B, 1.0, V, branch="clamped").value
        assert abs(a - b) <= 1e-6
    record_property("measured", f"|translate - clamped| = {abs(a - b):.1e}")


def test_c6_rescaled_dirichlet(record_property):
    start = time.perf_counter()
    rho = parse_expr("1")
    mus = {R: rescaled_dirichlet_eigenvalue(rho, R) for R in (2.0, 4.0, 8.0)}
    elapsed = time.perf_counter() - start
    record_property("measured", ", ".join(f"mu_{R:g}={mu:.6f}" for R, mu in mus.items()) + f", {elapsed:.1f}s")
    assert abs(mus[8.0] - 1.0) <= 1e-2
    assert all(mu >= 1.0 - 1e-3 for mu in mus.values())
    assert elapsed < 30.0


@pytest.mark.parametrize("c", [0.0, 0.5, 1.0])
def test_c7_robin_pure_diffusion(c, record_property):
    problem = pure_diffusion_problem(c)
    limit = compute_limit(problem)
    assert limit.value == pytest.approx(-1.0, abs=1e-9)
    gap = abs(eigenvalue(problem, 3e-4) - limit.value)
    record_property("measured", f"gap {gap:.3e}")
    assert gap <= 5e-2


# ----------------------------------------------------------------------------
# criterion 8: property suites
# ----------------------------------------------------------------------------


def test_c8_positivity(record_property):
    rng = np.random.default_rng(2024)
    pmap = build_period_map(ProblemSpec.from_strings(Q_ORBIT_DRIFT, KAPPA_V), 1e-3)
    worst = math.inf
    for _ in range(100):
        seed = np.zeros(pmap.n)
        k = rng.integers(1, 6)
        seed[rng.choice(pmap.n, size=k, replace=False)] = rng.uniform(0.0, 1.0, size=k)
        worst = min(worst, float(np.min(pmap.apply(seed))))
    record_property("measured", f"smallest output entry {worst:.2e}")
    assert worst > 0.0


def test_c8_constant_preservation():
    for m in GAUGE_DRIFTS:
        pmap = build_period_map(ProblemSpec.from_strings(m, "0"), 1e-3)
        assert np.max(np.abs(pmap.apply(np.ones(pmap.n)) - 1.0)) <= 1e-12


def test_c8_reflection_invariance(record_property):
    m, V = Q_ORBIT_DRIFT, KAPPA_V
    a = eigenvalue(ProblemSpec.from_strings(m, V), 1e-2)
    flip = 1.0 - Var("x")
    mirror = ProblemSpec(parse_expr(m).subs("x", flip), parse_expr(V).subs("x", flip))
    b = eigenvalue(mirror, 1e-2)
    record_property("measured", f"|difference| = {abs(a - b):.1e}")
    assert abs(a - b) <= 1e-9


def test_c8_clamped_monotone():
    cf = ClampedField(parse_expr(FIG_B), 2.0)
    rng = np.random.default_rng(7)
    pairs = np.sort(rng.uniform(0.0, 1.0, size=(64, 2)), axis=1)
    lo = clamped_period_map(cf, pairs[:, 0])
    hi = clamped_period_map(cf, pairs[:, 1])
    assert np.all(lo <= hi + 1e-10)


def test_c8_dense_oracle(record_property):
    worst = 0.0
    for m, V in ((KAPPA_DRIFT, KAPPA_V), (Q_ORBIT_DRIFT, "x"), ("x", "x")):
        pmap = build_period_map(ProblemSpec.from_strings(m, V), 1e-2, SchemeConfig(64, 256))
        lam = principal_eigenpair(pmap, tol=1e-13).lambda_
        worst = max(worst, abs(lam - dense_principal_eigenvalue(pmap)))
    record_property("measured", f"max |power - dense| = {worst:.1e}")
    assert worst <= 1e-10


def test_c8_rk4_order(record_property):
    fields = ProblemSpec.linear(FIG_B, 0.5, "x").fields()
    errors = []
    for n in (64, 128):
        tr = integrate_drift(fields, 0.25, 0.0, 1.0, n)
        exact = 0.25 + 0.5 * (0.5 - 0.5 * np.cos(2 * np.pi * tr.t))
        errors.append(float(np.max(np.abs(tr.states - exact))))
    ratio = errors[0] / errors[1]
    record_property("measured", f"error ratio {ratio:.3f}")
    assert 12.0 <= ratio <= 20.0


def test_c8_symbolic_vs_fd(record_property):
    drifts = [KAPPA_DRIFT, Q_ORBIT_DRIFT, BOWL_DRIFT, STRIP_DRIFT, FLAT_DRIFT, "x", f"2*({FIG_B})*x"]
    xs, ts = np.meshgrid(np.linspace(0.0, 1.0, 64), np.linspace(0.0, 1.0, 64), indexing="ij")
    h = 1e-5
    worst = 0.0
    for src in drifts:
        fields = ProblemSpec.from_strings(src, "0").fields()
        sym = fields.dm(xs, ts)
        fd = (fields.m(xs + h, ts) - fields.m(xs - h, ts)) / (2 * h)
        worst = max(worst, float(np.max(np.abs(sym - fd) / (1.0 + np.abs(sym)))))
    record_property("measured", f"max relative deviation {worst:.1e}")
    assert worst <= 1e-6


# ----------------------------------------------------------------------------
# criterion 9: diagnostics
# ----------------------------------------------------------------------------


def _config(tmp_path, m, mode):
    path = tmp_path / "problem.cfg"
    path.write_text(f"[problem]\nm = {m}\nV = x\n\n[study]\nlimit_mode = {mode}\n")
    return str(path)


def test_c9_mixed_interval(tmp_path, capsys):
    code = main(["limit", "--config", _config(tmp_path, MIXED_DRIFT, "degenerate")])
    out, err = capsys.readouterr()
    assert code == 3
    assert "mixed_interval" in err
    assert "limit =" not in out


def test_c9_degenerate_orbit(tmp_path, capsys):
    code = main(["limit", "--config", _config(tmp_path, FLAT_DRIFT, "nondegenerate")])
    out, err = capsys.readouterr()
    assert code == 3
    assert "degenerate_orbit" in err
    assert "limit =" not in out
