import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from perieig.catalog import FIG_B, Q_ORBIT_DRIFT
from perieig.errors import DegenerateOrbitError, ExprError
from perieig.expr import parse_expr
from perieig.fields import ProblemSpec
from perieig.ode import (
    ClampedField,
    OrbitCountWarning,
    clamped_period_map,
    find_clamped_periodic,
    find_periodic_solutions,
    integrate_drift,
    interior_orbits,
    poincare_map,
)


def fields_of(m, V="0"):
    return ProblemSpec.from_strings(m, V).fields()


def test_linear_drift_trajectory():
    # P' = alpha b(t) with b = -pi sin(2 pi t): P = y0 + alpha (1 - cos(2 pi t)) / 2
    tr = integrate_drift(ProblemSpec.linear(FIG_B, 0.5, "x").fields(), 0.25)
    exact = 0.25 + 0.5 * (0.5 - 0.5 * np.cos(2 * np.pi * tr.t))
    assert not tr.escaped
    assert np.max(np.abs(tr.states - exact)) <= 1e-10


def test_uniform_drift_escapes_left_at_half_period():
    res = poincare_map(fields_of("x"), 0.5)
    assert res.escaped and res.exit_side == "left"
    assert res.exit_time == pytest.approx(0.5, abs=1e-9)
    res = poincare_map(fields_of("-x"), 0.75)
    assert res.exit_side == "right" and res.exit_time == pytest.approx(0.25, abs=1e-9)


def test_batch_escape_keeps_survivors():
    tr = integrate_drift(fields_of("x"), np.array([0.2, 0.9, 1.0]), 0.0, 0.5, 64)
    assert list(tr.escaped) == [True, False, False]
    assert np.isnan(tr.states[-1, 0])
    np.testing.assert_allclose(tr.final[1:], [0.4, 0.5], atol=1e-12)
    assert tr.exit_time[0] == pytest.approx(0.2, abs=1e-12)


def test_needs_enough_steps():
    f = fields_of("x")
    with pytest.raises(ValueError):
        integrate_drift(f, 0.5, n_steps=63)
    with pytest.raises(ValueError):
        integrate_drift(f, 0.5, 0.0, 2.0, n_steps=100)
    with pytest.raises(ValueError):
        integrate_drift(f, 1.5)


def test_fourth_order_on_autonomous_flow():
    f = fields_of("-(x-0.45)^2")
    y0 = 0.46
    exact = 0.45 + (y0 - 0.45) * math.exp(2.0)
    e = [abs(integrate_drift(f, y0, n_steps=n).final - exact) for n in (64, 128)]
    assert 14.0 <= e[0] / e[1] <= 18.0


def test_unstable_fixed_point_orbit():
    orbits = find_periodic_solutions(fields_of("-(x-0.45)^2"))
    inner = interior_orbits(orbits)
    assert len(inner) == 1
    assert inner[0].y0 == pytest.approx(0.45, abs=1e-9)
    assert inner[0].multiplier == pytest.approx(math.e**2, rel=1e-10)
    assert not inner[0].stable
    kinds = [o.kind for o in orbits]
    assert kinds[-2:] == ["boundary_left", "boundary_right"]


def test_moving_orbit_and_multiplier():
    inner = interior_orbits(find_periodic_solutions(fields_of(Q_ORBIT_DRIFT)))
    assert len(inner) == 1
    o = inner[0]
    assert np.max(np.abs(o.samples - (0.5 + 0.2 * np.sin(2 * np.pi * o.t)))) <= 1e-8
    assert o.closure_error <= 1e-9
    assert o.stable
    h = 1e-6
    f = fields_of(Q_ORBIT_DRIFT)
    fd = (poincare_map(f, o.y0 + h).value - poincare_map(f, o.y0 - h).value) / (2 * h)
    assert fd == pytest.approx(o.multiplier, rel=1e-6)


def test_nonzero_mean_linear_drift_has_only_walls():
    orbits = find_periodic_solutions(ProblemSpec.linear("1 + sin(2*pi*t)", 1.0, "x").fields())
    assert [o.kind for o in orbits] == ["boundary_left", "boundary_right"]


def test_boundary_multipliers():
    orbits = find_periodic_solutions(fields_of("-(x-0.45)^2"))
    left, right = orbits[-2], orbits[-1]
    assert left.multiplier == pytest.approx(math.e**2)
    assert right.multiplier == pytest.approx(math.e**2)


def test_flat_orbit_is_degenerate():
    with pytest.raises(DegenerateOrbitError) as info:
        find_periodic_solutions(fields_of("-(x-0.5)^4"))
    assert info.value.code == "degenerate_orbit"
    orbits = find_periodic_solutions(fields_of("-(x-0.5)^4"), allow_degenerate=True)
    assert interior_orbits(orbits)


def test_close_orbit_pair_triggers_warning():
    # velocity (x - 0.5)(x - 0.505): both roots fall between two coarse seeds
    m = "-((x-0.5)^3/3 - 0.0025*(x-0.5)^2)"
    with pytest.warns(OrbitCountWarning):
        find_periodic_solutions(fields_of(m), scan_n=64)


def test_scan_size_validation():
    with pytest.raises(ValueError):
        find_periodic_solutions(fields_of("x"), scan_n=32)
    with pytest.raises(ValueError):
        find_periodic_solutions(fields_of("x"), n_steps=1025)


# clamped dynamics ------------------------------------------------------------


def clamped(alpha, b=FIG_B):
    return ClampedField(parse_expr(b), alpha)


def test_clamped_threshold_and_extremes():
    cf = clamped(1.0)
    hi, lo = cf.extremes()
    assert hi == pytest.approx(1.0, abs=1e-12)
    assert lo == pytest.approx(0.0, abs=1e-12)
    assert cf.threshold() == pytest.approx(1.0, abs=1e-12)


def test_clamped_orbit_at_threshold_is_primitive():
    o = find_clamped_periodic(clamped(1.0))
    assert np.max(np.abs(o.samples - (0.5 - 0.5 * np.cos(2 * np.pi * o.t)))) <= 1e-10


def test_clamped_strong_drift_saturates():
    cf = clamped(2.0)
    assert clamped_period_map(cf, 0.0) == pytest.approx(0.0, abs=1e-12)
    assert clamped_period_map(cf, 1.0) == pytest.approx(0.0, abs=1e-12)
    o = find_clamped_periodic(cf)
    assert o.y0 == pytest.approx(0.0, abs=1e-10)
    assert np.mean(np.isclose(o.samples[:-1], 0.0) | np.isclose(o.samples[:-1], 1.0)) == pytest.approx(0.5, abs=0.01)


def test_clamped_weak_drift_is_nearly_identity():
    ys = np.linspace(0.1, 0.9, 9)
    np.testing.assert_allclose(clamped_period_map(clamped(1e-6), ys), ys, atol=1e-9)


def test_clamped_below_threshold_rejected():
    with pytest.raises(ValueError):
        find_clamped_periodic(clamped(0.5))


def test_clamped_zero_profile_has_no_threshold():
    with pytest.raises(ValueError):
        clamped(1.0, "0").threshold()


def test_clamped_validation():
    with pytest.raises(ValueError):
        clamped(0.0)
    with pytest.raises(ExprError):
        clamped(1.0, "x*t")
    with pytest.raises(ValueError):
        clamped_period_map(clamped(1.0), 0.5, n_steps=128)
    with pytest.raises(ValueError):
        clamped_period_map(clamped(1.0), -0.1)


def test_wall_profile():
    cf = clamped(1.0)
    t = 0.25  # b = -pi
    assert float(cf.F(0.0, t)) == pytest.approx(-math.pi)
    assert float(cf.F(1.0, t)) == 0.0
    assert float(cf.F(0.5, t)) == pytest.approx(-math.pi)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0), st.floats(0.1, 3.0))
def test_clamped_map_is_monotone(a, b, alpha):
    lo, hi = min(a, b), max(a, b)
    cf = clamped(alpha)
    assert clamped_period_map(cf, lo, 256) <= clamped_period_map(cf, hi, 256) + 1e-12


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 0.95), st.floats(0.05, 0.95))
def test_flow_preserves_order(a, b):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        tr = integrate_drift(fields_of(Q_ORBIT_DRIFT), np.array(sorted((a, b))), n_steps=128)
    assert tr.final[0] <= tr.final[1]
