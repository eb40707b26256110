import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from perieig.errors import ConfigError, ExprError
from perieig.expr import CompiledExpr, parse_expr
from perieig.fields import BoundaryCondition, ProblemSpec, positive_part, simpson, time_average

extended = st.one_of(st.floats(allow_nan=False, allow_infinity=False), st.sampled_from([math.inf, -math.inf]))


def f_of(src):
    return CompiledExpr(parse_expr(src))


def test_average_of_full_period_sine():
    assert abs(time_average(f_of("sin(2*pi*t)"), 0.3, 1.0)) <= 1e-12


def test_average_of_t_independent_field():
    assert time_average(f_of("x"), 0.7, 1.0) == pytest.approx(0.7, rel=1e-12)
    xs = np.linspace(0.0, 1.0, 11)
    vals = time_average(f_of("exp(x) + 2"), xs, 3.0)
    np.testing.assert_allclose(vals, np.exp(xs) + 2, rtol=1e-12)


def test_average_of_cos_squared():
    # int cos^2 = t/2 + sin(4 pi t)/(8 pi), so the mean over a period is 1/2
    assert time_average(f_of("cos(2*pi*t/2)^2"), 0.0, 2.0) == pytest.approx(0.5, abs=1e-10)


def test_average_fourth_order():
    f = f_of("exp(sin(t))")
    exact = time_average(f, 0.0, 1.0, 4096)
    e1 = abs(time_average(f, 0.0, 1.0, 8) - exact)
    e2 = abs(time_average(f, 0.0, 1.0, 16) - exact)
    assert 12.0 <= e1 / e2 <= 20.0


@pytest.mark.parametrize("n", [6, 7, 0])
def test_average_rejects_bad_counts(n):
    with pytest.raises(ValueError):
        time_average(f_of("x"), 0.0, 1.0, n)


def test_domain_error_propagates():
    from perieig.errors import ExprDomainError

    with pytest.raises(ExprDomainError):
        time_average(f_of("log(t)"), 0.5, 1.0)


def test_simpson_exact_for_cubics():
    ts = np.linspace(0.0, 2.0, 9)
    assert simpson(ts**3, 2.0) == pytest.approx(4.0, abs=1e-14)


@pytest.mark.parametrize("v,expected", [(-3.2, 0.0), (math.inf, math.inf), (-math.inf, 0.0), (2.5, 2.5)])
def test_positive_part_examples(v, expected):
    assert positive_part(v) == expected


@given(extended)
def test_positive_part_idempotent(v):
    assert positive_part(positive_part(v)) == positive_part(v)


@given(extended, extended)
def test_positive_part_monotone(a, b):
    lo, hi = min(a, b), max(a, b)
    assert positive_part(lo) <= positive_part(hi)


def test_positive_part_arrays():
    np.testing.assert_array_equal(positive_part(np.array([-1.0, 0.0, 2.0, np.inf])), [0.0, 0.0, 2.0, np.inf])


def test_boundary_condition_parsing():
    assert BoundaryCondition.parse("neumann").c == 1.0
    assert BoundaryCondition.parse("Dirichlet").c == 0.0
    bc = BoundaryCondition.parse("robin:0.5")
    assert bc.c == 0.5 and bc.kind == "robin" and str(bc) == "robin:0.5"
    with pytest.raises(ConfigError):
        BoundaryCondition.parse("periodic")
    with pytest.raises(ConfigError):
        BoundaryCondition.parse("robin:abc")
    with pytest.raises(ValueError):
        BoundaryCondition(1.5)


def test_robin_endpoints_match_named_conditions():
    assert BoundaryCondition.robin(1.0).kind == "neumann"
    assert BoundaryCondition.robin(0.0).kind == "dirichlet"


def test_problem_validation():
    with pytest.raises(ValueError):
        ProblemSpec.from_strings("x", "x", T=0.0)
    with pytest.raises(ExprError):
        ProblemSpec(parse_expr("a*x", ["a"]), parse_expr("x"))
    p = ProblemSpec.from_strings("a*x", "x", params={"a": 2.0})
    assert p.params["a"] == 2.0


def test_linear_drift_marker():
    p = ProblemSpec.linear("-pi*sin(2*pi*t)", 0.5, "x")
    assert p.linear_drift.alpha == 0.5
    xs, ts = np.random.default_rng(1).uniform(size=(2, 32))
    np.testing.assert_allclose(p.m.evaluate(xs, ts), -0.5 * np.pi * np.sin(2 * np.pi * ts) * xs, atol=1e-14)
    with pytest.raises(ExprError):
        p.replace(m=parse_expr("x"))
    with pytest.raises(ExprError):
        ProblemSpec.linear("x", 1.0, "x")
    with pytest.raises(ValueError):
        ProblemSpec.linear("1", 0.0, "x")


def test_field_calculus_derivatives():
    fc = ProblemSpec.from_strings("-(x-0.45)^2", "x").fields()
    assert float(fc.dm(0.0, 0.0)) == pytest.approx(0.9)
    assert float(fc.d2m(0.3, 0.7)) == -2.0
    assert float(fc.drift_velocity(0.0, 0.0)) == pytest.approx(-0.9)
    assert fc.time_independent
    assert not ProblemSpec.from_strings("x*t", "x").fields().time_independent
