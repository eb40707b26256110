"""Problem data: coefficient fields, boundary conditions, time averages."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Callable, Mapping

import numpy as np

from .errors import ConfigError, ExprError
from .expr import CompiledExpr, Expr, Var, differentiate, parse_expr

__all__ = [
    "BoundaryCondition",
    "LinearDrift",
    "ProblemSpec",
    "FieldCalculus",
    "simpson",
    "simpson_weights",
    "time_average",
    "positive_part",
    "DEFAULT_NT",
]

DEFAULT_NT = 2048


@dataclass(frozen=True)
class BoundaryCondition:
    """Robin family ``c*d(phi)/dn_in - (1-c)*phi = 0`` at one end of [0, 1].

    With the inward derivative this reads ``c*phi_x - (1-c)*phi = 0`` at
    ``x = 0`` and ``c*phi_x + (1-c)*phi = 0`` at ``x = 1``.  ``c = 1`` is
    Neumann and ``c = 0`` is Dirichlet.
    """

    c: float = 1.0

    def __post_init__(self):
        if not (0.0 <= self.c <= 1.0) or math.isnan(self.c):
            raise ValueError(f"Robin coefficient must lie in [0, 1], got {self.c}")

    @classmethod
    def neumann(cls) -> "BoundaryCondition":
        return cls(1.0)

    @classmethod
    def dirichlet(cls) -> "BoundaryCondition":
        return cls(0.0)

    @classmethod
    def robin(cls, c: float) -> "BoundaryCondition":
        return cls(float(c))

    @classmethod
    def parse(cls, text: str) -> "BoundaryCondition":
        key = text.strip().lower()
        if key == "neumann":
            return cls.neumann()
        if key == "dirichlet":
            return cls.dirichlet()
        if key.startswith("robin:"):
            try:
                return cls.robin(float(key.split(":", 1)[1]))
            except ValueError as exc:
                raise ConfigError(f"bad Robin boundary condition {text!r}: {exc}") from None
        raise ConfigError(f"unknown boundary condition {text!r} (neumann | dirichlet | robin:<c>)")

    @property
    def kind(self) -> str:
        if self.c == 1.0:
            return "neumann"
        if self.c == 0.0:
            return "dirichlet"
        return "robin"

    def __str__(self) -> str:
        return self.kind if self.kind != "robin" else f"robin:{self.c:g}"


@dataclass(frozen=True)
class LinearDrift:
    """Marks ``m = alpha * b(t) * x``."""

    b: Expr
    alpha: float

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if self.b.depends_on("x"):
            raise ExprError("the linear-drift profile b must not depend on x")

    def m_expr(self) -> Expr:
        return self.alpha * self.b * Var("x")


def _freeze(params: Mapping[str, float] | None) -> Mapping[str, float]:
    return MappingProxyType({k: float(v) for k, v in (params or {}).items()})


@dataclass(frozen=True)
class ProblemSpec:
    """The continuous problem: drift potential ``m``, reaction ``V``, period ``T``."""

    m: Expr
    V: Expr
    T: float = 1.0
    params: Mapping[str, float] = field(default_factory=dict)
    bc_left: BoundaryCondition = field(default_factory=BoundaryCondition.neumann)
    bc_right: BoundaryCondition = field(default_factory=BoundaryCondition.neumann)
    linear_drift: LinearDrift | None = None

    def __post_init__(self):
        object.__setattr__(self, "params", _freeze(self.params))
        if not (self.T > 0 and math.isfinite(self.T)):
            raise ValueError(f"period T must be positive, got {self.T}")
        used = self.m.params() | self.V.params()
        if self.linear_drift is not None:
            used |= self.linear_drift.b.params()
        missing = sorted(used - set(self.params))
        if missing:
            raise ExprError(f"undeclared parameter(s): {', '.join(missing)}")
        if self.linear_drift is not None:
            self._check_linear_drift()

    def _check_linear_drift(self):
        rng = np.random.default_rng(12345)
        xs = rng.uniform(0.0, 1.0, 64)
        ts = rng.uniform(0.0, self.T, 64)
        lhs = self.m.evaluate(xs, ts, self.params)
        rhs = self.linear_drift.m_expr().evaluate(xs, ts, self.params)
        if not np.allclose(lhs, rhs, rtol=1e-12, atol=1e-12):
            raise ExprError("m does not equal alpha*b(t)*x for the declared linear drift")

    @classmethod
    def from_strings(
        cls,
        m: str,
        V: str,
        T: float = 1.0,
        params: Mapping[str, float] | None = None,
        bc_left: BoundaryCondition | str = "neumann",
        bc_right: BoundaryCondition | str = "neumann",
    ) -> "ProblemSpec":
        params = dict(params or {})
        if isinstance(bc_left, str):
            bc_left = BoundaryCondition.parse(bc_left)
        if isinstance(bc_right, str):
            bc_right = BoundaryCondition.parse(bc_right)
        return cls(parse_expr(m, params), parse_expr(V, params), T, params, bc_left, bc_right)

    @classmethod
    def linear(
        cls,
        b: str | Expr,
        alpha: float,
        V: str | Expr,
        T: float = 1.0,
        params: Mapping[str, float] | None = None,
        bc_left: BoundaryCondition | None = None,
        bc_right: BoundaryCondition | None = None,
    ) -> "ProblemSpec":
        params = dict(params or {})
        b_expr = parse_expr(b, params) if isinstance(b, str) else b
        V_expr = parse_expr(V, params) if isinstance(V, str) else V
        drift = LinearDrift(b_expr, float(alpha))
        return cls(
            drift.m_expr(),
            V_expr,
            T,
            params,
            bc_left or BoundaryCondition.neumann(),
            bc_right or BoundaryCondition.neumann(),
            drift,
        )

    def replace(self, **changes) -> "ProblemSpec":
        values = dict(
            m=self.m,
            V=self.V,
            T=self.T,
            params=dict(self.params),
            bc_left=self.bc_left,
            bc_right=self.bc_right,
            linear_drift=self.linear_drift,
        )
        values.update(changes)
        return ProblemSpec(**values)

    def fields(self) -> "FieldCalculus":
        return FieldCalculus(self.m, self.V, self.T, self.params)

    @property
    def time_independent(self) -> bool:
        return not (self.m.depends_on("t") or self.V.depends_on("t"))


class FieldCalculus:
    """``m``, its symbolic x-derivatives and ``V``, bound to a parameter table.

    Instances are immutable; every method is a pure vectorized function of
    ``(x, t)``.
    """

    def __init__(self, m: Expr, V: Expr, T: float = 1.0, params: Mapping[str, float] | None = None):
        self.T = float(T)
        self.params = _freeze(params)
        self.m_expr = m
        self.V_expr = V
        self.dm_expr = differentiate(m, "x")
        self.d2m_expr = differentiate(self.dm_expr, "x")
        self.m = CompiledExpr(m, self.params)
        self.dm = CompiledExpr(self.dm_expr, self.params)
        self.d2m = CompiledExpr(self.d2m_expr, self.params)
        self.V = CompiledExpr(V, self.params)

    @classmethod
    def from_problem(cls, problem: ProblemSpec) -> "FieldCalculus":
        return cls(problem.m, problem.V, problem.T, problem.params)

    def drift_velocity(self, x, t):
        """Right-hand side of the characteristic ODE, ``-dm/dx``."""
        return -self.dm(x, t)

    def average(self, f: Callable, x, n_t: int = DEFAULT_NT):
        return time_average(f, x, self.T, n_t)

    @property
    def time_independent(self) -> bool:
        return not (self.m_expr.depends_on("t") or self.V_expr.depends_on("t"))


def simpson_weights(n: int, length: float) -> np.ndarray:
    """Composite Simpson weights for ``n`` (even) uniform intervals on ``[0, length]``."""
    if n < 2 or n % 2:
        raise ValueError(f"Simpson's rule needs an even number of intervals, got {n}")
    w = np.ones(n + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * (length / n / 3.0)


def simpson(values: np.ndarray, length: float, axis: int = -1) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    w = simpson_weights(values.shape[axis] - 1, length)
    return np.tensordot(values, w, axes=([axis], [0]))


def time_average(f: Callable, x, T: float, n_t: int = DEFAULT_NT):
    """``(1/T) * int_0^T f(x, s) ds`` by composite Simpson on ``n_t`` intervals.

    ``x`` may be a scalar or an array; the result has the shape of ``x``.
    """
    if n_t < 8 or n_t % 2:
        raise ValueError(f"n_t must be even and >= 8, got {n_t}")
    x = np.asarray(x, dtype=float)
    ts = np.linspace(0.0, T, n_t + 1)
    values = f(x[..., None], ts)
    values = np.broadcast_to(values, x.shape + ts.shape)
    out = simpson(values, T) / T
    return float(out) if out.ndim == 0 else out


def positive_part(v):
    """``max(v, 0)`` on the extended reals (``+inf -> +inf``, ``-inf -> 0``)."""
    if np.ndim(v) == 0:
        return max(float(v), 0.0)
    return np.maximum(np.asarray(v, dtype=float), 0.0)
