"""Drift ODE ``P' = -m_x(P, t)``: trajectories, Poincare map, periodic orbits.

Also the clamped dynamics ``P' = -alpha F(P, t)`` for linear drifts
``m = alpha b(t) x``, where ``F = b`` inside (0, 1), ``min(b, 0)`` on the left
wall and ``max(b, 0)`` on the right wall.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import DegenerateOrbitError, ExprError, NonUniqueOrbitError
from .expr import CompiledExpr, Expr
from .fields import FieldCalculus, simpson

__all__ = [
    "Trajectory",
    "PoincareResult",
    "PeriodicOrbit",
    "ClampedField",
    "OrbitCountWarning",
    "integrate_drift",
    "poincare_map",
    "find_periodic_solutions",
    "interior_orbits",
    "clamped_period_map",
    "find_clamped_periodic",
    "DEFAULT_STEPS",
]

DEFAULT_STEPS = 1024
ESCAPE_EPS = 1e-12
DEGENERATE_TOL = 1e-6


class OrbitCountWarning(UserWarning):
    """The orbit scan found a different count when the scan grid was doubled."""


@dataclass
class Trajectory:
    t: np.ndarray
    states: np.ndarray  # (n_steps + 1,) or (n_steps + 1, batch); NaN after escape
    escaped: np.ndarray | bool
    exit_time: np.ndarray | float
    exit_side: np.ndarray | str | None  # 'left' / 'right'

    @property
    def final(self):
        return self.states[-1]


@dataclass
class PoincareResult:
    value: float | None
    escaped: bool = False
    exit_time: float | None = None
    exit_side: str | None = None


@dataclass
class PeriodicOrbit:
    samples: np.ndarray
    t: np.ndarray
    multiplier: float
    kind: str  # interior | boundary_left | boundary_right | clamped

    @property
    def y0(self) -> float:
        return float(self.samples[0])

    @property
    def stable(self) -> bool:
        return self.multiplier < 1.0

    @property
    def closure_error(self) -> float:
        return abs(float(self.samples[-1] - self.samples[0]))

    def __repr__(self):
        return f"PeriodicOrbit(kind={self.kind!r}, y0={self.y0:.12g}, multiplier={self.multiplier:.6g})"


def _rk4(f, y, t, dt):
    k1 = f(y, t)
    k2 = f(y + 0.5 * dt * k1, t + 0.5 * dt)
    k3 = f(y + 0.5 * dt * k2, t + 0.5 * dt)
    k4 = f(y + dt * k3, t + dt)
    return y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate_drift(
    fields: FieldCalculus,
    y0,
    t0: float = 0.0,
    t1: float | None = None,
    n_steps: int = DEFAULT_STEPS,
) -> Trajectory:
    """Fixed-step RK4 for ``P' = -m_x(P, t)`` from ``y0`` (scalar or array).

    A trajectory that leaves [0, 1] is marked escaped; its exit time is
    interpolated linearly within the step and later samples are NaN.
    """
    if t1 is None:
        t1 = t0 + fields.T
    span = (t1 - t0) / fields.T
    if n_steps < math.ceil(64 * span - 1e-9):
        raise ValueError(f"need at least 64 steps per period, got {n_steps} over {span:g} periods")
    scalar = np.ndim(y0) == 0
    y = np.atleast_1d(np.asarray(y0, dtype=float)).copy()
    if np.any((y < 0.0) | (y > 1.0)):
        raise ValueError("initial values must lie in [0, 1]")
    ts = np.linspace(t0, t1, n_steps + 1)
    dt = (t1 - t0) / n_steps
    states = np.full((n_steps + 1, y.size), np.nan)
    states[0] = y
    alive = np.ones(y.size, dtype=bool)
    exit_time = np.full(y.size, np.nan)
    exit_side = np.array([None] * y.size, dtype=object)

    def f(p, t):
        return fields.drift_velocity(p, t)

    for k in range(n_steps):
        idx = np.flatnonzero(alive)
        if idx.size == 0:
            break
        old = y[idx]
        new = _rk4(f, old, ts[k], dt)
        low = new < -ESCAPE_EPS
        high = new > 1.0 + ESCAPE_EPS
        out = low | high
        if np.any(out):
            bound = np.where(low, 0.0, 1.0)
            with np.errstate(divide="ignore", invalid="ignore"):
                frac = np.clip((bound - old) / (new - old), 0.0, 1.0)
            gone = idx[out]
            exit_time[gone] = ts[k] + frac[out] * dt
            exit_side[gone] = np.where(low[out], "left", "right")
            alive[gone] = False
        keep = idx[~out]
        y[keep] = new[~out]
        states[k + 1, keep] = new[~out]

    escaped = ~alive
    if scalar:
        return Trajectory(ts, states[:, 0], bool(escaped[0]), float(exit_time[0]), exit_side[0])
    return Trajectory(ts, states, escaped, exit_time, exit_side)


def poincare_map(fields: FieldCalculus, y0: float, n_steps: int = DEFAULT_STEPS) -> PoincareResult:
    """Solution at time ``T`` started from ``y0`` at time 0, or escape info."""
    tr = integrate_drift(fields, float(y0), 0.0, fields.T, n_steps)
    if tr.escaped:
        return PoincareResult(None, True, tr.exit_time, tr.exit_side)
    return PoincareResult(float(tr.final))


def _displacement(fields: FieldCalculus, ys: np.ndarray, n_steps: int) -> np.ndarray:
    """``Pi(y) - y`` with escapes mapped to -inf (left wall) / +inf (right wall).

    Trajectories of a scalar ODE are ordered, so the extended values keep
    every sign change of the displacement between neighbouring seeds.
    """
    tr = integrate_drift(fields, ys, 0.0, fields.T, n_steps)
    g = tr.final - ys
    g = np.where(tr.escaped & (tr.exit_side == "left"), -np.inf, g)
    g = np.where(tr.escaped & (tr.exit_side == "right"), np.inf, g)
    return g


def _signs(g: np.ndarray, zero_tol: float) -> np.ndarray:
    s = np.sign(g)
    s[np.abs(g) <= zero_tol] = 0.0
    return s


def _scan(fields, scan_n, n_steps):
    ys = (np.arange(scan_n) + 0.5) / scan_n
    g = _displacement(fields, ys, n_steps)
    return ys, g


def _count_roots(signs: np.ndarray) -> int:
    """Zero runs plus strict sign flips between consecutive nonzero entries."""
    count = 0
    prev = None
    in_zero = False
    for s in signs:
        if s == 0.0:
            if not in_zero:
                count += 1
                in_zero = True
            prev = None
            continue
        if prev is not None and not in_zero and s != prev:
            count += 1
        in_zero = False
        prev = s
    return count


def orbit_multiplier(fields: FieldCalculus, samples: np.ndarray, t: np.ndarray) -> float:
    """``exp(-int_0^T m_xx(P(t), t) dt)`` along a sampled orbit (Simpson)."""
    curvature = fields.d2m(samples, t)
    return math.exp(-float(simpson(curvature, t[-1] - t[0])))


def find_periodic_solutions(
    fields: FieldCalculus,
    scan_n: int = 128,
    n_steps: int = DEFAULT_STEPS,
    ytol: float = 1e-10,
    check_doubling: bool = True,
    allow_degenerate: bool = False,
) -> list[PeriodicOrbit]:
    """All T-periodic solutions in (0, 1) found by scan-and-bisect on ``Pi(y) - y``.

    Returns interior orbits sorted by starting value followed by the two
    boundary candidates ``P = 0`` and ``P = 1``.  Raises
    :class:`DegenerateOrbitError` if an interior orbit has multiplier within
    1e-6 of 1, unless ``allow_degenerate``.
    """
    if scan_n < 64:
        raise ValueError("scan_n must be >= 64")
    if n_steps % 2:
        raise ValueError("n_steps must be even (Simpson multiplier)")
    ys, g = _scan(fields, scan_n, n_steps)
    zero_tol = 1e-13
    s = _signs(g, zero_tol)
    roots = list(ys[s == 0.0])
    lo_idx = np.flatnonzero(s[:-1] * s[1:] < 0)
    if lo_idx.size:
        lo = ys[lo_idx].copy()
        hi = ys[lo_idx + 1].copy()
        s_lo = s[lo_idx].copy()
        while np.max(hi - lo) > ytol:
            mid = 0.5 * (lo + hi)
            gm = _displacement(fields, mid, n_steps)
            sm = _signs(gm, 0.0)
            exact = sm == 0.0
            left = (sm == s_lo) & ~exact
            lo = np.where(left, mid, lo)
            hi = np.where(left | exact, np.where(exact, mid, hi), mid)
            lo = np.where(exact, mid, lo)
        roots.extend(0.5 * (lo + hi))
    roots = sorted(roots)

    if check_doubling:
        _, g2 = _scan(fields, 2 * scan_n, n_steps)
        count2 = _count_roots(_signs(g2, zero_tol))
        count1 = _count_roots(s)
        if count1 != count2:
            warnings.warn(
                f"orbit scan found {count1} orbit(s) with {scan_n} seeds but {count2} with "
                f"{2 * scan_n}; increase scan_n",
                OrbitCountWarning,
                stacklevel=2,
            )

    orbits: list[PeriodicOrbit] = []
    if roots:
        tr = integrate_drift(fields, np.array(roots), 0.0, fields.T, n_steps)
        for j in range(len(roots)):
            samples = tr.states[:, j]
            if np.any(np.isnan(samples)):
                continue
            mult = orbit_multiplier(fields, samples, tr.t)
            orbits.append(PeriodicOrbit(samples.copy(), tr.t, mult, "interior"))
    ts = np.linspace(0.0, fields.T, n_steps + 1)
    for value, kind in ((0.0, "boundary_left"), (1.0, "boundary_right")):
        samples = np.full(n_steps + 1, value)
        orbits.append(PeriodicOrbit(samples, ts, orbit_multiplier(fields, samples, ts), kind))

    bad = [o for o in orbits if o.kind == "interior" and abs(o.multiplier - 1.0) < DEGENERATE_TOL]
    if bad and not allow_degenerate:
        where = ", ".join(f"y0={o.y0:.10g}" for o in bad)
        raise DegenerateOrbitError(
            f"orbit(s) with multiplier 1 (m_xx vanishes on average along the orbit): {where}",
            orbits,
        )
    return orbits


def interior_orbits(orbits: list[PeriodicOrbit]) -> list[PeriodicOrbit]:
    return [o for o in orbits if o.kind == "interior"]


# ----------------------------------------------------------------------------
# clamped dynamics for m = alpha b(t) x
# ----------------------------------------------------------------------------


@dataclass
class ClampedField:
    b: Expr
    alpha: float
    T: float = 1.0
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.b.depends_on("x"):
            raise ExprError("b must depend on t only")
        self._b = CompiledExpr(self.b, self.params)

    def b_at(self, t):
        return self._b(np.zeros_like(np.asarray(t, dtype=float)), t)

    def F(self, x, t):
        """The wall-modified profile: ``b`` inside, ``min(b, 0)`` at 0, ``max(b, 0)`` at 1."""
        x = np.asarray(x, dtype=float)
        bt = self.b_at(np.broadcast_to(t, np.broadcast_shapes(x.shape, np.shape(t))))
        return np.where(x <= 0.0, np.minimum(bt, 0.0), np.where(x >= 1.0, np.maximum(bt, 0.0), bt))

    def increments(self, n_steps: int) -> np.ndarray:
        """``-alpha * int b`` over each step (RK4 on a t-only field, i.e. Simpson)."""
        ts = np.linspace(0.0, self.T, n_steps + 1)
        mids = 0.5 * (ts[:-1] + ts[1:])
        dt = self.T / n_steps
        b0, bm, b1 = self.b_at(ts[:-1]), self.b_at(mids), self.b_at(ts[1:])
        return -self.alpha * dt / 6.0 * (b0 + 4.0 * bm + b1)

    def primitive(self, n_steps: int = 2048) -> tuple[np.ndarray, np.ndarray]:
        """Samples of ``P(t) = -int_0^t b``, with the same quadrature as the clamped map."""
        ts = np.linspace(0.0, self.T, n_steps + 1)
        inc = self.increments(n_steps) / self.alpha
        return ts, np.concatenate([[0.0], np.cumsum(inc)])

    def extremes(self, n_steps: int = 2048) -> tuple[float, float]:
        _, P = self.primitive(n_steps)
        return float(P.max()), float(P.min())

    def threshold(self, n_steps: int = 2048) -> float:
        """``1 / (max P - min P)``; raises if ``b`` has no oscillation."""
        hi, lo = self.extremes(n_steps)
        if hi - lo <= 1e-14:
            raise ValueError("threshold undefined: P is constant (b vanishes identically)")
        return 1.0 / (hi - lo)


def _clamped_run(cf: ClampedField, y0: np.ndarray, n_steps: int, record: bool):
    inc = cf.increments(n_steps)
    y = np.array(y0, dtype=float, copy=True)
    states = np.empty((n_steps + 1,) + y.shape) if record else None
    if record:
        states[0] = y
    for k in range(n_steps):
        y = np.clip(y + inc[k], 0.0, 1.0)
        if record:
            states[k + 1] = y
    return y, states


def clamped_period_map(cf: ClampedField, y0, n_steps: int = 2048):
    """Projected one-period map: each substep adds ``-alpha int b`` then clamps to [0, 1]."""
    if n_steps < 256:
        raise ValueError("n_steps must be >= 256")
    y = np.asarray(y0, dtype=float)
    if np.any((y < 0.0) | (y > 1.0)):
        raise ValueError("initial values must lie in [0, 1]")
    out, _ = _clamped_run(cf, y, n_steps, False)
    return float(out) if np.ndim(y0) == 0 else out


def find_clamped_periodic(
    cf: ClampedField,
    n_steps: int = 2048,
    ytol: float = 1e-12,
    grid: int = 512,
) -> PeriodicOrbit:
    """The unique periodic solution of the clamped dynamics (alpha above threshold)."""
    theta = cf.threshold(n_steps)
    if cf.alpha < theta - 1e-12:
        raise ValueError(f"alpha={cf.alpha:g} is below the uniqueness threshold {theta:.12g}")
    ys = np.linspace(0.0, 1.0, grid)
    h = clamped_period_map(cf, ys, n_steps) - ys
    roots = _count_roots(_signs(h, 1e-12))
    if roots != 1:
        raise NonUniqueOrbitError(f"clamped map has {roots} fixed-point regions on a {grid}-point grid")
    lo, hi = 0.0, 1.0
    h_lo = clamped_period_map(cf, lo, n_steps) - lo
    h_hi = clamped_period_map(cf, hi, n_steps) - hi
    if h_lo <= 0.0:
        hi = lo
    elif h_hi >= 0.0:
        lo = hi
    while hi - lo > ytol:
        mid = 0.5 * (lo + hi)
        if clamped_period_map(cf, mid, n_steps) - mid > 0.0:
            lo = mid
        else:
            hi = mid
    y_star = 0.5 * (lo + hi)
    _, states = _clamped_run(cf, np.asarray(y_star), n_steps, True)
    ts = np.linspace(0.0, cf.T, n_steps + 1)
    step = 1e-6
    a, b = max(0.0, y_star - step), min(1.0, y_star + step)
    slope = (clamped_period_map(cf, b, n_steps) - clamped_period_map(cf, a, n_steps)) / (b - a)
    return PeriodicOrbit(np.asarray(states, dtype=float).reshape(-1), ts, float(slope), "clamped")
