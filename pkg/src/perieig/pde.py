"""Period map of the time-periodic advection-diffusion-reaction operator.

The evolution form ``u_t = D u_xx + m_x u_x - V u`` is stepped with Strang
splitting: an exact half-step reaction factor ``exp(-V dt/2)``, a full
Crank-Nicolson step for diffusion plus advection, and another half-step
reaction.  Coefficients are frozen at each step's midpoint time.  The
principal eigenvalue is ``-log(r)/T`` with ``r`` the spectral radius of the
period map, found by power iteration from the constant vector.
"""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import ExprError, FactorizationError, NonConvergenceError, NumericalError
from .expr import Expr, Num, Var
from .fields import BoundaryCondition, FieldCalculus, ProblemSpec

__all__ = [
    "SchemeConfig",
    "PeriodMap",
    "EigenResult",
    "build_period_map",
    "principal_eigenpair",
    "dense_monodromy",
    "dense_principal_eigenvalue",
    "rescaled_dirichlet_eigenvalue",
    "default_resolution",
]

log = logging.getLogger(__name__)

ADVECTION_SCHEMES = ("central", "upwind", "auto")


@dataclass(frozen=True)
class SchemeConfig:
    n_x: int = 256
    n_t: int = 1024
    advection: str = "auto"
    # fixed by design; kept for reporting
    diffusion_stepping: str = field(default="crank-nicolson", init=False)
    reaction: str = field(default="exact-exponential", init=False)

    def __post_init__(self):
        if self.n_x < 16:
            raise ValueError(f"n_x must be >= 16, got {self.n_x}")
        if self.n_t < 32:
            raise ValueError(f"n_t must be >= 32, got {self.n_t}")
        if self.advection not in ADVECTION_SCHEMES:
            raise ValueError(f"advection must be one of {ADVECTION_SCHEMES}, got {self.advection!r}")


def default_resolution(
    D: float,
    problem: ProblemSpec | None = None,
    advection: str = "auto",
    n_x: int | None = None,
    n_t: int | None = None,
) -> SchemeConfig:
    """Resolution used by studies: ``n_x = max(256, ceil(8/sqrt(D)))``, ``n_t = 4 n_x``.

    When ``problem`` is given, ``n_t`` is raised if needed so that the
    explicit half of every Crank-Nicolson step stays nonnegative (a
    sufficient condition for a positive period map).
    """
    if n_x is None:
        n_x = max(256, math.ceil(8.0 / math.sqrt(D)))
    if n_t is None:
        n_t = 4 * n_x
        if problem is not None:
            n_t = max(n_t, _positivity_steps(problem, D, n_x))
    return SchemeConfig(n_x=n_x, n_t=n_t, advection=advection)


def _positivity_steps(problem: ProblemSpec, D: float, n_x: int) -> int:
    fields = problem.fields()
    xs = np.linspace(0.0, 1.0, 65)
    ts = np.linspace(0.0, problem.T, 65)
    a_max = float(np.max(np.abs(fields.dm(xs[:, None], ts[None, :]))))
    h = 1.0 / (n_x + 1)
    rate = 2.0 * D / h**2 + 1.1 * a_max / h
    for bc in (problem.bc_left, problem.bc_right):
        if 0.0 < bc.c < 1.0:
            k = (1.0 - bc.c) / bc.c
            rate = max(rate, 2.0 * D / h**2 + 2.0 * D * k / h + 1.1 * a_max * k)
    # dt/2 * rate <= 1
    return math.ceil(problem.T * rate / 2.0)


# ----------------------------------------------------------------------------
# compiled kernels
# ----------------------------------------------------------------------------


@numba.njit(cache=True, nogil=True)
def _step_all(u, react, el, ed, eu, il, inv_den, cp, record):
    n_t, n = react.shape
    rhs = np.empty(n)
    y = np.empty(n)
    for k in range(n_t):
        r = react[k]
        for j in range(n):
            u[j] *= r[j]
        rhs[0] = ed[k, 0] * u[0] + eu[k, 0] * u[1]
        for j in range(1, n - 1):
            rhs[j] = el[k, j] * u[j - 1] + ed[k, j] * u[j] + eu[k, j] * u[j + 1]
        rhs[n - 1] = el[k, n - 1] * u[n - 2] + ed[k, n - 1] * u[n - 1]
        y[0] = rhs[0] * inv_den[k, 0]
        for j in range(1, n):
            y[j] = (rhs[j] - il[k, j] * y[j - 1]) * inv_den[k, j]
        u[n - 1] = y[n - 1]
        for j in range(n - 2, -1, -1):
            u[j] = y[j] - cp[k, j] * u[j + 1]
        for j in range(n):
            u[j] *= r[j]
        if record.shape[0] > 1:
            for j in range(n):
                record[k + 1, j] = u[j]
    return u


_NO_RECORD = np.empty((1, 1))


# ----------------------------------------------------------------------------
# period map
# ----------------------------------------------------------------------------


class PeriodMap:
    """Linear map ``u(., 0) -> u(., T)`` on the vertex grid ``x_j = j/(n_x+1)``.

    Holds one precomputed tridiagonal factorization per time step; immutable
    after construction and safe to share between threads.
    """

    def __init__(self, problem: ProblemSpec, D: float, scheme: SchemeConfig):
        if not D > 0:
            raise ValueError(f"diffusion D must be positive, got {D}")
        self.problem = problem
        self.D = float(D)
        self.scheme = scheme
        n_x, n_t = scheme.n_x, scheme.n_t
        self.n = n_x + 2
        self.h = 1.0 / (n_x + 1)
        self.x = np.arange(self.n) * self.h
        self.x[-1] = 1.0
        self.T = problem.T
        self.dt = problem.T / n_t
        self.t = np.linspace(0.0, problem.T, n_t + 1)
        fields = FieldCalculus.from_problem(problem)
        t_mid = (np.arange(n_t) + 0.5) * self.dt
        a = fields.dm(self.x[None, :], t_mid[:, None])
        v = fields.V(self.x[None, :], t_mid[:, None])
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(v))):
            raise ExprError("coefficients are not finite on the grid")
        lower, diag, upper = self._operator(a)
        half = 0.5 * self.dt
        el, ed, eu = half * lower, 1.0 + half * diag, half * upper
        il, idg, iu = -half * lower, 1.0 - half * diag, -half * upper
        for side, bc in ((0, problem.bc_left), (self.n - 1, problem.bc_right)):
            if bc.c == 0.0:
                el[:, side] = ed[:, side] = eu[:, side] = 0.0
                il[:, side] = iu[:, side] = 0.0
                idg[:, side] = 1.0
        self.monotone = bool(
            np.all(ed >= 0.0) and np.all(el >= 0.0) and np.all(eu >= 0.0)
        )
        self._el = np.ascontiguousarray(el)
        self._ed = np.ascontiguousarray(ed)
        self._eu = np.ascontiguousarray(eu)
        self._il = np.ascontiguousarray(il)
        self._inv_den, self._cp = _factor(il, idg, iu)
        self._react = np.ascontiguousarray(np.exp(-v * half))

    def _operator(self, a: np.ndarray):
        """Tridiagonal bands of the spatial operator ``D d_xx + a d_x`` with BC rows."""
        D, h, n = self.D, self.h, self.n
        dif = D / h**2
        lower = np.full(a.shape, dif)
        upper = np.full(a.shape, dif)
        diag = np.full(a.shape, -2.0 * dif)
        if self.scheme.advection == "central":
            upwind = np.zeros(a.shape, dtype=bool)
        elif self.scheme.advection == "upwind":
            upwind = np.ones(a.shape, dtype=bool)
        else:
            upwind = np.abs(a) * h / (2.0 * D) > 1.0
        central_half = np.where(upwind, 0.0, a / (2.0 * h))
        lower -= central_half
        upper += central_half
        up_pos = np.where(upwind, np.maximum(a, 0.0) / h, 0.0)
        up_neg = np.where(upwind, np.maximum(-a, 0.0) / h, 0.0)
        upper += up_pos
        lower += up_neg
        diag -= up_pos + up_neg
        lower[:, 0] = 0.0
        upper[:, -1] = 0.0
        # ghost-point boundary rows: u_x = k u at x=0, u_x = -k u at x=1
        left, right = self.problem.bc_left, self.problem.bc_right
        if left.c > 0.0:
            k = (1.0 - left.c) / left.c
            upper[:, 0] = 2.0 * dif
            diag[:, 0] = -2.0 * dif - 2.0 * D * k / h + a[:, 0] * k
        if right.c > 0.0:
            k = (1.0 - right.c) / right.c
            lower[:, n - 1] = 2.0 * dif
            diag[:, n - 1] = -2.0 * dif - 2.0 * D * k / h - a[:, n - 1] * k
        return lower, diag, upper

    def apply(self, u: np.ndarray) -> np.ndarray:
        u = np.array(u, dtype=float, copy=True)
        if u.shape != (self.n,):
            raise ValueError(f"expected a vector of length {self.n}, got shape {u.shape}")
        return _step_all(
            u, self._react, self._el, self._ed, self._eu, self._il, self._inv_den, self._cp, _NO_RECORD
        )

    __call__ = apply

    def trajectory(self, u: np.ndarray) -> np.ndarray:
        """All time slices ``u(., t_k)``, shape ``(n_t + 1, n)``."""
        u = np.array(u, dtype=float, copy=True)
        record = np.empty((self.scheme.n_t + 1, self.n))
        record[0] = u
        _step_all(u, self._react, self._el, self._ed, self._eu, self._il, self._inv_den, self._cp, record)
        return record

    @property
    def free_nodes(self) -> np.ndarray:
        """Mask of nodes not pinned by a Dirichlet condition."""
        mask = np.ones(self.n, dtype=bool)
        if self.problem.bc_left.c == 0.0:
            mask[0] = False
        if self.problem.bc_right.c == 0.0:
            mask[-1] = False
        return mask


def _factor(il, idg, iu):
    n_t, n = idg.shape
    inv_den = np.empty((n_t, n))
    cp = np.zeros((n_t, n))
    den = idg[:, 0].copy()
    for j in range(n):
        if j > 0:
            den = idg[:, j] - il[:, j] * cp[:, j - 1]
        bad = ~(den > 0.0) | ~np.isfinite(den)
        if np.any(bad):
            raise FactorizationError(int(np.argmax(bad)))
        inv_den[:, j] = 1.0 / den
        if j < n - 1:
            cp[:, j] = iu[:, j] / den
    return inv_den, cp


def build_period_map(problem: ProblemSpec, D: float, scheme: SchemeConfig | None = None) -> PeriodMap:
    if scheme is None:
        scheme = default_resolution(D, problem)
    return PeriodMap(problem, D, scheme)


# ----------------------------------------------------------------------------
# principal eigenpair
# ----------------------------------------------------------------------------


@dataclass
class EigenResult:
    lambda_: float
    eigenfunction: np.ndarray  # shape (n_x + 2, n_t + 1), sup-norm 1 at t = 0
    iterations: int
    residual: float
    x: np.ndarray
    t: np.ndarray
    ratio: float

    @property
    def n_x(self) -> int:
        return len(self.x) - 2

    @property
    def n_t(self) -> int:
        return len(self.t) - 1


def principal_eigenpair(
    pmap: PeriodMap,
    tol: float = 1e-10,
    max_iters: int = 20000,
    eigenfunction: bool = True,
) -> EigenResult:
    """Power iteration on the period map from the constant vector.

    Stops once ``||M v - r v||_inf <= tol * min(1, r)`` for the sup-normalized
    iterate ``v``.  ``lambda = -log(r)/T``.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    v = np.ones(pmap.n)
    history: deque[float] = deque(maxlen=16)
    ratio = float("nan")
    for it in range(1, max_iters + 1):
        w = pmap.apply(v)
        ratio = float(np.max(np.abs(w)))
        if not (math.isfinite(ratio) and ratio > 0.0):
            raise NumericalError(f"period map produced a degenerate iterate (ratio={ratio})")
        residual = float(np.max(np.abs(w - ratio * v)))
        history.append(ratio)
        if residual <= tol * min(1.0, ratio):
            lam = -math.log(ratio) / pmap.T
            phi = _eigenfunction(pmap, v, lam) if eigenfunction else np.empty((pmap.n, 0))
            log.debug("power iteration converged: it=%d lambda=%.12g residual=%.3g", it, lam, residual)
            return EigenResult(lam, phi, it, residual, pmap.x, pmap.t, ratio)
        v = w / ratio
    amplitude = max(history) - min(history) if history else float("nan")
    raise NonConvergenceError("power iteration did not converge", max_iters, ratio, amplitude)


def _eigenfunction(pmap: PeriodMap, v: np.ndarray, lam: float) -> np.ndarray:
    slices = pmap.trajectory(v)
    phi = slices * np.exp(lam * pmap.t)[:, None]
    return np.ascontiguousarray(phi.T)


def dense_monodromy(pmap: PeriodMap) -> np.ndarray:
    """Assemble the period map column by column from basis vectors."""
    n = pmap.n
    out = np.empty((n, n))
    e = np.zeros(n)
    for j in range(n):
        e[:] = 0.0
        e[j] = 1.0
        out[:, j] = pmap.apply(e)
    return out


def dense_principal_eigenvalue(pmap: PeriodMap) -> float:
    """Oracle: ``-log`` of the dominant eigenvalue of the dense monodromy matrix."""
    mats = dense_monodromy(pmap)
    free = pmap.free_nodes
    eig = np.linalg.eigvals(mats[np.ix_(free, free)])
    top = eig[np.argmax(np.abs(eig))]
    if abs(top.imag) > 1e-9 * abs(top) or top.real <= 0:
        raise NumericalError(f"dominant multiplier is not positive real: {top}")
    return -math.log(top.real) / pmap.T


# ----------------------------------------------------------------------------
# rescaled Dirichlet problem on (-R, R)
# ----------------------------------------------------------------------------


def rescaled_dirichlet_eigenvalue(
    rho: Expr,
    R: float,
    scheme: SchemeConfig | None = None,
    T: float = 1.0,
    params=None,
    tol: float = 1e-10,
    max_iters: int = 20000,
) -> float:
    """Principal eigenvalue of ``phi_t - phi_xx - x rho(t) phi_x = mu phi`` on ``(-R, R)``.

    Dirichlet ends, ``T``-periodic in time.  Mapping ``x = R(2 xi - 1)`` turns
    the problem into the standard form on ``[0, 1]`` with diffusion
    ``1/(4R^2)`` and drift potential ``rho(t) (xi - 1/2)^2 / 2``.
    """
    if not R > 0:
        raise ValueError("R must be positive")
    if rho.depends_on("x"):
        raise ExprError("rho must depend on t only")
    params = dict(params or {})
    ts = np.linspace(0.0, T, 1025)
    samples = rho.evaluate(np.zeros_like(ts), ts, params)
    if np.any(samples < 0.0) or not np.any(samples > 0.0):
        raise ValueError("rho must be nonnegative and not identically zero")
    xi = Var("x")
    m = rho * (xi - 0.5) ** 2.0 / 2.0
    problem = ProblemSpec(
        m,
        Num(0.0),
        T,
        params,
        BoundaryCondition.dirichlet(),
        BoundaryCondition.dirichlet(),
    )
    D = 1.0 / (4.0 * R * R)
    if scheme is None:
        scheme = default_resolution(D, problem)
    result = principal_eigenpair(build_period_map(problem, D, scheme), tol, max_iters, eigenfunction=False)
    return result.lambda_
