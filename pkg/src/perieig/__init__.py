"""Principal eigenvalues of 1-D time-periodic parabolic operators and their
small-diffusion limits."""

from .errors import (
    ConfigError,
    DegenerateOrbitError,
    ExprError,
    FactorizationError,
    HypothesisError,
    NonConvergenceError,
    NumericalError,
    PerieigError,
)
from .expr import differentiate, parse_expr
from .fields import BoundaryCondition, FieldCalculus, ProblemSpec, positive_part, time_average
from .limits import (
    boundary_curvature,
    compute_limit,
    limit_degenerate,
    limit_elliptic,
    limit_linear_drift,
    limit_nondegenerate,
)
from .ode import (
    ClampedField,
    PeriodicOrbit,
    clamped_period_map,
    find_clamped_periodic,
    find_periodic_solutions,
    integrate_drift,
    poincare_map,
)
from .pde import (
    SchemeConfig,
    build_period_map,
    default_resolution,
    principal_eigenpair,
    rescaled_dirichlet_eigenvalue,
)

__version__ = "0.1.0"
