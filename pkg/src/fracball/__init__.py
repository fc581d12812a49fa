"""Fractional-Laplacian Dirichlet problems on the unit ball: kernels,
potentials, weighted norms, boundary traces and a drift/zero-order solver."""
from .errors import (
    ArityError,
    CoincidentPoints,
    ConfigError,
    DimensionMismatch,
    Divergent,
    DivisionByZero,
    FracBallError,
    MaxItersExceeded,
    NonContractive,
    NonFinite,
    NonIntegrable,
    NumericalError,
    OutOfDomain,
    ParseError,
    PreconditionError,
    SlowDecay,
    TooCloseToBoundary,
    UnknownIdentifier,
)
from .fieldspec import parse_field, parse_vector_field
from .kernels import (
    KernelConstants,
    ProblemParams,
    constants,
    getoor_lambda,
    green_function,
    green_gradient,
    incomplete_kernel_integral,
    poisson_kernel,
    rho,
)
from .potentials import (
    PotentialField,
    green_potential,
    green_potential_gradient,
    nontrivial_solution,
    poisson_extension,
)
from .quadrature import (
    QuadratureSpec,
    ScalarField,
    VectorField,
    frac_laplacian_pv,
    integrate_ball,
    integrate_complement,
    integrate_shell,
)
from .solver import (
    CoefficientBundle,
    DiscreteSolution,
    SolverSpec,
    apriori_ratio,
    max_principle_check,
    picard_step,
    residual_norm,
    solve,
)
from .weighted_norms import (
    TraceReport,
    holder_quotient_probe,
    l2s_norm,
    mollify,
    trace_functional,
    trace_limit_estimate,
    weighted_lp_norm,
)

__version__ = "0.1.0"
