"""Fixed-point iterations on CAT(0) model spaces with checkable rate bounds."""
from .geometry import (
    ComparisonTriangle,
    DimensionError,
    DomainError,
    GeometryError,
    InvalidTriangleError,
    ModelSpace,
    NonUniqueGeodesicError,
    Point,
    TangentVector,
    comparison_triangle,
    minkowski_inner,
    validate_point,
)
from .iteration import (
    ANCHOR_WEIGHT_LAMBDA,
    ANCHOR_WEIGHT_ONE_MINUS_LAMBDA,
    IterationConfig,
    IterationError,
    Trace,
    halpern_run,
    km_run,
    picard_run,
    viscosity_run,
)
from .operators import (
    ConstantAnchor,
    EllipticRotation,
    ForwardOperator,
    GeodesicContraction,
    Identity,
    Operator,
    OperatorError,
    PlanarRotation,
    RightShift,
    Scaling,
    SequenceSpace,
    check_nonexpansive,
    operator_from_dict,
)
from .optimizer import (
    Objective,
    OptimizerError,
    OptRun,
    ResolventError,
    ResolventSpec,
    frechet_oracle,
    hyperbolic_halpern_gd,
    resolvent,
    resolvent_closed_form,
    resolvent_numeric,
    rsgd_run,
)
from .rates import (
    BoundError,
    BoundReport,
    c_table,
    check_c_recursion,
    check_km_trace,
    km_bound,
    p_n_report,
    pi_weights,
    sharpness_suite,
    visc_bound_report,
    visc_constants,
)
from .schedules import Schedule, schedule_diagnostics

__version__ = "0.1.0"
