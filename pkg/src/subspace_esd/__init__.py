"""Distance-based subspace dimension selection for traffic anomaly detection."""

from .errors import SubspaceESDError
from .linalg import (
    IterationBudget,
    PrincipalComponent,
    covariance,
    deflate,
    exact_eigendecomposition,
    power_iteration,
    small_svd,
)
from .subspace import (
    OracleResult,
    SubspaceDistanceResult,
    TraceRecord,
    get_esd,
    max_distance_oracle,
    projection_matrix,
    subspace_distance,
)

__version__ = "0.1.0"

__all__ = [
    "IterationBudget",
    "OracleResult",
    "PrincipalComponent",
    "SubspaceDistanceResult",
    "SubspaceESDError",
    "TraceRecord",
    "__version__",
    "covariance",
    "deflate",
    "exact_eigendecomposition",
    "get_esd",
    "max_distance_oracle",
    "power_iteration",
    "projection_matrix",
    "small_svd",
    "subspace_distance",
]
