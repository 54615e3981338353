"""Square-root statistical linear regression filters and smoothers.

QR triangularizations replace Cholesky downdates throughout the proposed
pipeline; a downdate-based reference route is included for comparison, along
with the coordinated-turn benchmark that exposes the robustness gap in
single precision.
"""

from .cubature import (
    AssumptionViolated,
    CubatureRule,
    RuleTooLarge,
    TransformedNodes,
    check_assumption,
    gauss_hermite,
    spherical_radial,
    transform,
    unscented,
)
from .estimators import (
    BackwardKernel,
    FilterResult,
    GaussianSqrt,
    StateSpaceModel,
    filter_pass,
    ipls,
    predict,
    smooth_pass,
    update,
)
from .linalg import (
    ConditioningResult,
    DowndateFailure,
    SingularMarginal,
    TriangularFactor,
    block_condition,
    rank_one_downdate,
    solve_right_triangular,
    triangularize,
)
from .slr import (
    AffineApprox,
    NoiseModel,
    NonFiniteImage,
    SingularPrior,
    constant_noise,
    linearize,
    residual_factor_downdate,
    residual_factor_qr,
    slr_moments,
    state_dependent_noise,
)

__all__ = [name for name in dir() if not name.startswith("_")]
