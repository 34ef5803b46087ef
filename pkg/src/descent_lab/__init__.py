"""Gradient descent with matrix-valued diminishing step sizes.

Discrete descent ``x_{k+1} = x_k - M_k F'(x_k)`` with schedule diagnostics
and the stopped descent inequalities, a staircase objective on which
descent runs off to infinity, and the continuous gradient flow on the
Palis-de Melo function with its separatrix.
"""

from .descent import (
    CONVERGED,
    DIVERGING,
    UNDECIDED,
    Outcome,
    TelescopingReport,
    Trace,
    chi,
    detect_outcome,
    run,
    running_grad_min,
    verify_descent_inequalities,
)
from .estimators import GradientDescent, GradientFlow, build_objective, build_schedule
from .flow import (
    INNER,
    OUTER,
    AnnulusRegion,
    FlowTrace,
    bisect_separatrix,
    bisect_separatrix_bracket,
    classify_pdm_trajectory,
    contrast_discrete,
    integrate,
    separatrix_profile,
    winding_angle,
)
from .linalg import StepMatrix, eigen_extremes, is_spd, jacobi_eigenvalues
from .objectives import (
    ExpNegSquare,
    PalisDeMelo,
    QuadraticBowl,
    Staircase,
    StaircaseSpec,
    estimate_local_constants,
    fd_gradient,
)
from .schedules import (
    PropertyTags,
    Schedule,
    Verdict,
    classify,
    constant_scalar,
    diagonal_power,
    log_scalar,
    power_scalar,
)

__version__ = "0.1.0"
