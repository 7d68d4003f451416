"""Structure-preserving 1D finite-volume solvers for chemotaxis and drift-diffusion.

Three fully implicit schemes (gradient-flow, Scharfetter-Gummel, upwind) for

    du/dt = d/dx [ D du/dx - chi phi(u) dv/dx ]

on the unit interval with no-flux boundaries, where the drift v is either
prescribed (Fokker-Planck) or slaved to u through a symmetric Green kernel
(generalized Keller-Segel).  The first two schemes preserve positivity, total
mass, discrete steady states, and free-energy dissipation at any time step.
"""

from .drift import (
    DriftCoupling,
    drift_from_state,
    elliptic_solve,
    kernel_convolution,
    kernel_matrix,
    kernel_value,
    prescribed,
)
from .fluxes import (
    FluxContext,
    SchemeKind,
    flux_gradient_flow,
    flux_jacobian_band,
    flux_scharfetter_gummel,
    flux_upwind,
    step_residual,
)
from .mesh import Mesh, ProblemCoefficients, make_mesh
from .sensitivity import (
    CustomSensitivity,
    ExponentialSensitivity,
    LinearSensitivity,
    LogisticSensitivity,
    SensitivityModel,
    entropy_G,
    entropy_g,
    entropy_g_inverse,
    sensitivity_phi,
)
from .simulation import (
    DiagnosticsRecord,
    InitialCondition,
    RunConfig,
    RunResult,
    SplitMix64,
    energy,
    initial_condition,
    run,
    steady_state_residual,
)
from .solver import (
    SolverConfig,
    StepStats,
    advance_one_step,
    build_bracket,
    monotone_pseudo_time_solve,
    newton_step_solve,
)

__version__ = "0.1.0"
