"""Adaptive POD reduction of state and control spaces for linear-quadratic
parabolic optimal control, with certified a posteriori error bounds."""

from .adaptive import (
    AdaptiveConfig,
    AdaptiveHistory,
    HistoryRow,
    run_adaptive,
    run_adaptive_state_only,
)
from .estimator import ErrorBounds, estimate, optimal_value_gap, true_error
from .fem import FeSpace, NonFiniteValue, UnitSquareMesh, build_space, interpolate, unit_square_mesh
from .fom import FomSolver, TooLarge, cost, gradient, kkt_oracle, solve_adjoint, solve_state
from .numerics import (
    ConvergenceFailure,
    DenseSymMatrix,
    DimensionMismatch,
    EmptyOutput,
    NotSpd,
    SparseSymMatrix,
    SpdFactor,
    eig_sym,
    gram_schmidt,
    m_inner,
    solve_spd,
    sparse_sym,
)
from .optimizer import BbConfig, BbReport, bb_minimize
from .pod import (
    EmptySnapshotSet,
    PodBasis,
    SnapshotSet,
    ZeroEnergy,
    compute_pod,
    has_new_information,
    projection_error,
)
from .problem import (
    AffineOperator,
    OcpProblem,
    TimeGrid,
    Trajectory,
    model_problem,
    space_time_inner,
    space_time_norm,
    target_state,
)
from .rom import (
    ReducedModel,
    build_reduced,
    lift_control,
    project_control,
    reduced_cost,
    reduced_cost_full,
    solve_reduced_adjoint,
    solve_reduced_ocp_full,
    solve_reduced_ocp_state_only,
    solve_reduced_state,
    solve_reduced_state_full,
)

__version__ = "0.1.0"
