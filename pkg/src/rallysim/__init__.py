"""Ball-flight modeling, strike planning, and closed-loop rally simulation.

The pipeline mirrors a robot table-tennis stack at desk scale: a hybrid
flight/bounce model, a sliding-window state estimator over a mocap-like
stream, plane-crossing prediction, racket strike planning, a parameterized
executor proxy, and seeded Monte Carlo evaluation harnesses.
"""

from .config import RunConfig, default_config, load_config, save_config
from .dynamics import (
    BounceEvent,
    FlightSegment,
    HitPlane,
    OpponentLanding,
    PhysicsParams,
    Termination,
    TimeLimit,
    bounce_map,
    flight_acceleration,
    integrate,
)
from .errors import (
    DataError,
    DegenerateImpactDirection,
    InsufficientData,
    InvalidSpec,
    InvariantViolation,
    MultipleBounces,
    NoApproach,
    NoBounceFound,
    NonMonotonicTimestamp,
    NonTermination,
    NoPlaneCrossing,
    NotAnImpactState,
    ParseError,
    RallySimError,
)
from .estimator import (
    BallTracker,
    EstimatorWindow,
    StateEstimate,
    detect_bounce,
    quadratic_window_fit,
)
from .geometry import BallState, TableGeometry
from .planner import (
    BasePose,
    StrikeCommand,
    SwingType,
    outgoing_velocity,
    plan_strike,
    racket_impact,
    racket_velocity,
)
from .predictor import (
    PredictionErrorCurve,
    StrikePrediction,
    evaluate_prediction_errors,
    predict_strike,
)
from .records import TrajectoryRecord, load_trajectories, save_trajectories
from .simulator import (
    ExecutorConfig,
    FailureMode,
    GridCell,
    GridReport,
    LaunchSpec,
    RallyOutcome,
    ShotOptions,
    ShotOutcome,
    default_grid_cells,
    execute_strike,
    launch_ball,
    resolve_contact,
    run_grid,
    run_rally,
    run_shot,
    solve_launch_velocity,
)
from .system_id import FitReport, fit_drag, fit_restitution, identify_params

__version__ = "0.1.0"

__all__ = [
    "BallState",
    "BallTracker",
    "BasePose",
    "BounceEvent",
    "DataError",
    "DegenerateImpactDirection",
    "EstimatorWindow",
    "ExecutorConfig",
    "FailureMode",
    "FitReport",
    "FlightSegment",
    "GridCell",
    "GridReport",
    "HitPlane",
    "InsufficientData",
    "InvalidSpec",
    "InvariantViolation",
    "LaunchSpec",
    "MultipleBounces",
    "NoApproach",
    "NoBounceFound",
    "NonMonotonicTimestamp",
    "NonTermination",
    "NoPlaneCrossing",
    "NotAnImpactState",
    "OpponentLanding",
    "ParseError",
    "PhysicsParams",
    "PredictionErrorCurve",
    "RallyOutcome",
    "RallySimError",
    "RunConfig",
    "ShotOptions",
    "ShotOutcome",
    "StateEstimate",
    "StrikeCommand",
    "StrikePrediction",
    "SwingType",
    "TableGeometry",
    "Termination",
    "TimeLimit",
    "TrajectoryRecord",
    "bounce_map",
    "default_config",
    "default_grid_cells",
    "detect_bounce",
    "evaluate_prediction_errors",
    "execute_strike",
    "fit_drag",
    "fit_restitution",
    "flight_acceleration",
    "identify_params",
    "integrate",
    "launch_ball",
    "load_config",
    "load_trajectories",
    "outgoing_velocity",
    "plan_strike",
    "predict_strike",
    "quadratic_window_fit",
    "racket_impact",
    "racket_velocity",
    "resolve_contact",
    "run_grid",
    "run_rally",
    "run_shot",
    "save_config",
    "save_trajectories",
    "solve_launch_velocity",
    "__version__",
]
