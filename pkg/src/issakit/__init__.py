"""Black-box safe control for 2D robots: safety-index synthesis, boundary-search projection,
a convergence trigger and checks for forward invariance and finite-time convergence."""
from issakit.adamba import AdamBAConfig, BoundaryPoint, adamba
from issakit.core import (
    Obstacle,
    RobotState,
    SecondOrderRobot,
    SubsteppedDynamics,
    SystemLimits,
    ToyUnicycle,
)
from issakit.ctrigger import TriggerFailure, TriggerProps, ctrigger, estimate_props
from issakit.issa import IssaConfig, Phase, ProjectionResult, project, safeguard
from issakit.kernels import BACKEND
from issakit.safety_index import (
    InfeasibleError,
    SafetyIndex,
    SafetyIndexParams,
    SafetyStatus,
    StatusOracle,
    ToyIndex,
    safety_status,
    synthesize_k,
)

__version__ = "0.1.0"

__all__ = [
    "AdamBAConfig", "BoundaryPoint", "adamba",
    "Obstacle", "RobotState", "SecondOrderRobot", "SubsteppedDynamics", "SystemLimits", "ToyUnicycle",
    "TriggerFailure", "TriggerProps", "ctrigger", "estimate_props",
    "IssaConfig", "Phase", "ProjectionResult", "project", "safeguard",
    "BACKEND",
    "InfeasibleError", "SafetyIndex", "SafetyIndexParams", "SafetyStatus", "StatusOracle", "ToyIndex",
    "safety_status", "synthesize_k",
    "__version__",
]
