"""Hexaglide kinematics and a G-code to joint-trajectory compiler."""

__version__ = "0.1.0"

from .drive import DriveConfig, DriveFrame, DriveStream, emit, replay
from .errors import (
    BadArc,
    GCodeError,
    HexakineError,
    LexError,
    MissingFeed,
    NoConvergence,
    RailOverrun,
    SingularPose,
    UnsupportedCode,
    Unreachable,
    WorkspaceViolation,
)
from .gcode import MotionCommand, ModalState, interpret, parse_program, tokenize, to_gcode
from .geometry import MachineGeometry, PlatformPose, load_geometry, reference_geometry
from .kinematics import (
    HEXAGLIDE_MOBILITY,
    MobilitySpec,
    forward_kinematics,
    ik_jacobian,
    inverse_kinematics,
    limb_vector,
    mobility,
    rotation_matrix,
    solve_forward_kinematics,
)
from .planner import JointTrajectory, PlannerConfig, interpolate, plan, resample, verify
