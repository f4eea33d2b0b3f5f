"""Dual-quaternion cluster-space formation control and simulation."""

from .cluster import (
    AlphaSplit,
    Cluster2RState,
    Cluster3RState,
    ClusterVelocity3R,
    GeometryReference2R,
    GeometryReference3R,
    MNCoeffs,
    alpha_split,
    forward_2r,
    forward_3r,
    geometry_control_2r,
    geometry_control_3r,
    inverse_vel_2r,
    inverse_vel_3r,
    mn_coeffs,
    robots_from_cluster_3r,
)
from .control import (
    ControllerState,
    GainSet,
    PartialAttitudeError,
    integrator_step,
    lyapunov_value,
    partial_attitude_control,
    partial_error,
    pose_pi_control,
)
from .engine import BatchStats, RunResult, monte_carlo, pointing_angles, simulate_run
from .errors import DegenerateFormationError, SingularGeometryError
from .gains import (
    GainSchedule2R,
    GainSchedule3R,
    Inertia,
    fixed_gains_2r,
    fixed_gains_3r,
    inertia_3r,
    interp_gains,
    lambda_from_distance,
    lambda_from_inertia,
    scheduled_gains_2r,
    scheduled_gains_3r,
)
from .kinematics import PoseError, integrate_attitude, integrate_pose, pose_error
from .noise import GaussMarkovState, NoiseParams, noise_block, noise_step
from .quat import Twist
from .scenario import (
    Scenario,
    ScenarioError,
    config_hash,
    load_preset,
    parse_scenario,
    preset_names,
    serialize_scenario,
    with_controller,
)

__version__ = "0.1.0"
