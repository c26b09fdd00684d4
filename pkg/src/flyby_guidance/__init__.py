"""
Flyby attitude guidance by sequential convex programming.

Plans reaction-wheel slews that keep a comet inside narrow instrument fields
of view during a fast flyby, minimising the number of time nodes in outage.
"""

__version__ = "0.1.0"

from .attitude import (InvalidInputError, ScalingSet, SpacecraftState, ControlInput, Trajectory,
                       quat_multiply, quat_conjugate, quat_normalize, rotate_by_quaternion,
                       scale_state, unscale_state, scale_control, unscale_control)
from .dynamics import (PlantModel, IntegratorSettings, IntegrationError, LOOSE, TIGHT,
                       f_nonlinear, propagate, propagate_nodes)
from .pointing import build_P, factor_cone, keep_in_cone, keep_out_cone, pointing_angle
from .linearization import jacobian_A, jacobian_B, affine_term, card_weight, CardinalityWeights
from .discretization import DiscreteLTV, discretize_interval, discretize_trajectory
from .conic import ConicProblem, VariableLayout, assemble_static, update_dynamic, verify_solution
from .solvers import get_backend
from .scenario import (Scenario, build_benchmark, comet_direction, load_scenario,
                       MomentumSampler, OutageMetrics, evaluate_outages)
from .scp import ScpConfig, GuidanceSolution, run_scp, feasibility_metric, trust_region_update
from .montecarlo import CampaignConfig, run_campaign, aggregate

__all__ = [name for name in dir() if not name.startswith("_")]
