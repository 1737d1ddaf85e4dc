"""Deterministic 2D embodied-exploration simulator and evaluation benchmark.

An agent with a planar depth sensor, discrete motion primitives, and
dead-reckoned localization explores procedurally generated indoor worlds,
building an occupancy-grid map. The package provides the simulator, classical
exploration baselines, and the evaluation harness (coverage curves, noise and
door-affordance ablations, downstream goal navigation with SPL).
"""

from .errors import (EmptyInput, EmptyLog, ExploresimError, GenerationError,
                     InvalidStart, InvalidState, NegativeCoverage, NoPath,
                     ParseError, ValidationError)
from .evaluation import (EpisodeTrace, ExperienceLog, SplRecord, TraceStep,
                         collect_experience, coverage_experiment,
                         downstream_navigation, localize_goal,
                         oracle_path_length, pose_descriptor, read_trace,
                         run_episode, sample_goal_poses, sample_start_pose,
                         spl, write_curves_csv, write_trace)
from .kinematics import (ROTATION_STEP, TRANSLATION_STEP, Action, NoiseConfig,
                         Pose, StepOutcome, transition_estimated,
                         transition_true, wrap_angle)
from .mapping import (FREE, OCCUPIED, UNKNOWN, EgoCrops, OccupancyGrid,
                      coverage, ego_crops, integrate, save_pgm,
                      true_coverage_map)
from .planner import PlanQuery, path_to_actions, plan_path
from .policies import (POLICY_NAMES, FrontierPolicy, OracleFrontierPolicy,
                       PolicyObservation, RandomPolicy, StraightPolicy,
                       frontier_policy, make_policy, oracle_frontier_policy,
                       random_policy, straight_policy)
from .rewards import RewardBreakdown, RewardConfig, step_reward
from .sensor import DEFAULT_SENSOR, DepthScan, SensorConfig, ray_angles, render_scan
# Floorplan cell kinds (world.FREE/WALL/DOOR) stay namespaced: world.FREE is
# the kind 0 while the map state FREE above is 1, and a top-level clash between
# the two would be a trap.
from .world import (Floorplan, GenParams, WorldMode, generate_house,
                    is_traversable, load_floorplan, save_floorplan,
                    traversable_area, validate_floorplan)

__version__ = "0.1.0"

__all__ = [
    "Action", "DepthScan", "EgoCrops", "EpisodeTrace", "ExperienceLog",
    "Floorplan", "FrontierPolicy", "GenParams", "NoiseConfig", "OccupancyGrid",
    "OracleFrontierPolicy", "PlanQuery", "PolicyObservation", "Pose",
    "RandomPolicy", "RewardBreakdown", "RewardConfig", "SensorConfig",
    "SplRecord", "StepOutcome", "StraightPolicy", "TraceStep", "WorldMode",
    "collect_experience", "coverage", "coverage_experiment",
    "downstream_navigation", "ego_crops", "frontier_policy", "generate_house",
    "integrate", "is_traversable", "load_floorplan", "localize_goal",
    "make_policy", "oracle_frontier_policy", "oracle_path_length",
    "path_to_actions", "plan_path", "pose_descriptor", "random_policy",
    "ray_angles", "read_trace", "render_scan", "run_episode", "save_floorplan",
    "save_pgm", "sample_goal_poses", "sample_start_pose", "spl", "step_reward",
    "straight_policy", "traversable_area", "transition_estimated",
    "transition_true", "true_coverage_map", "validate_floorplan",
    "wrap_angle", "write_curves_csv", "write_trace",
    "DEFAULT_SENSOR", "POLICY_NAMES", "ROTATION_STEP", "TRANSLATION_STEP",
    "UNKNOWN", "FREE", "OCCUPIED",
    "EmptyInput", "EmptyLog", "ExploresimError", "GenerationError",
    "InvalidStart", "InvalidState", "NegativeCoverage", "NoPath", "ParseError",
    "ValidationError",
]
