"""Deterministic desk-scale simulator for reactive human-to-robot handovers."""

from .geometry import Pose, flip_about_grasp_z, offset_along_grasp_z, pose_distance
from .evaluator import Grasp, GripperModel, evaluate, sample_grasps
from .refinement import GraspSet, PerturbationConfig, maintain, mh_step, perturb, prune_hand_collisions
from .scene import (
    HandModel,
    LabeledPointCloud,
    PrimitiveShape,
    SceneObject,
    apply_label_noise,
    crop_around_palm,
    synthesize_cloud,
)
from .selection import SelectionConfig, SelectedTarget, expand_flips, grasp_cost, select_target
from .planner import TaskStage, WorldPredicates, decide, execute_take
from .motion import EndEffectorState, PathQuery, rrt_connect, segment_collision_free, servo_step
from .scenario import Scenario, ScenarioError, load_scenario
from .sim import Metrics, Schedule, WorldLayout, run
from .trace import trace_digest, verify_records, verify_trace, write_trace

__all__ = [name for name in dir() if not name.startswith("_")]
