"""Per-tick grasp target choice: flip expansion, standoff/push-in
geometry, the weighted cost over approach poses, and feasibility
filtering against a reachable region and straight-segment collision
checks.

Candidates are walked in ascending cost order and the first one passing
all checks wins; an absent result is the defined no-feasible-grasp
signal (the caller tracks the object instead).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .evaluator import Grasp
from .geometry import Pose, flip_about_grasp_z, offset_along_grasp_z, pose_distance
from .motion import PathQuery, segment_collision_free
from .refinement import GraspSet


@dataclass(frozen=True)
class SelectionConfig:
    w_s: float = 1.0
    w_prev: float = 5.0
    w_home: float = 5.0
    w_q: float = 0.1
    s_min: float = 0.5
    standoff: float = 0.10
    push_in: float = 0.05
    max_checks: int = 100  # deterministic stand-in for a per-candidate time budget

    def __post_init__(self):
        if min(self.w_s, self.w_prev, self.w_home, self.w_q) < 0:
            raise ValueError("weights must be >= 0")
        if not 0.0 < self.s_min < 1.0:
            raise ValueError("s_min must be in (0, 1)")


@dataclass(frozen=True)
class ReachableRegion:
    """Spherical shell around the robot base, clipped above the table."""

    base: tuple = (0.0, 0.0, 0.0)
    r_min: float = 0.25
    r_max: float = 0.85
    z_min: float = 0.02

    def contains(self, p) -> bool:
        p = np.asarray(p, dtype=float)
        r = np.linalg.norm(p - np.asarray(self.base, dtype=float))
        return bool(self.r_min <= r <= self.r_max and p[2] > self.z_min)


@dataclass(frozen=True)
class SelectedTarget:
    grasp: Grasp
    approach_pose: Pose
    final_pose: Pose
    cost: float


def expand_flips(grasp_set: GraspSet) -> GraspSet:
    """Double the set with 180-degree-Z-flipped copies carrying the same score."""
    flipped = [Grasp(flip_about_grasp_z(g.pose), g.score) for g in grasp_set.grasps]
    return GraspSet(grasp_set.grasps + tuple(flipped), grasp_set.frame_index)


def grasp_cost(
    x_appr: Pose, s: float, x_prev: Pose, x_home: Pose, cfg: SelectionConfig
) -> float:
    """w_s * max(s_min - s, 0) + w_prev * d(appr, prev) + w_home * d(appr, home)."""
    return (
        cfg.w_s * max(cfg.s_min - s, 0.0)
        + cfg.w_prev * pose_distance(x_appr, x_prev, cfg.w_q)
        + cfg.w_home * pose_distance(x_appr, x_home, cfg.w_q)
    )


def make_target(grasp: Grasp, x_prev: Pose, x_home: Pose, cfg: SelectionConfig) -> SelectedTarget:
    approach = offset_along_grasp_z(grasp.pose, -cfg.standoff)
    final = offset_along_grasp_z(grasp.pose, cfg.push_in)
    cost = grasp_cost(approach, grasp.score, x_prev, x_home, cfg)
    return SelectedTarget(grasp, approach, final, cost)


def select_target(
    grasp_set: GraspSet,
    current_ee: Pose,
    x_prev: Pose,
    x_home: Pose,
    collider_points: np.ndarray,
    region: ReachableRegion,
    cfg: SelectionConfig,
    table_z: float = 0.0,
    clearance: float = 0.03,
) -> SelectedTarget | None:
    """First feasible candidate in ascending cost order, or None.

    Feasibility: approach and final poses inside the reachable region,
    collision-free straight segment current -> approach, and
    collision-free straight segment approach -> final. Colliders are the
    hand points plus the table.
    """
    if len(grasp_set) == 0:
        return None
    candidates = [make_target(g, x_prev, x_home, cfg) for g in grasp_set.grasps]
    costs = np.array([c.cost for c in candidates])
    order = np.argsort(costs, kind="stable")
    for rank, idx in enumerate(order):
        if rank >= cfg.max_checks:
            break
        cand = candidates[int(idx)]
        if not (region.contains(cand.approach_pose.p) and region.contains(cand.final_pose.p)):
            continue
        to_standoff = PathQuery(
            current_ee.p, cand.approach_pose.p, collider_points, table_z, clearance
        )
        if not segment_collision_free(to_standoff):
            continue
        to_final = PathQuery(
            cand.approach_pose.p, cand.final_pose.p, collider_points, table_z, clearance
        )
        if not segment_collision_free(to_final):
            continue
        return cand
    return None
