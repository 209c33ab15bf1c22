"""Temporally consistent grasp maintenance across frames.

Each frame, every grasp proposes a uniformly perturbed copy (translation
only, +/-2 cm per axis) and accepts it with probability
min(new_score / old_score, 1). Grasps colliding with the hand cloud are
pruned, dead grasps (score below the denominator floor) are dropped, and
the set is topped back up by resampling whenever it falls below a
threshold.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .evaluator import (
    DEFAULT_GRIPPER,
    Grasp,
    GripperModel,
    evaluate,
    points_in_boxes,
    sample_grasps,
)
from .geometry import Pose
from .scene import LabeledPointCloud

DEFAULT_HAND_MARGIN = 0.005


@dataclass(frozen=True)
class PerturbationConfig:
    delta_t_range: float = 0.02  # uniform +/- per axis, meters
    epsilon_den: float = 1e-6  # denominator floor for the acceptance ratio
    resample_threshold: int = 10
    target_size: int = 50

    def __post_init__(self):
        if self.delta_t_range < 0:
            raise ValueError("delta_t_range must be >= 0")
        if not 0 < self.resample_threshold < self.target_size:
            raise ValueError("need 0 < resample_threshold < target_size")


@dataclass(frozen=True)
class GraspSet:
    grasps: tuple
    frame_index: int = 0

    def __post_init__(self):
        object.__setattr__(self, "grasps", tuple(self.grasps))

    def __len__(self) -> int:
        return len(self.grasps)

    @classmethod
    def empty(cls) -> "GraspSet":
        return cls(())


def perturb(pose: Pose, cfg: PerturbationConfig, rng: np.random.Generator) -> Pose:
    """Translation-only proposal: rotation stays identity."""
    delta = rng.uniform(-cfg.delta_t_range, cfg.delta_t_range, size=3)
    return Pose(pose.p + delta, pose.q)


def acceptance_ratio(score_old: float, score_new: float, cfg: PerturbationConfig) -> float:
    """min(new/old, 1) with the divergence convention at a zero denominator."""
    if score_old < cfg.epsilon_den:
        return 1.0 if score_new > 0.0 else 0.0
    return min(score_new / score_old, 1.0)


def mh_step(
    grasp_set: GraspSet,
    object_cloud: LabeledPointCloud,
    evaluate_fn,
    cfg: PerturbationConfig,
    rng: np.random.Generator,
) -> GraspSet:
    """One Metropolis-Hastings pass over the set.

    Rejected grasps keep their pose but refresh their score against the
    current cloud so downstream selection sees scores consistent with
    the present observation.
    """
    out = []
    for grasp in grasp_set.grasps:
        score_old = evaluate_fn(grasp.pose, object_cloud)
        proposal = perturb(grasp.pose, cfg, rng)
        score_new = evaluate_fn(proposal, object_cloud)
        r = acceptance_ratio(score_old, score_new, cfg)
        if r >= 1.0 or rng.uniform() < r:
            out.append(Grasp(proposal, score_new))
        else:
            out.append(Grasp(grasp.pose, score_old))
    return GraspSet(out, grasp_set.frame_index + 1)


def grasp_collides_hand(
    pose: Pose,
    hand_points: np.ndarray,
    gripper: GripperModel = DEFAULT_GRIPPER,
    margin: float = DEFAULT_HAND_MARGIN,
) -> bool:
    """True iff any hand point lies inside any gripper box dilated by margin."""
    if len(hand_points) == 0:
        return False
    local = pose.inverse_transform_points(hand_points)
    return bool(points_in_boxes(local, gripper.all_boxes(), margin).any())


def prune_hand_collisions(
    grasp_set: GraspSet,
    hand_cloud: LabeledPointCloud,
    gripper: GripperModel = DEFAULT_GRIPPER,
    margin: float = DEFAULT_HAND_MARGIN,
) -> GraspSet:
    if margin < 0:
        raise ValueError("margin must be >= 0")
    survivors = [
        g
        for g in grasp_set.grasps
        if not grasp_collides_hand(g.pose, hand_cloud.points, gripper, margin)
    ]
    return GraspSet(survivors, grasp_set.frame_index)


def maintain(
    grasp_set: GraspSet,
    object_cloud: LabeledPointCloud,
    hand_cloud: LabeledPointCloud,
    cfg: PerturbationConfig,
    rng: np.random.Generator,
    gripper: GripperModel = DEFAULT_GRIPPER,
    evaluate_fn=None,
    margin: float = DEFAULT_HAND_MARGIN,
):
    """Full per-frame pipeline; returns (new set, resampled flag).

    mh_step -> drop dead grasps -> prune hand collisions -> resample to
    target size when the survivor count falls below the threshold (or on
    an empty previous set). An empty result after resampling signals an
    ungraspable view; the caller falls back to tracking.
    """
    if evaluate_fn is None:
        evaluate_fn = lambda pose, cloud: evaluate(pose, cloud, gripper)
    if len(object_cloud) == 0:
        return GraspSet((), grasp_set.frame_index + 1), False
    stepped = mh_step(grasp_set, object_cloud, evaluate_fn, cfg, rng)
    alive = GraspSet(
        [g for g in stepped.grasps if g.score >= cfg.epsilon_den], stepped.frame_index
    )
    pruned = prune_hand_collisions(alive, hand_cloud, gripper, margin)
    resampled = False
    if len(pruned) < cfg.resample_threshold:
        resampled = True
        needed = cfg.target_size - len(pruned)
        fresh = sample_grasps(object_cloud, needed, rng, gripper)
        topped = GraspSet(pruned.grasps + tuple(fresh), pruned.frame_index)
        pruned = prune_hand_collisions(topped, hand_cloud, gripper, margin)
    return pruned, resampled
