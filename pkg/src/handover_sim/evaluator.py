"""Analytic grasp quality and surface-normal grasp sampling.

The evaluator scores a parallel-jaw grasp against an object point cloud:
zero on body collision or empty closing region, otherwise a containment
term saturating at 20 points times the mean alignment between surface
normals and the closing axis. It is rigid-transform equivariant and
invariant under the 180-degree Z flip, which selection relies on to
reuse scores for flipped grasps.

Evaluator implementations are pure functions of their inputs; anything
with the same (pose, cloud) -> score signature can be swapped in.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .geometry import Pose, quat_from_matrix
from .scene import LabeledPointCloud

N_CONTAIN_REF = 20  # containment saturates at this many points


@dataclass(frozen=True)
class Box:
    """Axis-aligned box in the grasp frame: center and half extents."""

    center: tuple
    half: tuple

    def contains(self, pts: np.ndarray, margin: float = 0.0) -> np.ndarray:
        pts = np.asarray(pts, dtype=float).reshape(-1, 3)
        lo = np.asarray(self.center) - np.asarray(self.half) - margin
        hi = np.asarray(self.center) + np.asarray(self.half) + margin
        return np.all((pts >= lo) & (pts <= hi), axis=1)


@dataclass(frozen=True)
class Grasp:
    pose: Pose
    score: float

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError("grasp score must be in [0, 1]")


@dataclass(frozen=True)
class GripperModel:
    """Franka-class parallel gripper approximated by boxes in the grasp frame."""

    fingers: tuple = (
        Box((0.0, 0.045, 0.0), (0.01, 0.005, 0.02)),
        Box((0.0, -0.045, 0.0), (0.01, 0.005, 0.02)),
    )
    palm: Box = Box((0.0, 0.0, -0.04), (0.03, 0.05, 0.02))
    closing_region: Box = Box((0.0, 0.0, 0.0), (0.01, 0.04, 0.02))
    max_aperture: float = 0.08

    def body_boxes(self):
        return (*self.fingers, self.palm)

    def all_boxes(self):
        return (*self.fingers, self.palm, self.closing_region)


DEFAULT_GRIPPER = GripperModel()


@lru_cache(maxsize=8)
def _stacked_bounds(boxes):
    lo = np.array([np.asarray(b.center) - np.asarray(b.half) for b in boxes])
    hi = np.array([np.asarray(b.center) + np.asarray(b.half) for b in boxes])
    return lo, hi


def points_in_boxes(pts: np.ndarray, boxes, margin: float = 0.0) -> np.ndarray:
    """(len(boxes), len(pts)) bool: point inside box dilated by margin."""
    lo, hi = _stacked_bounds(tuple(boxes))
    pts = np.asarray(pts, dtype=float).reshape(-1, 3)
    inside = (pts[None, :, :] >= lo[:, None, :] - margin) & (
        pts[None, :, :] <= hi[:, None, :] + margin
    )
    return inside.all(axis=2)


def evaluate(
    pose: Pose, object_cloud: LabeledPointCloud, gripper: GripperModel = DEFAULT_GRIPPER
) -> float:
    """Score a grasp pose against an object cloud, in [0, 1].

    Zero if any object point collides with a finger or palm box, or if
    the closing region is empty. Otherwise min(1, n_in/20) times the
    mean |normal . closing axis| over contained points (1 when normals
    are absent).
    """
    if len(object_cloud) == 0:
        return 0.0
    local = pose.inverse_transform_points(object_cloud.points)
    hits = points_in_boxes(local, gripper.all_boxes())
    if hits[: len(gripper.body_boxes())].any():
        return 0.0
    inside = hits[-1]
    n_in = int(inside.sum())
    if n_in == 0:
        return 0.0
    containment = min(1.0, n_in / N_CONTAIN_REF)
    if object_cloud.normals is None:
        alignment = 1.0
    else:
        local_normals = object_cloud.normals[inside] @ pose.rotation_matrix()
        alignment = float(np.mean(np.abs(local_normals[:, 1])))
    return containment * alignment


def sample_grasps(
    object_cloud: LabeledPointCloud,
    n: int = 50,
    rng: np.random.Generator | None = None,
    gripper: GripperModel = DEFAULT_GRIPPER,
    max_trials_factor: int = 10,
) -> list[Grasp]:
    """Sample up to n positively-scored grasps anchored on surface points.

    Approach axis is the negated surface normal, the closing axis a
    random tangent, and the anchor point lands at the grasp origin
    (center of the closing region). Returns an empty list when no
    candidate scores > 0 within 10 * n trials (ungraspable view).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if len(object_cloud) == 0:
        return []
    if rng is None:
        rng = np.random.default_rng()
    centroid = object_cloud.points.mean(axis=0)
    grasps: list[Grasp] = []
    for _ in range(max_trials_factor * n):
        if len(grasps) >= n:
            break
        idx = int(rng.integers(len(object_cloud)))
        point = object_cloud.points[idx]
        if object_cloud.normals is not None:
            normal = object_cloud.normals[idx]
        else:
            normal = point - centroid
            nn = np.linalg.norm(normal)
            normal = normal / nn if nn > 1e-9 else np.array([0.0, 0.0, 1.0])
        z = -normal
        tangent = rng.normal(size=3)
        tangent -= tangent @ z * z
        tn = np.linalg.norm(tangent)
        if tn < 1e-9:
            continue
        y = tangent / tn
        x = np.cross(y, z)
        pose = Pose(point, quat_from_matrix(np.column_stack([x, y, z])))
        score = evaluate(pose, object_cloud, gripper)
        if score > 0.0:
            grasps.append(Grasp(pose, score))
    return grasps
