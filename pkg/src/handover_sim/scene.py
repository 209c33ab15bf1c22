"""Synthetic desk scene: primitive shapes, a sphere-cluster hand model,
and a virtual camera that produces labeled point clouds.

Visibility is a normal-facing test (outward normal must face the
camera), which is an adequate occlusion proxy for convex primitives at
desk scale and keeps cloud synthesis deterministic and cheap.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import Pose

LABEL_HAND = 0
LABEL_OBJECT = 1
LABEL_BACKGROUND = 2

DEFAULT_CROP_RADIUS = 0.20

_KINDS = ("box", "cylinder", "capsule", "sphere")


@dataclass(frozen=True)
class PrimitiveShape:
    """box: 3 full extents; cylinder/capsule: (radius, length); sphere: (radius,)."""

    kind: str
    dims: tuple

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown shape kind {self.kind!r}")
        dims = tuple(float(d) for d in self.dims)
        if any(d <= 0 for d in dims):
            raise ValueError("shape dimensions must be > 0")
        n_expected = {"box": 3, "cylinder": 2, "capsule": 2, "sphere": 1}[self.kind]
        if len(dims) != n_expected:
            raise ValueError(f"{self.kind} expects {n_expected} dimensions")
        object.__setattr__(self, "dims", dims)

    def surface_area(self) -> float:
        if self.kind == "sphere":
            (r,) = self.dims
            return 4.0 * np.pi * r * r
        if self.kind == "box":
            a, b, c = self.dims
            return 2.0 * (a * b + b * c + a * c)
        r, length = self.dims
        lateral = 2.0 * np.pi * r * length
        if self.kind == "cylinder":
            return lateral + 2.0 * np.pi * r * r
        return lateral + 4.0 * np.pi * r * r  # capsule caps = full sphere

    def sample_surface(self, n: int, rng: np.random.Generator):
        """Uniform surface samples in the local frame; returns (points, normals)."""
        if n <= 0:
            return np.zeros((0, 3)), np.zeros((0, 3))
        if self.kind == "sphere":
            (r,) = self.dims
            d = _unit_dirs(n, rng)
            return r * d, d
        if self.kind == "box":
            return _sample_box(self.dims, n, rng)
        r, length = self.dims
        lateral = 2.0 * np.pi * r * length
        caps = 2.0 * np.pi * r * r if self.kind == "cylinder" else 4.0 * np.pi * r * r
        n_lat = rng.binomial(n, lateral / (lateral + caps))
        pts_l, nrm_l = _sample_lateral(r, length, n_lat, rng)
        if self.kind == "cylinder":
            pts_c, nrm_c = _sample_cylinder_caps(r, length, n - n_lat, rng)
        else:
            pts_c, nrm_c = _sample_capsule_caps(r, length, n - n_lat, rng)
        return np.vstack([pts_l, pts_c]), np.vstack([nrm_l, nrm_c])


def _unit_dirs(n: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=(n, 3))
    norms = np.linalg.norm(v, axis=1, keepdims=True)
    norms[norms < 1e-12] = 1.0
    return v / norms


def _sample_box(dims, n, rng):
    a, b, c = dims
    half = np.array([a, b, c]) / 2.0
    face_areas = np.array([b * c, b * c, a * c, a * c, a * b, a * b])
    face = rng.choice(6, size=n, p=face_areas / face_areas.sum())
    u = rng.uniform(-1.0, 1.0, size=(n, 3)) * half
    pts = u.copy()
    nrm = np.zeros((n, 3))
    axis = face // 2
    sign = np.where(face % 2 == 0, 1.0, -1.0)
    pts[np.arange(n), axis] = sign * half[axis]
    nrm[np.arange(n), axis] = sign
    return pts, nrm


def _sample_lateral(r, length, n, rng):
    theta = rng.uniform(0.0, 2.0 * np.pi, size=n)
    z = rng.uniform(-length / 2.0, length / 2.0, size=n)
    nrm = np.stack([np.cos(theta), np.sin(theta), np.zeros(n)], axis=1)
    pts = nrm * r
    pts[:, 2] = z
    return pts, nrm


def _sample_cylinder_caps(r, length, n, rng):
    side = rng.integers(0, 2, size=n) * 2 - 1
    rad = r * np.sqrt(rng.uniform(0.0, 1.0, size=n))
    theta = rng.uniform(0.0, 2.0 * np.pi, size=n)
    pts = np.stack([rad * np.cos(theta), rad * np.sin(theta), side * length / 2.0], axis=1)
    nrm = np.zeros((n, 3))
    nrm[:, 2] = side
    return pts, nrm


def _sample_capsule_caps(r, length, n, rng):
    d = _unit_dirs(n, rng)
    pts = r * d
    pts[:, 2] += np.sign(d[:, 2]) * length / 2.0
    return pts, d


@dataclass(frozen=True)
class SceneObject:
    shape: PrimitiveShape
    pose: Pose


@dataclass(frozen=True)
class HandModel:
    """Sphere-cluster hand anchored at the palm center.

    finger_spheres: (local offset, radius) pairs; grip_offset is the pose
    of the held object relative to the palm frame.
    """

    palm_center: Pose
    finger_spheres: tuple
    grip_offset: Pose = field(default_factory=Pose.identity)

    def __post_init__(self):
        if len(self.finger_spheres) < 1:
            raise ValueError("hand model needs at least one sphere")
        spheres = tuple(
            (np.asarray(off, dtype=float).reshape(3), float(r))
            for off, r in self.finger_spheres
        )
        if any(r <= 0 for _, r in spheres):
            raise ValueError("sphere radii must be > 0")
        object.__setattr__(self, "finger_spheres", spheres)

    def at(self, palm_center: Pose) -> "HandModel":
        return HandModel(palm_center, self.finger_spheres, self.grip_offset)

    def sphere_worlds(self):
        """(world center, radius) for every sphere in the cluster."""
        return [
            (self.palm_center.transform_point(off), r)
            for off, r in self.finger_spheres
        ]

    def object_pose(self) -> Pose:
        return self.palm_center.compose(self.grip_offset)


@dataclass(frozen=True)
class LabeledPointCloud:
    points: np.ndarray  # (N, 3)
    labels: np.ndarray  # (N,) int
    normals: np.ndarray | None = None  # (N, 3) unit, optional

    def __post_init__(self):
        points = np.asarray(self.points, dtype=float).reshape(-1, 3)
        labels = np.asarray(self.labels, dtype=int).reshape(-1)
        if len(points) != len(labels):
            raise ValueError("labels length must match points length")
        normals = self.normals
        if normals is not None:
            normals = np.asarray(normals, dtype=float).reshape(-1, 3)
            if len(normals) != len(points):
                raise ValueError("normals length must match points length")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "normals", normals)

    def __len__(self) -> int:
        return len(self.points)

    @classmethod
    def empty(cls) -> "LabeledPointCloud":
        return cls(np.zeros((0, 3)), np.zeros(0, dtype=int), np.zeros((0, 3)))

    def subset(self, mask: np.ndarray) -> "LabeledPointCloud":
        normals = self.normals[mask] if self.normals is not None else None
        return LabeledPointCloud(self.points[mask], self.labels[mask], normals)

    def hand_cloud(self) -> "LabeledPointCloud":
        return self.subset(self.labels == LABEL_HAND)

    def object_cloud(self) -> "LabeledPointCloud":
        return self.subset(self.labels == LABEL_OBJECT)


def synthesize_cloud(
    objects,
    hand: HandModel | None,
    camera_pose: Pose,
    density: float,
    rng: np.random.Generator,
    background=(),
) -> LabeledPointCloud:
    """Sample camera-facing surface points with ground-truth labels.

    density is points per square meter of surface; point counts per shape
    are round(area * density) before the visibility cut. An empty result
    signals a fully occluded view, not an error.
    """
    if density <= 0:
        raise ValueError("density must be > 0")
    pts_all, nrm_all, lbl_all = [], [], []

    def add_shape(shape: PrimitiveShape, pose: Pose, label: int):
        n = int(round(shape.surface_area() * density))
        pts, nrm = shape.sample_surface(n, rng)
        if len(pts) == 0:
            return
        rot = pose.rotation_matrix()
        pts_all.append(pts @ rot.T + pose.p)
        nrm_all.append(nrm @ rot.T)
        lbl_all.append(np.full(len(pts), label, dtype=int))

    for obj in objects:
        add_shape(obj.shape, obj.pose, LABEL_OBJECT)
    if hand is not None:
        for center, r in hand.sphere_worlds():
            sphere = PrimitiveShape("sphere", (r,))
            add_shape(sphere, Pose(center, [0, 0, 0, 1]), LABEL_HAND)
    for obj in background:
        add_shape(obj.shape, obj.pose, LABEL_BACKGROUND)

    if not pts_all:
        return LabeledPointCloud.empty()
    points = np.vstack(pts_all)
    normals = np.vstack(nrm_all)
    labels = np.concatenate(lbl_all)
    view = points - camera_pose.p
    visible = np.einsum("ij,ij->i", normals, view) < 0.0
    return LabeledPointCloud(points[visible], labels[visible], normals[visible])


def crop_around_palm(
    cloud: LabeledPointCloud, palm_center, radius: float = DEFAULT_CROP_RADIUS
) -> LabeledPointCloud:
    """Keep points within the closed ball of the given radius."""
    if radius <= 0:
        raise ValueError("crop radius must be > 0")
    palm_center = np.asarray(palm_center, dtype=float).reshape(3)
    d = np.linalg.norm(cloud.points - palm_center, axis=1)
    return cloud.subset(d <= radius)


def apply_label_noise(
    cloud: LabeledPointCloud, flip_prob: float, rng: np.random.Generator
) -> LabeledPointCloud:
    """Flip hand<->object labels independently with flip_prob; background untouched."""
    if not 0.0 <= flip_prob <= 1.0:
        raise ValueError("flip_prob must be in [0, 1]")
    labels = cloud.labels.copy()
    flippable = labels != LABEL_BACKGROUND
    flip = flippable & (rng.uniform(size=len(labels)) < flip_prob)
    labels[flip & (cloud.labels == LABEL_HAND)] = LABEL_OBJECT
    labels[flip & (cloud.labels == LABEL_OBJECT)] = LABEL_HAND
    return LabeledPointCloud(cloud.points, labels, cloud.normals)
