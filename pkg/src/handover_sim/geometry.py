"""Rigid-body poses and the weighted pose distance used across the stack.

Quaternions are stored xyzw and canonicalized so the scalar part is
non-negative (one representative per double-cover pair). The distance
metric and the grasp-frame offsets below are the primitives everything
else (sampling, refinement, selection, motion) is built on.

Grasp frame convention: local +Z is the approach axis, local Y is the
finger-closing axis, local X spans the finger width; the origin sits at
the midpoint between the fingertips.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

QUAT_NORM_TOL = 1e-9


def quat_normalize(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    n = np.linalg.norm(q)
    if n < 1e-8:
        raise ValueError("degenerate quaternion (norm ~ 0)")
    return q / n


def quat_canonical(q: np.ndarray) -> np.ndarray:
    """Return the double-cover representative with scalar part >= 0."""
    q = np.asarray(q, dtype=float)
    if q[3] < 0.0:
        return -q
    return q


def quat_mul(a, b) -> np.ndarray:
    ax, ay, az, aw = a
    bx, by, bz, bw = b
    return np.array(
        [
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
            aw * bw - ax * bx - ay * by - az * bz,
        ]
    )


def quat_conj(q) -> np.ndarray:
    x, y, z, w = q
    return np.array([-x, -y, -z, w])


def quat_from_axis_angle(axis, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    n = np.linalg.norm(axis)
    if n < 1e-12:
        raise ValueError("zero rotation axis")
    half = 0.5 * angle
    q = np.empty(4)
    q[:3] = axis / n * np.sin(half)
    q[3] = np.cos(half)
    return q


def quat_to_matrix(q) -> np.ndarray:
    x, y, z, w = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


def quat_from_matrix(m: np.ndarray) -> np.ndarray:
    """Shepperd's method; returns a unit xyzw quaternion."""
    m = np.asarray(m, dtype=float)
    tr = m[0, 0] + m[1, 1] + m[2, 2]
    if tr > 0:
        s = np.sqrt(tr + 1.0) * 2.0
        w = 0.25 * s
        x = (m[2, 1] - m[1, 2]) / s
        y = (m[0, 2] - m[2, 0]) / s
        z = (m[1, 0] - m[0, 1]) / s
    elif m[0, 0] > m[1, 1] and m[0, 0] > m[2, 2]:
        s = np.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2.0
        w = (m[2, 1] - m[1, 2]) / s
        x = 0.25 * s
        y = (m[0, 1] + m[1, 0]) / s
        z = (m[0, 2] + m[2, 0]) / s
    elif m[1, 1] > m[2, 2]:
        s = np.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2.0
        w = (m[0, 2] - m[2, 0]) / s
        x = (m[0, 1] + m[1, 0]) / s
        y = 0.25 * s
        z = (m[1, 2] + m[2, 1]) / s
    else:
        s = np.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2.0
        w = (m[1, 0] - m[0, 1]) / s
        x = (m[0, 2] + m[2, 0]) / s
        y = (m[1, 2] + m[2, 1]) / s
        z = 0.25 * s
    return quat_normalize([x, y, z, w])


def quat_rotate(q, v) -> np.ndarray:
    return quat_to_matrix(q) @ np.asarray(v, dtype=float)


def quat_slerp(q0, q1, u: float) -> np.ndarray:
    """Shortest-path spherical interpolation, u in [0, 1]."""
    q0 = np.asarray(q0, dtype=float)
    q1 = np.asarray(q1, dtype=float)
    dot = float(np.dot(q0, q1))
    if dot < 0.0:
        q1 = -q1
        dot = -dot
    if dot > 1.0 - 1e-12:
        return quat_normalize(q0 + u * (q1 - q0))
    theta = np.arccos(np.clip(dot, -1.0, 1.0))
    s = np.sin(theta)
    return quat_normalize(np.sin((1 - u) * theta) / s * q0 + np.sin(u * theta) / s * q1)


def quat_angle(q0, q1) -> float:
    """Geodesic angle (radians) between two orientations."""
    dot = abs(float(np.dot(q0, q1)))
    return 2.0 * np.arccos(np.clip(dot, -1.0, 1.0))


@dataclass(frozen=True)
class Pose:
    """Position + unit quaternion (xyzw, scalar part canonicalized >= 0)."""

    p: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float).reshape(3).copy()
        q = quat_canonical(quat_normalize(self.q)).copy()
        p.setflags(write=False)
        q.setflags(write=False)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.zeros(3), np.array([0.0, 0.0, 0.0, 1.0]))

    @classmethod
    def from_array(cls, arr) -> "Pose":
        arr = np.asarray(arr, dtype=float).reshape(7)
        return cls(arr[:3], arr[3:])

    def to_array(self) -> np.ndarray:
        return np.concatenate([self.p, self.q])

    def rotation_matrix(self) -> np.ndarray:
        return quat_to_matrix(self.q)

    def x_axis(self) -> np.ndarray:
        return self.rotation_matrix()[:, 0]

    def y_axis(self) -> np.ndarray:
        return self.rotation_matrix()[:, 1]

    def z_axis(self) -> np.ndarray:
        return self.rotation_matrix()[:, 2]

    def transform_point(self, pt) -> np.ndarray:
        return self.rotation_matrix() @ np.asarray(pt, dtype=float) + self.p

    def transform_points(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        return pts @ self.rotation_matrix().T + self.p

    def inverse_transform_points(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        return (pts - self.p) @ self.rotation_matrix()

    def compose(self, other: "Pose") -> "Pose":
        """self o other: other expressed in self's frame, result in world."""
        return Pose(self.transform_point(other.p), quat_mul(self.q, other.q))

    def inverse(self) -> "Pose":
        qc = quat_conj(self.q)
        return Pose(-quat_rotate(qc, self.p), qc)


def pose_distance(x1: Pose, x2: Pose, w_q: float = 0.1) -> float:
    """Squared position distance plus w_q * (1 - <q1, q2>).

    Symmetric, non-negative, zero only for identical (canonicalized)
    poses. w_q trades off position against orientation.
    """
    dp = x1.p - x2.p
    # unit-quaternion dot can exceed 1 by float error; clamp so identical
    # poses measure exactly zero
    inner = min(float(np.dot(x1.q, x2.q)), 1.0)
    return float(dp @ dp) + w_q * (1.0 - inner)


_FLIP_Z = np.array([0.0, 0.0, 1.0, 0.0])  # 180 deg about local Z


def flip_about_grasp_z(g: Pose) -> Pose:
    """Rotate the grasp 180 degrees about its own approach (Z) axis."""
    return Pose(g.p, quat_mul(g.q, _FLIP_Z))


def offset_along_grasp_z(g: Pose, delta: float) -> Pose:
    """Translate along the grasp's local +Z by delta meters."""
    return Pose(g.p + g.z_axis() * delta, g.q)
