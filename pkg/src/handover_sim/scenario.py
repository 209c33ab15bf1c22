"""Declarative experiment descriptions: object, hand trajectory,
scripted events, run mode, and per-module config overrides.

Scenario files are YAML with top-level keys seed, object, hand_trajectory,
events, mode, overrides, time_limit (see scenarios/ for examples).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import yaml

from .geometry import Pose, quat_from_axis_angle
from .refinement import PerturbationConfig
from .scene import DEFAULT_CROP_RADIUS, HandModel, PrimitiveShape
from .selection import SelectionConfig

MODES = ("object_center", "naive", "temporal", "temporal_plus")

DEFAULT_DENSITY = 6.0e4  # cloud points per square meter
DEFAULT_TIME_LIMIT = 60.0

# Palm-relative sphere cluster: one palm sphere plus digits wrapping the
# near end of the held object (held along local -Y, see default grip).
DEFAULT_FINGER_SPHERES = (
    ((0.0, 0.0, 0.0), 0.035),
    ((0.0, -0.040, 0.015), 0.012),
    ((0.018, -0.045, 0.0), 0.012),
    ((-0.018, -0.045, 0.0), 0.012),
    ((0.0, -0.050, -0.012), 0.012),
)


class ScenarioError(Exception):
    """Raised on malformed scenario files or values."""


@dataclass(frozen=True)
class Event:
    trigger_time: float | None  # None means "when the robot starts moving"
    action: str  # rotate_object | translate_hand | lower_hand
    angle: float = 0.0  # radians, rotate_object
    axis: tuple = (0.0, 0.0, 1.0)
    offset: tuple = (0.0, 0.0, 0.0)  # translate_hand


@dataclass(frozen=True)
class Scenario:
    name: str
    seed: int
    object_shape: PrimitiveShape
    grip_offset: Pose
    hand_keyframes: tuple  # ((t, Pose), ...) strictly increasing times
    events: tuple = ()
    mode: str = "temporal_plus"
    time_limit: float = DEFAULT_TIME_LIMIT
    density: float = DEFAULT_DENSITY
    crop_radius: float = DEFAULT_CROP_RADIUS
    label_noise: float = 0.0
    finger_spheres: tuple = DEFAULT_FINGER_SPHERES
    selection: SelectionConfig = field(default_factory=SelectionConfig)
    perturbation: PerturbationConfig = field(default_factory=PerturbationConfig)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ScenarioError(f"unknown mode {self.mode!r}")
        times = [t for t, _ in self.hand_keyframes]
        if not times:
            raise ScenarioError("hand_trajectory needs at least one keyframe")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ScenarioError("keyframe times must be strictly increasing")
        if self.time_limit <= 0:
            raise ScenarioError("time_limit must be > 0")

    def hand_pose_at(self, t: float) -> Pose:
        """Linear position interpolation, slerp orientation, clamped ends."""
        frames = self.hand_keyframes
        if t <= frames[0][0]:
            return frames[0][1]
        if t >= frames[-1][0]:
            return frames[-1][1]
        for (t0, p0), (t1, p1) in zip(frames, frames[1:]):
            if t0 <= t <= t1:
                u = (t - t0) / (t1 - t0)
                from .geometry import quat_slerp

                return Pose(p0.p + u * (p1.p - p0.p), quat_slerp(p0.q, p1.q, u))
        return frames[-1][1]

    def hand_model(self, palm: Pose) -> HandModel:
        return HandModel(palm, self.finger_spheres, self.grip_offset)


def _pose_from(value) -> Pose:
    arr = np.asarray(value, dtype=float).reshape(-1)
    if arr.shape[0] == 3:
        return Pose(arr, [0.0, 0.0, 0.0, 1.0])
    if arr.shape[0] == 7:
        return Pose(arr[:3], arr[3:])
    raise ScenarioError("pose must be [x,y,z] or [x,y,z,qx,qy,qz,qw]")


def _parse_event(raw: dict) -> Event:
    trigger = raw.get("trigger")
    if trigger == "robot_started_moving":
        trigger_time = None
    elif isinstance(trigger, dict) and "time" in trigger:
        trigger_time = float(trigger["time"])
    else:
        raise ScenarioError(f"bad event trigger: {trigger!r}")
    action = raw.get("action")
    if not isinstance(action, dict) or len(action) != 1:
        raise ScenarioError(f"bad event action: {action!r}")
    kind, params = next(iter(action.items()))
    if kind == "rotate_object":
        return Event(
            trigger_time,
            "rotate_object",
            angle=float(np.deg2rad(params["angle_deg"])),
            axis=tuple(float(v) for v in params.get("axis", (0.0, 0.0, 1.0))),
        )
    if kind == "translate_hand":
        return Event(
            trigger_time,
            "translate_hand",
            offset=tuple(float(v) for v in params["offset"]),
        )
    if kind == "lower_hand":
        return Event(trigger_time, "lower_hand")
    raise ScenarioError(f"unknown event action {kind!r}")


def scenario_from_dict(data: dict, name: str = "scenario") -> Scenario:
    try:
        obj = data["object"]
        shape = PrimitiveShape(obj["kind"], tuple(obj["dims"]))
        grip = _pose_from(obj.get("grip_offset", [0, 0, 0]))
        keyframes = tuple(
            (float(kf["t"]), _pose_from(kf["pose"])) for kf in data["hand_trajectory"]
        )
        events = tuple(_parse_event(e) for e in data.get("events", ()))
        overrides = data.get("overrides", {}) or {}
        selection = SelectionConfig(**overrides.get("selection", {}))
        perturbation = PerturbationConfig(**overrides.get("refinement", {}))
        return Scenario(
            name=name,
            seed=int(data.get("seed", 0)),
            object_shape=shape,
            grip_offset=grip,
            hand_keyframes=keyframes,
            events=events,
            mode=data.get("mode", "temporal_plus"),
            time_limit=float(data.get("time_limit", DEFAULT_TIME_LIMIT)),
            density=float(overrides.get("density", DEFAULT_DENSITY)),
            crop_radius=float(overrides.get("crop_radius", DEFAULT_CROP_RADIUS)),
            label_noise=float(overrides.get("label_noise", 0.0)),
        )
    except ScenarioError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"invalid scenario: {exc}") from exc


def load_scenario(path) -> Scenario:
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except (OSError, yaml.YAMLError) as exc:
        raise ScenarioError(f"cannot read scenario {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ScenarioError(f"scenario {path} is not a mapping")
    import os

    name = os.path.splitext(os.path.basename(str(path)))[0]
    return scenario_from_dict(data, name)


def rotate_object_pose(grip_offset: Pose, event: Event) -> Pose:
    """Apply an in-hand rotation about the object center."""
    q = quat_from_axis_angle(event.axis, event.angle)
    return grip_offset.compose(Pose(np.zeros(3), q))
