"""Hand pose / velocity prediction from the head-and-gaze turn signal."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError, ParameterError

DEFAULT_ARM_AMP_MAX = 0.4  # metres of hand travel for a full pi/2 turn


def vec3(v, name="vector") -> np.ndarray:
    """Validated read-only float 3-vector."""
    a = np.array(v, dtype=float).reshape(-1)
    if a.shape != (3,):
        raise InputError(f"{name} must have 3 components, got {a.shape[0]}")
    if not np.all(np.isfinite(a)):
        raise InputError(f"{name} has non-finite components: {a}")
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ObstacleState:
    position: np.ndarray
    velocity: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "position", vec3(self.position, "obstacle position"))
        object.__setattr__(self, "velocity", vec3(self.velocity, "obstacle velocity"))


@dataclass(frozen=True)
class TurnIntent:
    """Direction the human is turning towards and by how much.

    ``angle`` is clamped into [0, pi/2]; ``direction`` is normalised.
    """

    direction: np.ndarray
    angle: float
    arm_amp_max: float = DEFAULT_ARM_AMP_MAX

    def __post_init__(self):
        d = vec3(self.direction, "turn direction")
        angle = min(max(float(self.angle), 0.0), math.pi / 2)
        if not self.arm_amp_max > 0:
            raise ParameterError(f"arm_amp_max must be > 0, got {self.arm_amp_max}")
        norm = float(np.linalg.norm(d))
        if angle > 0:
            if norm == 0.0:
                raise InputError("turn direction must be non-zero when angle > 0")
            d = vec3(d / norm)
        object.__setattr__(self, "direction", d)
        object.__setattr__(self, "angle", angle)


@dataclass(frozen=True)
class Prediction:
    pose: np.ndarray
    velocity: np.ndarray


def predict_pose(obs: ObstacleState, intent: TurnIntent) -> np.ndarray:
    """Current hand position shifted along the turn direction.

    A full pi/2 turn moves the hand by ``arm_amp_max``.
    """
    shift = intent.arm_amp_max * intent.angle / (math.pi / 2)
    return vec3(obs.position + intent.direction * shift)


def predict_velocity(p_pre, obs: ObstacleState, dt: float) -> np.ndarray:
    if not dt > 0:
        raise ParameterError(f"dt must be > 0, got {dt}")
    return vec3((np.asarray(p_pre, dtype=float) - obs.position) / dt)


def predict(obs: ObstacleState, intent: TurnIntent, dt: float) -> Prediction:
    pose = predict_pose(obs, intent)
    return Prediction(pose=pose, velocity=predict_velocity(pose, obs, dt))
