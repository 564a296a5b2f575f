"""
Per-tick control law for the three planner variants.

``APF``    fixed step, attraction + repulsion only.
``SDAPF``  adds the velocity repulsive force and the distance/approach
           driven step-size rule.
``PSDAPF`` additionally reacts to the human: abnormal expressions or a
           head/gaze turn shrink the step and adapt the velocity, and while
           the human is turning the obstacle is replaced by its predicted
           pose and velocity.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping

import numpy as np

from . import apf
from .errors import LocalMinimumError, ParameterError
from .human_signal import (
    HEAD_GATE,
    AngleCalibration,
    ExpressionLabel,
    ExpressionProfile,
    HumanSignalFrame,
    classify_expression,
    effective_turn_angle,
    raw_to_angle,
)
from .prediction import DEFAULT_ARM_AMP_MAX, ObstacleState, TurnIntent, predict, vec3

LATERAL_AXIS = (0.0, 1.0, 0.0)
_EPS = 1e-12


class PlannerMode(Enum):
    APF = "apf"
    SDAPF = "sdapf"
    PSDAPF = "psdapf"

    @classmethod
    def parse(cls, name: str) -> "PlannerMode":
        key = name.strip().lower().replace("-", "")
        for mode in cls:
            if mode.value == key:
                return mode
        raise ValueError(f"unknown planner {name!r} (choose from apf, sdapf, psdapf)")


@dataclass(frozen=True)
class AdaptationParams:
    v_max: float = 0.05      # max velocity change from a head turn per tick [m/s]
    v_b: float = 0.05        # speed reduction per tick on abnormal expression [m/s]
    s_b: float = 0.01        # step change per tick [m]
    d_0: float = 0.05        # initial / maximum step [m]
    t_m: float = 0.5         # step horizon outside the safe distance [s]
    s_min: float = 0.02      # step floor [m]
    dt: float = 0.2          # control period [s]
    gaze_gate: float = math.radians(10.0)  # turn angle that raises the turn flag
    head_gate: float = HEAD_GATE
    v_cap: float = 0.25      # absolute speed ceiling [m/s]
    arm_amp_max: float = DEFAULT_ARM_AMP_MAX
    force_eps: float = 1e-9  # |F| below this away from the goal is a local minimum

    def __post_init__(self):
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if not isinstance(v, (int, float)) or not math.isfinite(v) or not v > 0:
                raise ParameterError(f"{f.name} must be a positive finite number, got {v!r}")
            object.__setattr__(self, f.name, float(v))
        if not self.s_min <= self.d_0:
            raise ParameterError(f"adaptation parameters violate s_min <= d_0: {self}")


@dataclass(frozen=True)
class PlannerParams:
    potential: apf.PotentialParams = field(default_factory=apf.PotentialParams)
    adaptation: AdaptationParams = field(default_factory=AdaptationParams)

    def to_dict(self) -> dict:
        return {
            "potential": self.potential.to_dict(),
            "adaptation": dataclasses.asdict(self.adaptation),
        }

    @classmethod
    def from_dict(cls, obj: Mapping | None) -> "PlannerParams":
        return cls().updated(obj)

    def updated(self, obj: Mapping | None) -> "PlannerParams":
        """Copy with values from a ``{"potential": {...}, "adaptation": {...}}`` block."""
        obj = dict(obj or {})
        unknown = set(obj) - {"potential", "adaptation"}
        if unknown:
            raise ParameterError(f"unknown planner config sections: {sorted(unknown)}")
        pot = {**self.potential.to_dict(), **obj.get("potential", {})}
        ada_in = obj.get("adaptation", {})
        known = {f.name for f in dataclasses.fields(AdaptationParams)}
        bad = set(ada_in) - known
        if bad:
            raise ParameterError(f"unknown adaptation parameters: {sorted(bad)}")
        ada = {**dataclasses.asdict(self.adaptation), **ada_in}
        return PlannerParams(apf.PotentialParams.from_dict(pot), AdaptationParams(**ada))

    def with_override(self, dotted: str, value: float) -> "PlannerParams":
        """``with_override("adaptation.s_b", 0.01)``."""
        section, _, name = dotted.partition(".")
        if not name:
            raise ParameterError(f"override key must be section.name, got {dotted!r}")
        return self.updated({section: {name: value}})


@dataclass(frozen=True)
class RobotState:
    position: np.ndarray
    velocity: np.ndarray
    step: float

    def __post_init__(self):
        object.__setattr__(self, "position", vec3(self.position, "robot position"))
        object.__setattr__(self, "velocity", vec3(self.velocity, "robot velocity"))
        object.__setattr__(self, "step", float(self.step))

    @property
    def speed(self) -> float:
        return float(np.linalg.norm(self.velocity))


@dataclass(frozen=True)
class WorldState:
    time: float
    robot: RobotState
    obstacle: ObstacleState
    goal: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "goal", vec3(self.goal, "goal"))


@dataclass(frozen=True)
class HumanFlags:
    e_x: int = 0
    h: int = 0
    a_h: float = 0.0  # signed turn angle [rad]
    turn_direction: np.ndarray = field(default_factory=lambda: apf.ZERO)

    def __post_init__(self):
        if self.e_x not in (0, 1) or self.h not in (0, 1):
            raise ValueError(f"flags must be binary, got e_x={self.e_x}, h={self.h}")
        object.__setattr__(self, "turn_direction", vec3(self.turn_direction, "turn direction"))

    @property
    def abnormal(self) -> bool:
        return bool(self.e_x or self.h)


NEUTRAL_FLAGS = HumanFlags()


def compute_flags(
    label: ExpressionLabel,
    a_h: float,
    params: AdaptationParams,
    lateral_axis=LATERAL_AXIS,
) -> HumanFlags:
    """Expression flag, turn flag, and the lateral direction of the turn."""
    e_x = int(ExpressionLabel(label) != ExpressionLabel.EXPRESSIONLESS)
    h = int(abs(a_h) > params.gaze_gate)
    axis = np.asarray(lateral_axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    direction = math.copysign(1.0, a_h) * axis if a_h != 0 else apf.ZERO
    return HumanFlags(e_x=e_x, h=h, a_h=float(a_h), turn_direction=direction)


@dataclass(frozen=True)
class SignalInterpreter:
    """Turns raw signal frames into (label, flags)."""

    params: AdaptationParams = field(default_factory=AdaptationParams)
    profile: ExpressionProfile = field(default_factory=ExpressionProfile)
    gaze_calibration: AngleCalibration = field(default_factory=AngleCalibration)
    lateral_axis: tuple = LATERAL_AXIS

    def turn_angle(self, frame: HumanSignalFrame) -> float:
        gaze_h = raw_to_angle(frame.gaze.horizontal, self.gaze_calibration)
        return effective_turn_angle(frame.head.yaw, gaze_h, self.params.head_gate)

    def interpret(self, frame: HumanSignalFrame | None) -> tuple[ExpressionLabel, HumanFlags]:
        if frame is None:
            return ExpressionLabel.EXPRESSIONLESS, NEUTRAL_FLAGS
        label = classify_expression(frame.aus, self.profile)
        return label, compute_flags(label, self.turn_angle(frame), self.params, self.lateral_axis)


def _clamp_speed(v: np.ndarray, v_cap: float) -> np.ndarray:
    speed = float(np.linalg.norm(v))
    if speed > v_cap:
        return v * (v_cap / speed)
    return v


def adapt_velocity(v_t, flags: HumanFlags, params: AdaptationParams) -> np.ndarray:
    """Expression / attention driven velocity update.

    With a turn (h=1) the velocity gains a component along the turn direction
    proportional to the turn angle. Otherwise an abnormal expression lowers
    the speed by ``v_b`` without changing direction (never below zero).
    """
    v_t = np.asarray(v_t, dtype=float)
    if not flags.abnormal:
        return v_t.copy()
    if flags.h:
        angle = min(abs(flags.a_h), math.pi / 2)
        v = v_t + flags.turn_direction * (params.v_max * angle / (math.pi / 2))
    else:
        speed = float(np.linalg.norm(v_t))
        v = v_t * (max(speed - params.v_b, 0.0) / speed) if speed > 0 else v_t.copy()
    return _clamp_speed(v, params.v_cap)


def adapt_step(s_t: float, flags: HumanFlags, params: AdaptationParams) -> float:
    """Shrink the step by ``s_b`` while the human is abnormal, grow it back otherwise."""
    if flags.abnormal:
        s = s_t - params.s_b
        return params.s_min if s <= params.s_min + _EPS else s
    s = s_t + params.s_b
    return params.d_0 if s >= params.d_0 - _EPS else s


@dataclass(frozen=True)
class GoalJump:
    """Head straight for the goal with this step length."""

    step: float


def sdapf_step_size(
    robot: RobotState,
    obstacle_pos,
    prev_dist: float | None,
    params: PlannerParams,
    goal,
) -> float | GoalJump:
    """Step rule driven by obstacle distance P and its per-tick change.

    Inside the safe distance ``p_d`` the full step ``d_0`` is used. Outside
    it, an approaching obstacle gives ``|v_r| t_m``; a receding one gives a
    :class:`GoalJump`. On the first tick (``prev_dist is None``) the change
    is taken as zero.
    """
    p = float(np.linalg.norm(robot.position - np.asarray(obstacle_pos, dtype=float)))
    grad = 0.0 if prev_dist is None else p - prev_dist
    if p <= params.potential.p_d:
        return params.adaptation.d_0
    s = robot.speed * params.adaptation.t_m
    if grad > 0:
        remaining = float(np.linalg.norm(np.asarray(goal, dtype=float) - robot.position))
        return GoalJump(min(remaining, s))
    return s


@dataclass
class TickInfo:
    """Diagnostics of the last tick, for tracing."""

    goal_jump: bool = False
    force: np.ndarray | None = None
    obstacle_used: np.ndarray | None = None
    clearance: float = math.inf


class Planner:
    """Stateful per-scenario planner. Not safe to tick concurrently."""

    def __init__(self, mode: PlannerMode, params: PlannerParams | None = None):
        self.mode = PlannerMode(mode)
        self.params = params or PlannerParams()
        self.prev_dist: float | None = None
        self.adaptive_step = self.params.adaptation.d_0
        self.last = TickInfo()

    def initial_state(self, position, velocity=(0.0, 0.0, 0.0)) -> RobotState:
        return RobotState(position, velocity, self.params.adaptation.d_0)

    def _forces(self, x, goal, obs_pos, obs_vel, v_r, with_velocity_term: bool) -> np.ndarray:
        pot = self.params.potential
        f = apf.attractive_force(x, goal, pot.k_a) + apf.repulsive_force(x, goal, obs_pos, pot)
        if not with_velocity_term:
            return f
        p = float(np.linalg.norm(x - obs_pos))
        if p == 0.0:
            return f
        f_d = apf.distance_factor(max(p, pot.p_floor), pot)
        k_v = apf.speed_factor(obs_vel, v_r, pot.gamma)
        alpha = apf.approach_angle(v_r, obs_vel, x, obs_pos)
        return apf.net_force(f, apf.ZERO, apf.velocity_repulsive(v_r, obs_vel, f_d, k_v, alpha, pot.k_ro))

    def tick(self, world: WorldState, flags: HumanFlags = NEUTRAL_FLAGS) -> RobotState:
        ad = self.params.adaptation
        robot, obs = world.robot, world.obstacle
        x, goal = robot.position, world.goal
        to_goal = goal - x
        dist_goal = float(np.linalg.norm(to_goal))
        clearance = float(np.linalg.norm(x - obs.position))

        goal_jump = False
        obs_pos, obs_vel = obs.position, obs.velocity
        if self.mode is PlannerMode.APF:
            step = ad.d_0
            force = self._forces(x, goal, obs_pos, obs_vel, robot.velocity, False)
        else:
            raw = sdapf_step_size(robot, obs.position, self.prev_dist, self.params, goal)
            goal_jump = isinstance(raw, GoalJump)
            step = min(max(raw.step if goal_jump else raw, ad.s_min), ad.d_0)
            if self.mode is PlannerMode.PSDAPF:
                self.adaptive_step = adapt_step(self.adaptive_step, flags, ad)
                step = min(step, self.adaptive_step)
                if flags.h:
                    intent = TurnIntent(flags.turn_direction, abs(flags.a_h), ad.arm_amp_max)
                    pred = predict(obs, intent, ad.dt)
                    obs_pos, obs_vel = pred.pose, pred.velocity
            force = self._forces(x, goal, obs_pos, obs_vel, robot.velocity, True)
        self.prev_dist = clearance
        self.last = TickInfo(goal_jump, force, obs_pos, clearance)

        if dist_goal <= step:
            new_x = goal.copy()
        elif goal_jump:
            new_x = x + step * to_goal / dist_goal
        else:
            fn = float(np.linalg.norm(force))
            if fn < ad.force_eps:
                raise LocalMinimumError(x)
            new_x = x + step * force / fn

        velocity = _clamp_speed((new_x - x) / ad.dt, ad.v_cap)
        if self.mode is PlannerMode.PSDAPF:
            velocity = adapt_velocity(velocity, flags, ad)
        return RobotState(new_x, velocity, step)

