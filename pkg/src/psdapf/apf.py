"""
Potential-field forces for a point end-effector and a moving obstacle.

Attraction is a linear spring toward the goal. Repulsion uses the
goal-distance-modulated form, which vanishes at the goal so that a goal
sitting next to an obstacle stays reachable. A separate velocity repulsive
term reacts to the relative motion of robot and obstacle; it is gated by a
distance factor ``f_d`` and a speed factor ``k_v``.

All vectors are float 3-vectors (numpy arrays).
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import GeometryError, ParameterError

ZERO = np.zeros(3)
ZERO.setflags(write=False)


@dataclass(frozen=True)
class PotentialParams:
    k_a: float = 1.0       # attractive gain
    k_r: float = 0.01      # repulsive scale
    k_ro: float = 0.5      # velocity-repulsive scale
    n: float = 2.0         # goal-distance exponent
    p_0: float = 0.25      # obstacle influence radius [m]
    p_max: float = 0.25    # distance factor outer radius [m]
    p_min: float = 0.05    # distance factor inner radius [m]
    gamma: float = 1.0     # obstacle speed scale
    p_d: float = 0.25      # safe distance for the step rule [m]
    p_floor: float = 1e-4  # distances are clamped below to this [m]

    def __post_init__(self):
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ParameterError(f"{f.name} must be a finite number, got {v!r}")
            object.__setattr__(self, f.name, float(v))
        checks = [
            (self.p_min > 0, "0 < p_min"),
            (self.p_min < self.p_max, "p_min < p_max"),
            (self.p_0 > 0, "p_0 > 0"),
            (self.n > 0, "n > 0"),
            (self.gamma > 0, "gamma > 0"),
            (self.p_d >= self.p_max, "p_d >= p_max"),
            (self.k_a >= 0, "k_a >= 0"),
            (self.k_r >= 0, "k_r >= 0"),
            (self.k_ro >= 0, "k_ro >= 0"),
            (self.p_floor > 0, "p_floor > 0"),
        ]
        for ok, rule in checks:
            if not ok:
                raise ParameterError(f"potential parameters violate {rule}: {self}")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, obj: Mapping | None) -> "PotentialParams":
        obj = dict(obj or {})
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise ParameterError(f"unknown potential parameters: {sorted(unknown)}")
        return cls(**obj)


def _unit(v: np.ndarray) -> np.ndarray:
    n = float(np.linalg.norm(v))
    return v / n if n > 0 else ZERO


def distance_scale(params: PotentialParams) -> float:
    """eta = p_max p_min / (p_max - p_min)."""
    if not params.p_min < params.p_max:
        raise ParameterError("distance scale needs p_min < p_max")
    return params.p_max * params.p_min / (params.p_max - params.p_min)


def distance_factor(p: float, params: PotentialParams) -> float:
    """f_d = eta (1/p - 1/p_max) inside p_max, else 0.

    Evaluated as p_min (p_max - p) / (p (p_max - p_min)), the same quantity
    rearranged so that f_d(p_min) is exactly 1.0 in floating point.
    """
    if not p > 0:
        raise GeometryError(f"obstacle coincides with end-effector (p = {p})")
    if p > params.p_max:
        return 0.0
    return (params.p_min * (params.p_max - p)) / (p * (params.p_max - params.p_min))


def speed_factor(v_o, v_r, gamma: float) -> int:
    """sgn(gamma |v_o| - |v_r|); sgn(0) = 0."""
    d = gamma * float(np.linalg.norm(v_o)) - float(np.linalg.norm(v_r))
    return (d > 0) - (d < 0)


def approach_angle(v_r, v_o, x_robot, x_obstacle) -> float:
    """Angle in [0, pi] between v_r - v_o and the robot->obstacle vector.

    No relative motion counts as receding (pi).
    """
    disp = np.asarray(x_obstacle, dtype=float) - np.asarray(x_robot, dtype=float)
    dn = float(np.linalg.norm(disp))
    if dn == 0.0:
        raise GeometryError("approach angle undefined for coincident positions")
    v_or = np.asarray(v_r, dtype=float) - np.asarray(v_o, dtype=float)
    vn = float(np.linalg.norm(v_or))
    if vn == 0.0:
        return math.pi
    c = float(v_or @ disp) / (vn * dn)
    return math.acos(min(1.0, max(-1.0, c)))


def velocity_repulsive(v_r, v_o, f_d: float, k_v: int, alpha: float, k_ro: float) -> np.ndarray:
    """Velocity repulsive force; non-zero only while approaching inside p_max.

    ``alpha`` is in [0, pi]; the open bound is tested on the angle itself
    since cos(pi/2) is not exactly zero in floating point.
    """
    if not f_d > 0 or not abs(alpha) < math.pi / 2:
        return ZERO.copy()
    v_r = np.asarray(v_r, dtype=float)
    v_o = np.asarray(v_o, dtype=float)
    if k_v > 0:
        return k_ro * f_d * (v_r + v_o)
    return k_ro * f_d * (v_r - v_o)


def attractive_force(x, x_g, k_a: float) -> np.ndarray:
    return k_a * (np.asarray(x_g, dtype=float) - np.asarray(x, dtype=float))


def repulsive_potential(p: float, d_g: float, params: PotentialParams) -> float:
    """U_rep = (k_r/2)(1/p - 1/p_0)^2 d_g^n inside p_0."""
    if p >= params.p_0:
        return 0.0
    return 0.5 * params.k_r * (1.0 / p - 1.0 / params.p_0) ** 2 * d_g ** params.n


def repulsive_magnitudes(p: float, d_g: float, params: PotentialParams) -> tuple[float, float]:
    """Magnitudes of the obstacle-push and goal-pull repulsive terms.

    They are -dU/dp and dU/d(d_g) of :func:`repulsive_potential`.
    """
    if p >= params.p_0:
        return 0.0, 0.0
    g = 1.0 / p - 1.0 / params.p_0
    n, k_r = params.n, params.k_r
    rep1 = k_r * g / (p * p) * d_g ** n
    rep2 = n * k_r / 2.0 * g * g * d_g ** (n - 1) if d_g > 0 else 0.0
    return rep1, rep2


def repulsive_force(x, x_g, x_obs, params: PotentialParams) -> np.ndarray:
    """Sum of the obstacle push (along obstacle->robot) and the goal pull.

    The goal-pull term points from the robot to the goal; both vanish at the
    goal for n >= 2. Distances below ``p_floor`` are clamped.
    """
    x = np.asarray(x, dtype=float)
    x_g = np.asarray(x_g, dtype=float)
    away = x - np.asarray(x_obs, dtype=float)
    p = max(float(np.linalg.norm(away)), params.p_floor)
    if p >= params.p_0:
        return ZERO.copy()
    to_goal = x_g - x
    d_g = float(np.linalg.norm(to_goal))
    rep1, rep2 = repulsive_magnitudes(p, d_g, params)
    return rep1 * _unit(away) + rep2 * _unit(to_goal)


def net_force(f_att, f_rep, f_rev) -> np.ndarray:
    return np.asarray(f_att, dtype=float) + np.asarray(f_rep, dtype=float) + np.asarray(f_rev, dtype=float)
