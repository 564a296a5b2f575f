"""
Deterministic discrete-time world for comparing planners.

A scenario scripts the hand (obstacle) as piecewise-linear waypoints and the
human as a stream of signal frames; :func:`run` ticks a planner over it and
records a trajectory plus summary metrics. Nothing here is random.
"""

from __future__ import annotations

import bisect
import csv
import dataclasses
import io
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import InputError, LocalMinimumError, ParameterError, ScenarioError
from .human_signal import (
    AngleCalibration,
    ExpressionProfile,
    HumanSignalFrame,
    load_expression_profile,
    parse_signal_frame,
    read_signal_stream,
    validate_stream,
)
from .planner import (
    LATERAL_AXIS,
    Planner,
    PlannerMode,
    PlannerParams,
    SignalInterpreter,
    WorldState,
)
from .prediction import ObstacleState, vec3

DEFAULT_COLLISION_RADIUS = 0.05
DEFAULT_GOAL_TOLERANCE = 0.01
SHARP_TURN_DEG = 90.0
# Frame/tick times are compared with this slack so that k*dt rounding does
# not delay a frame stamped exactly on a tick.
_TIME_SLACK = 1e-9

CSV_HEADER = ("t", "x", "y", "z", "ox", "oy", "oz", "step", "speed", "expr", "a_h", "mode")


def fmt(x: float) -> str:
    return f"{x:.9g}"


def round9(x: float) -> float:
    return float(fmt(x))


@dataclass(frozen=True)
class Waypoint:
    t: float
    position: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "position", vec3(self.position, "waypoint position"))


@dataclass(frozen=True)
class Scenario:
    name: str
    dt: float
    duration: float
    robot_start: np.ndarray
    goal: np.ndarray
    obstacle_track: tuple[Waypoint, ...]
    signal_stream: tuple[HumanSignalFrame, ...] = ()
    collision_radius: float = DEFAULT_COLLISION_RADIUS
    goal_tolerance: float = DEFAULT_GOAL_TOLERANCE
    lateral_axis: tuple[float, float, float] = LATERAL_AXIS
    planner: Mapping = field(default_factory=dict)
    profile: ExpressionProfile = field(default_factory=ExpressionProfile)
    gaze_calibration: AngleCalibration = field(default_factory=AngleCalibration)
    description: str = ""

    def __post_init__(self):
        if not (isinstance(self.dt, (int, float)) and self.dt > 0):
            raise ScenarioError(f"dt must be > 0, got {self.dt!r}")
        if not self.obstacle_track:
            raise ScenarioError("obstacle_track needs at least one waypoint")
        times = [w.t for w in self.obstacle_track]
        for a, b in zip(times, times[1:]):
            if not b > a:
                raise ScenarioError(f"obstacle_track times must strictly increase ({a} then {b})")
        if self.duration < times[-1]:
            raise ScenarioError(
                f"duration {self.duration} ends before last waypoint time {times[-1]}"
            )
        if not self.collision_radius >= 0 or not self.goal_tolerance > 0:
            raise ScenarioError("collision_radius must be >= 0 and goal_tolerance > 0")
        object.__setattr__(self, "robot_start", vec3(self.robot_start, "robot_start"))
        object.__setattr__(self, "goal", vec3(self.goal, "goal"))
        try:
            object.__setattr__(self, "signal_stream", tuple(validate_stream(self.signal_stream)))
        except InputError as exc:
            raise ScenarioError(f"signal_stream: {exc}") from exc
        if not np.linalg.norm(self.lateral_axis) > 0:
            raise ScenarioError("lateral_axis must be non-zero")
        try:
            self.planner_params()
        except ParameterError as exc:
            raise ScenarioError(f"planner: {exc}") from exc

    @property
    def n_ticks(self) -> int:
        return int(math.floor(self.duration / self.dt + _TIME_SLACK))

    def planner_params(self, base: PlannerParams | None = None) -> PlannerParams:
        """Defaults (or ``base``) overlaid with the scenario's planner block."""
        return (base or PlannerParams()).updated(self.planner)


_SCENARIO_KEYS = {
    "name", "description", "dt", "duration", "robot_start", "goal", "obstacle_track",
    "signal_stream", "signal_file", "collision_radius", "goal_tolerance", "lateral_axis",
    "planner", "expression_profile", "gaze_calibration",
}
_REQUIRED = ("name", "dt", "duration", "robot_start", "goal", "obstacle_track")


def scenario_from_dict(doc: Mapping, base_dir: Path | None = None) -> Scenario:
    if not isinstance(doc, Mapping):
        raise ScenarioError("scenario document must be a JSON object")
    unknown = set(doc) - _SCENARIO_KEYS
    if unknown:
        raise ScenarioError(f"unknown scenario field(s): {sorted(unknown)}")
    for key in _REQUIRED:
        if key not in doc:
            raise ScenarioError(f"scenario missing required field '{key}'")

    def number(key, default=None):
        v = doc.get(key, default)
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise ScenarioError(f"field '{key}' must be a finite number, got {v!r}")
        return float(v)

    try:
        track = tuple(Waypoint(float(w["t"]), w["position"]) for w in doc["obstacle_track"])
    except (KeyError, TypeError, InputError, ValueError) as exc:
        raise ScenarioError(f"field 'obstacle_track' malformed: {exc}") from exc

    try:
        frames = [parse_signal_frame(f) for f in doc.get("signal_stream", [])]
        if "signal_file" in doc:
            path = Path(doc["signal_file"])
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            frames += read_signal_stream(path)
        profile = load_expression_profile(doc.get("expression_profile"))
        gaze_cal = AngleCalibration(**doc.get("gaze_calibration", {}))
    except (InputError, OSError, TypeError, KeyError) as exc:
        raise ScenarioError(f"signal data malformed: {exc}") from exc

    try:
        return Scenario(
            name=str(doc["name"]),
            description=str(doc.get("description", "")),
            dt=number("dt"),
            duration=number("duration"),
            robot_start=doc["robot_start"],
            goal=doc["goal"],
            obstacle_track=track,
            signal_stream=tuple(frames),
            collision_radius=number("collision_radius", DEFAULT_COLLISION_RADIUS),
            goal_tolerance=number("goal_tolerance", DEFAULT_GOAL_TOLERANCE),
            lateral_axis=tuple(float(c) for c in doc.get("lateral_axis", LATERAL_AXIS)),
            planner=dict(doc.get("planner", {})),
            profile=profile,
            gaze_calibration=gaze_cal,
        )
    except InputError as exc:
        raise ScenarioError(str(exc)) from exc


def load_scenario(source) -> Scenario:
    """Load from a path, a JSON string, or an already-parsed mapping."""
    if isinstance(source, Mapping):
        return scenario_from_dict(source)
    if isinstance(source, Path) or (isinstance(source, str) and not source.lstrip().startswith("{")):
        path = Path(source)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ScenarioError(f"cannot read scenario {path}: {exc}") from exc
        base_dir = path.parent
    else:
        text, base_dir = source, None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"scenario is not valid JSON: {exc}") from exc
    return scenario_from_dict(doc, base_dir)


def bundled_scenarios() -> list[str]:
    root = resources.files("psdapf") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def bundled_scenario_path(name: str) -> Path:
    path = Path(str(resources.files("psdapf") / "scenarios" / f"{name}.json"))
    if not path.exists():
        raise ScenarioError(f"no bundled scenario named {name!r}; have {bundled_scenarios()}")
    return path


def obstacle_at(track: Sequence[Waypoint], t: float) -> ObstacleState:
    """Piecewise-linear hand position; held (zero velocity) outside the track."""
    times = [w.t for w in track]
    if t < times[0]:
        return ObstacleState(track[0].position, np.zeros(3))
    i = bisect.bisect_right(times, t) - 1
    if i >= len(track) - 1:
        return ObstacleState(track[-1].position, np.zeros(3))
    a, b = track[i], track[i + 1]
    span = b.t - a.t
    slope = (b.position - a.position) / span
    return ObstacleState(a.position + slope * (t - a.t), slope)


def sample_signal(stream: Sequence[HumanSignalFrame], t: float) -> HumanSignalFrame | None:
    """Zero-order hold: latest frame stamped at or before ``t``."""
    times = [f.time for f in stream]
    i = bisect.bisect_right(times, t + _TIME_SLACK) - 1
    return stream[i] if i >= 0 else None


@dataclass(frozen=True)
class TrajectoryRecord:
    t: float
    position: np.ndarray
    obstacle: np.ndarray
    step: float
    speed: float
    expr: int
    a_h: float
    mode: str


@dataclass
class Trajectory:
    mode: str
    records: list[TrajectoryRecord] = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    @property
    def positions(self) -> np.ndarray:
        return np.array([r.position for r in self.records]).reshape(-1, 3)

    @property
    def obstacles(self) -> np.ndarray:
        return np.array([r.obstacle for r in self.records]).reshape(-1, 3)

    @property
    def times(self) -> np.ndarray:
        return np.array([r.t for r in self.records])

    @property
    def steps(self) -> np.ndarray:
        return np.array([r.step for r in self.records])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in self.records:
            w.writerow([fmt(r.t), *map(fmt, r.position), *map(fmt, r.obstacle),
                        fmt(r.step), fmt(r.speed), r.expr, fmt(r.a_h), r.mode])
        return buf.getvalue()


@dataclass(frozen=True)
class Metrics:
    path_length: float
    min_clearance: float
    sharp_turn_count: int
    time_to_goal: float | None
    collided: bool
    mean_speed: float
    reason: str | None = None  # why the run did not finish, if it didn't

    @property
    def reached_goal(self) -> bool:
        return self.time_to_goal is not None

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        for k in ("path_length", "min_clearance", "mean_speed", "time_to_goal"):
            if d[k] is not None:
                d[k] = round9(d[k])
        d["reached_goal"] = self.reached_goal
        return d


def count_sharp_turns(positions, threshold_deg: float = SHARP_TURN_DEG) -> int:
    """Ticks where consecutive non-zero displacements turn by more than the threshold."""
    pts = np.asarray(positions, dtype=float).reshape(-1, 3)
    disp = np.diff(pts, axis=0)
    disp = disp[np.linalg.norm(disp, axis=1) > 0]
    if len(disp) < 2:
        return 0
    a, b = disp[:-1], disp[1:]
    angle = np.degrees(np.arctan2(np.linalg.norm(np.cross(a, b), axis=1), np.einsum("ij,ij->i", a, b)))
    return int(np.count_nonzero(angle > threshold_deg))


def compute_metrics(traj: Trajectory, scenario: Scenario, reason: str | None = None) -> Metrics:
    if not traj.records:
        raise ValueError("empty trajectory")
    pos, obs = traj.positions, traj.obstacles
    path_length = float(np.linalg.norm(np.diff(pos, axis=0), axis=1).sum())
    clearance = np.linalg.norm(pos - obs, axis=1)
    collided = bool(np.any(clearance < scenario.collision_radius))
    dist_goal = np.linalg.norm(pos - scenario.goal, axis=1)
    hit = np.flatnonzero(dist_goal < scenario.goal_tolerance)
    time_to_goal = float(traj.records[hit[0]].t) if len(hit) else None
    if reason is None and time_to_goal is None:
        reason = "collision" if collided else "timeout"
    return Metrics(
        path_length=path_length,
        min_clearance=float(clearance.min()),
        sharp_turn_count=count_sharp_turns(pos),
        time_to_goal=time_to_goal,
        collided=collided,
        mean_speed=float(np.mean([r.speed for r in traj.records])),
        reason=reason,
    )


def run(
    scenario: Scenario, mode: PlannerMode | str, params: PlannerParams | None = None
) -> tuple[Trajectory, Metrics]:
    """Tick a planner until the goal is reached, time runs out, or a collision.

    ``params`` defaults to the scenario's planner block over the defaults. The
    control period always follows the scenario's ``dt``.
    """
    mode = PlannerMode.parse(mode) if isinstance(mode, str) else PlannerMode(mode)
    params = params or scenario.planner_params()
    params = dataclasses.replace(
        params, adaptation=dataclasses.replace(params.adaptation, dt=scenario.dt)
    )
    planner = Planner(mode, params)
    interp = SignalInterpreter(
        params.adaptation, scenario.profile, scenario.gaze_calibration, scenario.lateral_axis
    )
    traj = Trajectory(mode.value)
    robot = planner.initial_state(scenario.robot_start)
    reason = None
    for k in range(scenario.n_ticks + 1):
        t = k * scenario.dt
        obs = obstacle_at(scenario.obstacle_track, t)
        label, flags = interp.interpret(sample_signal(scenario.signal_stream, t))
        traj.records.append(TrajectoryRecord(
            t, robot.position, obs.position, robot.step, robot.speed,
            int(label), flags.a_h, mode.value,
        ))
        if np.linalg.norm(robot.position - obs.position) < scenario.collision_radius:
            reason = "collision"
            break
        if np.linalg.norm(robot.position - scenario.goal) < scenario.goal_tolerance:
            break
        if k == scenario.n_ticks:
            reason = "timeout"
            break
        try:
            robot = planner.tick(WorldState(t, robot, obs, scenario.goal), flags)
        except LocalMinimumError as exc:
            reason = f"local minimum at {exc.position}"
            break
    return traj, compute_metrics(traj, scenario, reason)
