"""
Human signal processing: facial action units, head pose and gaze.

Turns pre-extracted per-frame face tracker output into the quantities the
planner consumes:

- an expression label from AU intensities (Happy / Sad / Surprise / neutral),
- turn angles in radians from raw gaze readings,
- a calibrated linear map from turn angle to expected arm displacement.

AU extraction itself happens upstream; frames arrive as JSON lines.
"""

from __future__ import annotations

import csv
import json
import math
import statistics
from collections import defaultdict
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import CalibrationError, FitError, InputError

AU_IDS = ("AU01", "AU02", "AU04", "AU06", "AU07", "AU12", "AU15", "AU17", "AU25")
AU_MAX = 5.0

# Gate between "gaze only" and "head only" turn angle.
HEAD_GATE = math.radians(22.0)

# Nine angle scales (degrees) used when binning turn measurements.
TURN_SCALES_DEG = (5, 15, 25, 35, 45, 55, 65, 75, 85)

DEFAULT_THRESHOLD = 1.0


class ExpressionLabel(IntEnum):
    EXPRESSIONLESS = 0
    SURPRISE = 1
    SAD = 2
    HAPPY = 3


# Characteristic AU triple per expression.
EXPRESSION_AUS = {
    ExpressionLabel.HAPPY: ("AU06", "AU07", "AU12"),
    ExpressionLabel.SAD: ("AU04", "AU15", "AU17"),
    ExpressionLabel.SURPRISE: ("AU01", "AU02", "AU25"),
}


def _finite(x, name="value") -> float:
    try:
        x = float(x)
    except (TypeError, ValueError) as exc:
        raise InputError(f"{name} is not a number: {x!r}") from exc
    if not math.isfinite(x):
        raise InputError(f"{name} is not finite: {x!r}")
    return x


@dataclass(frozen=True)
class ActionUnitSample:
    """AU intensities for one frame. Extra AU keys are dropped."""

    intensities: Mapping[str, float]

    def __post_init__(self):
        clean = {}
        for au in AU_IDS:
            if au not in self.intensities:
                raise InputError(f"missing action unit {au}")
            v = _finite(self.intensities[au], au)
            if not 0.0 <= v <= AU_MAX:
                raise InputError(f"{au} intensity {v} outside [0, {AU_MAX}]")
            clean[au] = v
        object.__setattr__(self, "intensities", clean)

    def __getitem__(self, au: str) -> float:
        return self.intensities[au]

    @classmethod
    def neutral(cls) -> "ActionUnitSample":
        return cls({au: 0.0 for au in AU_IDS})

    @classmethod
    def from_partial(cls, values: Mapping[str, float], fill: float = 0.0) -> "ActionUnitSample":
        """Build a sample, filling absent AUs with ``fill``."""
        return cls({au: values.get(au, fill) for au in AU_IDS})


@dataclass(frozen=True)
class ExpressionProfile:
    """Calibrated per-expression AU means plus activation thresholds."""

    means: Mapping[ExpressionLabel, Mapping[str, float]] = field(default_factory=dict)
    thresholds: Mapping[ExpressionLabel, float] = field(
        default_factory=lambda: {label: DEFAULT_THRESHOLD for label in EXPRESSION_AUS}
    )

    def __post_init__(self):
        for label, per_au in self.means.items():
            for au, v in per_au.items():
                if not 0.0 <= v <= AU_MAX:
                    raise InputError(f"{label.name}/{au} mean {v} outside [0, {AU_MAX}]")
        thresholds = {label: DEFAULT_THRESHOLD for label in EXPRESSION_AUS}
        thresholds.update({ExpressionLabel(k): float(v) for k, v in self.thresholds.items()})
        for label, v in thresholds.items():
            if not v > 0:
                raise InputError(f"threshold for {label.name} must be > 0, got {v}")
        object.__setattr__(self, "thresholds", thresholds)

    def threshold(self, label: ExpressionLabel) -> float:
        return self.thresholds[label]


def _trimmed_mean(values: Sequence[float]) -> float:
    ordered = sorted(values)
    inner = ordered[1:-1]
    return math.fsum(inner) / len(inner)


def calibrate_profile(
    samples: Mapping[ExpressionLabel, Sequence[ActionUnitSample]],
    thresholds: Mapping[ExpressionLabel, float] | None = None,
) -> ExpressionProfile:
    """Average each AU per expression after dropping one max and one min.

    Every expression needs at least three samples so that something is left
    after trimming.
    """
    means = {}
    for label, group in samples.items():
        label = ExpressionLabel(label)
        if len(group) < 3:
            raise CalibrationError(
                f"expression {label.name} has {len(group)} samples, need at least 3"
            )
        means[label] = {au: _trimmed_mean([s[au] for s in group]) for au in AU_IDS}
    if thresholds is None:
        return ExpressionProfile(means=means)
    return ExpressionProfile(means=means, thresholds=thresholds)


def expression_scores(sample: ActionUnitSample) -> dict[ExpressionLabel, float]:
    return {
        label: math.fsum(sample[au] for au in aus) / len(aus)
        for label, aus in EXPRESSION_AUS.items()
    }


def classify_expression(
    sample: ActionUnitSample, profile: ExpressionProfile | None = None
) -> ExpressionLabel:
    """Label with the highest AU-triple score above its threshold.

    Ties go to the lowest label code; nothing above threshold means
    EXPRESSIONLESS.
    """
    profile = profile or ExpressionProfile()
    best, best_score = ExpressionLabel.EXPRESSIONLESS, -math.inf
    for label, score in sorted(expression_scores(sample).items()):
        if score > profile.threshold(label) and score > best_score:
            best, best_score = label, score
    return best


@dataclass(frozen=True)
class HeadPose:
    position: tuple[float, float, float] = (0.0, 0.0, 0.0)
    pitch: float = 0.0
    yaw: float = 0.0
    roll: float = 0.0

    def __post_init__(self):
        pos = tuple(_finite(c, "head position") for c in self.position)
        if len(pos) != 3:
            raise InputError("head position must have 3 components")
        object.__setattr__(self, "position", pos)
        for name in ("pitch", "yaw", "roll"):
            v = _finite(getattr(self, name), f"head {name}")
            if abs(v) > math.pi:
                raise InputError(f"head {name} {v} outside [-pi, pi]")
            object.__setattr__(self, name, v)


@dataclass(frozen=True)
class GazeRaw:
    """Raw gaze-angle pair, tool-native units. ``vertical`` is kept but unused."""

    horizontal: float = 0.0
    vertical: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "horizontal", _finite(self.horizontal, "gaze h"))
        object.__setattr__(self, "vertical", _finite(self.vertical, "gaze v"))


@dataclass(frozen=True)
class AngleCalibration:
    """Centre and full-scale reading of a raw angle channel.

    The defaults map a raw reading already in radians onto itself.
    """

    center: float = 0.0
    max_abs: float = math.pi / 2

    def __post_init__(self):
        _finite(self.center, "center")
        if not _finite(self.max_abs, "max_abs") > 0:
            raise InputError(f"max_abs must be > 0, got {self.max_abs}")


def raw_to_angle(raw: float, cal: AngleCalibration) -> float:
    """Map a raw reading to radians: full scale ``max_abs`` becomes pi/2."""
    raw = _finite(raw, "raw angle")
    return (raw - cal.center) / cal.max_abs * (math.pi / 2)


def effective_turn_angle(head_yaw: float, gaze_h: float, head_gate: float = HEAD_GATE) -> float:
    """Small head turns are ignored in favour of the gaze angle."""
    if abs(head_yaw) < head_gate:
        return gaze_h
    return head_yaw


@dataclass(frozen=True)
class HumanSignalFrame:
    time: float
    aus: ActionUnitSample
    head: HeadPose = field(default_factory=HeadPose)
    gaze: GazeRaw = field(default_factory=GazeRaw)

    def __post_init__(self):
        t = _finite(self.time, "frame time")
        if t < 0:
            raise InputError(f"frame time must be non-negative, got {t}")
        object.__setattr__(self, "time", t)


def parse_signal_frame(obj: Mapping) -> HumanSignalFrame:
    """One JSON-lines record: ``{t, aus:{AU01:..}, head:{x,y,z,pitch,yaw,roll}, gaze:{h,v}}``.

    Absent AUs read as 0; absent head/gaze blocks read as neutral.
    """
    if "t" not in obj:
        raise InputError("signal frame missing field 't'")
    head = obj.get("head", {})
    gaze = obj.get("gaze", {})
    return HumanSignalFrame(
        time=obj["t"],
        aus=ActionUnitSample.from_partial(obj.get("aus", {})),
        head=HeadPose(
            position=(head.get("x", 0.0), head.get("y", 0.0), head.get("z", 0.0)),
            pitch=head.get("pitch", 0.0),
            yaw=head.get("yaw", 0.0),
            roll=head.get("roll", 0.0),
        ),
        gaze=GazeRaw(gaze.get("h", 0.0), gaze.get("v", 0.0)),
    )


def frame_to_dict(frame: HumanSignalFrame) -> dict:
    x, y, z = frame.head.position
    return {
        "t": frame.time,
        "aus": dict(frame.aus.intensities),
        "head": {"x": x, "y": y, "z": z, "pitch": frame.head.pitch,
                 "yaw": frame.head.yaw, "roll": frame.head.roll},
        "gaze": {"h": frame.gaze.horizontal, "v": frame.gaze.vertical},
    }


def validate_stream(frames: Sequence[HumanSignalFrame]) -> list[HumanSignalFrame]:
    frames = list(frames)
    for prev, cur in zip(frames, frames[1:]):
        if not cur.time > prev.time:
            raise InputError(
                f"signal stream times must strictly increase ({prev.time} then {cur.time})"
            )
    return frames


def parse_signal_stream(lines: Iterable[str]) -> list[HumanSignalFrame]:
    frames = []
    for lineno, line in enumerate(lines, 1):
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise InputError(f"line {lineno}: {exc}") from exc
        frames.append(parse_signal_frame(obj))
    return validate_stream(frames)


def read_signal_stream(path) -> list[HumanSignalFrame]:
    with open(path, encoding="utf-8") as fh:
        return parse_signal_stream(fh)


# ---------------------------------------------------------------------------
# Turn angle -> arm displacement calibration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TurnTable:
    """Per-scale arm displacement (metres); ``None`` marks an empty scale."""

    scales_deg: tuple[int, ...]
    values: tuple[float | None, ...]

    def points(self) -> tuple[np.ndarray, np.ndarray]:
        """Non-empty scales as (angle radians, distance metres) arrays."""
        pairs = [(math.radians(s), v) for s, v in zip(self.scales_deg, self.values) if v is not None]
        x = np.array([p[0] for p in pairs], dtype=float)
        y = np.array([p[1] for p in pairs], dtype=float)
        return x, y

    def as_dict(self) -> dict[int, float | None]:
        return dict(zip(self.scales_deg, self.values))


def scale_index(angle_deg: float) -> int:
    """Scale bucket of an angle; bucket k covers [10k, 10k + 10)."""
    return min(int(angle_deg // 10), len(TURN_SCALES_DEG) - 1)


def bin_turn_samples(
    samples: Mapping[str, Sequence[tuple[float, float]]] | Sequence[tuple[float, float]],
) -> TurnTable:
    """Bin (angle_deg, distance_m) measurements onto the nine scales.

    Within one volunteer a scale takes the median of its values; across
    volunteers the per-scale values are averaged. A bare sequence is treated
    as a single volunteer.
    """
    if not isinstance(samples, Mapping):
        samples = {"0": samples}
    if not any(len(v) for v in samples.values()):
        raise CalibrationError("no turn samples")

    per_scale: dict[int, list[float]] = defaultdict(list)
    for volunteer, pairs in samples.items():
        buckets: dict[int, list[float]] = defaultdict(list)
        for angle, dist in pairs:
            angle = _finite(angle, "angle_deg")
            dist = _finite(dist, "distance_m")
            if not 0.0 < angle < 90.0:
                raise CalibrationError(
                    f"volunteer {volunteer}: angle {angle} deg outside (0, 90)"
                )
            buckets[scale_index(angle)].append(dist)
        for k, vals in buckets.items():
            per_scale[k].append(statistics.median(vals))

    values = tuple(
        math.fsum(per_scale[k]) / len(per_scale[k]) if per_scale.get(k) else None
        for k in range(len(TURN_SCALES_DEG))
    )
    return TurnTable(TURN_SCALES_DEG, values)


@dataclass(frozen=True)
class TurnRegression:
    """distance = alpha + beta * angle, angle in radians."""

    alpha: float
    beta: float

    def __post_init__(self):
        _finite(self.alpha, "alpha")
        _finite(self.beta, "beta")


def fit_line(x: Sequence[float], y: Sequence[float]) -> TurnRegression:
    """Closed-form simple least squares."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise FitError("x and y must be 1-D and the same length")
    if len(x) < 2:
        raise FitError(f"need at least 2 points, got {len(x)}")
    xm, ym = x.mean(), y.mean()
    dx = x - xm
    sxx = float(dx @ dx)
    if sxx == 0.0:
        raise FitError("all angles identical; slope undetermined")
    beta = float(dx @ (y - ym)) / sxx
    return TurnRegression(alpha=float(ym - beta * xm), beta=beta)


def fit_turn_regression(table: TurnTable) -> TurnRegression:
    x, y = table.points()
    return fit_line(x, y)


def regression_residual(table: TurnTable, reg: TurnRegression) -> float:
    """Sum of squared residuals over the non-empty scales."""
    x, y = table.points()
    r = y - (reg.alpha + reg.beta * x)
    return float(r @ r)


def predict_arm_distance(angle: float, reg: TurnRegression) -> float:
    return max(0.0, reg.alpha + reg.beta * _finite(angle, "angle"))


def read_calibration_csv(path) -> dict[str, list[tuple[float, float]]]:
    """CSV with columns ``volunteer, angle_deg, distance_m``."""
    out: dict[str, list[tuple[float, float]]] = defaultdict(list)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = {"volunteer", "angle_deg", "distance_m"} - set(reader.fieldnames or ())
        if missing:
            raise InputError(f"calibration CSV missing columns: {sorted(missing)}")
        for row in reader:
            out[row["volunteer"]].append(
                (_finite(row["angle_deg"], "angle_deg"), _finite(row["distance_m"], "distance_m"))
            )
    return dict(out)


def load_expression_profile(obj: Mapping | None) -> ExpressionProfile:
    """Profile from a JSON block ``{"thresholds": {"happy": 1.0, ...}, "means": {...}}``."""
    if not obj:
        return ExpressionProfile()

    def label(key):
        if isinstance(key, str) and not key.isdigit():
            return ExpressionLabel[key.upper()]
        return ExpressionLabel(int(key))

    thresholds = {label(k): v for k, v in obj.get("thresholds", {}).items()}
    means = {label(k): dict(v) for k, v in obj.get("means", {}).items()}
    return ExpressionProfile(means=means, thresholds=thresholds)
