import math

import numpy as np
import pytest

from psdapf.errors import LocalMinimumError, ParameterError
from psdapf.human_signal import (
    ActionUnitSample,
    ExpressionLabel,
    GazeRaw,
    HeadPose,
    HumanSignalFrame,
)
from psdapf.planner import (
    NEUTRAL_FLAGS,
    AdaptationParams,
    GoalJump,
    HumanFlags,
    Planner,
    PlannerMode,
    PlannerParams,
    RobotState,
    SignalInterpreter,
    WorldState,
    adapt_step,
    adapt_velocity,
    compute_flags,
    sdapf_step_size,
)
from psdapf.prediction import ObstacleState

AD = AdaptationParams()


def robot(pos=(0, 0, 0), vel=(0, 0, 0), step=0.05):
    return RobotState(pos, vel, step)


def test_mode_parse():
    assert PlannerMode.parse("P-SDAPF") is PlannerMode.PSDAPF
    with pytest.raises(ValueError):
        PlannerMode.parse("rrt")


def test_params_override_and_validation():
    p = PlannerParams().with_override("adaptation.s_b", 0.02)
    assert p.adaptation.s_b == 0.02
    assert PlannerParams.from_dict(p.to_dict()) == p
    with pytest.raises(ParameterError):
        PlannerParams().with_override("adaptation.nope", 1.0)
    with pytest.raises(ParameterError):
        AdaptationParams(s_min=0.1, d_0=0.05)


# -- flags ---------------------------------------------------------------------------

def test_compute_flags_examples():
    f = compute_flags(ExpressionLabel.EXPRESSIONLESS, 0.0, AD)
    assert (f.e_x, f.h) == (0, 0)
    f = compute_flags(ExpressionLabel.SAD, 0.0, AD)
    assert (f.e_x, f.h) == (1, 0)
    f = compute_flags(ExpressionLabel.EXPRESSIONLESS, math.radians(30), AD)
    assert (f.e_x, f.h) == (0, 1)
    np.testing.assert_array_equal(f.turn_direction, (0, 1, 0))
    f = compute_flags(ExpressionLabel.EXPRESSIONLESS, -math.radians(30), AD)
    np.testing.assert_array_equal(f.turn_direction, (0, -1, 0))


def frame(yaw_deg, gaze_deg, aus=None):
    return HumanSignalFrame(
        0.0, ActionUnitSample.from_partial(aus or {}),
        HeadPose(yaw=math.radians(yaw_deg)), GazeRaw(math.radians(gaze_deg)),
    )


def test_interpreter_head_gate():
    interp = SignalInterpreter()
    assert interp.turn_angle(frame(21, 35)) == math.radians(35)
    assert interp.turn_angle(frame(23, 35)) == math.radians(23)
    label, flags = interp.interpret(frame(0, 0, {"AU04": 3, "AU15": 3, "AU17": 3}))
    assert label is ExpressionLabel.SAD and flags.e_x == 1
    assert interp.interpret(None) == (ExpressionLabel.EXPRESSIONLESS, NEUTRAL_FLAGS)


# -- velocity / step adaptation -----------------------------------------------------------------

def test_adapt_velocity_examples():
    v = np.array([0.1, 0.0, 0.0])
    np.testing.assert_array_equal(adapt_velocity(v, NEUTRAL_FLAGS, AD), v)
    ad = AdaptationParams(v_b=0.03)
    got = adapt_velocity(v, HumanFlags(e_x=1), ad)
    assert np.linalg.norm(got) == pytest.approx(0.07, abs=1e-15)
    np.testing.assert_array_equal(adapt_velocity(v, HumanFlags(h=1, a_h=0.0), AD), v)
    slow = adapt_velocity(np.array([0.01, 0, 0]), HumanFlags(e_x=1), AD)
    np.testing.assert_array_equal(slow, 0.0)


def test_adapt_velocity_turn_adds_lateral():
    f = compute_flags(ExpressionLabel.EXPRESSIONLESS, math.pi / 2, AD)
    got = adapt_velocity(np.array([0.1, 0, 0]), f, AD)
    np.testing.assert_allclose(got, (0.1, AD.v_max, 0), atol=1e-15)


def test_adapt_step_examples():
    ad = AdaptationParams(s_b=0.02)
    assert adapt_step(0.03, HumanFlags(e_x=1), ad) == 0.02
    assert adapt_step(AD.d_0, NEUTRAL_FLAGS, AD) == AD.d_0
    big = AdaptationParams(d_0=0.1, s_b=0.01)
    assert adapt_step(0.05, NEUTRAL_FLAGS, big) == pytest.approx(0.06, abs=1e-15)


def test_adapt_step_hits_floor_exactly():
    s = AD.d_0
    for _ in range(10):
        s = adapt_step(s, HumanFlags(e_x=1), AD)
    assert s == 0.02


# -- step rule ------------------------------------------------------------------------------------

def test_step_rule_examples():
    p = PlannerParams()
    pd = p.potential.p_d
    goal = (5, 0, 0)
    assert sdapf_step_size(robot(), (pd, 0, 0), None, p, goal) == p.adaptation.d_0
    r = robot(vel=(0.1, 0, 0))
    assert sdapf_step_size(r, (2 * pd, 0, 0), 2 * pd + 0.01, p, goal) == pytest.approx(0.05)
    jump = sdapf_step_size(r, (2 * pd, 0, 0), 2 * pd - 0.01, p, goal)
    assert isinstance(jump, GoalJump) and jump.step == pytest.approx(0.05)
    assert sdapf_step_size(r, (2 * pd, 0, 0), None, p, goal) == pytest.approx(0.05)


# -- ticks ----------------------------------------------------------------------------------------

def world(x, goal, obs=(5, 5, 0), ov=(0, 0, 0), vel=(0, 0, 0), step=0.05):
    return WorldState(0.0, robot(x, vel, step), ObstacleState(obs, ov), goal)


@pytest.mark.parametrize("mode", list(PlannerMode))
def test_tick_at_goal_is_fixed_point(mode):
    pl = Planner(mode)
    out = pl.tick(world((1, 0, 0), (1, 0, 0)))
    np.testing.assert_array_equal(out.position, (1, 0, 0))


def test_tick_snaps_to_nearby_goal():
    out = Planner(PlannerMode.APF).tick(world((0.98, 0, 0), (1, 0, 0)))
    np.testing.assert_array_equal(out.position, (1, 0, 0))


def test_apf_moves_fixed_step_toward_goal():
    out = Planner(PlannerMode.APF).tick(world((0, 0, 0), (1, 0, 0)))
    np.testing.assert_allclose(out.position, (0.05, 0, 0), atol=1e-15)
    assert out.step == 0.05
    np.testing.assert_allclose(out.velocity, (0.25, 0, 0), atol=1e-12)


def test_psdapf_neutral_matches_sdapf():
    a = Planner(PlannerMode.SDAPF).tick(world((0, 0, 0), (1, 0, 0), vel=(0.1, 0, 0)))
    b = Planner(PlannerMode.PSDAPF).tick(world((0, 0, 0), (1, 0, 0), vel=(0.1, 0, 0)))
    np.testing.assert_array_equal(a.position, b.position)
    np.testing.assert_array_equal(a.velocity, b.velocity)
    assert a.step == b.step


def test_psdapf_uses_prediction_when_turning():
    flags = compute_flags(ExpressionLabel.EXPRESSIONLESS, math.pi / 2, AD)
    pl = Planner(PlannerMode.PSDAPF)
    pl.tick(world((0, 0, 0), (1, 0, 0), obs=(0.2, -0.3, 0)), flags)
    np.testing.assert_allclose(pl.last.obstacle_used, (0.2, 0.1, 0), atol=1e-15)
    assert pl.last.clearance == pytest.approx(math.hypot(0.2, 0.3))


def test_local_minimum_reported():
    pl = Planner(PlannerMode.APF, PlannerParams.from_dict({"potential": {"k_a": 0.0}}))
    with pytest.raises(LocalMinimumError) as exc:
        pl.tick(world((0, 0, 0), (1, 0, 0)))
    assert exc.value.position == (0.0, 0.0, 0.0)
