import json
import math

import numpy as np
import pytest

from conftest import static_scenario
from psdapf.errors import ScenarioError
from psdapf.human_signal import ActionUnitSample, HumanSignalFrame
from psdapf.planner import PlannerMode
from psdapf.sim import (
    CSV_HEADER,
    Waypoint,
    bundled_scenario_path,
    bundled_scenarios,
    count_sharp_turns,
    load_scenario,
    obstacle_at,
    run,
    sample_signal,
)


def test_bundled_scenarios_load():
    assert {"crossing_hand", "minimal", "sad_expression"} <= set(bundled_scenarios())
    for name in bundled_scenarios():
        load_scenario(bundled_scenario_path(name))
    with pytest.raises(ScenarioError):
        bundled_scenario_path("nope")


def test_obstacle_interpolation_and_hold():
    track = (Waypoint(1.0, (0, 0, 0)), Waypoint(3.0, (2, 0, 0)))
    before = obstacle_at(track, 0.0)
    np.testing.assert_array_equal(before.position, (0, 0, 0))
    np.testing.assert_array_equal(before.velocity, 0.0)
    mid = obstacle_at(track, 2.0)
    np.testing.assert_allclose(mid.position, (1, 0, 0))
    np.testing.assert_allclose(mid.velocity, (1, 0, 0))
    after = obstacle_at(track, 5.0)
    np.testing.assert_array_equal(after.position, (2, 0, 0))
    np.testing.assert_array_equal(after.velocity, 0.0)


def test_sample_signal_zero_order_hold():
    aus = ActionUnitSample.neutral()
    stream = [HumanSignalFrame(0.5, aus), HumanSignalFrame(1.0, aus)]
    assert sample_signal(stream, 0.4) is None
    assert sample_signal(stream, 0.5) is stream[0]
    assert sample_signal(stream, 0.7 + 0.3 - 1e-12) is stream[1]


def test_count_sharp_turns():
    assert count_sharp_turns([(0, 0, 0), (1, 0, 0), (2, 0, 0)]) == 0
    assert count_sharp_turns([(0, 0, 0), (1, 0, 0), (1, 1, 0)]) == 0
    assert count_sharp_turns([(0, 0, 0), (1, 0, 0), (0.5, 0.1, 0)]) == 1
    assert count_sharp_turns([(0, 0, 0), (1, 0, 0), (1, 0, 0), (0, 0, 0)]) == 1


@pytest.mark.parametrize("doc, match", [
    ({"name": "x"}, "missing"),
    ({"name": "x", "dt": 0.2, "duration": 5, "robot_start": [0, 0, 0], "goal": [1, 0, 0],
      "obstacle_track": [{"t": 0, "position": [0, 1, 0]}], "bogus": 1}, "unknown"),
    ({"name": "x", "dt": -1, "duration": 5, "robot_start": [0, 0, 0], "goal": [1, 0, 0],
      "obstacle_track": [{"t": 0, "position": [0, 1, 0]}]}, "dt"),
    ({"name": "x", "dt": 0.2, "duration": 5, "robot_start": [0, 0, 0], "goal": [1, 0, 0],
      "obstacle_track": [{"t": 1, "position": [0, 1, 0]}, {"t": 1, "position": [0, 1, 0]}]},
     "increase"),
    ({"name": "x", "dt": 0.2, "duration": 5, "robot_start": [0, 0], "goal": [1, 0, 0],
      "obstacle_track": [{"t": 0, "position": [0, 1, 0]}]}, "3 components"),
    ({"name": "x", "dt": 0.2, "duration": 5, "robot_start": [0, 0, 0], "goal": [1, 0, 0],
      "obstacle_track": [{"t": 0, "position": [0, 1, 0]}],
      "planner": {"potential": {"p_min": 0.5}}}, "p_min < p_max"),
])
def test_scenario_validation(doc, match):
    with pytest.raises(ScenarioError, match=match):
        load_scenario(doc)


def test_load_from_json_text():
    doc = {"name": "t", "dt": 0.2, "duration": 5, "robot_start": [0, 0, 0], "goal": [0.5, 0, 0],
           "obstacle_track": [{"t": 0, "position": [0.25, 0.6, 0]}]}
    assert load_scenario(json.dumps(doc)).name == "t"


@pytest.mark.parametrize("mode", list(PlannerMode))
def test_static_run_reaches_goal(mode):
    traj, m = run(static_scenario(), mode)
    assert m.reached_goal and not m.collided and m.reason is None
    assert np.linalg.norm(traj.positions[-1] - (0.5, 0, 0)) < 0.01
    assert m.path_length >= 0.5 - 1e-12
    assert traj.to_csv().splitlines()[0] == ",".join(CSV_HEADER)


def test_collision_detected():
    sc = static_scenario(goal=(1.0, 0, 0), hand=(0.5, 0.0, 0.0), robot_start=(0.48, 0, 0))
    _, m = run(sc, "apf")
    assert m.collided and m.reason == "collision" and not m.reached_goal


def test_timeout_reported():
    _, m = run(static_scenario(goal=(5, 0, 0), duration=1.0), "apf")
    assert m.reason == "timeout" and m.time_to_goal is None


def test_sad_scenario_step_floor_and_recovery():
    sc = load_scenario(bundled_scenario_path("sad_expression"))
    traj, m = run(sc, "psdapf")
    steps, times = traj.steps, traj.times
    assert m.reached_goal
    assert steps.min() == 0.02
    floor_at = times[np.argmax(steps == 0.02)]
    assert floor_at <= 2.0 + 3 * sc.dt + 1e-9
    assert np.any((times > 6.0) & (steps == 0.05))
