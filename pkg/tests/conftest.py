import math

import numpy as np
import pytest

from psdapf.sim import Scenario, Waypoint


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def static_scenario(goal=(0.5, 0.0, 0.0), hand=(0.25, 0.6, 0.0), **kw) -> Scenario:
    return Scenario(
        name=kw.pop("name", "static"),
        dt=kw.pop("dt", 0.2),
        duration=kw.pop("duration", 10.0),
        robot_start=kw.pop("robot_start", (0.0, 0.0, 0.0)),
        goal=goal,
        obstacle_track=(Waypoint(0.0, hand),),
        **kw,
    )


def deg(x: float) -> float:
    return math.radians(x)
