"""Shared fixtures: kernel warmup, generated world suites, and the expensive
experiment grids reused across acceptance criteria.

Every session-scoped fixture records its build time in FIXTURE_SECONDS so the
acceptance tests can charge themselves the full cost of the shared work they
consume when asserting their runtime budgets.
"""

import time

import numpy as np
import pytest

from exploresim import _kernels
from exploresim import evaluation as ev
from exploresim.policies import make_policy
from exploresim.sensor import SensorConfig
from exploresim.world import GenParams, WorldMode, generate_house

FIXTURE_SECONDS = {}


def _timed(name, build):
    t0 = time.monotonic()
    out = build()
    FIXTURE_SECONDS[name] = time.monotonic() - t0
    return out


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Compile the numba kernels once so no test pays JIT latency."""
    _timed("warm_kernels", _kernels.warmup)


@pytest.fixture(scope="session")
def fixture_seconds():
    return FIXTURE_SECONDS


# ---------------------------------------------------------------------------
# Small worlds for unit tests
# ---------------------------------------------------------------------------

@pytest.fixture(scope="session")
def small_house():
    """One mid-size generated house (~60 m^2) for module-level tests."""
    return generate_house(11, GenParams(target_area=60.0))


@pytest.fixture(scope="session")
def big_room():
    """Closed empty 12 m x 12 m room: open space everywhere except the border."""
    from tests.oracles import box_room

    return box_room(240, 240, name="bigroom")


# ---------------------------------------------------------------------------
# Acceptance suites
# ---------------------------------------------------------------------------

@pytest.fixture(scope="session")
def coverage_suite():
    """20 door-gated houses (~240 m^2) for the coverage-ordering and
    noise-degradation runs."""
    params = GenParams(target_area=240.0, door_width=6, corridor_width=16,
                       room_count_range=(8, 12))
    return _timed("coverage_suite",
                  lambda: [generate_house(2000 + i, params) for i in range(20)])


@pytest.fixture(scope="session")
def noiseless_curves(coverage_suite):
    """True-coverage grids at eta=0 for the three sensor-limited policies:
    20 worlds x 5 starts x 3 replicates x 1000 steps each."""
    def build():
        return ev.coverage_experiment(
            coverage_suite, ["frontier", "straight", "random"],
            starts_per_world=5, steps=1000, eta=0.0, mode=WorldMode(),
            replicates=3, master_seed=77)

    return _timed("noiseless_curves", build)


@pytest.fixture(scope="session")
def maze_suite():
    """Eight dense many-room houses (~140 m^2, 12-14 rooms) whose banded
    layout makes unknown-space shortcuts expensive for a map-less planner."""
    params = GenParams(target_area=140.0, room_count_range=(12, 14),
                       corridor_width=10, door_width=6)
    return _timed("maze_suite",
                  lambda: [generate_house(4000 + i, params) for i in range(8)])


@pytest.fixture(scope="session")
def maze_frontier_logs(maze_suite):
    """Frontier experience logs on the maze suite: 4000 steps with a 1.5 m
    sensor, which forces the trajectory to enter rooms instead of scanning
    them from their doorways, so logged poses densely cover the free space."""
    cfg = SensorConfig(max_range=1.5)

    def build():
        return [ev.collect_experience(w, WorldMode(), make_policy("frontier", w),
                                      steps=4000, seed=901 + i, sensor_cfg=cfg)
                for i, w in enumerate(maze_suite)]

    return _timed("maze_frontier_logs", build)


@pytest.fixture(scope="session")
def maze_goals(maze_suite):
    """20 goal poses per maze world, fixed by the goal-sampling seed."""
    def build():
        return [ev.sample_goal_poses(w, 20, np.random.default_rng(ev.start_pose_seed(500, i, 0)))
                for i, w in enumerate(maze_suite)]

    return _timed("maze_goals", build)
