"""Planar depth sensor: ray table, exact grid-traversal depths, door opacity."""

import numpy as np
import pytest

from exploresim import world as wo
from exploresim.errors import InvalidState
from exploresim.kinematics import Pose
from exploresim.sensor import DEFAULT_SENSOR, SensorConfig, ray_angles, render_scan
from exploresim.evaluation import sample_start_pose, start_pose_seed

from tests.oracles import box_room, plan_from_rows, sampled_depth

MATCHED = wo.WorldMode()
MISMATCH = wo.WorldMode(door_mismatch=True)


# ---------------------------------------------------------------------------
# ray table
# ---------------------------------------------------------------------------

def test_default_ray_table_spans_minus30_to_plus30():
    angles = ray_angles(DEFAULT_SENSOR)
    assert angles.shape == (61,)
    assert np.array_equal(angles, np.arange(-30.0, 31.0))


def test_two_ray_table_is_the_endpoints():
    angles = ray_angles(SensorConfig(fov=60.0, n_rays=2))
    assert list(angles) == [-30.0, 30.0]


def test_middle_ray_of_odd_table_is_zero():
    for n in (3, 5, 61, 121):
        angles = ray_angles(SensorConfig(fov=60.0, n_rays=n))
        assert angles[(n - 1) // 2] == 0.0


def test_sensor_config_validation():
    with pytest.raises(Exception):
        SensorConfig(fov=0.0)
    with pytest.raises(Exception):
        SensorConfig(n_rays=1)
    with pytest.raises(Exception):
        SensorConfig(max_range=0.0)


# ---------------------------------------------------------------------------
# render_scan
# ---------------------------------------------------------------------------

def test_open_space_scan_is_all_clipped(big_room):
    scan = render_scan(big_room, MATCHED, Pose(6.025, 6.025, 77.0), DEFAULT_SENSOR)
    assert np.all(scan.clipped)
    assert np.all(scan.depths == DEFAULT_SENSOR.max_range)


def test_wall_exactly_one_meter_ahead():
    plan = box_room(120, 120)  # 6 m x 6 m
    res = plan.resolution
    wall_face = 119 * res  # near face of the east border wall
    pose = Pose(wall_face - 1.0, 60.5 * res, 0.0)
    scan = render_scan(plan, MATCHED, pose, DEFAULT_SENSOR)
    center = (DEFAULT_SENSOR.n_rays - 1) // 2
    assert scan.depths[center] == pytest.approx(1.0, abs=1e-9)
    assert not scan.clipped[center]


def test_door_opacity_follows_world_mode():
    # A door slab 0.5 m ahead of the pose; open space behind it for > 3 m.
    rows = ["#" * 100]
    for _ in range(8):
        rows.append("#" + "." * 30 + "DD" + "." * 66 + "#")
    rows.append("#" * 100)
    plan = plan_from_rows(rows)
    res = plan.resolution
    door_face = 31 * res
    pose = Pose(door_face - 0.5, 4.5 * res, 0.0)
    center = (DEFAULT_SENSOR.n_rays - 1) // 2
    seen_matched = render_scan(plan, MATCHED, pose, DEFAULT_SENSOR)
    assert seen_matched.clipped[center]  # sees straight through the door
    assert seen_matched.depths[center] == DEFAULT_SENSOR.max_range
    seen_mismatch = render_scan(plan, MISMATCH, pose, DEFAULT_SENSOR)
    assert seen_mismatch.depths[center] == pytest.approx(0.5, abs=1e-9)
    assert not seen_mismatch.clipped[center]


def test_depth_bounds_and_clipped_flag_agreement(small_house):
    rng = np.random.default_rng(2)
    for i in range(10):
        pose = sample_start_pose(small_house, rng)
        scan = render_scan(small_house, MATCHED, pose, DEFAULT_SENSOR)
        assert np.all(scan.depths > 0.0)
        assert np.all(scan.depths <= DEFAULT_SENSOR.max_range)
        assert np.all(scan.depths[scan.clipped] == DEFAULT_SENSOR.max_range)
        assert np.all(scan.depths[~scan.clipped] < DEFAULT_SENSOR.max_range)


def test_scan_matches_millimeter_sampling_oracle(small_house):
    rng = np.random.default_rng(31)
    opaque = small_house.opaque_mask(MATCHED)
    worst = 0.0
    for _ in range(8):
        pose = sample_start_pose(small_house, rng)
        scan = render_scan(small_house, MATCHED, pose, DEFAULT_SENSOR)
        angles = pose.theta + ray_angles(DEFAULT_SENSOR)
        for j in (0, 15, 30, 45, 60):
            ref = sampled_depth(opaque, pose.x, pose.y, float(angles[j]),
                                DEFAULT_SENSOR.max_range, small_house.resolution)
            worst = max(worst, abs(float(scan.depths[j]) - ref))
    assert worst <= 0.002


def test_door_mismatch_changes_only_door_rays(small_house):
    rng = np.random.default_rng(8)
    pose = sample_start_pose(small_house, rng)
    a = render_scan(small_house, MATCHED, pose, DEFAULT_SENSOR)
    b = render_scan(small_house, MISMATCH, pose, DEFAULT_SENSOR)
    # Mismatch can only shorten rays (doors become opaque), never lengthen.
    assert np.all(b.depths <= a.depths + 1e-12)


def test_square_room_center_scan_is_rotation_invariant():
    plan = box_room(121, 121)  # odd size: the center is a cell center
    center = Pose(60.5 * plan.resolution, 60.5 * plan.resolution, 12.3)
    base = render_scan(plan, MATCHED, center, DEFAULT_SENSOR)
    for quarter in (90.0, 180.0, 270.0):
        rot = render_scan(plan, MATCHED,
                          Pose(center.x, center.y, center.theta + quarter), DEFAULT_SENSOR)
        assert np.allclose(rot.depths, base.depths, atol=1e-9)
        assert np.array_equal(rot.clipped, base.clipped)


def test_render_scan_rejects_pose_in_wall(big_room):
    with pytest.raises(InvalidState):
        render_scan(big_room, MATCHED, Pose(0.025, 0.025, 0.0), DEFAULT_SENSOR)


def test_agent_may_stand_on_opaque_door_under_mismatch():
    plan = plan_from_rows(["#########",
                           "#...D...#",
                           "#...D...#",
                           "#...D...#",
                           "#########"])
    pose = Pose(4.5 * plan.resolution, 2.5 * plan.resolution, 0.0)
    scan = render_scan(plan, MISMATCH, pose, DEFAULT_SENSOR)  # no InvalidState
    assert scan.depths.shape == (DEFAULT_SENSOR.n_rays,)
