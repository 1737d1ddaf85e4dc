"""Agent motion: the 6-action space, collision handling, dead-reckoning noise."""

import math

import numpy as np
import pytest

from exploresim import world as wo
from exploresim.errors import InvalidState
from exploresim.kinematics import (
    ACTION_DELTAS, Action, NoiseConfig, Pose, ROTATION_STEP, TRANSLATION_STEP,
    displacement, transition_estimated, transition_true, trunc_gauss, wrap_angle)

from tests.oracles import box_room, plan_from_rows

MATCHED = wo.WorldMode()


def _rng(seed=0):
    return np.random.default_rng(seed)


# ---------------------------------------------------------------------------
# true transition
# ---------------------------------------------------------------------------

def test_forward_in_open_space_advances_quarter_meter(big_room):
    pose = Pose(6.025, 6.025, 0.0)
    new, bump = transition_true(big_room, MATCHED, pose, Action.Forward)
    assert not bump
    assert new.x == pose.x + 0.25 and new.y == pose.y and new.theta == 0.0


def test_forward_into_nearby_wall_bumps_and_stays():
    # Two-cell-thick wall slab; the pose sits 0.10 m from its near face.
    plan = plan_from_rows(["#" * 40,
                           "#" + "." * 30 + "#" * 8 + "#",
                           "#" + "." * 30 + "#" * 8 + "#",
                           "#" + "." * 30 + "#" * 8 + "#",
                           "#" * 40])
    wall_face = 31 * plan.resolution
    pose = Pose(wall_face - 0.10, 2.5 * plan.resolution, 0.0)
    new, bump = transition_true(plan, MATCHED, pose, Action.Forward)
    assert bump
    assert (new.x, new.y, new.theta) == (pose.x, pose.y, pose.theta)


def test_turn_left_wraps_around_360(big_room):
    pose = Pose(6.0, 6.0, 355.0)
    new, bump = transition_true(big_room, MATCHED, pose, Action.TurnLeft)
    assert not bump
    assert new.theta == 4.0
    assert (new.x, new.y) == (pose.x, pose.y)


def test_turns_never_bump_even_against_wall():
    plan = box_room(20, 20)
    # Wedged into a corner as close as a spawn can be.
    pose = Pose(1.5 * plan.resolution, 1.5 * plan.resolution, 45.0)
    for action in (Action.TurnLeft, Action.TurnRight):
        _, bump = transition_true(plan, MATCHED, pose, action)
        assert not bump


def test_all_translations_respect_action_frame(big_room):
    pose = Pose(6.025, 6.025, 90.0)
    moved = {a: transition_true(big_room, MATCHED, pose, a)[0]
             for a in (Action.Forward, Action.Backward, Action.StrafeLeft, Action.StrafeRight)}
    # Facing +y: forward raises y, backward lowers it, strafes move along x.
    assert moved[Action.Forward].y > pose.y
    assert moved[Action.Backward].y < pose.y
    assert moved[Action.StrafeLeft].x < pose.x
    assert moved[Action.StrafeRight].x > pose.x
    for new in moved.values():
        d = math.hypot(new.x - pose.x, new.y - pose.y)
        assert d == pytest.approx(TRANSLATION_STEP, abs=1e-12)


def test_doors_are_always_passable_for_motion():
    plan = plan_from_rows(["#########",
                           "#...D...#",
                           "#...D...#",
                           "#...D...#",
                           "#########"])
    pose = Pose(3.5 * plan.resolution, 2.5 * plan.resolution, 0.0)
    for mode in (wo.WorldMode(), wo.WorldMode(door_mismatch=True)):
        new, bump = transition_true(plan, mode, pose, Action.Forward)
        assert not bump and new.x > pose.x


def test_transition_true_rejects_pose_inside_wall():
    plan = box_room(20, 20)
    with pytest.raises(InvalidState):
        transition_true(plan, MATCHED, Pose(0.025, 0.025, 0.0), Action.Forward)


# ---------------------------------------------------------------------------
# estimated transition / noise model
# ---------------------------------------------------------------------------

def test_noiseless_estimate_advances_exactly():
    est = Pose(2.0, 3.0, 0.0)
    new = transition_estimated(est, Action.Forward, False, NoiseConfig(eta=0.0), _rng())
    assert new.x == 2.25 and new.y == 3.0 and new.theta == 0.0


def test_bumped_translation_integrates_zero():
    est = Pose(2.0, 3.0, 37.0)
    new = transition_estimated(est, Action.Forward, True, NoiseConfig(eta=0.0), _rng())
    assert (new.x, new.y, new.theta) == (2.0, 3.0, 37.0)


def test_trunc_gauss_bounds_and_zero_shortcut():
    rng = _rng(7)
    draws = [trunc_gauss(rng, 0.1) for _ in range(20000)]
    assert max(abs(v) for v in draws) <= 0.1
    assert abs(float(np.mean(draws))) < 0.005
    assert trunc_gauss(rng, 0.0) == 0.0


def test_perturbation_components_scale_with_step_lengths():
    # eta=0.04: positional perturbation per component is at most 0.01 m,
    # angular at most 0.36 deg.
    noise = NoiseConfig(eta=0.04)
    rng = _rng(3)
    est = Pose(0.0, 0.0, 0.0)
    for _ in range(2000):
        new = transition_estimated(est, Action.Forward, False, noise, rng)
        # theta=0 keeps the agent frame axis-aligned with the world frame.
        d_long = new.x - est.x
        d_lat = new.y - est.y
        d_theta = (new.theta - est.theta + 180.0) % 360.0 - 180.0
        assert abs(d_long - TRANSLATION_STEP) <= 0.04 * TRANSLATION_STEP + 1e-12
        assert abs(d_lat) <= 0.04 * TRANSLATION_STEP + 1e-12
        assert abs(d_theta) <= 0.04 * ROTATION_STEP + 1e-12


def test_turns_also_perturb_position_when_noisy():
    noise = NoiseConfig(eta=0.1)
    rng = _rng(11)
    est = Pose(1.0, 1.0, 0.0)
    moved = 0
    for _ in range(50):
        new = transition_estimated(est, Action.TurnLeft, False, noise, rng)
        if new.x != est.x or new.y != est.y:
            moved += 1
    assert moved == 50  # drift accrues even while turning in place


def test_same_seed_reproduces_perturbations():
    noise = NoiseConfig(eta=0.07)
    seqs = []
    for _ in range(2):
        rng = _rng(42)
        est = Pose(0.0, 0.0, 0.0)
        seq = []
        for _ in range(100):
            est = transition_estimated(est, Action.Forward, False, noise, rng)
            seq.append((est.x, est.y, est.theta))
        seqs.append(seq)
    assert seqs[0] == seqs[1]


def test_theta_always_normalized(big_room):
    rng = _rng(5)
    pose = Pose(6.0, 6.0, 351.0)
    est = pose
    noise = NoiseConfig(eta=0.1)
    for _ in range(200):
        action = Action(int(rng.integers(0, 6)))
        pose, bump = transition_true(big_room, MATCHED, pose, action)
        est = transition_estimated(est, action, bump, noise, rng)
        assert 0.0 <= pose.theta < 360.0
        assert 0.0 <= est.theta < 360.0
    assert wrap_angle(-9.0) == 351.0
    assert wrap_angle(360.0) == 0.0


def test_dead_reckoning_exact_at_eta_zero_including_bumps():
    # Estimate equals truth bit-for-bit at eta=0: the two transitions share
    # one displacement helper and a bumped translation integrates as zero.
    plan = box_room(60, 60)
    rng = _rng(9)
    pose = Pose(1.525, 1.525, 0.0)
    est = pose
    noise = NoiseConfig(eta=0.0)
    bumps = 0
    for _ in range(400):
        action = Action(int(rng.integers(0, 6)))
        pose, bump = transition_true(plan, MATCHED, pose, action)
        est = transition_estimated(est, action, bump, noise, rng)
        bumps += bump
        assert (est.x, est.y, est.theta) == (pose.x, pose.y, pose.theta)
    assert bumps > 0  # the walk actually hit walls, so the bump path is covered


def test_drift_grows_with_time_at_high_noise(big_room):
    # Short-horizon version of the compounding-drift property.
    errs_early, errs_late = [], []
    for run in range(20):
        rng = _rng(100 + run)
        noise = NoiseConfig(eta=0.1)
        pose = Pose(6.025, 6.025, 0.0)
        est = pose
        for t in range(1, 301):
            action = Action.Forward if t % 7 else Action.TurnLeft
            pose, bump = transition_true(big_room, MATCHED, pose, action)
            est = transition_estimated(est, action, bump, noise, rng)
            if t == 30:
                errs_early.append(math.hypot(est.x - pose.x, est.y - pose.y))
            if t == 300:
                errs_late.append(math.hypot(est.x - pose.x, est.y - pose.y))
    assert float(np.mean(errs_late)) > float(np.mean(errs_early))


def test_displacement_matches_hand_trigonometry():
    dx, dy = displacement(30.0, 0.25, 0.0)
    assert dx == pytest.approx(0.25 * math.cos(math.radians(30.0)), abs=1e-15)
    assert dy == pytest.approx(0.25 * math.sin(math.radians(30.0)), abs=1e-15)
    dx, dy = displacement(90.0, 0.0, 0.25)
    assert dx == pytest.approx(-0.25, abs=1e-12)
    assert abs(dy) < 1e-12


def test_action_deltas_fix_step_magnitudes():
    for action, (d_long, d_lat, d_theta) in ACTION_DELTAS.items():
        if d_theta:
            assert abs(d_theta) == ROTATION_STEP and d_long == d_lat == 0.0
        else:
            assert math.hypot(d_long, d_lat) == TRANSLATION_STEP
