"""Agent state, motion primitives, true transitions, dead-reckoning noise.

The agent is a point. Translations move 0.25 m in the agent frame, rotations
turn 9 degrees. The *true* pose only changes by exact primitives (collision can
veto a translation); all noise lives in the *estimated* pose, which integrates
executed actions plus a truncated-Gaussian perturbation per step.
"""
from __future__ import annotations

import dataclasses
import enum
import math

import numpy as np

from . import world as worldmod
from .errors import InvalidState

TRANSLATION_STEP = 0.25   # meters
ROTATION_STEP = 9.0       # degrees
COLLISION_SAMPLE_STEP = 0.05  # meters between swept-collision samples


class Action(enum.IntEnum):
    Forward = 0
    Backward = 1
    StrafeLeft = 2
    StrafeRight = 3
    TurnLeft = 4
    TurnRight = 5


# (longitudinal m, lateral m, rotation deg); lateral is positive to the agent's left.
ACTION_DELTAS = {
    Action.Forward: (TRANSLATION_STEP, 0.0, 0.0),
    Action.Backward: (-TRANSLATION_STEP, 0.0, 0.0),
    Action.StrafeLeft: (0.0, TRANSLATION_STEP, 0.0),
    Action.StrafeRight: (0.0, -TRANSLATION_STEP, 0.0),
    Action.TurnLeft: (0.0, 0.0, ROTATION_STEP),
    Action.TurnRight: (0.0, 0.0, -ROTATION_STEP),
}


@dataclasses.dataclass(frozen=True)
class Pose:
    x: float
    y: float
    theta: float  # degrees in [0, 360)


@dataclasses.dataclass(frozen=True)
class StepOutcome:
    true_pose: Pose
    est_pose: Pose
    bump: bool


@dataclasses.dataclass
class NoiseConfig:
    """Dead-reckoning noise level.

    Each step perturbs the estimated displacement by trunc_gauss(eta) scaled by
    the step length: 0.25 m for the longitudinal/lateral axes, 9 deg for heading.
    eta = 0 means dead reckoning is exact.
    """

    eta: float = 0.0
    rng_seed: int = 0

    def make_rng(self) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence(self.rng_seed))


def wrap_angle(theta: float) -> float:
    """Normalize an angle in degrees to [0, 360)."""
    return theta % 360.0


def displacement(theta_deg: float, d_long: float, d_lat: float):
    """World-frame (dx, dy) of an agent-frame displacement at heading theta.

    Shared by the true and estimated transitions so that, at eta=0, both
    integrate bit-identical floats.
    """
    rad = math.radians(theta_deg)
    c, s = math.cos(rad), math.sin(rad)
    return d_long * c - d_lat * s, d_long * s + d_lat * c


def trunc_gauss(rng: np.random.Generator, std: float) -> float:
    """Zero-mean Gaussian with std `std`, truncated to [-std, +std] (rejection)."""
    if std <= 0.0:
        return 0.0
    while True:
        v = rng.normal(0.0, std)
        if abs(v) <= std:
            return float(v)


def transition_true(plan: worldmod.Floorplan, mode: worldmod.WorldMode, pose: Pose, a: Action):
    """Apply action `a` to the true pose. Returns (new_pose, bump).

    Turns always succeed. A translation succeeds iff every sample point at
    0.05 m increments along the swept segment (endpoint included) is
    traversable; otherwise the pose is unchanged and bump=True. Doors are
    always traversable here regardless of mode.
    """
    if not worldmod.is_traversable(plan, mode, (pose.x, pose.y)):
        raise InvalidState(f"pose ({pose.x:.3f}, {pose.y:.3f}) is not in traversable space")
    d_long, d_lat, d_theta = ACTION_DELTAS[a]
    if d_theta != 0.0:
        return Pose(pose.x, pose.y, wrap_angle(pose.theta + d_theta)), False
    dx, dy = displacement(pose.theta, d_long, d_lat)
    n_samples = int(round(TRANSLATION_STEP / COLLISION_SAMPLE_STEP))
    for k in range(1, n_samples + 1):
        f = k / n_samples
        if not worldmod.is_traversable(plan, mode, (pose.x + dx * f, pose.y + dy * f)):
            return pose, True
    return Pose(pose.x + dx, pose.y + dy, pose.theta), False


def transition_estimated(est: Pose, a: Action, bump: bool, noise: NoiseConfig,
                         rng: np.random.Generator) -> Pose:
    """Dead-reckoning update of the estimated pose.

    The nominal displacement of `a` is integrated in the *estimated* frame; a
    bumped translation integrates as zero (the bump sensor reports the failure).
    Independent truncated-Gaussian perturbations, scaled by the step lengths,
    are then added to the longitudinal, lateral, and angular components. Draw
    order is fixed (long, lat, theta) for reproducibility.
    """
    d_long, d_lat, d_theta = ACTION_DELTAS[a]
    if bump:
        d_long = 0.0
        d_lat = 0.0
    if noise.eta > 0.0:
        d_long += trunc_gauss(rng, noise.eta) * TRANSLATION_STEP
        d_lat += trunc_gauss(rng, noise.eta) * TRANSLATION_STEP
        d_theta += trunc_gauss(rng, noise.eta) * ROTATION_STEP
    dx, dy = displacement(est.theta, d_long, d_lat)
    return Pose(est.x + dx, est.y + dy, wrap_angle(est.theta + d_theta))
