"""Planar depth sensor: a horizontal fan of rays cast by exact grid traversal."""
from __future__ import annotations

import dataclasses

import numpy as np

from . import _kernels
from . import world as worldmod
from .errors import InvalidState
from .kinematics import Pose


@dataclasses.dataclass(frozen=True)
class SensorConfig:
    fov: float = 60.0        # degrees, full angular span
    n_rays: int = 61
    max_range: float = 3.0   # meters

    def __post_init__(self):
        if not (0.0 < self.fov <= 360.0):
            raise ValueError(f"fov must be in (0, 360], got {self.fov}")
        if self.n_rays < 2:
            raise ValueError(f"n_rays must be >= 2, got {self.n_rays}")
        if self.max_range <= 0.0:
            raise ValueError(f"max_range must be positive, got {self.max_range}")


DEFAULT_SENSOR = SensorConfig()


@dataclasses.dataclass
class DepthScan:
    depths: np.ndarray   # (n_rays,) float64 meters, 0 < d <= max_range
    clipped: np.ndarray  # (n_rays,) bool; True iff no surface hit within range


def ray_angles(cfg: SensorConfig) -> np.ndarray:
    """Ray directions in degrees relative to the agent heading.

    Evenly spaced over [-fov/2, +fov/2], endpoints included; the middle ray of
    an odd fan points straight ahead.
    """
    return np.linspace(-cfg.fov / 2.0, cfg.fov / 2.0, cfg.n_rays)


def render_scan(plan: worldmod.Floorplan, mode: worldmod.WorldMode, true_pose: Pose,
                cfg: SensorConfig = DEFAULT_SENSOR) -> DepthScan:
    """Depth along each ray to the first opaque cell boundary (DDA), clipped
    at max_range.

    Walls are always opaque; Door cells only under mode.door_mismatch. The
    pose's own cell is never tested for opacity, so an agent standing inside a
    doorway still senses past it; InvalidState is raised only when the pose is
    in a non-traversable cell (wall or out of bounds).
    """
    if not worldmod.is_traversable(plan, mode, (true_pose.x, true_pose.y)):
        raise InvalidState(
            f"cannot render from non-traversable pose ({true_pose.x:.3f}, {true_pose.y:.3f})")
    opaque = plan.opaque_mask(mode)
    angles = np.radians(ray_angles(cfg) + true_pose.theta)
    depths = np.empty(cfg.n_rays, dtype=np.float64)
    clipped = np.empty(cfg.n_rays, dtype=np.uint8)
    _kernels.cast_rays(opaque, true_pose.x, true_pose.y, angles,
                       cfg.max_range, plan.resolution, depths, clipped)
    return DepthScan(depths=depths, clipped=clipped.astype(bool))
