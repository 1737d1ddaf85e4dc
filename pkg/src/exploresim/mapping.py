"""The agent's map: growable trinary occupancy grid, scan fusion, ego crops.

The grid lives on the same world-anchored cell lattice as floorplans: world
cell (cx, cy) covers [cx*res, (cx+1)*res) x [cy*res, (cy+1)*res). The backing
array grows as scans demand, but cells never move — ``origin_cell`` records the
world cell stored at array index [0, 0]. That fixed anchoring is what makes
pose-estimate drift show up as aliasing in the map instead of being absorbed.
"""
from __future__ import annotations

import dataclasses
import math
from typing import List, Tuple

import numpy as np

from . import _kernels
from .errors import ExploresimError
from .kinematics import Pose
from .sensor import DepthScan, SensorConfig, DEFAULT_SENSOR, ray_angles

UNKNOWN = 0
FREE = 1
OCCUPIED = 2

_GROW_MARGIN = 32  # cells of slack added on each growth


class OccupancyGrid:
    __slots__ = ("resolution", "cells", "origin_cell", "covered_cells")

    def __init__(self, resolution: float = 0.05):
        if resolution <= 0:
            raise ExploresimError("resolution must be positive")
        self.resolution = resolution
        self.cells = np.zeros((0, 0), dtype=np.uint8)
        self.origin_cell = (0, 0)  # world cell stored at cells[0, 0]
        self.covered_cells = 0     # non-Unknown count, maintained incrementally

    @property
    def origin(self) -> Tuple[float, float]:
        """World coordinates of the low corner of cells[0, 0]."""
        return (self.origin_cell[0] * self.resolution, self.origin_cell[1] * self.resolution)

    def copy(self) -> "OccupancyGrid":
        out = OccupancyGrid(self.resolution)
        out.cells = self.cells.copy()
        out.origin_cell = self.origin_cell
        out.covered_cells = self.covered_cells
        return out

    def world_to_cell(self, x: float, y: float) -> Tuple[int, int]:
        return (math.floor(x / self.resolution), math.floor(y / self.resolution))

    def state_at(self, cx: int, cy: int) -> int:
        """State of world cell (cx, cy); Unknown outside the stored extent."""
        ix = cx - self.origin_cell[0]
        iy = cy - self.origin_cell[1]
        h, w = self.cells.shape
        if 0 <= ix < w and 0 <= iy < h:
            return int(self.cells[iy, ix])
        return UNKNOWN

    def ensure_bbox(self, cx0: int, cy0: int, cx1: int, cy1: int) -> None:
        """Grow the backing array to cover world cells [cx0..cx1] x [cy0..cy1]."""
        h, w = self.cells.shape
        ox, oy = self.origin_cell
        if w > 0 and cx0 >= ox and cy0 >= oy and cx1 < ox + w and cy1 < oy + h:
            return
        nx0 = min(cx0, ox) - _GROW_MARGIN if w > 0 else cx0 - _GROW_MARGIN
        ny0 = min(cy0, oy) - _GROW_MARGIN if h > 0 else cy0 - _GROW_MARGIN
        nx1 = max(cx1, ox + w - 1) + _GROW_MARGIN if w > 0 else cx1 + _GROW_MARGIN
        ny1 = max(cy1, oy + h - 1) + _GROW_MARGIN if h > 0 else cy1 + _GROW_MARGIN
        grown = np.zeros((ny1 - ny0 + 1, nx1 - nx0 + 1), dtype=np.uint8)
        if w > 0 and h > 0:
            grown[oy - ny0:oy - ny0 + h, ox - nx0:ox - nx0 + w] = self.cells
        self.cells = grown
        self.origin_cell = (nx0, ny0)

    def recount_covered(self) -> int:
        """Full recount of non-Unknown cells (checks the incremental counter)."""
        return int(np.count_nonzero(self.cells))


@dataclasses.dataclass
class EgoCrops:
    """Agent-centered, heading-up map crops at two scales.

    Crop cell (r, c) samples the world point
    ``pos + f*u_fwd + l*u_right`` with f = (40 - r)*crop_res and
    l = (c - 40)*crop_res, where u_fwd = (cos th, sin th) and
    u_right = (sin th, -cos th). The agent sits at index (40, 40); one meter
    ahead on the fine crop is 20 cells above center.
    """

    coarse: np.ndarray  # (80, 80) uint8, 0.5 m per cell (40 m extent)
    fine: np.ndarray    # (80, 80) uint8, 0.05 m per cell (4 m extent)


CROP_SIZE = 80
COARSE_EXTENT = 40.0
FINE_EXTENT = 4.0


def integrate(grid: OccupancyGrid, est_pose: Pose, scan: DepthScan,
              cfg: SensorConfig = DEFAULT_SENSOR) -> OccupancyGrid:
    """Fuse one scan into the map at the estimated pose (in place).

    Every cell strictly before a ray's hit distance (or before max_range for
    clipped rays) becomes Free; hit cells become Occupied. Occupied wins
    conflicts within one call; across calls the last write wins. Returns the
    same grid for chaining.
    """
    res = grid.resolution
    reach = cfg.max_range + 2 * res
    cx0, cy0 = grid.world_to_cell(est_pose.x - reach, est_pose.y - reach)
    cx1, cy1 = grid.world_to_cell(est_pose.x + reach, est_pose.y + reach)
    grid.ensure_bbox(cx0, cy0, cx1, cy1)
    angles = np.radians(ray_angles(cfg) + est_pose.theta)
    n_new = _kernels.integrate_scan(
        grid.cells, grid.origin_cell[0], grid.origin_cell[1],
        est_pose.x, est_pose.y, angles, scan.depths,
        scan.clipped.view(np.uint8), res)
    grid.covered_cells += int(n_new)
    return grid


def coverage(grid: OccupancyGrid) -> float:
    """Covered (non-Unknown) area in square meters."""
    return grid.covered_cells * grid.resolution * grid.resolution


def _sample_states(grid: OccupancyGrid, est_pose: Pose, n: int, crop_res: float, sub: int) -> np.ndarray:
    """Sample map states on the rotated crop lattice, (n*sub, n*sub) uint8."""
    k = n * sub
    center = n // 2
    # Offset of each sample row/col in crop-frame meters.
    base = np.arange(n, dtype=np.float64)
    du = ((np.arange(sub, dtype=np.float64) + 0.5) / sub - 0.5) * crop_res
    f = np.repeat((center - base) * crop_res, sub) + np.tile(-du, n)
    lv = np.repeat((base - center) * crop_res, sub) + np.tile(du, n)
    th = math.radians(est_pose.theta)
    ufx, ufy = math.cos(th), math.sin(th)
    urx, ury = math.sin(th), -math.cos(th)
    wx = est_pose.x + f[:, None] * ufx + lv[None, :] * urx
    wy = est_pose.y + f[:, None] * ufy + lv[None, :] * ury
    res = grid.resolution
    ix = np.floor(wx / res).astype(np.int64) - grid.origin_cell[0]
    iy = np.floor(wy / res).astype(np.int64) - grid.origin_cell[1]
    h, w = grid.cells.shape
    states = np.zeros((k, k), dtype=np.uint8)
    inside = (ix >= 0) & (ix < w) & (iy >= 0) & (iy < h)
    if inside.any():
        states[inside] = grid.cells[iy[inside], ix[inside]]
    return states


def ego_crops(grid: OccupancyGrid, est_pose: Pose) -> EgoCrops:
    """Egocentric two-scale crops (see EgoCrops for the exact convention).

    Fine is a 1:1 nearest-neighbor resample; coarse reduces 10x10 blocks of
    map-resolution samples by majority over the covered (Free/Occupied)
    samples, with Occupied winning ties; a coarse cell is Unknown only when
    none of its samples are covered. Points outside the stored extent read
    Unknown.
    """
    fine = _sample_states(grid, est_pose, CROP_SIZE, FINE_EXTENT / CROP_SIZE, 1)
    coarse_res = COARSE_EXTENT / CROP_SIZE
    sub = int(round(coarse_res / grid.resolution))
    if sub < 1:
        sub = 1
    coarse_samples = _sample_states(grid, est_pose, CROP_SIZE, coarse_res, sub)
    coarse = _kernels.crop_majority(coarse_samples, CROP_SIZE, sub)
    return EgoCrops(coarse=coarse, fine=fine)


def true_coverage_map(plan, mode, poses: List[Pose], cfg: SensorConfig = DEFAULT_SENSOR) -> OccupancyGrid:
    """Map built by integrating scans rendered at the *true* poses."""
    from .sensor import render_scan  # local import to avoid cycle at module load

    grid = OccupancyGrid(plan.resolution)
    for pose in poses:
        scan = render_scan(plan, mode, pose, cfg)
        integrate(grid, pose, scan, cfg)
    return grid


# ---------------------------------------------------------------------------
# PGM snapshots
# ---------------------------------------------------------------------------

_PGM_LEVELS = {UNKNOWN: 0, OCCUPIED: 128, FREE: 255}


def save_pgm(grid: OccupancyGrid, path: str) -> None:
    """Write a P2 snapshot: 0=Unknown, 128=Occupied, 255=Free, top row first."""
    h, w = grid.cells.shape
    lut = np.zeros(3, dtype=np.int64)
    for state, level in _PGM_LEVELS.items():
        lut[state] = level
    ox, oy = grid.origin
    lines = ["P2", f"# origin=({ox!r},{oy!r}) resolution={grid.resolution!r}", f"{w} {h}", "255"]
    for iy in range(h - 1, -1, -1):
        lines.append(" ".join(str(int(v)) for v in lut[grid.cells[iy]]))
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines))
        fh.write("\n")
