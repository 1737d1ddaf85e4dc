"""Shortest-path planning on occupancy grids and the path-following controller.

Paths are 8-connected cell sequences; axial moves cost 1, diagonals sqrt(2)
(costs are in cell units). Occupied cells are inflated by a Euclidean disc of
``inflation_radius`` (cells within radius/resolution of an obstacle cell,
center to center, become impassable). Unknown cells block passage when
``unknown_is_free`` is false but are never inflated. The start cell is exempt
from inflation — the agent already occupies it — but a start cell that is
itself Occupied (or Unknown under strict semantics) raises InvalidStart.
"""
from __future__ import annotations

import dataclasses
import math
from typing import List, Optional, Tuple, Union

import numpy as np

from . import _kernels
from .errors import InvalidStart, NoPath
from .kinematics import (ACTION_DELTAS, COLLISION_SAMPLE_STEP,
                         TRANSLATION_STEP, Action, Pose, displacement)
from .mapping import FREE, OCCUPIED, UNKNOWN, OccupancyGrid

DEFAULT_INFLATION_RADIUS = 0.10  # meters (2 cells at the default resolution)

HEADING_TOLERANCE = 4.5   # degrees: half a turn quantum
LATERAL_TOLERANCE = 0.125  # meters: half a translation step
WAYPOINT_LOOKAHEAD = 0.75  # meters: nearest path cell at least this far away

Cell = Tuple[int, int]


@dataclasses.dataclass
class PlanQuery:
    map: OccupancyGrid
    start: Pose
    goal: Union[Cell, Tuple[float, float]]  # grid cell (ints) or continuous point
    unknown_is_free: bool = False
    inflation_radius: float = DEFAULT_INFLATION_RADIUS

    def __post_init__(self):
        if self.inflation_radius < 0:
            raise ValueError("inflation_radius must be >= 0")


_OFFSET_CACHE = {}


def inflation_offsets(radius: float, resolution: float) -> Tuple[np.ndarray, np.ndarray]:
    """Cell offsets (dx, dy arrays) of the Euclidean inflation disc."""
    key = (radius, resolution)
    if key not in _OFFSET_CACHE:
        r_cells = radius / resolution
        n = math.floor(r_cells + 1e-9)
        offs = [(dx, dy) for dx in range(-n, n + 1) for dy in range(-n, n + 1)
                if dx * dx + dy * dy <= r_cells * r_cells + 1e-9]
        ox = np.array([o[0] for o in offs], dtype=np.int64)
        oy = np.array([o[1] for o in offs], dtype=np.int64)
        _OFFSET_CACHE[key] = (ox, oy)
    return _OFFSET_CACHE[key]


def compute_passable(cells: np.ndarray, unknown_is_free: bool, inflation_radius: float,
                     resolution: float) -> np.ndarray:
    """uint8 passability mask for a raw cell-state array."""
    ox, oy = inflation_offsets(inflation_radius, resolution)
    return _kernels.passable_mask(cells, 1 if unknown_is_free else 0, ox, oy)


def reconstruct_path(parent: np.ndarray, grid_h: int, target_ix: int, target_iy: int) -> List[Cell]:
    """Walk the parent array back from the target; returns array-frame cells."""
    path = []
    idv = target_ix * grid_h + target_iy
    while idv >= 0:
        path.append((idv // grid_h, idv % grid_h))
        idv = parent[idv]
    path.reverse()
    return path


def search_to_cell(passable: np.ndarray, start: Cell, goal: Cell) -> Optional[List[Cell]]:
    """A* in array-frame cells; None when unreachable."""
    found, tx, ty, parent = _kernels.grid_search(
        passable, start[0], start[1], 0, passable, goal[0], goal[1], 1)
    if not found:
        return None
    return reconstruct_path(parent, passable.shape[0], tx, ty)


def search_to_mask(passable: np.ndarray, start: Cell, goal_mask: np.ndarray):
    """Dijkstra to the nearest goal-mask cell (ties: lexicographic cell order).

    Returns (goal_cell, path) in array-frame cells, or (None, None).
    """
    found, tx, ty, parent = _kernels.grid_search(
        passable, start[0], start[1], 1, goal_mask, 0, 0, 0)
    if not found:
        return None, None
    return (tx, ty), reconstruct_path(parent, passable.shape[0], tx, ty)


def path_cost(path: List[Cell]) -> float:
    """Cost in cell units, recomputed from step counts: axial + diagonal*sqrt(2)."""
    n_axial = 0
    n_diag = 0
    for (ax, ay), (bx, by) in zip(path, path[1:]):
        if ax != bx and ay != by:
            n_diag += 1
        else:
            n_axial += 1
    return n_axial + n_diag * math.sqrt(2.0)


def plan_path(q: PlanQuery) -> List[Cell]:
    """Minimal-cost 8-connected path from the start pose's cell to the goal.

    Returns world-frame cells, start cell first. The search window covers the
    map's stored extent plus start and goal, padded by the inflation radius;
    cells outside the stored extent read Unknown.
    """
    grid = q.map
    res = grid.resolution
    start_cell = grid.world_to_cell(q.start.x, q.start.y)
    gx, gy = q.goal
    if isinstance(gx, (int, np.integer)) and isinstance(gy, (int, np.integer)):
        goal_cell = (int(gx), int(gy))
    else:
        goal_cell = (math.floor(gx / res), math.floor(gy / res))

    pad = math.ceil(q.inflation_radius / res) + 2
    h, w = grid.cells.shape
    ox, oy = grid.origin_cell
    x0 = min(start_cell[0], goal_cell[0], ox) - pad
    y0 = min(start_cell[1], goal_cell[1], oy) - pad
    x1 = max(start_cell[0], goal_cell[0], ox + w - 1) + pad
    y1 = max(start_cell[1], goal_cell[1], oy + h - 1) + pad
    window = np.zeros((y1 - y0 + 1, x1 - x0 + 1), dtype=np.uint8)
    if h > 0 and w > 0:
        window[oy - y0:oy - y0 + h, ox - x0:ox - x0 + w] = grid.cells

    six, siy = start_cell[0] - x0, start_cell[1] - y0
    state = window[siy, six]
    if state == OCCUPIED or (state == UNKNOWN and not q.unknown_is_free):
        raise InvalidStart(f"start cell {start_cell} is not passable ({int(state)})")

    passable = compute_passable(window, q.unknown_is_free, q.inflation_radius, res)
    path = search_to_cell(passable, (six, siy), (goal_cell[0] - x0, goal_cell[1] - y0))
    if path is None:
        raise NoPath(f"no path from {start_cell} to {goal_cell}")
    return [(ix + x0, iy + y0) for ix, iy in path]


def _sweep_clear(pose: Pose, action: Action, resolution: float,
                 cells: np.ndarray, ox: int, oy: int) -> bool:
    """True unless the action's swept samples cross a known-Occupied cell.

    Samples the exact points the collision model tests, so at zero drift a
    clear sweep is guaranteed not to bump on mapped obstacles.
    """
    d_long, d_lat, _ = ACTION_DELTAS[action]
    dx, dy = displacement(pose.theta, d_long, d_lat)
    n = int(round(TRANSLATION_STEP / COLLISION_SAMPLE_STEP))
    h, w = cells.shape
    for k in range(1, n + 1):
        f = k / n
        ix = math.floor((pose.x + dx * f) / resolution) - ox
        iy = math.floor((pose.y + dy * f) / resolution) - oy
        if 0 <= iy < h and 0 <= ix < w and cells[iy, ix] == OCCUPIED:
            return False
    return True


def _chord_clear(x0: float, y0: float, x1: float, y1: float, resolution: float,
                 path_set, cells: Optional[np.ndarray], ox: int, oy: int) -> bool:
    """True when the straight segment stays inside the path's safe corridor.

    The corridor is the path cells plus their 8-neighbors: path cells are
    inflation-certified, so no cell of that dilated set can be a wall. Samples
    in the agent's own cell are exempt (the start cell is never certified).
    Known-Occupied cells reject the chord outright.
    """
    length = math.hypot(x1 - x0, y1 - y0)
    n = max(1, math.ceil(length / (resolution * 0.5)))
    own = (math.floor(x0 / resolution), math.floor(y0 / resolution))
    for k in range(1, n + 1):
        f = k / n
        cx = math.floor((x0 + (x1 - x0) * f) / resolution)
        cy = math.floor((y0 + (y1 - y0) * f) / resolution)
        if (cx, cy) == own:
            continue
        if cells is not None:
            ix, iy = cx - ox, cy - oy
            if 0 <= iy < cells.shape[0] and 0 <= ix < cells.shape[1] \
                    and cells[iy, ix] == OCCUPIED:
                return False
        if (cx, cy) in path_set:
            continue
        for dx in (-1, 0, 1):
            if (cx + dx, cy - 1) in path_set or (cx + dx, cy) in path_set \
                    or (cx + dx, cy + 1) in path_set:
                break
        else:
            return False
    return True


def path_to_actions(path: List[Cell], current: Pose, resolution: float = 0.05,
                    cells: Optional[np.ndarray] = None,
                    origin_cell: Cell = (0, 0)) -> Action:
    """Next action of a greedy path-following controller.

    The waypoint is the first path cell at least 0.20 m from the current
    position whose straight chord stays inside the path's safe corridor (see
    _chord_clear); with no such cell, the farthest corridor-contained cell;
    with none at all, the next path cell. The corridor constraint keeps the
    controller from cutting corners the 8-connected path only rounds — aiming
    past a doorway edge, for example — which would wedge it against a wall the
    planner correctly avoided. Heading error above 4.5 deg emits the turn that
    reduces it (exactly-behind ties go TurnLeft); with heading aligned, a
    lateral offset beyond 0.125 m emits the matching strafe; otherwise Forward.

    `cells`/`origin_cell` optionally give the occupancy array the path was
    planned on, letting the corridor test also reject chords through cells the
    caller believes are obstacles.
    """
    if not path:
        raise ValueError("path must be non-empty")
    path_set = set(path)
    ox, oy = origin_cell
    wx = wy = None
    best = None
    for cx, cy in path:
        px = (cx + 0.5) * resolution
        py = (cy + 0.5) * resolution
        if not _chord_clear(current.x, current.y, px, py, resolution,
                            path_set, cells, ox, oy):
            continue
        best = (px, py)
        if math.hypot(px - current.x, py - current.y) >= WAYPOINT_LOOKAHEAD:
            break
    if best is not None:
        wx, wy = best
    else:
        cx, cy = path[1] if len(path) > 1 else path[0]
        wx = (cx + 0.5) * resolution
        wy = (cy + 0.5) * resolution
    bearing = math.degrees(math.atan2(wy - current.y, wx - current.x))
    err = (bearing - current.theta) % 360.0
    if err > 180.0:
        err -= 360.0
    if abs(err) > HEADING_TOLERANCE:
        return Action.TurnLeft if err > 0 else Action.TurnRight
    dist = math.hypot(wx - current.x, wy - current.y)
    lateral = dist * math.sin(math.radians(err))  # + means waypoint is to the left
    if abs(lateral) > LATERAL_TOLERANCE:
        primary = Action.StrafeLeft if lateral > 0 else Action.StrafeRight
    else:
        primary = Action.Forward
    if cells is None:
        return primary
    # A translation into a mapped obstacle is a certain bump that changes
    # nothing (the obstacle is already known), so it would repeat forever.
    # Veto it and dodge: same preference order every time, first translation
    # whose swept samples are all clear of known-Occupied cells; all blocked
    # means the agent is cornered and spins.
    toward = Action.StrafeLeft if lateral > 0 else Action.StrafeRight
    away = Action.StrafeRight if lateral > 0 else Action.StrafeLeft
    tried = []
    for action in (primary, Action.Forward, toward, away):
        if action not in tried:
            tried.append(action)
            if _sweep_clear(current, action, resolution, cells, ox, oy):
                return action
    return Action.TurnLeft
