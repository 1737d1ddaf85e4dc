"""Exploration policies: observation in, one action out.

All policies are deterministic functions of (internal state, observation, rng
stream). Only the oracle-frontier variant sees ground truth — it exists as an
explicit upper bound for the geometry/affordance mismatch experiments.
"""
from __future__ import annotations

import math
from typing import Optional, Tuple

import numpy as np

from . import _kernels, mapping, planner
from . import world as worldmod
from .kinematics import Action, Pose
from .mapping import OccupancyGrid

ARRIVAL_TOLERANCE = 0.25  # meters: frontier target counts as reached
PATH_REUSE_TOLERANCE = 0.30  # meters: max drift off the committed path before replanning
TARGET_BAN_STEPS = 100  # steps an arrived-at target stays excluded from selection
TARGET_HOLD_FACTOR = 4   # hold watchdog: limit = FACTOR * committed path length + SLACK
TARGET_HOLD_SLACK = 80


class PolicyObservation:
    """What a policy is allowed to see. No ground-truth fields.

    `crops` is computed lazily on first access so policies that ignore it pay
    nothing for it.
    """

    __slots__ = ("scan", "bump_prev", "est_pose", "map_view", "_crops")

    def __init__(self, scan, bump_prev: bool, est_pose: Pose, map_view: OccupancyGrid):
        self.scan = scan
        self.bump_prev = bump_prev
        self.est_pose = est_pose
        self.map_view = map_view
        self._crops = None

    @property
    def crops(self) -> mapping.EgoCrops:
        if self._crops is None:
            self._crops = mapping.ego_crops(self.map_view, self.est_pose)
        return self._crops


def _as_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def random_policy(obs: PolicyObservation, rng: np.random.Generator) -> Action:
    """Uniform over the 6 actions; ignores the observation entirely."""
    return Action(int(rng.integers(0, 6)))


def straight_policy(state: "StraightPolicy", obs: PolicyObservation,
                    rng: np.random.Generator) -> Action:
    """Forward until a bump, then k ~ uniform[1,20] turns one way, repeat."""
    if state.turns_left > 0:
        state.turns_left -= 1
        return state.turn_action
    if obs.bump_prev:
        k = int(rng.integers(1, 21))
        state.turn_action = Action.TurnLeft if rng.random() < 0.5 else Action.TurnRight
        state.turns_left = k - 1
        return state.turn_action
    return Action.Forward


def _reuse_path(state: "FrontierPolicy", passable: np.ndarray, pose: Pose,
                ox: int, oy: int, res: float) -> Optional[list]:
    """Remaining committed path in window cells, or None to force a fresh search.

    Reusable only while it still ends at the committed target, the agent sits
    within PATH_REUSE_TOLERANCE of some path cell, and every cell from there on
    is passable on the current map — so any map update that would change the
    plan also invalidates the reuse.
    """
    stored = state.path
    if not stored or stored[-1] != state.target:
        return None
    h, w = passable.shape
    px = np.fromiter((c[0] for c in stored), dtype=np.int64, count=len(stored)) - ox
    py = np.fromiter((c[1] for c in stored), dtype=np.int64, count=len(stored)) - oy
    if px.min() < 0 or px.max() >= w or py.min() < 0 or py.max() >= h:
        return None
    dx = (px + ox + 0.5) * res - pose.x
    dy = (py + oy + 0.5) * res - pose.y
    d2 = dx * dx + dy * dy
    i = int(np.argmin(d2))
    if d2[i] > PATH_REUSE_TOLERANCE ** 2:
        return None
    if not passable[py[i:], px[i:]].all():
        return None
    return list(zip(px[i:].tolist(), py[i:].tolist()))


def frontier_policy(state: "FrontierPolicy", obs: PolicyObservation) -> Action:
    """Plan to the nearest frontier cell; spin left when no frontier remains.

    Frontier cells are Free map cells 4-adjacent to Unknown. A fresh target is
    the nearest frontier by path cost under unknown-is-free planning semantics
    (cost ties break lexicographically by cell). Once chosen, the target is a
    committed location: the agent walks to it until it is reached (within
    0.25 m) or becomes unreachable, and only then selects anew. Approaching a
    frontier scans it away long before arrival, so invalidating the target the
    moment it stops being a frontier — the obvious alternative — makes the
    nearest-cost ranking flip between opposite frontier clusters almost every
    step, and the agent burns the episode turning back and forth between them
    instead of walking. Commitment matches the underlying scheme: pick a point
    at the edge of unexplored space, go there, repeat. The path is replanned
    on the updated map every step.

    A frontier can survive its own visit: an Unknown pocket occluded from every
    reachable vantage (a sliver behind a wall corner) keeps its Free neighbor a
    frontier forever. Re-selecting that neighbor right after arriving at it
    livelocks the agent, so arrived-at targets are banned from selection for
    TARGET_BAN_STEPS steps.

    Arrival is not the only livelock: a target whose committed path keeps
    breaking (inflation pockets near thin corridors under a short-range
    sensor) can be re-selected every step while the agent shuffles in place
    and never arrives. A hold watchdog counts the cumulative steps each cell
    has spent as the committed target and bans any holder that exceeds
    TARGET_HOLD_FACTOR times its committed path length plus
    TARGET_HOLD_SLACK — generous for any target actually being walked to,
    and a fast trip for one the controller only circles. The count survives
    the ban, so a re-selected repeat offender is re-banned after one step.
    """
    state.step_count += 1
    grid = obs.map_view
    if grid.cells.size == 0:
        return Action.TurnLeft
    pose = obs.est_pose
    res = grid.resolution
    ox, oy = grid.origin_cell
    h, w = grid.cells.shape
    scx, scy = grid.world_to_cell(pose.x, pose.y)
    six, siy = scx - ox, scy - oy
    if not (0 <= six < w and 0 <= siy < h):
        return Action.TurnLeft
    cells = state.planning_cells(grid)
    if cells[siy, six] == mapping.OCCUPIED:
        # The map currently claims the agent's own cell is a wall (drift
        # artifact); the next scan re-frees it. Spin rather than plan garbage.
        return Action.TurnLeft
    passable = planner.compute_passable(cells, True, state.inflation_radius, res)
    frontiers = _kernels.frontier_mask(cells)

    target = state.target
    if target is not None:
        rec = state.held.get(target)
        if rec is not None:
            rec[0] += 1
            if rec[0] >= rec[1]:
                state.banned[target] = state.step_count + TARGET_BAN_STEPS
                target = None
    if target is not None:
        tix, tiy = target[0] - ox, target[1] - oy
        if not (0 <= tix < w and 0 <= tiy < h):
            target = None
        else:
            dx = (target[0] + 0.5) * res - pose.x
            dy = (target[1] + 0.5) * res - pose.y
            if (scx, scy) == target or math.hypot(dx, dy) <= ARRIVAL_TOLERANCE:
                state.banned[target] = state.step_count + TARGET_BAN_STEPS
                state.held.pop(target, None)
                target = None

    path = None
    if target is not None:
        # Follow the committed path as long as it survives map updates; once
        # it breaks (a dodge left it, or a newly seen wall blocks it) fall
        # through to a fresh nearest-frontier selection. Goal-directed search
        # back to the old target would cost a full-map sweep here — corridor
        # layouts starve the heuristic — for a target that was only ever the
        # nearest frontier of a stale map.
        path = _reuse_path(state, passable, pose, ox, oy, res)
        if path is None:
            target = None
    if target is None:
        if state.banned:
            state.banned = {c: exp for c, exp in state.banned.items()
                            if exp > state.step_count}
            for (bx, by) in state.banned:
                bix, biy = bx - ox, by - oy
                if 0 <= bix < w and 0 <= biy < h:
                    frontiers[biy, bix] = False
        goal, path = planner.search_to_mask(passable, (six, siy), frontiers)
        if goal is None and frontiers.any():
            # Frontiers exist but the inflated mask walls the agent in — a
            # tight dodge can leave it inside the inflation band, where every
            # neighbor cell is impassable. Retry uninflated so it can walk
            # back out; the controller's sweep veto still guards real walls.
            raw = planner.compute_passable(cells, True, 0.0, res)
            goal, path = planner.search_to_mask(raw, (six, siy), frontiers)
        if goal is None:
            state.target = None
            return Action.TurnLeft
        target = (goal[0] + ox, goal[1] + oy)
        if target == (scx, scy):
            # Own cell is the nearest frontier; turning in place resolves it
            # (or the ban moves selection on if an occluded pocket keeps it a
            # frontier even from here).
            state.banned[target] = state.step_count + TARGET_BAN_STEPS
            state.held.pop(target, None)
            state.target = None
            return Action.TurnLeft
        limit = TARGET_HOLD_FACTOR * len(path) + TARGET_HOLD_SLACK
        rec = state.held.get(target)
        if rec is None:
            state.held[target] = [0, limit]
        else:
            rec[1] = min(rec[1], limit)
    state.target = target
    world_path = [(ix + ox, iy + oy) for ix, iy in path]
    state.path = world_path
    return planner.path_to_actions(world_path, pose, resolution=res,
                                   cells=cells, origin_cell=(ox, oy))


def oracle_frontier_policy(state: "OracleFrontierPolicy", obs: PolicyObservation,
                           plan: worldmod.Floorplan) -> Action:
    """frontier_policy with ground-truth door affordance.

    Map cells that are Occupied but are Door cells in the floorplan are
    treated as Free for frontier detection and planning, so mis-sensed doors
    (door_mismatch worlds) neither hide frontiers nor block paths. On matched
    worlds doors never map as Occupied and this collapses to frontier_policy.
    """
    return frontier_policy(state, obs)


class RandomPolicy:
    name = "random"

    def __init__(self):
        self._rng = np.random.default_rng(0)

    def reset(self, rng=None) -> None:
        self._rng = _as_rng(rng)

    def act(self, obs: PolicyObservation) -> Action:
        return random_policy(obs, self._rng)


class StraightPolicy:
    name = "straight"

    def __init__(self):
        self._rng = np.random.default_rng(0)
        self.turns_left = 0
        self.turn_action = Action.TurnLeft

    def reset(self, rng=None) -> None:
        self._rng = _as_rng(rng)
        self.turns_left = 0
        self.turn_action = Action.TurnLeft

    def act(self, obs: PolicyObservation) -> Action:
        return straight_policy(self, obs, self._rng)


class FrontierPolicy:
    name = "frontier"

    def __init__(self, inflation_radius: float = planner.DEFAULT_INFLATION_RADIUS):
        self.inflation_radius = inflation_radius
        self.target: Optional[Tuple[int, int]] = None  # world cell
        self.path: Optional[list] = None  # world cells, ends at target
        self.banned: dict = {}  # arrived-at world cell -> ban expiry step
        self.held: dict = {}  # committed world cell -> [steps held, hold limit]
        self.step_count = 0

    def reset(self, rng=None) -> None:
        self.target = None
        self.path = None
        self.banned = {}
        self.held = {}
        self.step_count = 0

    def planning_cells(self, grid: OccupancyGrid) -> np.ndarray:
        return grid.cells

    def act(self, obs: PolicyObservation) -> Action:
        return frontier_policy(self, obs)


class OracleFrontierPolicy(FrontierPolicy):
    name = "oracle-frontier"

    def __init__(self, plan: worldmod.Floorplan,
                 inflation_radius: float = planner.DEFAULT_INFLATION_RADIUS):
        super().__init__(inflation_radius)
        self.plan = plan
        self._door_mask = (plan.cells == worldmod.DOOR)

    def planning_cells(self, grid: OccupancyGrid) -> np.ndarray:
        """Map cells with Occupied-but-really-Door corrected to Free."""
        ox, oy = grid.origin_cell
        h, w = grid.cells.shape
        # Overlap of the map window with the floorplan extent.
        x0 = max(0, ox)
        y0 = max(0, oy)
        x1 = min(self.plan.width, ox + w)
        y1 = min(self.plan.height, oy + h)
        if x0 >= x1 or y0 >= y1:
            return grid.cells
        cells = grid.cells.copy()
        sub = cells[y0 - oy:y1 - oy, x0 - ox:x1 - ox]
        doors = self._door_mask[y0:y1, x0:x1]
        sub[(sub == mapping.OCCUPIED) & doors] = mapping.FREE
        return cells

    def act(self, obs: PolicyObservation) -> Action:
        return oracle_frontier_policy(self, obs, self.plan)


def make_policy(name: str, plan: Optional[worldmod.Floorplan] = None):
    """Instantiate a policy by its CLI name."""
    if name == "random":
        return RandomPolicy()
    if name == "straight":
        return StraightPolicy()
    if name == "frontier":
        return FrontierPolicy()
    if name == "oracle-frontier":
        if plan is None:
            raise ValueError("oracle-frontier needs the ground-truth floorplan")
        return OracleFrontierPolicy(plan)
    raise ValueError(f"unknown policy {name!r}")


POLICY_NAMES = ("random", "straight", "frontier", "oracle-frontier")
