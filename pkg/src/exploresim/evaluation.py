"""Experiment harness: episodes, traces, coverage curves, SPL, downstream tasks.

Determinism contract: every randomized quantity is derived from an explicit
integer seed through numpy SeedSequence spawn keys, so identical configs
reproduce byte-identical traces and aggregates.
"""
from __future__ import annotations

import csv
import dataclasses
import json
import math
import os
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import mapping, planner, policies
from . import world as worldmod
from .errors import EmptyInput, EmptyLog, InvalidStart, NoPath
from .kinematics import (TRANSLATION_STEP, Action, NoiseConfig, Pose,
                         transition_estimated, transition_true)
from .mapping import OccupancyGrid, integrate
from .rewards import DEFAULT_REWARDS, RewardConfig, step_reward
from .sensor import DEFAULT_SENSOR, SensorConfig, render_scan

_TRANSLATIONS = (Action.Forward, Action.Backward, Action.StrafeLeft, Action.StrafeRight)

_POLICY_CODES = {"random": 0, "straight": 1, "frontier": 2, "oracle-frontier": 3}


# ---------------------------------------------------------------------------
# Trace data model
# ---------------------------------------------------------------------------

@dataclasses.dataclass
class TraceStep:
    t: int
    action: str
    true_pose: Pose
    est_pose: Pose
    bump: bool
    reward_total: float
    agent_coverage_m2: float
    true_coverage_m2: float


@dataclasses.dataclass
class EpisodeTrace:
    world: str
    policy: str
    eta: float
    seed: int
    door_mismatch: bool
    steps: List[TraceStep]
    # Final maps, attached for in-process consumers; never serialized.
    agent_map: Optional[OccupancyGrid] = None
    true_map: Optional[OccupancyGrid] = None


@dataclasses.dataclass
class SplRecord:
    l: float        # oracle shortest-path length, meters
    p: float        # executed path length, meters
    success: bool


@dataclasses.dataclass
class ExperienceLog:
    descriptors: np.ndarray   # (N, dim) float64, one row per exploration step
    poses: List[Pose]         # pose at which each descriptor was taken
    map: OccupancyGrid        # final explored map


# ---------------------------------------------------------------------------
# Seeding and pose sampling
# ---------------------------------------------------------------------------

def start_pose_seed(master_seed: int, world_idx: int, start_idx: int) -> np.random.SeedSequence:
    """Start poses depend only on (master, world, start): identical across
    policies and replicates so comparisons are paired."""
    return np.random.SeedSequence(master_seed, spawn_key=(0, world_idx, start_idx))


def episode_seed(master_seed: int, policy: str, world_idx: int, start_idx: int,
                 replicate: int) -> int:
    code = _POLICY_CODES[policy]
    ss = np.random.SeedSequence(master_seed, spawn_key=(1, code, world_idx, start_idx, replicate))
    return int(ss.generate_state(1, np.uint64)[0])


_SPAWN_CACHE: Dict[int, Tuple[worldmod.Floorplan, np.ndarray]] = {}


def spawnable_cells(plan: worldmod.Floorplan) -> np.ndarray:
    """(N, 2) array of (cy, cx) Free cells where the agent's body fits.

    A pose is spawnable when its cell is Free and no wall cell lies within the
    collision inflation radius: an agent placed closer than that is wedged --
    with the start cell exempt from inflation it can stand there, but every
    move out of the cell is blocked, so planners can never route it anywhere.
    """
    key = id(plan)
    hit = _SPAWN_CACHE.get(key)
    if hit is not None and hit[0] is plan:
        return hit[1]
    wall = plan.cells == worldmod.WALL
    near_wall = np.zeros_like(wall)
    h, w = wall.shape
    ys, xs = np.nonzero(wall)
    offs_x, offs_y = planner.inflation_offsets(planner.DEFAULT_INFLATION_RADIUS,
                                               plan.resolution)
    for dx, dy in zip(offs_x, offs_y):
        ty, tx = ys + dy, xs + dx
        ok = (ty >= 0) & (ty < h) & (tx >= 0) & (tx < w)
        near_wall[ty[ok], tx[ok]] = True
    cells = np.argwhere((plan.cells == worldmod.FREE) & ~near_wall)
    _SPAWN_CACHE[key] = (plan, cells)
    return cells


def sample_start_pose(plan: worldmod.Floorplan, rng: np.random.Generator) -> Pose:
    """Uniform over spawnable Free cells, position at the cell center, heading
    uniform.

    Cell centers sit at odd multiples of res/2, so poses never start on the
    cell lattice lines.
    """
    free = spawnable_cells(plan)  # rows of (cy, cx)
    i = int(rng.integers(0, free.shape[0]))
    cy, cx = int(free[i][0]), int(free[i][1])
    res = plan.resolution
    theta = float(rng.uniform(0.0, 360.0))
    return Pose((cx + 0.5) * res, (cy + 0.5) * res, theta)


def sample_goal_poses(plan: worldmod.Floorplan, n: int, rng: np.random.Generator) -> List[Pose]:
    return [sample_start_pose(plan, rng) for _ in range(n)]


# ---------------------------------------------------------------------------
# Episode loop
# ---------------------------------------------------------------------------

def run_episode(plan: worldmod.Floorplan, mode: worldmod.WorldMode, policy, eta: float,
                seed: int, steps: int, *, start: Optional[Pose] = None,
                sensor_cfg: SensorConfig = DEFAULT_SENSOR,
                reward_cfg: RewardConfig = DEFAULT_REWARDS,
                snapshot_every: int = 0, snapshot_dir: Optional[str] = None) -> EpisodeTrace:
    """Closed-loop simulation of one exploration episode.

    Per step: the policy acts on the last scan, the true pose transitions with
    collision handling, the estimate dead-reckons (noise eta), a new scan is
    rendered at the true pose and integrated into the agent map at the
    *estimated* pose (and into a parallel true-pose map used for evaluation),
    and the reward is computed from the agent map's coverage gain plus the
    bump. The pre-episode scan seeds the map and earns no reward. The trace
    has exactly `steps` rows.
    """
    ss_start, ss_policy, ss_noise = np.random.SeedSequence(seed).spawn(3)
    if start is None:
        start = sample_start_pose(plan, np.random.default_rng(ss_start))
    policy.reset(np.random.default_rng(ss_policy))
    noise_rng = np.random.default_rng(ss_noise)
    noise = NoiseConfig(eta=eta, rng_seed=seed)

    true_pose = start
    est_pose = start
    agent_map = OccupancyGrid(plan.resolution)
    true_map = OccupancyGrid(plan.resolution)
    scan = render_scan(plan, mode, true_pose, sensor_cfg)
    integrate(agent_map, est_pose, scan, sensor_cfg)
    integrate(true_map, true_pose, scan, sensor_cfg)

    res2 = plan.resolution * plan.resolution
    bump_prev = False
    rows: List[TraceStep] = []
    for t in range(1, steps + 1):
        obs = policies.PolicyObservation(scan, bump_prev, est_pose, agent_map)
        action = policy.act(obs)
        true_pose, bump = transition_true(plan, mode, true_pose, action)
        est_pose = transition_estimated(est_pose, action, bump, noise, noise_rng)
        scan = render_scan(plan, mode, true_pose, sensor_cfg)
        prev_covered = agent_map.covered_cells
        integrate(agent_map, est_pose, scan, sensor_cfg)
        integrate(true_map, true_pose, scan, sensor_cfg)
        reward = step_reward(prev_covered, agent_map.covered_cells, bump, reward_cfg)
        rows.append(TraceStep(
            t=t, action=action.name, true_pose=true_pose, est_pose=est_pose, bump=bump,
            reward_total=reward.total,
            agent_coverage_m2=agent_map.covered_cells * res2,
            true_coverage_m2=true_map.covered_cells * res2))
        bump_prev = bump
        if snapshot_every and snapshot_dir and t % snapshot_every == 0:
            mapping.save_pgm(agent_map, os.path.join(snapshot_dir, f"map_{t:06d}.pgm"))
    return EpisodeTrace(world=plan.name, policy=getattr(policy, "name", type(policy).__name__),
                        eta=eta, seed=seed, door_mismatch=mode.door_mismatch, steps=rows,
                        agent_map=agent_map, true_map=true_map)


# ---------------------------------------------------------------------------
# Trace files (JSON lines)
# ---------------------------------------------------------------------------

def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def write_trace(trace: EpisodeTrace, path: str) -> None:
    """One header object, then one object per step. Atomic replace on close."""
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="ascii") as fh:
        fh.write(_dump({"type": "header", "world": trace.world, "policy": trace.policy,
                        "eta": trace.eta, "seed": trace.seed,
                        "door_mismatch": trace.door_mismatch,
                        "n_steps": len(trace.steps)}))
        fh.write("\n")
        for s in trace.steps:
            fh.write(_dump({
                "t": s.t, "action": s.action,
                "true_pose": [s.true_pose.x, s.true_pose.y, s.true_pose.theta],
                "est_pose": [s.est_pose.x, s.est_pose.y, s.est_pose.theta],
                "bump": s.bump, "reward_total": s.reward_total,
                "agent_coverage_m2": s.agent_coverage_m2,
                "true_coverage_m2": s.true_coverage_m2}))
            fh.write("\n")
    os.replace(tmp, path)


def read_trace(path: str) -> EpisodeTrace:
    with open(path, "r", encoding="ascii") as fh:
        lines = [json.loads(line) for line in fh if line.strip()]
    head = lines[0]
    steps = [TraceStep(t=o["t"], action=o["action"],
                       true_pose=Pose(*o["true_pose"]), est_pose=Pose(*o["est_pose"]),
                       bump=o["bump"], reward_total=o["reward_total"],
                       agent_coverage_m2=o["agent_coverage_m2"],
                       true_coverage_m2=o["true_coverage_m2"])
             for o in lines[1:]]
    return EpisodeTrace(world=head["world"], policy=head["policy"], eta=head["eta"],
                        seed=head["seed"], door_mismatch=head["door_mismatch"], steps=steps)


# ---------------------------------------------------------------------------
# Coverage experiment (curve grids)
# ---------------------------------------------------------------------------

def coverage_experiment(worlds: Sequence[worldmod.Floorplan], policy_names: Sequence[str],
                        *, starts_per_world: int = 5, steps: int = 1000, eta: float = 0.0,
                        mode: worldmod.WorldMode = worldmod.WorldMode(), replicates: int = 3,
                        master_seed: int = 0, sensor_cfg: SensorConfig = DEFAULT_SENSOR,
                        trace_sink: Optional[Callable] = None) -> Dict[str, np.ndarray]:
    """Run the (worlds x starts x replicates) grid for each policy.

    Returns per-policy arrays of true coverage, shape (n_runs, steps) with
    runs ordered (world, start, replicate). `trace_sink(trace, policy_name,
    world_idx, start_idx, replicate)` is called after each episode when given
    (the CLI uses it to persist traces).
    """
    starts = [[sample_start_pose(w, np.random.default_rng(start_pose_seed(master_seed, wi, si)))
               for si in range(starts_per_world)] for wi, w in enumerate(worlds)]
    out: Dict[str, np.ndarray] = {}
    for name in policy_names:
        arr = np.zeros((len(worlds) * starts_per_world * replicates, steps))
        run = 0
        for wi, plan in enumerate(worlds):
            for si in range(starts_per_world):
                for rep in range(replicates):
                    seed = episode_seed(master_seed, name, wi, si, rep)
                    policy = policies.make_policy(name, plan)
                    trace = run_episode(plan, mode, policy, eta, seed, steps,
                                        start=starts[wi][si], sensor_cfg=sensor_cfg)
                    arr[run] = [s.true_coverage_m2 for s in trace.steps]
                    if trace_sink is not None:
                        trace_sink(trace, name, wi, si, rep)
                    run += 1
        out[name] = arr
    return out


def mode_label(mode: worldmod.WorldMode) -> str:
    return "door-mismatch" if mode.door_mismatch else "normal"


def curve_rows(curves: Dict[str, np.ndarray], eta: float, mode: worldmod.WorldMode):
    """Aggregate (t, policy, eta, mode, mean, min, max) rows from raw curves."""
    rows = []
    label = mode_label(mode)
    for name in curves:
        arr = curves[name]
        mean = arr.mean(axis=0)
        lo = arr.min(axis=0)
        hi = arr.max(axis=0)
        for t in range(arr.shape[1]):
            rows.append((t + 1, name, eta, label, float(mean[t]), float(lo[t]), float(hi[t])))
    return rows


def write_curves_csv(rows, path: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="ascii", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "policy", "eta", "mode", "mean", "min", "max"])
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
    os.replace(tmp, path)


# ---------------------------------------------------------------------------
# SPL
# ---------------------------------------------------------------------------

def spl(records: Sequence[SplRecord]) -> float:
    """Success weighted by normalized inverse path length."""
    if not records:
        raise EmptyInput("spl needs at least one record")
    total = 0.0
    for r in records:
        if r.success:
            total += r.l / max(r.p, r.l)
    return total / len(records)


# ---------------------------------------------------------------------------
# Descriptors and experience logs
# ---------------------------------------------------------------------------

_PANO_RAYS = 144      # 360-degree sweep, one ray every 2.5 degrees
_PATCH_CELLS = 8      # wall patch side in map cells (0.4 m at 5 cm resolution)
_DESC_BUCKETS = 128   # hash buckets for patch identities
_DESC_RANGE = 30.0    # meters; long enough that walls, not the clip, end rays
_PANO_ANGLES = np.radians(np.linspace(-180.0, 180.0, _PANO_RAYS + 1)[:_PANO_RAYS])


def descriptor_dim(cfg: SensorConfig = DEFAULT_SENSOR) -> int:
    return _DESC_BUCKETS


def pose_descriptor(plan: worldmod.Floorplan, mode: worldmod.WorldMode, pose: Pose,
                    cfg: SensorConfig = DEFAULT_SENSOR) -> np.ndarray:
    """Place signature: normalized bag of wall patches visible from the pose.

    A full panorama is cast at fixed absolute angles; each hit is attributed
    to a 0.4 m wall patch whose deterministic identity hashes into one of the
    buckets, standing in for the distinctive visual appearance a camera would
    capture there. The visible-patch set barely changes under sub-meter
    displacement (only occlusion boundaries move) yet is near-disjoint between
    rooms, which is exactly the retrieval behavior goal localization needs.
    Raw range profiles fail here: one grazing ray shifts more with 0.3 m of
    displacement than whole lookalike rooms differ from each other, and a
    forward cone would additionally make matching heading-sensitive. The
    descriptor is a pure function of (floorplan, mode, position).
    """
    pano_cfg = SensorConfig(fov=360.0, n_rays=_PANO_RAYS + 1,
                            max_range=_DESC_RANGE)
    scan = render_scan(plan, mode, Pose(pose.x, pose.y, 0.0), pano_cfg)
    depths = scan.depths[:_PANO_RAYS]  # drop the wrapped duplicate ray
    clipped = scan.clipped[:_PANO_RAYS]
    res = plan.resolution
    hx = pose.x + np.cos(_PANO_ANGLES) * (depths + 0.5 * res)
    hy = pose.y + np.sin(_PANO_ANGLES) * (depths + 0.5 * res)
    px = np.floor(hx / res).astype(np.int64) // _PATCH_CELLS
    py = np.floor(hy / res).astype(np.int64) // _PATCH_CELLS
    buckets = ((px * 73856093) ^ (py * 19349663)) % _DESC_BUCKETS
    vec = np.zeros(_DESC_BUCKETS)
    np.add.at(vec, buckets[~clipped], 1.0)
    norm = np.linalg.norm(vec)
    return vec / norm if norm > 0 else vec


def collect_experience(plan: worldmod.Floorplan, mode: worldmod.WorldMode, policy,
                       steps: int = 1500, seed: int = 0,
                       sensor_cfg: SensorConfig = DEFAULT_SENSOR) -> ExperienceLog:
    """Run noiseless exploration, recording (descriptor, pose) per step plus
    the final map."""
    ss_start, ss_policy = np.random.SeedSequence(seed).spawn(2)
    cur = sample_start_pose(plan, np.random.default_rng(ss_start))
    policy.reset(np.random.default_rng(ss_policy))
    grid = OccupancyGrid(plan.resolution)
    scan = render_scan(plan, mode, cur, sensor_cfg)
    integrate(grid, cur, scan, sensor_cfg)
    descs = np.empty((steps, descriptor_dim(sensor_cfg)))
    poses: List[Pose] = []
    bump_prev = False
    for t in range(steps):
        obs = policies.PolicyObservation(scan, bump_prev, cur, grid)
        action = policy.act(obs)
        cur, bump = transition_true(plan, mode, cur, action)
        scan = render_scan(plan, mode, cur, sensor_cfg)
        integrate(grid, cur, scan, sensor_cfg)
        descs[t] = pose_descriptor(plan, mode, cur, sensor_cfg)
        poses.append(cur)
        bump_prev = bump
    return ExperienceLog(descriptors=descs, poses=poses, map=grid)


def localize_goal(log: ExperienceLog, goal_descriptor: np.ndarray, k: int = 1) -> List[Pose]:
    """Top-k log poses by Euclidean descriptor distance; ties keep the earlier
    timestamp (stable sort over insertion order)."""
    if log.descriptors.shape[0] == 0:
        raise EmptyLog("experience log is empty")
    d2 = ((log.descriptors - goal_descriptor[None, :]) ** 2).sum(axis=1)
    order = np.argsort(d2, kind="stable")[:k]
    return [log.poses[int(i)] for i in order]


# ---------------------------------------------------------------------------
# Downstream navigation (SPL evaluation)
# ---------------------------------------------------------------------------

def _floorplan_nav_cells(plan: worldmod.Floorplan) -> np.ndarray:
    """Floorplan as occupancy states: walls Occupied, everything else Free."""
    return np.where(plan.cells == worldmod.WALL, mapping.OCCUPIED, mapping.FREE).astype(np.uint8)


def oracle_path_length(plan: worldmod.Floorplan, start: Pose, goal: Pose) -> Optional[float]:
    """Shortest-path length in meters on the true floorplan (8-connected,
    uninflated, doors traversable); None when unreachable."""
    res = plan.resolution
    cells = _floorplan_nav_cells(plan)
    passable = (cells != mapping.OCCUPIED).astype(np.uint8)
    s = (math.floor(start.x / res), math.floor(start.y / res))
    g = (math.floor(goal.x / res), math.floor(goal.y / res))
    path = planner.search_to_cell(passable, s, g)
    if path is None:
        return None
    return planner.path_cost(path) * res


def _navigate_trial(plan, mode, nav_map, start: Pose, goal: Pose, goal_cell, budget: int,
                    success_radius: float, optimistic: bool, cfg: SensorConfig) -> Tuple[bool, float]:
    """Drive toward goal_cell, integrating scans and replanning each step.

    optimistic=True plans with unknown_is_free and spins through transient
    NoPath (the on-the-fly arm); optimistic=False plans strictly on known
    space first and falls back to unknown_is_free once, failing if both fail
    (the explored-map arm). Returns (success, executed_path_length). Success
    is measured against the *true* goal; arriving at goal_cell without success
    ends the trial (the agent believes it has arrived).
    """
    res = plan.resolution
    cur = start
    p_len = 0.0
    if math.hypot(cur.x - goal.x, cur.y - goal.y) <= success_radius:
        return True, p_len
    for _ in range(budget):
        scan = render_scan(plan, mode, cur, cfg)
        integrate(nav_map, cur, scan, cfg)
        try:
            q = planner.PlanQuery(nav_map, cur, goal_cell, unknown_is_free=optimistic)
            path = planner.plan_path(q)
        except NoPath:
            if optimistic:
                cur, _ = transition_true(plan, mode, cur, Action.TurnLeft)
                continue
            try:
                q = planner.PlanQuery(nav_map, cur, goal_cell, unknown_is_free=True)
                path = planner.plan_path(q)
            except NoPath:
                return False, p_len
        except InvalidStart:
            return False, p_len
        if len(path) < 2:
            return False, p_len  # in the believed goal cell, yet not truly there
        action = planner.path_to_actions(path, cur, resolution=res,
                                         cells=nav_map.cells,
                                         origin_cell=nav_map.origin_cell)
        cur, bump = transition_true(plan, mode, cur, action)
        if action in _TRANSLATIONS and not bump:
            p_len += TRANSLATION_STEP
        if math.hypot(cur.x - goal.x, cur.y - goal.y) <= success_radius:
            return True, p_len
        if (math.floor(cur.x / res), math.floor(cur.y / res)) == goal_cell:
            return False, p_len
    return False, p_len


def downstream_navigation(plan: worldmod.Floorplan, mode: worldmod.WorldMode,
                          log: Optional[ExperienceLog], goals: Sequence[Pose], *,
                          step_budget: Optional[int] = None, budget_factor: float = 4.0,
                          success_radius: float = 0.5,
                          seed: int = 0, sensor_cfg: SensorConfig = DEFAULT_SENSOR) -> List[SplRecord]:
    """Goal-navigation trials; one SplRecord per goal.

    With an experience log, each goal is localized in the log (top-1
    descriptor match) and the agent navigates its explored map toward the
    matched cell. Without a log, the agent knows the true goal cell but starts
    with an empty map and plans on the fly assuming unknown space is free.
    Start poses are sampled per trial from `seed` (identical for both arms).
    The per-trial budget is budget_factor * (translation steps of the oracle
    path + a 20-action turn allowance); `step_budget`, when given, overrides
    it with one fixed value for every trial.
    """
    res = plan.resolution
    records: List[SplRecord] = []
    for i, goal in enumerate(goals):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(2, i)))
        start = sample_start_pose(plan, rng)
        l_oracle = oracle_path_length(plan, start, goal)
        if l_oracle is None:
            records.append(SplRecord(l=float("nan"), p=0.0, success=False))
            continue
        l_oracle = max(l_oracle, res)  # keep l positive when start == goal cell
        budget = step_budget if step_budget is not None else int(
            budget_factor * (math.ceil(l_oracle / TRANSLATION_STEP) + 20))
        goal_cell = (math.floor(goal.x / res), math.floor(goal.y / res))
        if log is not None:
            goal_desc = pose_descriptor(plan, mode, goal, sensor_cfg)
            believed = localize_goal(log, goal_desc, 1)[0]
            believed_cell = (math.floor(believed.x / res), math.floor(believed.y / res))
            nav_map = log.map.copy()
            success, p_len = _navigate_trial(plan, mode, nav_map, start, goal, believed_cell,
                                             budget, success_radius, False, sensor_cfg)
        else:
            nav_map = OccupancyGrid(res)
            success, p_len = _navigate_trial(plan, mode, nav_map, start, goal, goal_cell,
                                             budget, success_radius, True, sensor_cfg)
        records.append(SplRecord(l=l_oracle, p=p_len, success=success))
    return records
