"""Command-line experiment runner.

Subcommands: ``gen-worlds``, ``explore``, ``eval-coverage``, ``eval-downstream``.
Every run writes a ``config.json`` capturing all inputs; re-running a saved
config (``run_config``) reproduces the outputs exactly. Episode artifacts are
written atomically, and ``--jobs`` parallelizes independent episodes.
"""
from __future__ import annotations

import argparse
import concurrent.futures
import dataclasses
import json
import math
import os
import sys
from typing import Dict, List, Optional

import numpy as np

from . import evaluation, policies
from . import world as worldmod
from .errors import ExploresimError
from .kinematics import Pose
from .sensor import DEFAULT_SENSOR

SNAPSHOT_EVERY = 100  # steps between PGM map snapshots in `explore`


@dataclasses.dataclass
class ExperimentConfig:
    """Everything a run depends on. Serializable; reruns are bit-reproducible."""

    command: str
    out_dir: str
    seed: int = 0
    world: str = ""                # single world path (explore)
    worlds: List[str] = dataclasses.field(default_factory=list)  # world paths, in run order
    n_worlds: int = 0              # gen-worlds
    target_area: float = 100.0     # gen-worlds
    policy: str = "frontier"       # explore / eval-downstream
    policies: List[str] = dataclasses.field(default_factory=list)  # eval-coverage
    steps: int = 1000
    eta: float = 0.0
    door_mismatch: bool = False
    replicates: int = 3
    starts_per_world: int = 5
    goals_per_world: int = 50      # eval-downstream
    explore_steps: int = 1500      # eval-downstream
    jobs: int = 1

    def mode(self) -> worldmod.WorldMode:
        return worldmod.WorldMode(door_mismatch=self.door_mismatch)


def _write_json(obj, path: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="ascii") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


def save_config(cfg: ExperimentConfig, path: str) -> None:
    _write_json(dataclasses.asdict(cfg), path)


def load_config(path: str) -> ExperimentConfig:
    with open(path, "r", encoding="ascii") as fh:
        return ExperimentConfig(**json.load(fh))


def _run_tasks(worker, tasks, jobs: int):
    """Run tasks in submission order, in-process or via a process pool."""
    if jobs <= 1 or len(tasks) <= 1:
        return [worker(t) for t in tasks]
    with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(worker, tasks))


def _list_worlds(world_dir: str) -> List[str]:
    names = sorted(n for n in os.listdir(world_dir) if n.endswith(".world"))
    if not names:
        raise ExploresimError(f"no .world files in {world_dir!r}")
    return [os.path.join(world_dir, n) for n in names]


_WORLD_CACHE: Dict[str, worldmod.Floorplan] = {}


def _load_world(path: str) -> worldmod.Floorplan:
    if path not in _WORLD_CACHE:
        _WORLD_CACHE[path] = worldmod.load_floorplan(path)
    return _WORLD_CACHE[path]


# ---------------------------------------------------------------------------
# gen-worlds
# ---------------------------------------------------------------------------

def cmd_gen_worlds(cfg: ExperimentConfig) -> None:
    os.makedirs(cfg.out_dir, exist_ok=True)
    params = worldmod.GenParams(target_area=cfg.target_area)
    entries = []
    for i in range(cfg.n_worlds):
        seed = cfg.seed + i
        plan = worldmod.generate_house(seed, params)
        fname = f"{plan.name}.world"
        worldmod.save_floorplan(plan, os.path.join(cfg.out_dir, fname))
        entries.append({"file": fname, "name": plan.name, "seed": seed,
                        "area_m2": worldmod.traversable_area(plan)})
    _write_json({"target_area": cfg.target_area, "master_seed": cfg.seed,
                 "worlds": entries}, os.path.join(cfg.out_dir, "manifest.json"))
    save_config(cfg, os.path.join(cfg.out_dir, "config.json"))


# ---------------------------------------------------------------------------
# explore
# ---------------------------------------------------------------------------

def cmd_explore(cfg: ExperimentConfig) -> None:
    os.makedirs(cfg.out_dir, exist_ok=True)
    plan = _load_world(cfg.world)
    policy = policies.make_policy(cfg.policy, plan)
    trace = evaluation.run_episode(plan, cfg.mode(), policy, cfg.eta, cfg.seed, cfg.steps,
                                   snapshot_every=SNAPSHOT_EVERY, snapshot_dir=cfg.out_dir)
    evaluation.write_trace(trace, os.path.join(cfg.out_dir, "trace.jsonl"))
    save_config(cfg, os.path.join(cfg.out_dir, "config.json"))


# ---------------------------------------------------------------------------
# eval-coverage
# ---------------------------------------------------------------------------

def _trace_path(out_dir: str, policy: str, wi: int, si: int, rep: int) -> str:
    return os.path.join(out_dir, "traces", policy, f"w{wi:03d}_s{si:02d}_r{rep}.jsonl")


def _coverage_task(task: dict):
    """One episode: run, persist the trace, return its coverage curve."""
    plan = _load_world(task["world_path"])
    mode = worldmod.WorldMode(door_mismatch=task["door_mismatch"])
    policy = policies.make_policy(task["policy"], plan)
    trace = evaluation.run_episode(plan, mode, policy, task["eta"], task["seed"],
                                   task["steps"], start=Pose(*task["start"]))
    evaluation.write_trace(trace, task["trace_path"])
    return task["policy"], task["run_index"], [s.true_coverage_m2 for s in trace.steps]


def _coverage_tasks(cfg: ExperimentConfig) -> List[dict]:
    tasks = []
    starts = []
    for wi, path in enumerate(cfg.worlds):
        plan = _load_world(path)
        starts.append([evaluation.sample_start_pose(
            plan, np.random.default_rng(evaluation.start_pose_seed(cfg.seed, wi, si)))
            for si in range(cfg.starts_per_world)])
    for name in cfg.policies:
        run = 0
        for wi, path in enumerate(cfg.worlds):
            for si in range(cfg.starts_per_world):
                for rep in range(cfg.replicates):
                    s = starts[wi][si]
                    tasks.append({
                        "world_path": path, "policy": name, "run_index": run,
                        "world_idx": wi, "start_idx": si, "replicate": rep,
                        "seed": evaluation.episode_seed(cfg.seed, name, wi, si, rep),
                        "start": (s.x, s.y, s.theta), "steps": cfg.steps,
                        "eta": cfg.eta, "door_mismatch": cfg.door_mismatch,
                        "trace_path": _trace_path(cfg.out_dir, name, wi, si, rep)})
                    run += 1
    return tasks


def cmd_eval_coverage(cfg: ExperimentConfig) -> None:
    os.makedirs(cfg.out_dir, exist_ok=True)
    for name in cfg.policies:
        os.makedirs(os.path.join(cfg.out_dir, "traces", name), exist_ok=True)
    tasks = _coverage_tasks(cfg)
    results = _run_tasks(_coverage_task, tasks, cfg.jobs)
    n_runs = len(cfg.worlds) * cfg.starts_per_world * cfg.replicates
    curves = {name: np.zeros((n_runs, cfg.steps)) for name in cfg.policies}
    for name, run, cov in results:
        curves[name][run] = cov
    rows = evaluation.curve_rows(curves, cfg.eta, cfg.mode())
    evaluation.write_curves_csv(rows, os.path.join(cfg.out_dir, "curves.csv"))
    save_config(cfg, os.path.join(cfg.out_dir, "config.json"))


def aggregate_from_traces(trace_dir: str, out_dir: str) -> None:
    """Rebuild curves.csv purely from saved traces (byte-identical to the run)."""
    cfg = load_config(os.path.join(trace_dir, "config.json"))
    n_runs = len(cfg.worlds) * cfg.starts_per_world * cfg.replicates
    curves = {}
    for name in cfg.policies:
        arr = np.zeros((n_runs, cfg.steps))
        run = 0
        for wi in range(len(cfg.worlds)):
            for si in range(cfg.starts_per_world):
                for rep in range(cfg.replicates):
                    trace = evaluation.read_trace(_trace_path(trace_dir, name, wi, si, rep))
                    arr[run] = [s.true_coverage_m2 for s in trace.steps]
                    run += 1
        curves[name] = arr
    rows = evaluation.curve_rows(curves, cfg.eta, cfg.mode())
    os.makedirs(out_dir, exist_ok=True)
    evaluation.write_curves_csv(rows, os.path.join(out_dir, "curves.csv"))


# ---------------------------------------------------------------------------
# eval-downstream
# ---------------------------------------------------------------------------

def _downstream_task(task: dict) -> dict:
    plan = _load_world(task["world_path"])
    mode = worldmod.WorldMode(door_mismatch=task["door_mismatch"])
    wi = task["world_idx"]
    seed = task["seed"]
    policy = policies.make_policy(task["policy"], plan)
    log_seed = int(np.random.SeedSequence(seed, spawn_key=(4, wi)).generate_state(1, np.uint64)[0])
    log = evaluation.collect_experience(plan, mode, policy, task["explore_steps"], log_seed)
    goal_rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(3, wi)))
    goals = evaluation.sample_goal_poses(plan, task["goals"], goal_rng)
    trial_seed = int(np.random.SeedSequence(seed, spawn_key=(5, wi)).generate_state(1, np.uint64)[0])
    with_log = evaluation.downstream_navigation(plan, mode, log, goals, seed=trial_seed)
    without = evaluation.downstream_navigation(plan, mode, None, goals, seed=trial_seed)
    return {"world": plan.name, "n_goals": task["goals"],
            "spl_with_exploration": evaluation.spl(with_log),
            "spl_no_exploration": evaluation.spl(without)}


def cmd_eval_downstream(cfg: ExperimentConfig) -> None:
    os.makedirs(cfg.out_dir, exist_ok=True)
    tasks = [{"world_path": path, "world_idx": wi, "seed": cfg.seed,
              "policy": cfg.policy, "explore_steps": cfg.explore_steps,
              "goals": cfg.goals_per_world, "door_mismatch": cfg.door_mismatch}
             for wi, path in enumerate(cfg.worlds)]
    per_world = _run_tasks(_downstream_task, tasks, cfg.jobs)
    summary = {
        "worlds": per_world,
        "mean_spl_with_exploration": sum(w["spl_with_exploration"] for w in per_world) / len(per_world),
        "mean_spl_no_exploration": sum(w["spl_no_exploration"] for w in per_world) / len(per_world),
    }
    _write_json(summary, os.path.join(cfg.out_dir, "summary.json"))
    save_config(cfg, os.path.join(cfg.out_dir, "config.json"))


# ---------------------------------------------------------------------------
# Dispatch and argument parsing
# ---------------------------------------------------------------------------

def run_config(cfg: ExperimentConfig) -> None:
    dispatch = {"gen-worlds": cmd_gen_worlds, "explore": cmd_explore,
                "eval-coverage": cmd_eval_coverage, "eval-downstream": cmd_eval_downstream}
    if cfg.command not in dispatch:
        raise ExploresimError(f"unknown command {cfg.command!r}")
    dispatch[cfg.command](cfg)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="exploresim",
                                     description="2D embodied-exploration simulator and benchmark")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, steps_default=1000):
        p.add_argument("--steps", type=int, default=steps_default, help="episode length")
        p.add_argument("--eta", type=float, default=0.0, help="dead-reckoning noise level")
        p.add_argument("--door-mismatch", action="store_true",
                       help="doors look like walls to the depth sensor")
        p.add_argument("--seed", type=int, default=0, help="master seed")
        p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("gen-worlds", help="generate procedural house floorplans")
    p.add_argument("--n", type=int, default=20, help="number of worlds")
    p.add_argument("--target-area", type=float, default=100.0, help="traversable area, m^2")
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("explore", help="run one exploration episode")
    p.add_argument("--world", required=True, help="floorplan file")
    p.add_argument("--policy", default="frontier", choices=policies.POLICY_NAMES)
    common(p)

    p = sub.add_parser("eval-coverage", help="coverage-curve experiment grid")
    p.add_argument("--worlds", help="directory of .world files")
    p.add_argument("--policy", default="random,straight,frontier",
                   help="comma-separated policy names")
    p.add_argument("--replicates", type=int, default=3, help="seed replicates per start")
    p.add_argument("--starts", type=int, default=5, help="start poses per world")
    p.add_argument("--jobs", type=int, default=1, help="parallel episode workers")
    p.add_argument("--from-traces", metavar="DIR",
                   help="re-aggregate curves.csv from a previous run's traces")
    common(p)

    p = sub.add_parser("eval-downstream", help="goal navigation SPL, with/without exploration")
    p.add_argument("--worlds", required=True, help="directory of .world files")
    p.add_argument("--policy", default="frontier", choices=policies.POLICY_NAMES,
                   help="exploration policy for experience collection")
    p.add_argument("--goals", type=int, default=50, help="goals per world")
    p.add_argument("--explore-steps", type=int, default=1500,
                   help="experience-collection episode length")
    p.add_argument("--jobs", type=int, default=1, help="parallel world workers")
    common(p, steps_default=1000)
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    cfg = ExperimentConfig(command=args.command, out_dir=args.out,
                           seed=getattr(args, "seed", 0))
    if args.command == "gen-worlds":
        cfg.n_worlds = args.n
        cfg.target_area = args.target_area
    elif args.command == "explore":
        cfg.world = args.world
        cfg.policy = args.policy
        cfg.steps = args.steps
        cfg.eta = args.eta
        cfg.door_mismatch = args.door_mismatch
    elif args.command == "eval-coverage":
        cfg.worlds = _list_worlds(args.worlds)
        cfg.policies = [s.strip() for s in args.policy.split(",") if s.strip()]
        for name in cfg.policies:
            if name not in policies.POLICY_NAMES:
                raise ExploresimError(f"unknown policy {name!r}")
        cfg.steps = args.steps
        cfg.eta = args.eta
        cfg.door_mismatch = args.door_mismatch
        cfg.replicates = args.replicates
        cfg.starts_per_world = args.starts
        cfg.jobs = args.jobs
    elif args.command == "eval-downstream":
        cfg.worlds = _list_worlds(args.worlds)
        cfg.policy = args.policy
        cfg.goals_per_world = args.goals
        cfg.explore_steps = args.explore_steps
        cfg.eta = args.eta
        cfg.door_mismatch = args.door_mismatch
        cfg.jobs = args.jobs
    return cfg


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "eval-coverage" and args.from_traces:
            aggregate_from_traces(args.from_traces, args.out)
            return 0
        if args.command == "eval-coverage" and not args.worlds:
            raise ExploresimError("eval-coverage needs --worlds (or --from-traces)")
        run_config(config_from_args(args))
        return 0
    except (ExploresimError, OSError, ValueError) as exc:
        json.dump({"error": type(exc).__name__, "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
