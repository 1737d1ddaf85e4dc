"""Intrinsic reward: coverage gain plus collision penalty."""
from __future__ import annotations

import dataclasses
from typing import Union

from .errors import NegativeCoverage
from .mapping import OccupancyGrid


@dataclasses.dataclass(frozen=True)
class RewardConfig:
    alpha: float = 0.0005  # per newly covered map cell
    beta: float = 0.006    # per bump (applied to a -1 collision term)

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("reward weights must be non-negative")


DEFAULT_REWARDS = RewardConfig()


@dataclasses.dataclass(frozen=True)
class RewardBreakdown:
    cov_term: int    # newly covered cells (>= 0)
    coll_term: int   # -1 if bump else 0
    total: float


MapOrCount = Union[OccupancyGrid, int]


def _covered_cells(m: MapOrCount) -> int:
    if isinstance(m, OccupancyGrid):
        return m.covered_cells
    return int(m)


def step_reward(prev_map: MapOrCount, next_map: MapOrCount, bump: bool,
                cfg: RewardConfig = DEFAULT_REWARDS) -> RewardBreakdown:
    """Reward for one step: alpha * (coverage gain in cells) + beta * (-bump).

    Accepts either OccupancyGrid snapshots or raw covered-cell counts (the
    episode loop keeps counts to avoid copying maps). Raises NegativeCoverage
    when the maps are passed out of order — coverage can never shrink.
    """
    prev = _covered_cells(prev_map)
    nxt = _covered_cells(next_map)
    delta = nxt - prev
    if delta < 0:
        raise NegativeCoverage(f"coverage shrank by {-delta} cells; maps passed out of order?")
    coll = -1 if bump else 0
    return RewardBreakdown(cov_term=delta, coll_term=coll,
                           total=cfg.alpha * delta + cfg.beta * coll)
