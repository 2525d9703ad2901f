"""Per-step reward: climb and progress shaping plus end-stage adjustments."""
from __future__ import annotations

from dataclasses import dataclass

from plantnav.dynamics import StepOutcome, Termination, UavState
from plantnav.world import euclidean


@dataclass(frozen=True)
class RewardConfig:
    wc: float = 1.0
    wt: float = 10.0
    crash_adjust: float = -500.0
    target_adjust: float = 500.0
    max_steps_adjust: float = -30.0
    battery_adjust: float = -30.0
    no_move_penalty: float = -5.0

    def __post_init__(self):
        for name in ("crash_adjust", "max_steps_adjust", "battery_adjust", "no_move_penalty"):
            if getattr(self, name) > 0:
                raise ValueError(f"{name} must be <= 0")
        if self.target_adjust < 0:
            raise ValueError("target_adjust must be >= 0")

    def terminal_adjust(self, termination: Termination) -> float:
        return {
            Termination.RUNNING: 0.0,
            Termination.CRASH: self.crash_adjust,
            Termination.REACHED_TARGET: self.target_adjust,
            Termination.MAX_STEPS: self.max_steps_adjust,
            Termination.BATTERY_OUT: self.battery_adjust,
        }[termination]


@dataclass(frozen=True)
class RewardBreakdown:
    r_climb: float
    r_target: float
    no_move: float
    terminal_adjust: float
    r_total: float


def climb_reward(z: float, target_z: float, wc: float) -> float:
    return wc * (z - target_z)


def target_reward(prev_dist: float, curr_dist: float, wt: float) -> float:
    return wt * (prev_dist - curr_dist)


def combine(
    r_climb: float, r_target: float, moved: bool, termination: Termination,
    cfg: RewardConfig = RewardConfig(),
) -> RewardBreakdown:
    no_move = 0.0 if moved else cfg.no_move_penalty
    adjust = cfg.terminal_adjust(termination)
    return RewardBreakdown(r_climb, r_target, no_move, adjust, r_climb + r_target + no_move + adjust)


def total_reward(outcome: StepOutcome, s: UavState, cfg: RewardConfig = RewardConfig()) -> RewardBreakdown:
    """Reward for the step that took ``s`` to ``outcome.next_state``."""
    pos = outcome.next_state.pos
    r_climb = climb_reward(pos.z, s.target.z, cfg.wc)
    r_target = target_reward(s.prev_target_distance, euclidean(pos, s.target), cfg.wt)
    return combine(r_climb, r_target, outcome.moved, outcome.termination, cfg)
