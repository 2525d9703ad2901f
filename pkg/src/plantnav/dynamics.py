"""UAV state, the six-move action set, wind drift, energy use and termination."""
from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from plantnav.errors import ContractError
from plantnav.world import Vec3, World, collides, euclidean, wind_speed_at


class Action(enum.IntEnum):
    PX = 0
    NX = 1
    PY = 2
    NY = 3
    PZ = 4  # climb
    NZ = 5  # descend

    @property
    def delta(self) -> Vec3:
        return _DELTAS[self]

    @property
    def label(self) -> str:
        return _LABELS[self]


_DELTAS = {
    Action.PX: Vec3(1, 0, 0),
    Action.NX: Vec3(-1, 0, 0),
    Action.PY: Vec3(0, 1, 0),
    Action.NY: Vec3(0, -1, 0),
    Action.PZ: Vec3(0, 0, 1),
    Action.NZ: Vec3(0, 0, -1),
}
_LABELS = {
    Action.PX: "+X", Action.NX: "-X", Action.PY: "+Y",
    Action.NY: "-Y", Action.PZ: "+Z", Action.NZ: "-Z",
}
N_ACTIONS = len(Action)


class Termination(enum.Enum):
    RUNNING = "running"
    CRASH = "crash"
    REACHED_TARGET = "reached_target"
    MAX_STEPS = "max_steps"
    BATTERY_OUT = "battery_out"


@dataclass(frozen=True)
class EnergyConfig:
    base_cost: float = 1.0
    climb_bonus: float = 0.5
    wind_coeff: float = 0.02
    base_energy: float = 600.0

    def __post_init__(self):
        if self.base_cost <= 0:
            raise ValueError("base_cost must be > 0")
        if self.climb_bonus < 0 or self.wind_coeff < 0:
            raise ValueError("climb_bonus and wind_coeff must be >= 0")
        if self.base_energy <= 0:
            raise ValueError("base_energy must be > 0")


@dataclass(frozen=True)
class UavState:
    pos: Vec3
    target: Vec3
    last_move: Optional[Action] = None
    steps_taken: int = 0
    base_energy: float = 600.0
    used_energy: float = 0.0
    prev_target_distance: float = 0.0

    def to_dict(self) -> dict:
        return {
            "pos": list(self.pos),
            "target": list(self.target),
            "last_move": None if self.last_move is None else int(self.last_move),
            "steps_taken": self.steps_taken,
            "base_energy": self.base_energy,
            "used_energy": self.used_energy,
            "prev_target_distance": self.prev_target_distance,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "UavState":
        return cls(
            pos=Vec3(*d["pos"]),
            target=Vec3(*d["target"]),
            last_move=None if d["last_move"] is None else Action(d["last_move"]),
            steps_taken=int(d["steps_taken"]),
            base_energy=float(d["base_energy"]),
            used_energy=float(d["used_energy"]),
            prev_target_distance=float(d["prev_target_distance"]),
        )


@dataclass(frozen=True)
class StepOutcome:
    next_state: UavState
    moved: bool
    termination: Termination


def initial_state(start, target, energy: EnergyConfig = EnergyConfig()) -> UavState:
    start, target = Vec3(*start), Vec3(*target)
    return UavState(
        pos=start,
        target=target,
        base_energy=energy.base_energy,
        prev_target_distance=euclidean(start, target),
    )


def energy_cost(a: Action, wind_speed: float, cfg: EnergyConfig = EnergyConfig()) -> float:
    if wind_speed < 0:
        raise ValueError("wind_speed must be >= 0")
    cost = cfg.base_cost + cfg.wind_coeff * wind_speed
    if a == Action.PZ:
        cost += cfg.climb_bonus
    return cost


def drift_probability(world: World, pos) -> float:
    return min(1.0, wind_speed_at(world, pos) / world.wind.drift_reference_speed)


def check_termination(world: World, s: UavState, max_steps: int) -> Termination:
    """Classify ``s``; Crash > ReachedTarget > BatteryOut > MaxSteps when several hold."""
    if collides(world, s.pos):
        return Termination.CRASH
    if s.pos == s.target:
        return Termination.REACHED_TARGET
    if s.used_energy >= s.base_energy:
        return Termination.BATTERY_OUT
    if s.steps_taken >= max_steps:
        return Termination.MAX_STEPS
    return Termination.RUNNING


def _clamp(v: int, n: int) -> int:
    return 0 if v < 0 else (n - 1 if v >= n else v)


def apply_action(
    world: World,
    s: UavState,
    a: Action,
    rng: np.random.Generator,
    energy: EnergyConfig = EnergyConfig(),
    max_steps: int = 400,
) -> StepOutcome:
    """Advance the UAV by one move plus possible wind drift.

    Drift is a single horizontal cell along the wind direction, applied with
    probability ``min(1, |wind| / drift_reference_speed)`` evaluated at the
    pre-move position. A uniform draw is only taken from ``rng`` when that
    probability is positive. Moves that would leave the space are clamped to
    the boundary.
    """
    if check_termination(world, s, max_steps) is not Termination.RUNNING:
        raise ContractError("apply_action called on a terminated state")
    a = Action(a)
    wind_speed = wind_speed_at(world, s.pos)
    d = a.delta
    dx, dy = d.x, d.y
    p = min(1.0, wind_speed / world.wind.drift_reference_speed)
    if p > 0.0 and rng.random() < p:
        wx, wy = world.wind.drift_cell
        dx += wx
        dy += wy
    dims = world.dims
    pos = Vec3(
        _clamp(s.pos.x + dx, dims.x),
        _clamp(s.pos.y + dy, dims.y),
        _clamp(s.pos.z + d.z, dims.z),
    )
    nxt = replace(
        s,
        pos=pos,
        last_move=a,
        steps_taken=s.steps_taken + 1,
        used_energy=s.used_energy + energy_cost(a, wind_speed, energy),
        prev_target_distance=euclidean(pos, s.target),
    )
    return StepOutcome(nxt, pos != s.pos, check_termination(world, nxt, max_steps))
