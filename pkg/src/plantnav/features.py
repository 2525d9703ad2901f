"""State preprocessing: (world, UAV state) -> fixed 18-long float vector."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from plantnav.dynamics import Action, UavState
from plantnav.errors import ContractError
from plantnav.world import World, collides, in_bounds, obstacle_clearance

FEATURE_NAMES: tuple[str, ...] = (
    "pos_x", "pos_y", "pos_z",
    "target_x", "target_y", "target_z",
    "delta_x", "delta_y", "delta_z",
    "battery_remaining",
    "steps_fraction",
    "clearance",
    "occupied_+X", "occupied_-X", "occupied_+Y", "occupied_-Y", "occupied_+Z", "occupied_-Z",
)
N_FEATURES = len(FEATURE_NAMES)


def layout_hash(names) -> int:
    """64-bit fingerprint of an ordered feature layout, stored in checkpoints."""
    digest = hashlib.sha256("\n".join(names).encode()).digest()
    return int.from_bytes(digest[:8], "little")


FEATURE_LAYOUT_HASH = layout_hash(FEATURE_NAMES)


@dataclass(frozen=True)
class FeatureConfig:
    max_steps: int = 400
    clearance_cap: int = 10


def phi(world: World, s: UavState, cfg: FeatureConfig = FeatureConfig()) -> np.ndarray:
    if not in_bounds(world, s.pos) or collides(world, s.pos):
        raise ContractError(f"cannot featurize state at {tuple(s.pos)}: out of bounds or in obstacle")
    scale = [max(n - 1, 1) for n in world.dims]
    out = np.empty(N_FEATURES)
    for i in range(3):
        out[i] = s.pos[i] / scale[i]
        out[3 + i] = s.target[i] / scale[i]
        out[6 + i] = (s.target[i] - s.pos[i]) / scale[i]
    out[9] = min(max(1.0 - s.used_energy / s.base_energy, 0.0), 1.0)
    out[10] = min(s.steps_taken / cfg.max_steps, 1.0)
    out[11] = min(obstacle_clearance(world, s.pos), cfg.clearance_cap) / cfg.clearance_cap
    for a in Action:
        q = s.pos + a.delta
        out[12 + a] = 1.0 if not in_bounds(world, q) or collides(world, q) else 0.0
    return out
