"""Small fixed worlds and configs used by the acceptance suite and experiment scripts."""
from __future__ import annotations

import numpy as np

from plantnav.dynamics import Termination
from plantnav.evaluation import TinyMdp, rollout_greedy, rollout_seed, scripted_turns, turn_count
from plantnav.qnet import QNetwork
from plantnav.trainer import CurriculumStage, EpsilonSchedule, TrainConfig
from plantnav.world import BoxObstacle, Vec3, WindParams, World, collides

CALM = WindParams(0.0, (1.0, 0.0, 0.0), 0.0, 120.0)


def scaled_world() -> World:
    """10 x 10 x 5 with one 3 x 3 x 3-cell box on the ground; the UAV can fly over it."""
    return World(Vec3(10, 10, 5), (BoxObstacle(Vec3(5, 5, 1), Vec3(2, 2, 2), "gray"),), CALM, 2)


def empty_scaled_world() -> World:
    return World(Vec3(10, 10, 5), (), CALM, 1)


def scaled_config(seed: int, episodes: int = 3000) -> TrainConfig:
    """Desk-scale training setup: random starts, 50-step episodes, epsilon reaching 0.01 at episode 1500.

    gamma 0.9 keeps the effective horizon near the world's width; at 0.99 the
    altitude-surplus climb term makes hover-and-detour paths nearly as valuable
    as direct ones and the learned paths pick up extra turns.
    """
    return TrainConfig(
        episodes=episodes,
        max_steps=50,
        gamma=0.9,
        lr=1e-4,
        batch_size=64,
        replay_capacity=50_000,
        target_sync_interval=500,
        warmup_transitions=1000,
        seed=seed,
        start=None,
        checkpoint_interval=500,
        curriculum=(CurriculumStage(None, wind_enabled=False),),
        schedule=EpsilonSchedule(1.0, 0.01, 1500),
    )


def tiny_mdp() -> TinyMdp:
    """4 x 4 x 2 grid, one single-cell obstacle, target in the far top corner."""
    world = World(Vec3(4, 4, 2), (BoxObstacle(Vec3(2, 2, 0), Vec3(1, 1, 1), "gray"),), CALM, 1)
    return TinyMdp(world, Vec3(3, 3, 1))


def axis_aligned_pairs(world: World, n: int, seed: int) -> list[tuple[Vec3, Vec3]]:
    """``n`` (start, target) pairs whose offset lies along a single axis, both cells free."""
    rng = np.random.default_rng(seed)
    pairs = []
    while len(pairs) < n:
        start = Vec3(*(int(rng.integers(d)) for d in world.dims))
        axis = int(rng.integers(3))
        coords = list(start)
        coords[axis] = int(rng.integers(world.dims[axis]))
        target = Vec3(*coords)
        if target != start and not collides(world, start) and not collides(world, target):
            pairs.append((start, target))
    return pairs


def turn_excess(world: World, net: QNetwork, cfg: TrainConfig, pairs) -> list[int]:
    """Greedy turn count minus the scripted minimum for each pair; failed rollouts give a large excess."""
    excess = []
    for i, (start, target) in enumerate(pairs):
        traj = rollout_greedy(world, net, rollout_seed(cfg.seed, i), cfg, start, target)
        if traj.termination is not Termination.REACHED_TARGET:
            excess.append(10**6)
        else:
            excess.append(turn_count(traj) - scripted_turns(start, target))
    return excess
