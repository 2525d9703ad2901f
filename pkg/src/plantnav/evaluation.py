"""Greedy evaluation, score/turn metrics, and exact oracles for checking the learner.

The oracles here (value iteration on a tiny MDP, scripted policies) share
the dynamics and reward code with training but none of the learning code.
"""
from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from plantnav import qnet
from plantnav.dynamics import (
    N_ACTIONS,
    Action,
    EnergyConfig,
    Termination,
    UavState,
    apply_action,
    initial_state,
)
from plantnav.errors import LayoutMismatchError
from plantnav.features import FEATURE_LAYOUT_HASH, N_FEATURES, layout_hash, phi
from plantnav.qnet import QNetwork
from plantnav.replay import ReplayMemory, Transition
from plantnav.reward import RewardConfig, total_reward
from plantnav.trainer import (
    CurriculumStage,
    TrainConfig,
    bellman_targets,
    count_turns,
    episode_start,
    select_action,
)
from plantnav.world import Vec3, World, collides, in_bounds

Policy = Callable[[World, UavState], Action]


@dataclass(frozen=True)
class TrajectoryStep:
    pos: Vec3
    action: Optional[Action]
    reward: float
    termination: Termination


@dataclass
class Trajectory:
    """Row 0 is the start cell (no action); each later row is one executed step."""

    steps: list[TrajectoryStep]
    seed: int
    target: Vec3

    @property
    def actions(self) -> list[Action]:
        return [s.action for s in self.steps[1:]]

    @property
    def termination(self) -> Termination:
        return self.steps[-1].termination

    @property
    def score(self) -> float:
        return sum(s.reward for s in self.steps)

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["step", "x", "y", "z", "action", "reward", "termination"])
            for i, s in enumerate(self.steps):
                w.writerow([i, s.pos.x, s.pos.y, s.pos.z, "" if s.action is None else s.action.label,
                            repr(s.reward), s.termination.value])


def net_policy(net: QNetwork, cfg: TrainConfig) -> Policy:
    if net.layout_hash != FEATURE_LAYOUT_HASH or net.layer_sizes[0] != N_FEATURES:
        raise LayoutMismatchError("network was not trained on the standard feature layout")
    feats = cfg.features

    def policy(world: World, s: UavState) -> Action:
        return Action(int(np.argmax(qnet.forward(net, phi(world, s, feats)))))

    return policy


def scripted_policy(world: World, s: UavState) -> Action:
    """Obstacle-unaware straight-segment policy: close x, then y, then z."""
    d = s.target - s.pos
    for axis, (plus, minus) in enumerate(((Action.PX, Action.NX), (Action.PY, Action.NY), (Action.PZ, Action.NZ))):
        if d[axis] > 0:
            return plus
        if d[axis] < 0:
            return minus
    return Action.PX


def scripted_turns(start: Sequence[int], target: Sequence[int]) -> int:
    """Turns taken by :func:`scripted_policy` on an empty calm world (the minimum possible)."""
    return max(sum(1 for a, b in zip(start, target) if a != b) - 1, 0)


def scripted_delta_net() -> QNetwork:
    """Hand-built 18-6-6 network whose greedy action steps along the largest scaled offset to the target.

    Hidden unit k is ReLU(+/- delta on one axis), output k copies hidden k, so
    Q(+X) = max(dx, 0), Q(-X) = max(-dx, 0) and so on.
    """
    w1 = np.zeros((N_ACTIONS, N_FEATURES))
    for a in Action:
        axis = int(a) // 2
        w1[a, 6 + axis] = 1.0 if int(a) % 2 == 0 else -1.0
    return QNetwork([w1, np.eye(N_ACTIONS)], [np.zeros(N_ACTIONS), np.zeros(N_ACTIONS)])


def rollout(
    world: World,
    policy: Policy,
    seed: int,
    cfg: TrainConfig = TrainConfig(),
    start: Sequence[int] | None = None,
    target: Sequence[int] | None = None,
) -> Trajectory:
    """Run ``policy`` to termination; start/target default to the training sampler."""
    rng = np.random.default_rng(seed)
    if start is None or target is None:
        s0, t0 = episode_start(world, cfg, CurriculumStage(None), rng)
        start = s0 if start is None else start
        target = t0 if target is None else target
    s = initial_state(start, target, cfg.energy)
    steps = [TrajectoryStep(s.pos, None, 0.0, Termination.RUNNING)]
    while True:
        a = policy(world, s)
        outcome = apply_action(world, s, a, rng, cfg.energy, cfg.max_steps)
        r = total_reward(outcome, s, cfg.reward).r_total
        s = outcome.next_state
        steps.append(TrajectoryStep(s.pos, a, r, outcome.termination))
        if outcome.termination is not Termination.RUNNING:
            return Trajectory(steps, seed, Vec3(*target))


def rollout_greedy(world: World, net: QNetwork, seed: int, cfg: TrainConfig = TrainConfig(),
                   start=None, target=None) -> Trajectory:
    return rollout(world, net_policy(net, cfg), seed, cfg, start, target)


def turn_count(traj: Trajectory) -> int:
    if not traj.steps:
        raise ValueError("empty trajectory")
    return count_turns(traj.actions)


def moving_average(scores: Sequence[float], window: int) -> list[float]:
    if window < 1:
        raise ValueError("window must be >= 1")
    return [math.fsum(scores[max(0, i - window + 1) : i + 1]) / min(i + 1, window)
            for i in range(len(scores))]


def rollout_seed(seed: int, index: int) -> int:
    """Independent per-rollout seed derived from a base seed and rollout index."""
    return int(np.random.SeedSequence([seed, index]).generate_state(1, np.uint64)[0])


@dataclass
class EvalSummary:
    episodes: int
    success_rate: float
    mean_steps: float
    mean_turns: float
    mean_score: float
    terminations: dict[str, int]

    def to_dict(self) -> dict:
        return {
            "episodes": self.episodes,
            "success_rate": self.success_rate,
            "mean_steps": self.mean_steps,
            "mean_turns": self.mean_turns,
            "mean_score": self.mean_score,
            "terminations": self.terminations,
        }


def evaluate(world: World, policy: Policy, n_episodes: int, seed: int,
             cfg: TrainConfig = TrainConfig()) -> tuple[EvalSummary, list[Trajectory]]:
    if n_episodes < 1:
        raise ValueError("n_episodes must be >= 1")
    trajs = [rollout(world, policy, rollout_seed(seed, i), cfg) for i in range(n_episodes)]
    counts = Counter(t.termination.value for t in trajs)
    hist = {t.value: counts.get(t.value, 0) for t in Termination if t is not Termination.RUNNING}
    summary = EvalSummary(
        episodes=n_episodes,
        success_rate=hist[Termination.REACHED_TARGET.value] / n_episodes,
        mean_steps=float(np.mean([len(t.steps) - 1 for t in trajs])),
        mean_turns=float(np.mean([turn_count(t) for t in trajs])),
        mean_score=float(np.mean([t.score for t in trajs])),
        terminations=hist,
    )
    return summary, trajs


def success_rate(world: World, net: QNetwork | Policy, n_episodes: int, seed: int,
                 cfg: TrainConfig = TrainConfig()) -> float:
    policy = net_policy(net, cfg) if isinstance(net, QNetwork) else net
    return evaluate(world, policy, n_episodes, seed, cfg)[0].success_rate


# --- tiny MDP oracle -------------------------------------------------------

@dataclass(frozen=True)
class TinyMdp:
    """Position-only MDP: calm wind, unlimited battery and steps, same actions and rewards.

    Crash and reaching the target are absorbing; every other cell is a state.
    """

    world: World
    target: Vec3
    reward: RewardConfig = field(default_factory=RewardConfig)

    def __post_init__(self):
        object.__setattr__(self, "target", Vec3(*self.target))
        if self.world.wind.base_speed != 0 or self.world.wind.height_gain != 0:
            object.__setattr__(self, "world", self.world.without_wind())
        n = self.world.dims.x * self.world.dims.y * self.world.dims.z
        if n > 200:
            raise ValueError(f"tiny MDP must have <= 200 cells, got {n}")
        if not in_bounds(self.world, self.target) or collides(self.world, self.target):
            raise ValueError("target must be a free in-bounds cell")

    @property
    def states(self) -> list[Vec3]:
        """Non-terminal states: free cells other than the target, in x-y-z order."""
        d = self.world.dims
        return [
            Vec3(x, y, z)
            for x in range(d.x) for y in range(d.y) for z in range(d.z)
            if not collides(self.world, (x, y, z)) and (x, y, z) != self.target
        ]

    def step(self, pos: Sequence[int], a: Action) -> tuple[Vec3, float, bool]:
        s = initial_state(pos, self.target, EnergyConfig(base_energy=math.inf))
        outcome = apply_action(self.world, s, a, _NO_RNG, EnergyConfig(base_energy=math.inf), max_steps=2**62)
        r = total_reward(outcome, s, self.reward).r_total
        return outcome.next_state.pos, r, outcome.termination is not Termination.RUNNING


class _NoRandom:
    def random(self):  # pragma: no cover - calm worlds never draw
        raise AssertionError("tiny MDP dynamics must be deterministic")


_NO_RNG = _NoRandom()


@dataclass
class QTable:
    states: list[Vec3]
    q: np.ndarray  # (n_states, 6)
    iterations: int = 0

    def index(self) -> dict[Vec3, int]:
        return {s: i for i, s in enumerate(self.states)}

    def optimal_actions(self, tol: float = 1e-9) -> list[set[int]]:
        """Per state, every action within ``tol`` (relative to max(1, |best|)) of the best value."""
        best = self.q.max(axis=1)
        slack = tol * np.maximum(1.0, np.abs(best))
        return [set(np.flatnonzero(self.q[i] >= best[i] - slack[i]).tolist()) for i in range(len(self.states))]


def transition_table(mdp: TinyMdp):
    states = mdp.states
    idx = {s: i for i, s in enumerate(states)}
    nxt = np.full((len(states), N_ACTIONS), -1, dtype=np.int64)
    rew = np.zeros((len(states), N_ACTIONS))
    for i, s in enumerate(states):
        for a in Action:
            p, r, done = mdp.step(s, a)
            rew[i, a] = r
            if not done:
                nxt[i, a] = idx[p]
    return states, nxt, rew


def value_iteration(mdp: TinyMdp, gamma: float, tol: float = 1e-10, max_iter: int = 1_000_000) -> QTable:
    """Bellman optimality backups over all (state, action) pairs until the largest change is < ``tol``."""
    states, nxt, rew = transition_table(mdp)
    q = np.zeros_like(rew)
    live = nxt >= 0
    for it in range(1, max_iter + 1):
        v = q.max(axis=1)
        new = rew + gamma * np.where(live, v[np.where(live, nxt, 0)], 0.0)
        change = float(np.max(np.abs(new - q))) if q.size else 0.0
        q = new
        if change < tol:
            return QTable(states, q, it)
    raise RuntimeError(f"value iteration did not converge in {max_iter} iterations")


ONE_HOT_PREFIX = "onehot_cell_"


def one_hot_layout(mdp: TinyMdp) -> tuple[str, ...]:
    d = mdp.world.dims
    return tuple(f"{ONE_HOT_PREFIX}{x}_{y}_{z}" for x in range(d.x) for y in range(d.y) for z in range(d.z))


def one_hot(mdp: TinyMdp, pos: Sequence[int]) -> np.ndarray:
    d = mdp.world.dims
    v = np.zeros(d.x * d.y * d.z)
    v[(pos[0] * d.y + pos[1]) * d.z + pos[2]] = 1.0
    return v


@dataclass(frozen=True)
class TinyDqnConfig:
    gamma: float = 0.99
    lr: float = 1e-3
    grad_steps: int = 20_000
    batch_size: int = 64
    replay_capacity: int = 10_000
    warmup_transitions: int = 500
    target_sync_interval: int = 1000
    episode_cap: int = 30
    hidden_sizes: tuple[int, ...] = (32,)
    epsilon_start: float = 1.0
    epsilon_end: float = 0.1


def train_tiny_dqn(mdp: TinyMdp, seed: int, cfg: TinyDqnConfig = TinyDqnConfig()) -> QNetwork:
    """DQN with one-hot position inputs on a :class:`TinyMdp`.

    Episodes start from a uniformly random state and are cut after
    ``episode_cap`` steps; the cut is not a terminal for bootstrapping because
    the MDP has no step limit. Epsilon decays linearly over the gradient budget.
    """
    rng = np.random.default_rng(seed)
    names = one_hot_layout(mdp)
    net = qnet.init((len(names), *cfg.hidden_sizes, N_ACTIONS), rng, layout_hash(names))
    target_net = qnet.sync_target(net)
    mem = ReplayMemory(cfg.replay_capacity, len(names))
    states = mdp.states
    zeros = np.zeros(len(names))
    grad_steps = 0
    while grad_steps < cfg.grad_steps:
        pos = states[rng.integers(len(states))]
        for _ in range(cfg.episode_cap):
            frac = grad_steps / cfg.grad_steps
            eps = cfg.epsilon_start + (cfg.epsilon_end - cfg.epsilon_start) * frac
            x = one_hot(mdp, pos)
            a = select_action(net, x, eps, rng)
            nxt, r, done = mdp.step(pos, a)
            mem.push(Transition(x, int(a), r, zeros if done else one_hot(mdp, nxt), done))
            if len(mem) >= cfg.warmup_transitions:
                batch = mem.sample(cfg.batch_size, rng)
                y = bellman_targets(batch, target_net, cfg.gamma)
                _, grads = qnet.loss_and_grad(net, batch.phi_t, batch.actions, y)
                qnet.sgd_step(net, grads, cfg.lr)
                grad_steps += 1
                if grad_steps % cfg.target_sync_interval == 0:
                    target_net = qnet.sync_target(net)
                if grad_steps >= cfg.grad_steps:
                    break
            if done:
                break
            pos = nxt
    return net


def policy_agreement(mdp: TinyMdp, net: QNetwork, table: QTable, tol: float = 1e-9) -> float:
    """Fraction of states where the network's greedy action is among the exactly-optimal ones."""
    optimal = table.optimal_actions(tol)
    hits = 0
    for s, ok in zip(table.states, optimal):
        a = int(np.argmax(qnet.forward(net, one_hot(mdp, s))))
        hits += a in ok
    return hits / len(table.states)
