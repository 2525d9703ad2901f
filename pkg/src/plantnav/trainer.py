"""DQN training loop: epsilon-greedy episodes, replay, Bellman targets, target sync, curriculum."""
from __future__ import annotations

import csv
import json
import logging
from collections import deque
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
    apply_action,
    initial_state,
)
from plantnav.errors import ConfigError, NumericalError, WorldError
from plantnav.features import N_FEATURES, FeatureConfig, phi
from plantnav.qnet import QNetwork
from plantnav.replay import Batch, ReplayMemory, Transition
from plantnav.reward import RewardConfig, total_reward
from plantnav.world import Vec3, World, collides, euclidean, in_bounds, sample_free_cell, sample_target

log = logging.getLogger(__name__)

EPISODE_LOG_HEADER = (
    "episode", "score", "steps", "termination", "epsilon", "stage", "turns", "final_distance", "energy_used",
)


@dataclass(frozen=True)
class EpsilonSchedule:
    start: float = 1.0
    end: float = 0.01
    decay_episodes: int = 4000

    def __post_init__(self):
        if not (self.start >= self.end > 0):
            raise ConfigError("epsilon schedule needs start >= end > 0")
        if self.decay_episodes <= 0:
            raise ConfigError("decay_episodes must be > 0")


@dataclass(frozen=True)
class CurriculumStage:
    max_target_distance: Optional[int] = None  # Manhattan cells from start; None = unrestricted
    wind_enabled: bool = True
    advance_success_rate: float = 0.8
    advance_window: int = 200

    def __post_init__(self):
        if self.max_target_distance is not None and self.max_target_distance <= 0:
            raise ConfigError("max_target_distance must be positive")
        if not 0.0 <= self.advance_success_rate <= 1.0:
            raise ConfigError("advance_success_rate must be in [0, 1]")
        if self.advance_window <= 0:
            raise ConfigError("advance_window must be positive")


DEFAULT_CURRICULUM = (
    CurriculumStage(15, False),
    CurriculumStage(40, True),
    CurriculumStage(None, True),
)


@dataclass(frozen=True)
class TrainConfig:
    episodes: int = 1000
    max_steps: int = 400
    gamma: float = 0.99
    lr: float = 1e-4
    batch_size: int = 64
    replay_capacity: int = 100_000
    target_sync_interval: int = 1000
    warmup_transitions: int = 1000
    seed: int = 0
    start: Optional[tuple[int, int, int]] = (5, 5, 1)
    hidden_sizes: tuple[int, ...] = (64, 64)
    clearance_cap: int = 10
    checkpoint_interval: int = 500
    curriculum: tuple[CurriculumStage, ...] = DEFAULT_CURRICULUM
    reward: RewardConfig = field(default_factory=RewardConfig)
    energy: EnergyConfig = field(default_factory=EnergyConfig)
    schedule: EpsilonSchedule = field(default_factory=EpsilonSchedule)

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ConfigError("gamma must be in (0, 1]")
        for name in ("max_steps", "batch_size", "replay_capacity", "target_sync_interval",
                     "warmup_transitions", "clearance_cap", "checkpoint_interval"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.episodes < 0:
            raise ConfigError("episodes must be >= 0")
        if self.lr <= 0:
            raise ConfigError("lr must be positive")
        if not self.batch_size <= self.warmup_transitions <= self.replay_capacity:
            raise ConfigError("need batch_size <= warmup_transitions <= replay_capacity")
        if not self.curriculum:
            raise ConfigError("curriculum needs at least one stage")
        dists = [s.max_target_distance for s in self.curriculum]
        for a, b in zip(dists, dists[1:]):
            if a is None and b is not None or (a is not None and b is not None and b < a):
                raise ConfigError("curriculum target distances must be non-decreasing")
        if any(h <= 0 for h in self.hidden_sizes):
            raise ConfigError("hidden sizes must be positive")

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return (N_FEATURES, *self.hidden_sizes, N_ACTIONS)

    @property
    def features(self) -> FeatureConfig:
        return FeatureConfig(self.max_steps, self.clearance_cap)


@dataclass(frozen=True)
class EpisodeResult:
    episode: int
    score: float
    steps: int
    termination: Termination
    epsilon: float
    stage: int
    turns: int
    final_distance: float
    energy_used: float

    def csv_row(self) -> list[str]:
        return [str(self.episode), repr(self.score), str(self.steps), self.termination.value,
                repr(self.epsilon), str(self.stage), str(self.turns),
                repr(self.final_distance), repr(self.energy_used)]


def epsilon_at(sched: EpsilonSchedule, episode: int) -> float:
    if episode < 0:
        raise ValueError("episode must be >= 0")
    if episode >= sched.decay_episodes:
        return sched.end
    return max(sched.end, sched.start - (sched.start - sched.end) * episode / sched.decay_episodes)


def select_action(net: QNetwork, features: np.ndarray, epsilon: float, rng: np.random.Generator) -> Action:
    """Epsilon-greedy choice; greedy ties go to the lowest action index."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must be in [0, 1]")
    if rng.random() < epsilon:
        return Action(int(rng.integers(N_ACTIONS)))
    return Action(int(np.argmax(qnet.forward(net, features))))


def bellman_targets(batch: Batch, target_net: QNetwork, gamma: float) -> np.ndarray:
    if len(batch) == 0:
        raise ValueError("empty batch")
    next_max = qnet.forward(target_net, batch.phi_next).max(axis=1)
    return np.where(batch.terminal, batch.rewards, batch.rewards + gamma * next_max)


def count_turns(actions: Sequence) -> int:
    return sum(1 for a, b in zip(actions, actions[1:]) if a != b)


@dataclass
class TrainingState:
    """Mutable learner state owned by a single training loop."""

    net: QNetwork
    target_net: QNetwork
    memory: ReplayMemory
    rng: np.random.Generator
    grad_steps: int = 0
    stage: int = 0
    syncs: int = 0

    @classmethod
    def fresh(cls, cfg: TrainConfig, net: QNetwork | None = None) -> "TrainingState":
        rng = np.random.default_rng(cfg.seed)
        if net is None:
            net = qnet.init(cfg.layer_sizes, rng)
        elif net.layer_sizes[0] != N_FEATURES:
            raise ConfigError(f"network input width {net.layer_sizes[0]} != {N_FEATURES}")
        return cls(net, qnet.sync_target(net), ReplayMemory(cfg.replay_capacity), rng)


def stage_world(world: World, stage: CurriculumStage) -> World:
    return world if stage.wind_enabled else world.without_wind()


def episode_start(world: World, cfg: TrainConfig, stage: CurriculumStage, rng: np.random.Generator):
    if cfg.start is None:
        start = sample_free_cell(world, rng)
    else:
        start = Vec3(*cfg.start)
        if not in_bounds(world, start) or collides(world, start):
            raise WorldError(f"start position {tuple(start)} is out of bounds or inside an obstacle")
    target = sample_target(world, rng, near=start, max_distance=stage.max_target_distance)
    return start, target


def gradient_step(state: TrainingState, cfg: TrainConfig) -> float:
    batch = state.memory.sample(cfg.batch_size, state.rng)
    y = bellman_targets(batch, state.target_net, cfg.gamma)
    loss, grads = qnet.loss_and_grad(state.net, batch.phi_t, batch.actions, y)
    if not np.isfinite(loss):
        raise NumericalError("non-finite loss")
    qnet.sgd_step(state.net, grads, cfg.lr)
    state.grad_steps += 1
    if state.grad_steps % cfg.target_sync_interval == 0:
        state.target_net = qnet.sync_target(state.net)
        state.syncs += 1
    return loss


def run_episode(
    world: World,
    state: TrainingState,
    cfg: TrainConfig,
    episode_index: int,
    epsilon: float | None = None,
    start_target: tuple | None = None,
) -> EpisodeResult:
    """Play one episode, learning after every step once the memory is warmed up.

    ``world`` is the full world; wind is switched off here when the current
    curriculum stage disables it. ``epsilon`` overrides the schedule and
    ``start_target`` the sampled endpoints.

    Raises:
        NumericalError: loss or gradient became non-finite; the message names
            the episode, step and per-array parameter norms.
    """
    stage = cfg.curriculum[state.stage]
    env = stage_world(world, stage)
    start, target = start_target or episode_start(env, cfg, stage, state.rng)
    s = initial_state(start, target, cfg.energy)
    feats = cfg.features
    eps = epsilon_at(cfg.schedule, episode_index) if epsilon is None else epsilon
    zeros = np.zeros(N_FEATURES)

    x = phi(env, s, feats)
    score = 0.0
    actions: list[Action] = []
    while True:
        a = select_action(state.net, x, eps, state.rng)
        outcome = apply_action(env, s, a, state.rng, cfg.energy, cfg.max_steps)
        r = total_reward(outcome, s, cfg.reward).r_total
        done = outcome.termination is not Termination.RUNNING
        x_next = zeros if outcome.termination is Termination.CRASH else phi(env, outcome.next_state, feats)
        state.memory.push(Transition(x, int(a), r, x_next, done))
        if len(state.memory) >= cfg.warmup_transitions:
            try:
                gradient_step(state, cfg)
            except NumericalError as exc:
                norms = ", ".join(f"{n:.4g}" for n in state.net.param_norms())
                raise NumericalError(
                    f"{exc} at episode {episode_index}, step {outcome.next_state.steps_taken}; "
                    f"parameter norms [{norms}]"
                ) from None
        score += r
        actions.append(a)
        s = outcome.next_state
        x = x_next
        if done:
            break
    return EpisodeResult(
        episode=episode_index,
        score=score,
        steps=s.steps_taken,
        termination=outcome.termination,
        epsilon=eps,
        stage=state.stage,
        turns=count_turns(actions),
        final_distance=euclidean(s.pos, s.target),
        energy_used=s.used_energy,
    )


# --- outer loop ------------------------------------------------------------

@dataclass
class ResumeInfo:
    episodes_done: int
    stage: int
    grad_steps: int
    rng_state: dict
    window: list[bool] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"episodes_done": self.episodes_done, "stage": self.stage, "grad_steps": self.grad_steps,
                "window": [int(w) for w in self.window], "rng_state": self.rng_state}

    @classmethod
    def from_dict(cls, d: dict) -> "ResumeInfo":
        return cls(int(d["episodes_done"]), int(d["stage"]), int(d["grad_steps"]), d["rng_state"],
                   [bool(w) for w in d.get("window", [])])


def resume_info_path(ckpt_path: str | Path) -> Path:
    return Path(ckpt_path).with_suffix(".json")


@dataclass
class TrainResult:
    net: QNetwork
    episodes: list[EpisodeResult]
    checkpoints: list[Path]
    final_stage: int


def _write_checkpoint(out_dir: Path, name: str, state: TrainingState, info: ResumeInfo) -> Path:
    path = out_dir / f"{name}.bin"
    qnet.save_checkpoint(state.net, path)
    resume_info_path(path).write_text(json.dumps(info.to_dict(), indent=2) + "\n")
    return path


def train(
    world: World,
    cfg: TrainConfig,
    out_dir: str | Path | None = None,
    init_net: QNetwork | None = None,
    resume: ResumeInfo | None = None,
    on_episode: Callable[[EpisodeResult], None] | None = None,
) -> TrainResult:
    """Run episodes ``[start, cfg.episodes)`` and return the trained network.

    With ``out_dir`` set, ``episodes.csv`` is written and flushed per episode,
    and ``ckpt_<n>.bin`` (``n`` completed episodes) every
    ``cfg.checkpoint_interval`` episodes plus ``ckpt_final.bin`` at the end.
    Every checkpoint has a JSON sidecar carrying what a resume needs except the
    replay memory, which is not persisted.
    """
    state = TrainingState.fresh(cfg, init_net)
    first = 0
    window: deque[bool] = deque(maxlen=cfg.curriculum[0].advance_window)
    if resume is not None:
        first = resume.episodes_done
        state.stage = min(resume.stage, len(cfg.curriculum) - 1)
        state.grad_steps = resume.grad_steps
        state.rng.bit_generator.state = resume.rng_state
        window = deque(resume.window, maxlen=cfg.curriculum[state.stage].advance_window)

    out = Path(out_dir) if out_dir is not None else None
    results: list[EpisodeResult] = []
    checkpoints: list[Path] = []
    log_file = None
    writer = None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        log_file = open(out / "episodes.csv", "w", newline="")
        writer = csv.writer(log_file, lineterminator="\n")
        writer.writerow(EPISODE_LOG_HEADER)
        log_file.flush()

    def info(done: int) -> ResumeInfo:
        return ResumeInfo(done, state.stage, state.grad_steps, state.rng.bit_generator.state, list(window))

    try:
        for ep in range(first, cfg.episodes):
            res = run_episode(world, state, cfg, ep)
            results.append(res)
            if writer is not None:
                writer.writerow(res.csv_row())
                log_file.flush()
            if on_episode is not None:
                on_episode(res)
            window.append(res.termination is Termination.REACHED_TARGET)
            stage = cfg.curriculum[state.stage]
            if (state.stage + 1 < len(cfg.curriculum) and len(window) == stage.advance_window
                    and sum(window) / len(window) >= stage.advance_success_rate):
                state.stage += 1
                window = deque(maxlen=cfg.curriculum[state.stage].advance_window)
                log.info("episode %d: advancing to curriculum stage %d", ep, state.stage)
            done = ep + 1
            if out is not None and done % cfg.checkpoint_interval == 0 and done < cfg.episodes:
                checkpoints.append(_write_checkpoint(out, f"ckpt_{done}", state, info(done)))
            if log.isEnabledFor(logging.DEBUG):
                log.debug("episode %d score %.2f steps %d %s", ep, res.score, res.steps, res.termination.value)
        if out is not None:
            checkpoints.append(_write_checkpoint(out, "ckpt_final", state, info(max(first, cfg.episodes))))
    finally:
        if log_file is not None:
            log_file.close()
    return TrainResult(state.net, results, checkpoints, state.stage)
