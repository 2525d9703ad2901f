"""Fixed-capacity FIFO experience replay with uniform minibatch sampling."""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from plantnav.features import N_FEATURES


@dataclass(frozen=True)
class Transition:
    phi_t: np.ndarray
    action: int
    reward: float
    phi_next: np.ndarray
    terminal: bool


class Batch(NamedTuple):
    phi_t: np.ndarray      # (B, F)
    actions: np.ndarray    # (B,)
    rewards: np.ndarray    # (B,)
    phi_next: np.ndarray   # (B, F)
    terminal: np.ndarray   # (B,) bool

    def __len__(self):
        return len(self.actions)


class ReplayMemory:
    def __init__(self, capacity: int = 100_000, n_features: int = N_FEATURES):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.n_features = n_features
        self._phi = np.zeros((capacity, n_features))
        self._phi_next = np.zeros((capacity, n_features))
        self._actions = np.zeros(capacity, dtype=np.int64)
        self._rewards = np.zeros(capacity)
        self._terminal = np.zeros(capacity, dtype=bool)
        self._head = 0
        self._size = 0
        self.inserted = 0

    def __len__(self) -> int:
        return self._size

    def push(self, t: Transition) -> None:
        if len(t.phi_t) != self.n_features or len(t.phi_next) != self.n_features:
            raise ValueError(f"feature vectors must have length {self.n_features}")
        if not np.isfinite(t.reward):
            raise ValueError("reward must be finite")
        i = self._head
        self._phi[i] = t.phi_t
        self._phi_next[i] = t.phi_next
        self._actions[i] = t.action
        self._rewards[i] = t.reward
        self._terminal[i] = t.terminal
        self._head = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)
        self.inserted += 1

    def _slot_order(self) -> np.ndarray:
        """Storage slots from oldest to newest."""
        start = self._head - self._size
        return np.arange(start, self._head) % self.capacity

    def _at(self, i: int) -> Transition:
        return Transition(self._phi[i].copy(), int(self._actions[i]), float(self._rewards[i]),
                          self._phi_next[i].copy(), bool(self._terminal[i]))

    def contents(self) -> list[Transition]:
        return [self._at(i) for i in self._slot_order()]

    def sample_indices(self, batch_size: int, rng: np.random.Generator) -> np.ndarray:
        """Uniform draw of ``batch_size`` distinct positions in oldest-to-newest order."""
        if batch_size > self._size:
            raise ValueError(f"cannot sample {batch_size} from memory of size {self._size}")
        return rng.choice(self._size, size=batch_size, replace=False)

    def sample(self, batch_size: int, rng: np.random.Generator) -> Batch:
        idx = self.sample_indices(batch_size, rng)
        slots = (self._head - self._size + idx) % self.capacity
        return Batch(self._phi[slots], self._actions[slots], self._rewards[slots],
                     self._phi_next[slots], self._terminal[slots])
