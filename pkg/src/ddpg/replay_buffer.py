from dataclasses import dataclass

import numpy as np

from src.battery_env.charging_env import Transition
from src.errors import ShapeError


@dataclass(frozen=True, eq=False)
class Batch:
    obs: np.ndarray  # (N, obs_dim)
    action: np.ndarray  # (N,)
    reward: np.ndarray
    next_obs: np.ndarray
    done: np.ndarray  # bool, True where the target must not bootstrap

    def __len__(self):
        return len(self.reward)


class ReplayBuffer():
    """Fixed-capacity ring of transitions. Once full, each push overwrites the oldest entry;
    sampling is uniform with replacement over the current contents."""

    def __init__(self, capacity: int, obs_dim: int) -> None:
        if capacity < 1:
            raise ValueError(f"capacity must be positive, got {capacity}")
        self.capacity = int(capacity)
        self.obs_dim = int(obs_dim)
        self.obs = np.zeros((self.capacity, self.obs_dim))
        self.action = np.zeros(self.capacity)
        self.reward = np.zeros(self.capacity)
        self.next_obs = np.zeros((self.capacity, self.obs_dim))
        self.done = np.zeros(self.capacity, dtype=bool)
        self.count = 0  # total insertions

    def __len__(self):
        return min(self.count, self.capacity)

    def push(self, transition: Transition):
        if len(transition.obs) != self.obs_dim:
            raise ShapeError(f"buffer holds observations of size {self.obs_dim}, got {len(transition.obs)}")
        i = self.count % self.capacity
        self.obs[i] = transition.obs.values
        self.action[i] = transition.action
        self.reward[i] = transition.reward
        self.next_obs[i] = transition.next_obs.values
        self.done[i] = transition.done
        self.count += 1

    def oldest_index(self) -> int:
        return self.count % self.capacity if self.count >= self.capacity else 0

    def sample_indices(self, batch_size: int, rng: np.random.Generator) -> np.ndarray:
        size = len(self)
        if batch_size < 1 or size == 0:
            raise ValueError(f"cannot sample {batch_size} transitions from a buffer holding {size}")
        if batch_size > size:
            raise ValueError(f"batch of {batch_size} is larger than the buffer contents ({size})")
        return rng.integers(0, size, size=batch_size)

    def sample(self, batch_size: int, rng: np.random.Generator) -> Batch:
        idx = self.sample_indices(batch_size, rng)
        return Batch(self.obs[idx], self.action[idx], self.reward[idx], self.next_obs[idx], self.done[idx])

    def to_arrays(self) -> dict:
        size = len(self)
        return {
            "replay_obs": self.obs[:size].copy(),
            "replay_action": self.action[:size].copy(),
            "replay_reward": self.reward[:size].copy(),
            "replay_next_obs": self.next_obs[:size].copy(),
            "replay_done": self.done[:size].copy(),
            "replay_meta": np.array([self.capacity, self.count]),
        }

    def from_arrays(arrays: dict) -> "ReplayBuffer":
        capacity, count = (int(v) for v in arrays["replay_meta"])
        obs = arrays["replay_obs"]
        buffer = ReplayBuffer(capacity, obs.shape[1])
        size = len(obs)
        buffer.obs[:size] = obs
        buffer.action[:size] = arrays["replay_action"]
        buffer.reward[:size] = arrays["replay_reward"]
        buffer.next_obs[:size] = arrays["replay_next_obs"]
        buffer.done[:size] = arrays["replay_done"]
        buffer.count = count
        return buffer
