import math
from dataclasses import dataclass

from src.config_utilities import ConfigUtilities
from src.errors import ConfigError


@dataclass(frozen=True)
class TrainConfig:
    """Actor-critic hyperparameters. eval_every = 0 disables evaluation episodes."""

    episodes: int = 2000
    batch_size: int = 64
    buffer_capacity: int = 100_000
    warmup: int = 1000
    gamma: float = 0.99
    lr_actor: float = 1e-4
    lr_critic: float = 1e-3
    tau: float = 1e-3
    ou_theta: float = 0.15
    ou_sigma: float = 0.2
    noise_anneal_episodes: int = 1000
    seed: int = 0
    eval_every: int = 10
    actor_hidden: tuple = (20, 20)
    critic_hidden: tuple = (100, 75)
    save_buffer: bool = False

    def __post_init__(self):
        #YAML gives lists
        object.__setattr__(self, "actor_hidden", tuple(self.actor_hidden))
        object.__setattr__(self, "critic_hidden", tuple(self.critic_hidden))
        for name in ("episodes", "batch_size", "buffer_capacity", "warmup", "noise_anneal_episodes", "seed",
                     "eval_every"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or value < 0:
                raise ConfigError(f"{name} must be a non-negative integer, got {value!r}")
        for name in ("gamma", "lr_actor", "lr_critic", "tau", "ou_theta", "ou_sigma"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value) or value < 0:
                raise ConfigError(f"{name} must be a finite non-negative number, got {value!r}")
        if not 0.0 <= self.gamma <= 1.0 or not 0.0 <= self.tau <= 1.0:
            raise ConfigError("gamma and tau must lie in [0, 1]")
        if not 1 <= self.batch_size <= self.warmup <= self.buffer_capacity:
            raise ConfigError(f"need 1 <= batch_size <= warmup <= buffer_capacity, got "
                              f"{self.batch_size}, {self.warmup}, {self.buffer_capacity}")
        for name in ("actor_hidden", "critic_hidden"):
            sizes = getattr(self, name)
            if not sizes or any(isinstance(s, bool) or not isinstance(s, int) or s < 1 for s in sizes):
                raise ConfigError(f"{name} must be a non-empty list of positive integers, got {sizes!r}")

    def to_dict(self) -> dict:
        values = ConfigUtilities.to_dict(self)
        values["actor_hidden"] = list(self.actor_hidden)
        values["critic_hidden"] = list(self.critic_hidden)
        return values

    def from_dict(data: dict | None) -> "TrainConfig":
        return ConfigUtilities.from_dict(TrainConfig, data, "train")
