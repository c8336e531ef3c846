import numpy as np


class OrnsteinUhlenbeckNoise():
    """Mean-reverting exploration noise x <- x + theta (mu - x) dt + sigma sqrt(dt) N(0, 1).

    sigma is annealed linearly from sigma_max to zero over anneal_episodes; reset(episode)
    restarts the process at mu and applies the schedule for that episode.
    """

    def __init__(self, theta=0.15, sigma=0.2, mu=0.0, dt=1.0, anneal_episodes=1000, seed=None) -> None:
        if theta < 0 or sigma < 0 or dt <= 0 or anneal_episodes < 0:
            raise ValueError("theta, sigma and anneal_episodes must be >= 0 and dt > 0")
        self.theta = theta
        self.sigma_max = sigma
        self.sigma = sigma
        self.mu = mu
        self.dt = dt
        self.anneal_episodes = anneal_episodes
        self.rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        self.x = mu

    def sigma_at(self, episode: int) -> float:
        if self.anneal_episodes == 0:
            return self.sigma_max
        return self.sigma_max * max(0.0, 1.0 - episode / self.anneal_episodes)

    def reset(self, episode: int = 0):
        self.x = self.mu
        self.sigma = self.sigma_at(episode)

    def sample(self) -> float:
        #one draw per sample, also at sigma = 0
        shock = self.rng.standard_normal()
        self.x = self.x + self.theta * (self.mu - self.x) * self.dt + self.sigma * np.sqrt(self.dt) * shock
        return self.x

    def get_state(self) -> dict:
        return {"x": self.x, "sigma": self.sigma, "rng": self.rng.bit_generator.state}

    def set_state(self, state: dict):
        self.x = float(state["x"])
        self.sigma = float(state["sigma"])
        self.rng.bit_generator.state = state["rng"]
