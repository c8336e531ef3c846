from dataclasses import dataclass

import pandas as pd

from .charging_env import TIMEOUT, ChargingEnv, Transition


@dataclass(eq=False)
class EpisodeResult:
    trajectory: pd.DataFrame
    cum_reward: float
    discounted_return: float
    v_score: float
    t_score: float
    charge_time_min: float
    steps: int
    reason: str


def discounted_return(rewards, gamma: float) -> float:
    """sum_k gamma^k r_k, accumulated from the last reward backwards."""
    ret = 0.0
    for r in reversed(list(rewards)):
        ret = r + gamma * ret
    return ret


def run_episode(env: ChargingEnv, policy, seed: int | None, gamma: float = 0.99, on_transition=None) -> EpisodeResult:
    """Rolls out policy(obs) -> action until the environment terminates.

    Transitions handed to on_transition are marked done only for terminal states that must
    not bootstrap: reaching the SOC target or saturating. A horizon timeout is not one.

    Parameters:
        - env - environment (reset here)
        - policy - callable mapping an Observation to a normalized action
        - seed - reset seed
        - gamma - discount for the discounted return
        - on_transition - optional callback receiving each Transition

    Returns:
        EpisodeResult
    """
    obs = env.reset(seed)
    rewards = []
    done = False
    info = {}
    while not done:
        action = policy(obs)
        next_obs, breakdown, done, info = env.step(action)
        rewards.append(breakdown.total)
        if on_transition is not None:
            terminal = done and info["reason"] != TIMEOUT
            on_transition(Transition(obs, float(action), breakdown.total, next_obs, terminal, info))
        obs = next_obs
    v_score, t_score = env.violation_scores()
    return EpisodeResult(env.trajectory.to_frame(), float(sum(rewards)), discounted_return(rewards, gamma),
                         v_score, t_score, env.charge_time_min, len(rewards), info.get("reason", ""))
