"""Deterministic policy-gradient actor-critic with target networks.

The critic takes the observation with the action appended as its last input. Replay
transitions marked done do not bootstrap; horizon timeouts are stored as not done.
"""
import logging
from dataclasses import dataclass

import numpy as np

from src.errors import DivergenceError, ShapeError
from src.tiny_nn.adam import AdamState, adam_step
from src.tiny_nn.mlp import Mlp, backward, forward, mlp_init, soft_update
from .config import TrainConfig
from .noise import OrnsteinUhlenbeckNoise
from .replay_buffer import Batch

logger = logging.getLogger(__name__)


@dataclass(eq=False)
class Agent:
    actor: Mlp
    critic: Mlp
    actor_target: Mlp
    critic_target: Mlp
    actor_opt: AdamState
    critic_opt: AdamState
    noise: OrnsteinUhlenbeckNoise
    sample_rng: np.random.Generator
    gamma: float = 0.99
    tau: float = 1e-3
    lr_actor: float = 1e-4
    lr_critic: float = 1e-3

    @property
    def obs_dim(self) -> int:
        return self.actor.n_inputs


def make_agent(obs_dim: int, config: TrainConfig, seed: int | None = None) -> Agent:
    """Builds actor (tanh head) and critic (identity head) plus target copies.

    Independent random streams for the two networks, the exploration noise and replay
    sampling are spawned from one seed.

    Parameters:
        - obs_dim - observation length
        - config - hyperparameters
        - seed - defaults to config.seed

    Returns:
        Agent
    """
    seed = config.seed if seed is None else seed
    actor_seq, critic_seq, noise_seq, sample_seq = np.random.SeedSequence(seed).spawn(4)
    actor = mlp_init((obs_dim, *config.actor_hidden, 1), "tanh", np.random.default_rng(actor_seq))
    critic = mlp_init((obs_dim + 1, *config.critic_hidden, 1), "identity", np.random.default_rng(critic_seq))
    noise = OrnsteinUhlenbeckNoise(config.ou_theta, config.ou_sigma, anneal_episodes=config.noise_anneal_episodes,
                                   seed=np.random.default_rng(noise_seq))
    logger.debug("agent with %d actor and %d critic parameters", actor.n_params, critic.n_params)
    return Agent(
        actor=actor,
        critic=critic,
        actor_target=actor.copy(),
        critic_target=critic.copy(),
        actor_opt=AdamState.zeros_like(actor),
        critic_opt=AdamState.zeros_like(critic),
        noise=noise,
        sample_rng=np.random.default_rng(sample_seq),
        gamma=config.gamma,
        tau=config.tau,
        lr_actor=config.lr_actor,
        lr_critic=config.lr_critic)


def reseed(agent: Agent, seed: int) -> Agent:
    """Replaces the noise and replay-sampling streams with the ones make_agent derives from
    seed. Networks and optimizer states are kept."""
    _, _, noise_seq, sample_seq = np.random.SeedSequence(seed).spawn(4)
    agent.noise.rng = np.random.default_rng(noise_seq)
    agent.sample_rng = np.random.default_rng(sample_seq)
    return agent


def select_action(agent: Agent, obs, explore: bool) -> float:
    """pi(obs), plus one noise sample when exploring, clamped to [-1, 1]."""
    values = getattr(obs, "values", obs)
    if len(values) != agent.obs_dim:
        raise ShapeError(f"actor expects {agent.obs_dim} inputs, got {len(values)}")
    a = float(forward(agent.actor, values)[0])
    if explore:
        a = a + agent.noise.sample()
    return float(np.clip(a, -1.0, 1.0))


def critic_inputs(obs: np.ndarray, actions: np.ndarray) -> np.ndarray:
    return np.column_stack((obs, np.reshape(actions, (len(obs), -1))))


def critic_targets(agent: Agent, batch: Batch) -> np.ndarray:
    """y = r for done transitions, r + gamma * Q'(s', pi'(s')) otherwise."""
    next_actions = forward(agent.actor_target, batch.next_obs)
    q_next = forward(agent.critic_target, critic_inputs(batch.next_obs, next_actions))[:, 0]
    return np.where(batch.done, batch.reward, batch.reward + agent.gamma * q_next)


def critic_update(agent: Agent, batch: Batch) -> float:
    """One descent step of the critic on the mean squared Bellman error.

    Targets are computed from the target networks before the critic changes.

    Parameters:
        - agent - agent, critic and its optimizer state are replaced in place
        - batch - sampled transitions

    Returns:
        the loss before the step
    """
    if len(batch) < 1:
        raise ValueError("critic update needs at least one transition")
    y = critic_targets(agent, batch)
    x = critic_inputs(batch.obs, batch.action)
    q = forward(agent.critic, x)[:, 0]
    loss = float(np.mean((y - q) ** 2))
    if not np.isfinite(loss):
        raise DivergenceError(f"critic loss is {loss}")
    upstream = (-2.0 / len(batch) * (y - q))[:, None]
    grads, _ = backward(agent.critic, x, upstream)
    agent.critic, agent.critic_opt = adam_step(agent.critic, grads, agent.critic_opt, agent.lr_critic)
    return loss


def critic_action_gradient(critic: Mlp, obs: np.ndarray, actions: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Q(s, a) and dQ/da for a batch, using the input gradient of the critic."""
    x = critic_inputs(obs, actions)
    q = forward(critic, x)[:, 0]
    _, input_grad = backward(critic, x, np.ones((len(obs), 1)))
    return q, input_grad[:, -1]


def actor_gradient(agent: Agent, obs: np.ndarray, q_and_grad=None) -> tuple[float, np.ndarray]:
    """Sampled policy gradient (1/N) sum dQ/da * dpi/dtheta at a = pi(s).

    Parameters:
        - agent - agent
        - obs - batch of observations
        - q_and_grad - optional (obs, actions) -> (Q, dQ/da) replacing the critic

    Returns:
        (objective estimate mean Q, gradient of the objective in flatten() order)
    """
    obs = np.asarray(obs, dtype=float)
    actions = forward(agent.actor, obs)[:, 0]
    if q_and_grad is None:
        q, dq_da = critic_action_gradient(agent.critic, obs, actions)
    else:
        q, dq_da = q_and_grad(obs, actions)
    upstream = (np.asarray(dq_da, dtype=float) / len(obs)).reshape(-1, 1)
    grads, _ = backward(agent.actor, obs, upstream)
    return float(np.mean(q)), grads


def actor_update(agent: Agent, batch: Batch, q_and_grad=None) -> float:
    """One ascent step of the actor on the critic's value; the critic is not touched."""
    if len(batch) < 1:
        raise ValueError("actor update needs at least one transition")
    objective, grads = actor_gradient(agent, batch.obs, q_and_grad)
    if not np.isfinite(objective):
        raise DivergenceError(f"actor objective is {objective}")
    #ascent via the minimizing optimizer
    agent.actor, agent.actor_opt = adam_step(agent.actor, -grads, agent.actor_opt, agent.lr_actor)
    return objective


def sync_targets(agent: Agent) -> Agent:
    agent.actor_target = soft_update(agent.actor_target, agent.actor, agent.tau)
    agent.critic_target = soft_update(agent.critic_target, agent.critic, agent.tau)
    return agent
