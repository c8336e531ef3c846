import logging
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
from tqdm import tqdm

from src.battery_env.charging_env import ChargingEnv, Transition
from src.battery_env.rollout import EpisodeResult, run_episode
from src.errors import DivergenceError, ShapeError
from src.tiny_nn.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .agent import Agent, actor_update, critic_update, make_agent, select_action, sync_targets
from .config import TrainConfig
from .noise import OrnsteinUhlenbeckNoise
from .replay_buffer import ReplayBuffer

logger = logging.getLogger(__name__)

RUNLOG_COLUMNS = ["episode", "cum_reward", "v_score", "t_score", "charge_time_min", "steps", "evaluated_flag",
                  "discounted_return", "reason", "seed", "config_hash"]


@dataclass
class EpisodeRecord:
    episode: int
    evaluated: bool
    cum_reward: float
    discounted_return: float
    v_score: float
    t_score: float
    charge_time_min: float
    steps: int
    reason: str
    wall_clock_s: float = 0.0
    seed: int = 0
    config_hash: str = ""


@dataclass
class RunLog:
    """Per-episode records of one training run, training and evaluation episodes
    interleaved in completion order."""

    records: list = field(default_factory=list)
    diverged: bool = False
    divergence_message: str = ""

    def append(self, record: EpisodeRecord):
        if self.records and record.episode < self.records[-1].episode:
            raise ValueError(f"episode {record.episode} logged after episode {self.records[-1].episode}")
        self.records.append(record)

    def __len__(self):
        return len(self.records)

    def training(self) -> list:
        return [r for r in self.records if not r.evaluated]

    def evaluations(self) -> list:
        return [r for r in self.records if r.evaluated]

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for r in self.records:
            row = asdict(r)
            row["evaluated_flag"] = row.pop("evaluated")
            rows.append(row)
        return pd.DataFrame(rows, columns=RUNLOG_COLUMNS)

    def write_csv(self, path: str | Path) -> Path:
        """Writes the run log; wall-clock times stay out of the file so reruns are identical."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False, float_format="%.10g")
        return path

    @property
    def wall_clock_s(self) -> float:
        return sum(r.wall_clock_s for r in self.records)


def evaluate(agent: Agent, env: ChargingEnv, seed: int | None = 0) -> EpisodeResult:
    """Greedy rollout without exploration noise; the agent is not modified."""
    if env.observation_size != agent.obs_dim:
        raise ShapeError(f"agent expects {agent.obs_dim} observations, environment gives {env.observation_size}")
    return run_episode(env, lambda obs: select_action(agent, obs, explore=False), seed, agent.gamma)


def _record(episode, evaluated, result: EpisodeResult, started, seed, config_hash) -> EpisodeRecord:
    return EpisodeRecord(
        episode=episode,
        evaluated=evaluated,
        cum_reward=result.cum_reward,
        discounted_return=result.discounted_return,
        v_score=result.v_score,
        t_score=result.t_score,
        charge_time_min=result.charge_time_min,
        steps=result.steps,
        reason=result.reason,
        wall_clock_s=time.perf_counter() - started,
        seed=seed,
        config_hash=config_hash)


class Trainer():
    """Runs the actor-critic loop. progress switches the tqdm bar; it is also hidden when
    stderr is not a terminal."""

    progress = True

    def __init__(self, env_factory, config: TrainConfig, agent: Agent = None, buffer: ReplayBuffer = None,
                 config_hash: str = "", first_episode: int = 0) -> None:
        self.env = env_factory()
        self.eval_env = env_factory()
        self.config = config
        self.agent = agent or make_agent(self.env.observation_size, config)
        if self.agent.obs_dim != self.env.observation_size:
            raise ShapeError(f"agent expects {self.agent.obs_dim} observations, "
                             f"environment gives {self.env.observation_size}")
        if buffer is None:
            buffer = ReplayBuffer(config.buffer_capacity, self.env.observation_size)
        self.buffer = buffer
        self.config_hash = config_hash
        self.first_episode = first_episode
        self.updates = 0

    def _learn(self, transition: Transition):
        agent, cfg = self.agent, self.config
        self.buffer.push(transition)
        if len(self.buffer) < cfg.warmup:
            return
        batch = self.buffer.sample(cfg.batch_size, agent.sample_rng)
        critic_update(agent, batch)
        actor_update(agent, batch)
        sync_targets(agent)
        self.updates += 1

    def train(self) -> tuple[Agent, RunLog]:
        """Trains for config.episodes episodes; episode seeds are config.seed + episode index.

        Returns:
            (agent, run log); on divergence the partial log is returned with diverged set
        """
        cfg = self.config
        log = RunLog()
        agent = self.agent
        show = Trainer.progress and sys.stderr.isatty()
        episodes = range(self.first_episode, self.first_episode + cfg.episodes)
        try:
            for episode in tqdm(episodes, disable=not show, desc="episodes", unit="ep"):
                started = time.perf_counter()
                agent.noise.reset(episode)
                result = run_episode(self.env, lambda obs: select_action(agent, obs, explore=True),
                                     cfg.seed + episode, agent.gamma, self._learn)
                log.append(_record(episode, False, result, started, cfg.seed, self.config_hash))

                if cfg.eval_every and (episode + 1) % cfg.eval_every == 0:
                    started = time.perf_counter()
                    result = evaluate(agent, self.eval_env, cfg.seed)
                    log.append(_record(episode, True, result, started, cfg.seed, self.config_hash))
                    logger.info("episode %d: eval reward %.3f, v_score %.4f V, t_score %.3f K, %.1f min",
                                episode, result.cum_reward, result.v_score, result.t_score, result.charge_time_min)
        except DivergenceError as err:
            logger.error("training diverged after %d records: %s", len(log), err)
            log.diverged = True
            log.divergence_message = str(err)
        return agent, log


def train(env_factory, config: TrainConfig, agent: Agent = None, config_hash: str = "") -> tuple[Agent, RunLog]:
    """Convenience wrapper around Trainer for a fresh (or given) agent."""
    return Trainer(env_factory, config, agent, config_hash=config_hash).train()


def save_agent(path: str | Path, agent: Agent, buffer: ReplayBuffer = None, metadata: dict = None) -> Path:
    """Saves networks, optimizer moments, noise state and sampling RNG; the replay buffer
    only when given."""
    noise_state = agent.noise.get_state()
    meta = dict(metadata or {})
    meta.update({
        "gamma": agent.gamma, "tau": agent.tau, "lr_actor": agent.lr_actor, "lr_critic": agent.lr_critic,
        "noise": {"theta": agent.noise.theta, "sigma_max": agent.noise.sigma_max, "mu": agent.noise.mu,
                  "dt": agent.noise.dt, "anneal_episodes": agent.noise.anneal_episodes,
                  "x": noise_state["x"], "sigma": noise_state["sigma"], "rng": noise_state["rng"]},
    })
    checkpoint = Checkpoint(
        networks={"actor": agent.actor, "critic": agent.critic, "actor_target": agent.actor_target,
                  "critic_target": agent.critic_target},
        optimizers={"actor": agent.actor_opt, "critic": agent.critic_opt},
        rng_state=agent.sample_rng.bit_generator.state,
        metadata=meta,
        arrays=buffer.to_arrays() if buffer is not None else {})
    return save_checkpoint(path, checkpoint)


def load_agent(path: str | Path) -> tuple[Agent, ReplayBuffer | None, dict]:
    """Inverse of save_agent.

    Returns:
        (agent, replay buffer or None, metadata)
    """
    checkpoint = load_checkpoint(path)
    for name in ("actor", "critic", "actor_target", "critic_target"):
        if name not in checkpoint.networks:
            raise ShapeError(f"checkpoint {path} has no '{name}' network")
    try:
        agent = _agent_from_checkpoint(checkpoint)
    except (KeyError, TypeError) as err:
        raise ShapeError(f"checkpoint {path} holds no agent state: missing {err}") from err
    buffer = None
    if "replay_meta" in checkpoint.arrays:
        buffer = ReplayBuffer.from_arrays(checkpoint.arrays)
    return agent, buffer, checkpoint.metadata


def _agent_from_checkpoint(checkpoint: Checkpoint) -> Agent:
    meta = checkpoint.metadata
    noise_meta = meta["noise"]
    noise = OrnsteinUhlenbeckNoise(noise_meta["theta"], noise_meta["sigma_max"], noise_meta["mu"], noise_meta["dt"],
                                   noise_meta["anneal_episodes"])
    noise.set_state(noise_meta)
    sample_rng = np.random.default_rng()
    sample_rng.bit_generator.state = checkpoint.rng_state
    agent = Agent(
        actor=checkpoint.networks["actor"],
        critic=checkpoint.networks["critic"],
        actor_target=checkpoint.networks["actor_target"],
        critic_target=checkpoint.networks["critic_target"],
        actor_opt=checkpoint.optimizers["actor"],
        critic_opt=checkpoint.optimizers["critic"],
        noise=noise,
        sample_rng=sample_rng,
        gamma=meta["gamma"],
        tau=meta["tau"],
        lr_actor=meta["lr_actor"],
        lr_critic=meta["lr_critic"])
    return agent
