"""Run orchestration behind the charge_lab verbs. Every command writes its outputs below
spec.out together with a manifest.json and returns an exit status."""
import dataclasses
import json
import logging
import math
import platform
import time
from pathlib import Path

import numpy as np
import pandas as pd
import scipy
import tqdm
import yaml

from src.baselines.cccv import run_cccv_episode
from src.baselines.oracles import coulomb_counting_oracle, simulate_profile
from src.battery_env.charging_env import ChargingEnv, make_env
from src.battery_env.config import AgingScenario
from src.battery_env.rollout import EpisodeResult
from src.ddpg.agent import reseed
from src.ddpg.training import RUNLOG_COLUMNS, Trainer, evaluate, load_agent, save_agent
from src.errors import ConfigError, DivergenceError, ParameterError, ShapeError, SimulationError
from src.spmet.grid import build_grid
from src.spmet.parameters import Discretization
from .experiment_spec import ExperimentSpec
from .profile_parser import read_profile

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DIVERGENCE = 2
EXIT_IO = 3

MANIFEST = "manifest.json"
RUNLOG = "runlog.csv"
CHECKPOINT = "agent.npz"
EXPORT_DIR = "export"
Z_95 = 1.96
FLOAT_FORMAT = "%.10g"

#panel name -> run log column
PANELS = {
    "reward": "cum_reward",
    "discounted_return": "discounted_return",
    "v_score": "v_score",
    "t_score": "t_score",
    "charge_time": "charge_time_min",
}
SUMMARY_COLUMNS = ["label", "cum_reward", "discounted_return", "v_score", "t_score", "charge_time_min", "steps",
                   "reason"]


def exit_code_for(err: BaseException) -> int:
    """Maps an exception escaping a command to the documented exit status. Anything not
    recognised counts as a bad input (status 1)."""
    if isinstance(err, DivergenceError):
        return EXIT_DIVERGENCE
    if isinstance(err, (ConfigError, ParameterError, ShapeError, SimulationError, ValueError)):
        return EXIT_CONFIG
    if isinstance(err, OSError):
        return EXIT_IO
    logger.error("unexpected %s: %s", type(err).__name__, err)
    return EXIT_CONFIG


def versions() -> dict:
    return {
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pandas": pd.__version__,
        "pyyaml": yaml.__version__,
        "tqdm": tqdm.__version__,
    }


def seed_dir(out: Path, seed: int) -> Path:
    return Path(out) / f"seed_{seed}"


def write_frame(frame: pd.DataFrame, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return path


def write_manifest(out: Path, command: str, spec: ExperimentSpec, runs: list, started: float, **extra) -> Path:
    """Writes out/manifest.json: command, resolved config, config hash, seeds, package
    versions and wall-clock time."""
    manifest = {
        "command": command,
        "config_hash": spec.config_hash(),
        "config": spec.resolved(),
        "seeds": list(spec.seeds),
        "versions": versions(),
        "wall_clock_s": time.perf_counter() - started,
        "runs": runs,
    }
    manifest.update(extra)
    path = Path(out) / MANIFEST
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8")
    return path


def read_manifest(run_dir: Path) -> dict:
    path = Path(run_dir) / MANIFEST
    if not path.is_file():
        raise FileNotFoundError("No manifest in run directory: " + str(path))
    return json.loads(path.read_text(encoding="utf-8"))


def summary_row(label: str, result: EpisodeResult) -> dict:
    return {
        "label": label,
        "cum_reward": result.cum_reward,
        "discounted_return": result.discounted_return,
        "v_score": result.v_score,
        "t_score": result.t_score,
        "charge_time_min": result.charge_time_min,
        "steps": result.steps,
        "reason": result.reason,
    }


def _print_summary(rows: list):
    for row in rows:
        print(f"{row['label']}: reward {row['cum_reward']:.3f}, v_score {row['v_score'] * 1000:.1f} mV, "
              f"t_score {row['t_score']:.2f} K, {row['charge_time_min']:.1f} min ({row['reason']})")


def _train_seed(spec: ExperimentSpec, factory, seed: int, config_hash: str, out: Path, agent=None, buffer=None):
    config = dataclasses.replace(spec.train, seed=seed)
    trainer = Trainer(factory, config, agent, buffer, config_hash=config_hash)
    agent, log = trainer.train()
    directory = seed_dir(out, seed)
    log.write_csv(directory / RUNLOG)
    save_agent(directory / CHECKPOINT, agent, trainer.buffer if config.save_buffer else None,
               {"observation_mode": spec.env.observation_mode, "seed": seed, "episodes": config.episodes,
                "config_hash": config_hash})
    if log.diverged:
        logger.error("seed %d diverged: %s", seed, log.divergence_message)
    run = {"seed": seed, "episodes": len(log.training()), "diverged": log.diverged,
           "wall_clock_s": log.wall_clock_s}
    return agent, run


def cmd_train(spec: ExperimentSpec, modes: list | None = None) -> int:
    """Trains one agent per seed. With several observation modes each mode gets its own
    sub-directory of spec.out.

    Parameters:
        - spec - resolved experiment
        - modes - observation modes to train, default the one in spec.env

    Returns:
        exit status (2 when any run diverged; its logs are still written)
    """
    modes = modes or [spec.env.observation_mode]
    status = EXIT_OK
    for mode in modes:
        mode_spec = spec.with_mode(mode)
        out = spec.out / mode if len(modes) > 1 else spec.out
        started = time.perf_counter()
        params = mode_spec.load_parameters()
        factory = make_env(params, mode_spec.env, mode_spec.scenario)
        config_hash = mode_spec.config_hash()
        runs = []
        for seed in mode_spec.seeds:
            logger.info("training %s observations, seed %d", mode, seed)
            _, run = _train_seed(mode_spec, factory, seed, config_hash, out)
            runs.append(run)
            if run["diverged"]:
                status = EXIT_DIVERGENCE
        path = write_manifest(out, "train", mode_spec, runs, started)
        print("run logs and checkpoints written to", out)
        print("\t-> " + str(path))
    return status


def _load_checked(checkpoint: Path, spec: ExperimentSpec):
    agent, buffer, meta = load_agent(checkpoint)
    mode = meta.get("observation_mode")
    if mode is not None and mode != spec.env.observation_mode:
        raise ConfigError(f"checkpoint {checkpoint} was trained on '{mode}' observations, "
                          f"config asks for '{spec.env.observation_mode}'")
    return agent, buffer, meta


def cmd_eval(spec: ExperimentSpec, checkpoint: str | Path, baseline: bool = False) -> int:
    """Greedy rollout of a checkpoint from the configured initial state; with baseline the
    CC-CV charger is run from the same state for comparison."""
    started = time.perf_counter()
    params = spec.load_parameters()
    agent, _, _ = _load_checked(Path(checkpoint), spec)
    result = evaluate(agent, ChargingEnv(params, spec.env, spec.scenario), spec.seeds[0])
    write_frame(result.trajectory, spec.out / "eval_trajectory.csv")
    rows = [summary_row("policy", result)]
    if baseline:
        reference = run_cccv_episode(ChargingEnv(params, spec.env, spec.scenario), spec.cccv, spec.seeds[0])
        write_frame(reference.trajectory, spec.out / "cccv_trajectory.csv")
        rows.append(summary_row("cccv", reference))
    write_frame(pd.DataFrame(rows, columns=SUMMARY_COLUMNS), spec.out / "eval_summary.csv")
    write_manifest(spec.out, "eval", spec, [], started, checkpoint=str(checkpoint))
    _print_summary(rows)
    return EXIT_OK


def cmd_age(spec: ExperimentSpec, checkpoint: str | Path) -> int:
    """Aging study. Phase 1 evaluates the frozen checkpoint on the fresh and on the aged
    cell; phase 2 continues training it on the aged cell, once per seed, and evaluates the
    result.

    Returns:
        exit status (2 when any continued run diverged)
    """
    started = time.perf_counter()
    checkpoint = Path(checkpoint)
    if spec.scenario.is_identity:
        logger.warning("identity aging scenario: phase 1 reproduces a plain evaluation")
    params = spec.load_parameters()
    eval_seed = spec.seeds[0]

    agent, _, _ = _load_checked(checkpoint, spec)
    fresh = evaluate(agent, ChargingEnv(params, spec.env, AgingScenario()), eval_seed)
    frozen = evaluate(agent, ChargingEnv(params, spec.env, spec.scenario), eval_seed)
    write_frame(frozen.trajectory, spec.out / "phase1_trajectory.csv")
    rows = [summary_row("fresh", fresh), summary_row("phase1", frozen)]
    if frozen.v_score > 0 or frozen.t_score > 0:
        logger.info("frozen policy violates the constraints on the aged cell")

    factory = make_env(params, spec.env, spec.scenario)
    config_hash = spec.config_hash()
    status = EXIT_OK
    runs = []
    for seed in spec.seeds:
        #each seed continues from the unmodified checkpoint with its own exploration streams
        agent, buffer, _ = _load_checked(checkpoint, spec)
        reseed(agent, seed)
        agent, run = _train_seed(spec, factory, seed, config_hash, spec.out, agent, buffer)
        runs.append(run)
        if run["diverged"]:
            status = EXIT_DIVERGENCE
            continue
        adapted = evaluate(agent, ChargingEnv(params, spec.env, spec.scenario), eval_seed)
        write_frame(adapted.trajectory, seed_dir(spec.out, seed) / "phase2_trajectory.csv")
        rows.append(summary_row(f"phase2_seed{seed}", adapted))

    write_frame(pd.DataFrame(rows, columns=SUMMARY_COLUMNS), spec.out / "age_summary.csv")
    write_manifest(spec.out, "age", spec, runs, started, checkpoint=str(checkpoint))
    _print_summary(rows)
    return status


def cmd_sim(spec: ExperimentSpec, profile_path: str | Path) -> int:
    """Open-loop simulation of a time/current profile from the configured initial state,
    cross-checked against coulomb counting."""
    started = time.perf_counter()
    profile = read_profile(profile_path)
    params = spec.load_parameters()
    scenario = spec.scenario
    ctx = build_grid(params.aged(scenario.film_resistance_multiplier), Discretization(),
                     scenario.heat_generation_multiplier)
    frame = simulate_profile(ctx, profile.currents, profile.dt, spec.env.soc_init, spec.env.t_init_K)
    oracle = coulomb_counting_oracle(profile.currents, profile.dt, params.Q_nominal, spec.env.soc_init)
    deviation = float(np.max(np.abs(frame["soc_anode"].to_numpy() - oracle[:len(frame)])))
    path = write_frame(frame, spec.out / "sim_trajectory.csv")
    write_manifest(spec.out, "sim", spec, [], started, profile=str(profile_path), coulomb_deviation=deviation)
    if len(frame) < len(oracle):
        print(f"cell saturated, trajectory stops at t = {frame['time_s'].iloc[-1]:g} s")
    print("trajectory written to", path)
    print(f"max |SOC - coulomb counting| = {deviation:.3e}")
    return EXIT_OK


def confidence_band(values) -> tuple[float, float]:
    """Mean and 95% half-width (1.96 standard errors, normal approximation). A single
    value has half-width 0."""
    values = np.asarray(values, dtype=float)
    if len(values) == 0:
        raise ValueError("confidence band of an empty sample")
    mean = float(np.mean(values))
    if len(values) == 1:
        return mean, 0.0
    return mean, Z_95 * float(np.std(values, ddof=1)) / math.sqrt(len(values))


def aggregate_logs(logs: dict, column: str) -> pd.DataFrame:
    """Per-episode mean and 95% band of one run log column across seeds.

    Parameters:
        - logs - seed -> run log frame
        - column - run log column to aggregate

    Returns:
        frame with columns kind (train/eval), episode, n_seeds, mean, lower, upper
    """
    rows = []
    stacked = pd.concat([log.assign(_seed=seed) for seed, log in logs.items()], ignore_index=True)
    stacked["kind"] = np.where(stacked["evaluated_flag"].astype(bool), "eval", "train")
    for (kind, episode), group in stacked.groupby(["kind", "episode"], sort=True):
        mean, half = confidence_band(group[column].to_numpy())
        rows.append({"kind": kind, "episode": int(episode), "n_seeds": len(group), "mean": mean,
                     "lower": mean - half, "upper": mean + half})
    return pd.DataFrame(rows, columns=["kind", "episode", "n_seeds", "mean", "lower", "upper"])


def _read_logs(run_dir: Path, manifest: dict) -> dict:
    logs = {}
    for seed in manifest["seeds"]:
        path = seed_dir(run_dir, seed) / RUNLOG
        if not path.is_file():
            raise FileNotFoundError("Missing run log: " + str(path))
        log = pd.read_csv(path, dtype={"config_hash": str, "reason": str})
        if list(log.columns) != RUNLOG_COLUMNS:
            raise ConfigError(f"{path}: unexpected columns {list(log.columns)}")
        hashes = set(log["config_hash"].dropna())
        if hashes and hashes != {manifest["config_hash"]}:
            raise ConfigError(f"{path}: run log does not belong to this manifest")
        logs[seed] = log
    episodes = {seed: tuple(log["episode"]) for seed, log in logs.items()}
    if len(set(episodes.values())) > 1:
        raise ConfigError(f"run logs in {run_dir} cover different episodes")
    return logs


def export_run(run_dir: Path) -> list:
    manifest = read_manifest(run_dir)
    if manifest.get("command") not in ("train", "age"):
        raise ConfigError(f"{run_dir} holds a '{manifest.get('command')}' run without training logs")
    logs = _read_logs(run_dir, manifest)
    written = []
    for panel, column in PANELS.items():
        written.append(write_frame(aggregate_logs(logs, column), run_dir / EXPORT_DIR / f"{panel}.csv"))
    return written


def cmd_export(run_dir: str | Path) -> int:
    """Aggregates the per-seed run logs of a training or aging run into one tidy CSV per
    panel under run_dir/export. A directory holding full/ and simplified/ runs is exported
    mode by mode."""
    run_dir = Path(run_dir)
    if (run_dir / MANIFEST).is_file():
        targets = [run_dir]
    else:
        targets = [run_dir / mode for mode in ("full", "simplified") if (run_dir / mode / MANIFEST).is_file()]
        if not targets:
            raise FileNotFoundError("No manifest in run directory: " + str(run_dir / MANIFEST))
    for target in targets:
        for path in export_run(target):
            print("exported", path)
    return EXIT_OK
