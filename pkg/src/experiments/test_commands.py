import json

import numpy as np
import pandas as pd
import pytest

import charge_lab
from src.battery_env.config import DEFAULT_AGED_SCENARIO, EnvConfig
from src.ddpg.config import TrainConfig
from src.ddpg.training import RUNLOG_COLUMNS, Trainer
from src.errors import ConfigError, DivergenceError, ShapeError
from src.experiments.commands import (EXIT_CONFIG, EXIT_DIVERGENCE, EXIT_IO, EXIT_OK, aggregate_logs, cmd_age,
                                      cmd_eval, cmd_export, cmd_sim, cmd_train, confidence_band, exit_code_for)
from src.experiments.experiment_spec import ExperimentSpec

TINY_ENV = EnvConfig(max_steps=4)
TINY_TRAIN = TrainConfig(episodes=2, batch_size=2, warmup=2, buffer_capacity=50, eval_every=1,
                         actor_hidden=(4,), critic_hidden=(8,))


@pytest.fixture(autouse=True)
def quiet():
    Trainer.progress = False
    yield
    Trainer.progress = True


def _spec(out, seeds=(0,), **changes):
    return ExperimentSpec(env=changes.pop("env", TINY_ENV), train=changes.pop("train", TINY_TRAIN),
                          seeds=seeds, out=out, **changes)


def _profile(tmp_path, currents, dt=60):
    path = tmp_path / "profile.csv"
    rows = "".join(f"{k * dt},{i}\n" for k, i in enumerate(currents))
    path.write_text("time_s,current_A\n" + rows, encoding="utf-8")
    return path


def test_train_zero_episodes_gives_empty_logs(tmp_path):
    spec = _spec(tmp_path, train=TrainConfig(episodes=0))
    assert cmd_train(spec) == EXIT_OK
    log = pd.read_csv(tmp_path / "seed_0" / "runlog.csv")
    assert list(log.columns) == RUNLOG_COLUMNS
    assert len(log) == 0
    assert (tmp_path / "seed_0" / "agent.npz").is_file()
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["command"] == "train"
    assert manifest["seeds"] == [0]
    assert manifest["config_hash"] == spec.config_hash()
    assert "numpy" in manifest["versions"]


def test_train_writes_one_log_per_seed(tmp_path):
    assert cmd_train(_spec(tmp_path, seeds=(0, 1))) == EXIT_OK
    for seed in (0, 1):
        log = pd.read_csv(tmp_path / f"seed_{seed}" / "runlog.csv")
        #two training and two evaluation episodes
        assert len(log) == 4
        assert log["evaluated_flag"].sum() == 2
        assert (log["seed"] == seed).all()


def test_train_both_modes_uses_sub_directories(tmp_path):
    assert cmd_train(_spec(tmp_path, train=TrainConfig(episodes=0)), ["full", "simplified"]) == EXIT_OK
    for mode in ("full", "simplified"):
        manifest = json.loads((tmp_path / mode / "manifest.json").read_text())
        assert manifest["config"]["env"]["observation_mode"] == mode


def test_training_is_reproducible(tmp_path):
    cmd_train(_spec(tmp_path / "a"))
    cmd_train(_spec(tmp_path / "b"))
    assert (tmp_path / "a" / "seed_0" / "runlog.csv").read_bytes() == \
        (tmp_path / "b" / "seed_0" / "runlog.csv").read_bytes()


def test_eval_is_deterministic_and_runs_baseline(tmp_path):
    cmd_train(_spec(tmp_path / "run"))
    checkpoint = tmp_path / "run" / "seed_0" / "agent.npz"
    assert cmd_eval(_spec(tmp_path / "e1"), checkpoint) == EXIT_OK
    assert cmd_eval(_spec(tmp_path / "e2"), checkpoint, baseline=True) == EXIT_OK
    assert (tmp_path / "e1" / "eval_trajectory.csv").read_bytes() == \
        (tmp_path / "e2" / "eval_trajectory.csv").read_bytes()

    summary = pd.read_csv(tmp_path / "e2" / "eval_summary.csv")
    assert list(summary["label"]) == ["policy", "cccv"]
    baseline = pd.read_csv(tmp_path / "e2" / "cccv_trajectory.csv")
    assert baseline["time_s"].iloc[0] == 0.0
    first = pd.read_csv(tmp_path / "e2" / "eval_trajectory.csv").iloc[0]
    assert baseline["soc_anode"].iloc[0] == pytest.approx(first["soc_anode"])


def test_eval_rejects_checkpoint_of_other_mode(tmp_path):
    cmd_train(_spec(tmp_path / "run", train=TrainConfig(episodes=0)))
    full = _spec(tmp_path / "e", env=EnvConfig(max_steps=4, observation_mode="full"))
    with pytest.raises(ConfigError):
        cmd_eval(full, tmp_path / "run" / "seed_0" / "agent.npz")


def test_eval_of_missing_checkpoint(tmp_path):
    with pytest.raises(FileNotFoundError):
        cmd_eval(_spec(tmp_path), tmp_path / "absent.npz")


def test_age_with_identity_scenario_repeats_evaluation(tmp_path):
    cmd_train(_spec(tmp_path / "run"))
    checkpoint = tmp_path / "run" / "seed_0" / "agent.npz"
    cmd_eval(_spec(tmp_path / "eval"), checkpoint)
    assert cmd_age(_spec(tmp_path / "age", seeds=(0, 1)), checkpoint) == EXIT_OK

    assert (tmp_path / "age" / "phase1_trajectory.csv").read_bytes() == \
        (tmp_path / "eval" / "eval_trajectory.csv").read_bytes()
    summary = pd.read_csv(tmp_path / "age" / "age_summary.csv")
    assert list(summary["label"]) == ["fresh", "phase1", "phase2_seed0", "phase2_seed1"]
    fresh, phase1 = summary.iloc[0], summary.iloc[1]
    assert fresh["cum_reward"] == phase1["cum_reward"]
    for seed in (0, 1):
        assert (tmp_path / "age" / f"seed_{seed}" / "phase2_trajectory.csv").is_file()
        assert len(pd.read_csv(tmp_path / "age" / f"seed_{seed}" / "runlog.csv")) == 4
    #seeds explore differently from the same checkpoint
    assert (tmp_path / "age" / "seed_0" / "phase2_trajectory.csv").read_bytes() != \
        (tmp_path / "age" / "seed_1" / "phase2_trajectory.csv").read_bytes()


def test_age_on_aged_cell_changes_the_rollout(tmp_path):
    cmd_train(_spec(tmp_path / "run", train=TrainConfig(episodes=0)))
    checkpoint = tmp_path / "run" / "seed_0" / "agent.npz"
    cmd_eval(_spec(tmp_path / "eval"), checkpoint)
    spec = _spec(tmp_path / "age", train=TrainConfig(episodes=0), scenario=DEFAULT_AGED_SCENARIO)
    assert cmd_age(spec, checkpoint) == EXIT_OK

    summary = pd.read_csv(tmp_path / "age" / "age_summary.csv")
    assert list(summary["label"]) == ["fresh", "phase1", "phase2_seed0"]
    fresh = pd.read_csv(tmp_path / "eval" / "eval_trajectory.csv")
    aged = pd.read_csv(tmp_path / "age" / "phase1_trajectory.csv")
    assert summary.iloc[0]["cum_reward"] == pytest.approx(pd.read_csv(tmp_path / "eval" / "eval_summary.csv")
                                                          .iloc[0]["cum_reward"])
    #thicker film and stronger heating under the same charging current
    assert aged["v_terminal_V"].iloc[1] > fresh["v_terminal_V"].iloc[1]
    assert aged["t_cell_K"].iloc[1] > fresh["t_cell_K"].iloc[1]


def test_sim_zero_profile_rests_at_initial_state(tmp_path):
    spec = _spec(tmp_path / "out")
    assert cmd_sim(spec, _profile(tmp_path, [0.0] * 5)) == EXIT_OK
    frame = pd.read_csv(tmp_path / "out" / "sim_trajectory.csv")
    assert len(frame) == 6
    assert np.allclose(frame["soc_anode"], 0.3, atol=1e-9)
    assert np.allclose(frame["t_cell_K"], TINY_ENV.t_init_K, atol=1e-9)


def test_sim_one_c_charge_matches_coulomb_counting(tmp_path, cell_params):
    spec = _spec(tmp_path / "out")
    cmd_sim(spec, _profile(tmp_path, [-cell_params.Q_nominal] * 10))
    manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert manifest["coulomb_deviation"] < 1e-6
    frame = pd.read_csv(tmp_path / "out" / "sim_trajectory.csv")
    assert frame["soc_anode"].iloc[-1] == pytest.approx(0.3 + 10 / 60, abs=1e-6)


def test_export_bands(tmp_path):
    cmd_train(_spec(tmp_path / "one", seeds=(3,)))
    assert cmd_export(tmp_path / "one") == EXIT_OK
    reward = pd.read_csv(tmp_path / "one" / "export" / "reward.csv")
    assert list(reward.columns) == ["kind", "episode", "n_seeds", "mean", "lower", "upper"]
    assert (reward["lower"] == reward["mean"]).all()
    assert (reward["upper"] == reward["mean"]).all()

    cmd_train(_spec(tmp_path / "two", seeds=(0, 1)))
    cmd_export(tmp_path / "two")
    for panel in ("reward", "discounted_return", "v_score", "t_score", "charge_time"):
        frame = pd.read_csv(tmp_path / "two" / "export" / f"{panel}.csv")
        assert set(frame["kind"]) == {"train", "eval"}
        assert (frame["n_seeds"] == 2).all()
        assert (frame["lower"] <= frame["mean"]).all()
        assert (frame["mean"] <= frame["upper"]).all()


def test_export_is_idempotent(tmp_path):
    cmd_train(_spec(tmp_path, seeds=(0, 1)))
    cmd_export(tmp_path)
    first = (tmp_path / "export" / "charge_time.csv").read_bytes()
    cmd_export(tmp_path)
    assert (tmp_path / "export" / "charge_time.csv").read_bytes() == first


def test_export_of_empty_run(tmp_path):
    cmd_train(_spec(tmp_path, train=TrainConfig(episodes=0)))
    assert cmd_export(tmp_path) == EXIT_OK
    assert len(pd.read_csv(tmp_path / "export" / "reward.csv")) == 0


def test_export_rejects_foreign_log(tmp_path):
    cmd_train(_spec(tmp_path, seeds=(0, 1)))
    log = pd.read_csv(tmp_path / "seed_1" / "runlog.csv", dtype={"config_hash": str})
    log["config_hash"] = "0" * 64
    log.to_csv(tmp_path / "seed_1" / "runlog.csv", index=False)
    with pytest.raises(ConfigError):
        cmd_export(tmp_path)


def test_export_of_missing_directory(tmp_path):
    with pytest.raises(FileNotFoundError):
        cmd_export(tmp_path / "absent")


def test_export_of_sim_run(tmp_path):
    cmd_sim(_spec(tmp_path), _profile(tmp_path, [0.0, 0.0]))
    with pytest.raises(ConfigError):
        cmd_export(tmp_path)


def test_confidence_band():
    assert confidence_band([2.0]) == (2.0, 0.0)
    mean, half = confidence_band([1.0, 3.0])
    assert mean == 2.0
    assert half == pytest.approx(1.96 * np.sqrt(2.0) / np.sqrt(2.0))
    with pytest.raises(ValueError):
        confidence_band([])


def test_aggregate_logs_splits_training_and_evaluation():
    def log(values):
        return pd.DataFrame({"episode": [0, 0, 1], "evaluated_flag": [False, True, False], "cum_reward": values})

    frame = aggregate_logs({0: log([-1.0, -2.0, -3.0]), 1: log([-3.0, -2.0, -1.0])}, "cum_reward")
    assert list(zip(frame["kind"], frame["episode"])) == [("eval", 0), ("train", 0), ("train", 1)]
    assert list(frame["mean"]) == [-2.0, -2.0, -2.0]
    assert frame.iloc[0]["lower"] == frame.iloc[0]["upper"]


def test_exit_codes():
    assert exit_code_for(ConfigError("x")) == EXIT_CONFIG
    assert exit_code_for(ShapeError("x")) == EXIT_CONFIG
    assert exit_code_for(DivergenceError("x")) == EXIT_DIVERGENCE
    assert exit_code_for(FileNotFoundError("x")) == EXIT_IO
    assert exit_code_for(KeyError("x")) == EXIT_CONFIG


def test_cli_train_and_export(tmp_path, capsys):
    out = tmp_path / "cli"
    assert charge_lab.main(["--no-progress", "train", "--episodes", "0", "--seeds", "2", "-o", str(out)]) == EXIT_OK
    assert (out / "seed_1" / "runlog.csv").is_file()
    assert charge_lab.main(["export", str(out)]) == EXIT_OK
    assert "exported" in capsys.readouterr().out


def test_cli_errors_map_to_exit_codes(tmp_path, capsys):
    assert charge_lab.main(["export", str(tmp_path / "absent")]) == EXIT_IO
    bad = tmp_path / "bad.yaml"
    bad.write_text("unknown: 1\n", encoding="utf-8")
    assert charge_lab.main(["train", "-c", str(bad), "-o", str(tmp_path / "o")]) == EXIT_CONFIG
    assert "unknown key" in capsys.readouterr().err
    with pytest.raises(SystemExit) as err:
        charge_lab.main(["eval", "-o", str(tmp_path / "o")])
    assert err.value.code == EXIT_CONFIG


def test_cli_foreign_checkpoint_is_a_config_error(tmp_path, capsys):
    foreign = tmp_path / "other.npz"
    np.savez(foreign, weights=np.zeros(3))
    assert charge_lab.main(["eval", "--checkpoint", str(foreign), "-o", str(tmp_path / "o")]) == EXIT_CONFIG
    assert "not a checkpoint" in capsys.readouterr().err
