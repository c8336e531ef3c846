import dataclasses

import numpy as np
import pandas as pd
import pytest

from src.battery_env.charging_env import (SOC_REACHED, TIMEOUT, ChargingEnv, Observation, Transition,
                                          clamp_action, reward, scale_action, violation_scores)
from src.battery_env.config import AgingScenario, EnvConfig
from src.errors import EnvironmentStateError


@pytest.fixture()
def env(cell_params):
    return ChargingEnv(cell_params, EnvConfig())


def _rollout(env, actions, seed=0):
    env.reset(seed)
    for a in actions:
        _, _, done, _ = env.step(a)
        if done:
            break
    return env.trajectory.to_frame()


def test_reset_simplified_observation(env):
    obs = env.reset(seed=0)
    assert obs.mode == "simplified"
    assert len(obs) == 2
    assert obs.values[0] == pytest.approx(0.3, abs=1e-12)
    assert obs.values[1] == 0.0


def test_reset_full_observation(cell_params):
    env = ChargingEnv(cell_params, EnvConfig(observation_mode="full"))
    obs = env.reset(seed=0)
    assert len(obs) == 61 == env.observation_size
    assert np.all(np.abs(obs.values) <= 1.0)
    #electrolyte starts at its reference concentration
    assert np.allclose(obs.values[20:60], 0.0)


@pytest.mark.parametrize("a,c_rate", [(1.0, 1.8), (-1.0, 0.0), (0.0, 0.9), (3.0, 1.8), (-7.0, 0.0)])
def test_scale_action(a, c_rate):
    assert scale_action(a, EnvConfig(), 5.0) == pytest.approx(c_rate * 5.0, abs=1e-12)


def test_scale_action_monotone():
    grid = np.linspace(-1.5, 1.5, 301)
    currents = [scale_action(a, EnvConfig(), 5.0) for a in grid]
    assert np.all(np.diff(currents) >= 0)


def test_clamp_action_flags():
    assert clamp_action(0.5) == (0.5, False)
    assert clamp_action(1.2) == (1.0, True)
    with pytest.raises(ValueError):
        clamp_action(float("nan"))


@pytest.mark.parametrize("v,t_celsius,expected", [
    (4.0, 30.0, -0.1),
    (4.3, 30.0, -0.1 - 10.0),
    (4.0, 48.0, -0.1 - 5.0),
    (4.2, 47.0, -0.1),
])
def test_reward_examples(v, t_celsius, expected):
    breakdown = reward(v, t_celsius + 273.15, EnvConfig())
    assert breakdown.total == pytest.approx(expected)
    assert breakdown.total == breakdown.r_fast + breakdown.r_volt + breakdown.r_temp
    assert breakdown.r_volt <= 0 and breakdown.r_temp <= 0


def test_zero_current_step(env):
    env.reset(seed=0)
    soc = env.state.soc
    obs, breakdown, done, info = env.step(-1.0)
    assert env.state.soc == pytest.approx(soc, abs=1e-9)
    assert breakdown.total == -0.1
    assert not done
    assert info["current_A"] == 0.0


def test_full_rate_reaches_target_in_17_steps(env):
    env.reset(seed=0)
    steps = 0
    done = False
    while not done:
        _, breakdown, done, info = env.step(1.0)
        steps += 1
        assert breakdown.total <= 0
        if breakdown.r_volt == 0.0 and breakdown.r_temp == 0.0:
            assert breakdown.total == -0.1
    assert steps == 17
    assert info["reason"] == SOC_REACHED
    assert env.charge_time_min == pytest.approx(17.0)


def test_full_rate_overheats_before_the_target(env):
    trajectory = _rollout(env, [1.0] * 17)
    #the temperature limit binds at the top rate, a policy has to back off
    assert trajectory["t_cell_K"].max() > env.config.t_max_K
    assert trajectory["t_cell_K"].iloc[5] < env.config.t_max_K


def test_done_at_first_step_past_target(env):
    frame = _rollout(env, [1.0] * 40)
    soc = frame["soc_anode"].to_numpy()
    assert soc[-1] >= 0.8
    assert np.all(soc[:-1] < 0.8)
    assert frame["done"].to_numpy()[-1]


def test_timeout(cell_params):
    env = ChargingEnv(cell_params, EnvConfig(max_steps=3))
    env.reset(seed=0)
    results = [env.step(-1.0) for _ in range(3)]
    assert [r[2] for r in results] == [False, False, True]
    assert results[-1][3]["reason"] == TIMEOUT


def test_step_after_done_raises(cell_params):
    env = ChargingEnv(cell_params, EnvConfig(max_steps=1))
    with pytest.raises(EnvironmentStateError):
        env.step(0.0)
    env.reset(seed=0)
    env.step(0.0)
    with pytest.raises(EnvironmentStateError):
        env.step(0.0)


def test_identity_scenario_matches_unperturbed(cell_params):
    actions = list(np.linspace(-1.0, 1.0, 10))
    plain = _rollout(ChargingEnv(cell_params, EnvConfig()), actions)
    identity = _rollout(ChargingEnv(cell_params, EnvConfig(), AgingScenario(1.0, 1.0)), actions)
    pd.testing.assert_frame_equal(plain, identity, check_exact=True)


def test_episode_determinism(cell_params):
    config = EnvConfig(soc_jitter=0.02)
    actions = [0.3, 1.0, -0.2, 0.8, 1.0]
    first = _rollout(ChargingEnv(cell_params, config), actions, seed=11)
    second = _rollout(ChargingEnv(cell_params, config), actions, seed=11)
    pd.testing.assert_frame_equal(first, second, check_exact=True)
    other = _rollout(ChargingEnv(cell_params, config), actions, seed=12)
    assert other["soc_anode"][0] != first["soc_anode"][0]
    assert abs(first["soc_anode"][0] - 0.3) <= 0.02


def test_aging_scenario_perturbs_cell(cell_params):
    env = ChargingEnv(cell_params, EnvConfig(), AgingScenario(2.0, 1.5))
    assert env.ctx.params.R_f_anode == 2.0 * cell_params.R_f_anode
    assert env.ctx.heat_multiplier == 1.5
    fresh = _rollout(ChargingEnv(cell_params, EnvConfig()), [1.0] * 5)
    aged = _rollout(env, [1.0] * 5)
    assert aged["v_terminal_V"].iloc[-1] > fresh["v_terminal_V"].iloc[-1]
    assert aged["t_cell_K"].iloc[-1] > fresh["t_cell_K"].iloc[-1]


def test_violation_scores_examples():
    config = EnvConfig()
    peak = pd.DataFrame({"v_terminal_V": [3.9, 4.25, 4.1], "t_cell_K": [300.15, 305.0, 310.0]})
    v_score, t_score = violation_scores(peak, config)
    assert v_score == pytest.approx(0.05)
    assert t_score < 0
    boundary = pd.DataFrame({"v_terminal_V": [4.2], "t_cell_K": [47.0 + 273.15]})
    assert violation_scores(boundary, config) == pytest.approx((0.0, 0.0), abs=1e-12)
    with pytest.raises(ValueError):
        violation_scores(pd.DataFrame({"v_terminal_V": [], "t_cell_K": []}), config)


def test_trajectory_has_env_columns(env, tmp_path):
    _rollout(env, [1.0, 0.0])
    path = env.trajectory.write_csv(tmp_path / "episode.csv")
    frame = pd.read_csv(path)
    assert list(frame.columns[-3:]) == ["action", "reward", "done"]
    assert len(frame) == 3


def test_transition_mode_check():
    a = Observation(np.zeros(2), "simplified")
    b = Observation(np.zeros(61), "full")
    Transition(a, 0.0, -0.1, a, False)
    with pytest.raises(ValueError):
        Transition(a, 0.0, -0.1, b, False)


def test_reset_rejects_unrealizable_soc(cell_params):
    #an empty anode sits on the edge of the OCP table
    config = dataclasses.replace(EnvConfig(), soc_init=0.0)
    env = ChargingEnv(cell_params, config)
    with pytest.raises(ValueError):
        env.reset(seed=0)
