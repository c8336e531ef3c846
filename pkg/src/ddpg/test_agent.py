import numpy as np
import pytest

from src.ddpg.agent import (actor_gradient, actor_update, critic_targets, critic_update, make_agent, reseed,
                            select_action, sync_targets)
from src.ddpg.config import TrainConfig
from src.ddpg.replay_buffer import Batch
from src.errors import DivergenceError, ShapeError
from src.tiny_nn.adam import AdamState
from src.tiny_nn.mlp import Mlp, flatten, forward, unflatten

SMALL = TrainConfig(actor_hidden=(8, 8), critic_hidden=(10, 10), batch_size=4, warmup=4, buffer_capacity=64)


def _batch(n=6, obs_dim=2, seed=0, done=None):
    rng = np.random.default_rng(seed)
    return Batch(obs=rng.uniform(-1, 1, (n, obs_dim)),
                 action=rng.uniform(-1, 1, n),
                 reward=rng.uniform(-1, 0, n),
                 next_obs=rng.uniform(-1, 1, (n, obs_dim)),
                 done=np.zeros(n, dtype=bool) if done is None else np.asarray(done))


def _linear_critic(agent, w, b):
    agent.critic = Mlp((len(w), 1), [np.array([w], dtype=float)], [np.array([b], dtype=float)], "identity")
    agent.critic_opt = AdamState.zeros_like(agent.critic)


def test_make_agent_is_seeded():
    a = make_agent(2, SMALL, seed=4)
    b = make_agent(2, SMALL, seed=4)
    assert np.array_equal(flatten(a.actor), flatten(b.actor))
    assert np.array_equal(flatten(a.critic), flatten(b.critic))
    assert np.array_equal(flatten(a.actor_target), flatten(a.actor))
    assert a.critic.layer_sizes == (3, 10, 10, 1)
    assert a.obs_dim == 2


def test_reseed_matches_fresh_streams():
    fresh = make_agent(2, SMALL, seed=5)
    other = reseed(make_agent(2, SMALL, seed=0), 5)
    assert [fresh.noise.sample() for _ in range(3)] == [other.noise.sample() for _ in range(3)]
    assert np.array_equal(fresh.sample_rng.integers(0, 100, 5), other.sample_rng.integers(0, 100, 5))
    #networks keep their own seed
    assert not np.array_equal(flatten(fresh.actor), flatten(other.actor))


def test_select_action_bounds():
    agent = make_agent(2, SMALL, seed=0)
    obs = np.array([0.3, 0.0])
    greedy = select_action(agent, obs, explore=False)
    assert greedy == pytest.approx(float(forward(agent.actor, obs)[0]))
    agent.noise.sigma = 100.0
    assert all(-1.0 <= select_action(agent, obs, explore=True) <= 1.0 for _ in range(20))
    with pytest.raises(ShapeError):
        select_action(agent, np.zeros(3), explore=False)


def test_zero_discount_targets_are_rewards():
    agent = make_agent(2, TrainConfig(gamma=0.0, actor_hidden=(8, 8), critic_hidden=(10, 10)), seed=0)
    batch = _batch()
    assert np.array_equal(critic_targets(agent, batch), batch.reward)


def test_terminal_transitions_do_not_bootstrap():
    agent = make_agent(2, SMALL, seed=0)
    agent.critic_target.biases[-1][:] = 50.0
    batch = _batch(done=[True, False, True, False, False, True])
    y = critic_targets(agent, batch)
    q_next = forward(agent.critic_target, np.column_stack((batch.next_obs, forward(agent.actor_target, batch.next_obs))))
    expected = np.where(batch.done, batch.reward, batch.reward + 0.99 * q_next[:, 0])
    assert y == pytest.approx(expected, rel=1e-12)
    assert y[0] == batch.reward[0]
    assert y[1] > 40.0


def test_critic_step_on_hand_example():
    agent = make_agent(1, SMALL, seed=0)
    _linear_critic(agent, [0.2, 0.4], 0.0)
    batch = Batch(np.array([[1.0]]), np.array([0.5]), np.array([1.0]), np.array([[0.0]]), np.array([True]))
    loss = critic_update(agent, batch)
    #Q = 0.2 + 0.4 * 0.5 = 0.4, y = 1
    assert loss == pytest.approx(0.36)
    #Adam moves every parameter by lr against the sign of its gradient on the first step
    lr = agent.lr_critic
    assert agent.critic.weights[0][0] == pytest.approx([0.2 + lr, 0.4 + lr], rel=1e-6)
    assert agent.critic.biases[0][0] == pytest.approx(lr, rel=1e-6)


def test_identical_transitions_match_single():
    single = _batch(n=1, done=[True])
    repeated = Batch(*(np.repeat(getattr(single, name), 8, axis=0) for name in ("obs", "action", "reward",
                                                                               "next_obs", "done")))
    a = make_agent(2, SMALL, seed=0)
    b = make_agent(2, SMALL, seed=0)
    assert critic_update(a, single) == pytest.approx(critic_update(b, repeated), rel=1e-12)
    assert flatten(a.critic) == pytest.approx(flatten(b.critic), rel=1e-9, abs=1e-15)


def test_critic_update_diverges_on_nan():
    agent = make_agent(2, SMALL, seed=0)
    batch = _batch()
    bad = Batch(batch.obs, batch.action, np.full(len(batch), np.nan), batch.next_obs, batch.done)
    with pytest.raises(DivergenceError):
        critic_update(agent, bad)


def test_constant_critic_leaves_actor_unchanged():
    agent = make_agent(2, SMALL, seed=0)
    agent.critic = unflatten(agent.critic, np.zeros(agent.critic.n_params))
    agent.critic.biases[-1][:] = 3.0
    before = flatten(agent.actor).copy()
    objective = actor_update(agent, _batch())
    assert objective == pytest.approx(3.0)
    assert np.array_equal(flatten(agent.actor), before)


def test_actor_gradient_matches_finite_differences():
    agent = make_agent(2, SMALL, seed=1)
    #move the critic away from its nearly flat initial head
    agent.critic.weights[-1] *= 300.0
    obs = _batch(n=5).obs
    _, grads = actor_gradient(agent, obs)

    def objective(theta):
        actor = unflatten(agent.actor, theta)
        actions = forward(actor, obs)
        return float(np.mean(forward(agent.critic, np.column_stack((obs, actions)))))

    theta = flatten(agent.actor)
    h = 1e-6
    numeric = np.empty_like(theta)
    for i in range(len(theta)):
        plus, minus = theta.copy(), theta.copy()
        plus[i] += h
        minus[i] -= h
        numeric[i] = (objective(plus) - objective(minus)) / (2 * h)
    assert np.max(np.abs(grads - numeric)) / np.max(np.abs(numeric)) < 1e-5


def test_actor_converges_on_quadratic_toy():
    agent = make_agent(1, TrainConfig(lr_actor=1e-3, actor_hidden=(20, 20)), seed=0)
    states = np.linspace(-1.0, 1.0, 16)[:, None]
    batch = Batch(states, np.zeros(16), np.zeros(16), states, np.zeros(16, dtype=bool))

    def q_and_grad(_obs, actions):
        return -(actions - 0.7) ** 2, -2.0 * (actions - 0.7)

    for _ in range(2000):
        actor_update(agent, batch, q_and_grad)
    assert np.max(np.abs(forward(agent.actor, states)[:, 0] - 0.7)) < 1e-2


def test_sync_targets_blends():
    agent = make_agent(2, TrainConfig(tau=0.25, actor_hidden=(8, 8), critic_hidden=(10, 10)), seed=0)
    old_target = flatten(agent.critic_target).copy()
    agent.critic = unflatten(agent.critic, flatten(agent.critic) + 1.0)
    sync_targets(agent)
    assert flatten(agent.critic_target) == pytest.approx(old_target + 0.25, rel=1e-12)
    assert flatten(agent.actor_target) == pytest.approx(flatten(agent.actor), rel=1e-12)


def test_zero_noise_exploration_is_greedy():
    agent = make_agent(2, TrainConfig(ou_sigma=0.0, actor_hidden=(8, 8), critic_hidden=(10, 10)), seed=3)
    for obs in np.random.default_rng(0).uniform(-1, 1, (5, 2)):
        assert select_action(agent, obs, explore=True) == select_action(agent, obs, explore=False)


def _snapshot(agent):
    return {name: flatten(getattr(agent, name)).copy()
            for name in ("actor", "critic", "actor_target", "critic_target")}


def test_critic_update_touches_only_the_critic():
    agent = make_agent(2, SMALL, seed=0)
    before = _snapshot(agent)
    actor_moments = agent.actor_opt.m.copy()
    critic_update(agent, _batch())
    after = _snapshot(agent)
    assert not np.array_equal(after["critic"], before["critic"])
    for name in ("actor", "actor_target", "critic_target"):
        assert np.array_equal(after[name], before[name])
    assert np.array_equal(agent.actor_opt.m, actor_moments)


def test_actor_update_touches_only_the_actor():
    agent = make_agent(2, SMALL, seed=0)
    agent.critic.weights[-1] *= 300.0
    before = _snapshot(agent)
    critic_moments = agent.critic_opt.m.copy()
    actor_update(agent, _batch())
    after = _snapshot(agent)
    assert not np.array_equal(after["actor"], before["actor"])
    for name in ("critic", "actor_target", "critic_target"):
        assert np.array_equal(after[name], before[name])
    assert np.array_equal(agent.critic_opt.m, critic_moments)
