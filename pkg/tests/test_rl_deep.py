import numpy as np
import pytest

from concepts.errors import GridConfigError
from concepts.mdp_core.algorithms import DynamicProgramming, TabularMDP, TabularMDPEnvironment
from concepts.nn_approx.algorithms import Network, NeuralNet
from concepts.rl_deep.algorithms import (ACHyper, ACTransition, ActorCritic, Batch, DQN, DQNHyper, FeatureScaler,
                                         ReplayBuffer, featurize)
from concepts.stochastic.algorithms import make_rng
from tests.helpers import make_state

H = 1e-5
DQN_SHAPES = [(3, 4, 2), (2, 5, 5, 3), (4, 1), (5, 3, 3, 2)]
ACTOR_SHAPES = [(3, 5, 4), (2, 6, 6, 3), (4, 2), (5, 3, 3, 2)]


def deterministic_mdp(moves, rewards, gamma):
    n_states, n_actions = len(moves), len(moves[0])
    transition = np.zeros((n_states, n_actions, n_states))
    for s, row in enumerate(moves):
        for a, s_next in enumerate(row):
            transition[s, a, s_next] = 1.0
    return TabularMDP(transition, np.array(rewards, dtype=float), gamma)


@pytest.fixture
def dqn_mdp():
    return deterministic_mdp([[1, 2], [0, 1], [2, 0]], [[1, 0], [0, 2], [-1, 1]], gamma=0.5)


@pytest.fixture
def ac_mdp():
    return deterministic_mdp([[0, 1], [1, 0]], [[0, 1], [2, 0]], gamma=0.5)


def relative_error(analytic, numeric):
    return np.abs(analytic - numeric) / np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-6)


def numeric_gradient(fn, vector):
    grad = np.zeros_like(vector)
    for i in range(vector.size):
        up, down = vector.copy(), vector.copy()
        up[i] += H
        down[i] -= H
        grad[i] = (fn(up) - fn(down)) / (2 * H)
    return grad


def random_net(sizes, seed):
    net = NeuralNet.init_network(sizes, seed)
    g = make_rng(seed + 500).generator
    return Network(net.layer_sizes, net.weights, [g.normal(scale=0.2, size=b.shape) for b in net.biases])


def init_network_for(sizes, seed):
    return NeuralNet.init_network(sizes, int(make_rng(seed).split("init").generator.integers(2 ** 63)))


def test_featurize_endpoints(grid_config):
    low = make_state(grid_config, demand=0.0, soc=10.0, outputs=(0, 0), on=(False, False))
    assert not featurize(low, grid_config).any()
    scaler = FeatureScaler.from_config(grid_config)
    high = make_state(grid_config, demand=scaler.demand_scale, solar=40.0, wind=40.0, soc=90.0,
                      outputs=(100, 60), step=24)
    assert np.allclose(featurize(high, grid_config), 1.0)
    assert scaler.size == featurize(high, grid_config).size == 7


def test_replay_buffer_evicts_oldest():
    buffer = ReplayBuffer(capacity=3, feature_size=2)
    for i in range(5):
        buffer.push(np.full(2, i), i, float(i), np.full(2, i + 1), i == 4)
    contents = buffer.contents()
    assert len(buffer) == 3
    assert contents.actions.tolist() == [2, 3, 4]
    assert contents.dones.tolist() == [0.0, 0.0, 1.0]


def test_replay_buffer_sampling():
    buffer = ReplayBuffer(capacity=50, feature_size=1)
    for i in range(20):
        buffer.push(np.array([i]), i, 0.0, np.array([i]), False)
    a = buffer.sample(10, make_rng(3))
    b = buffer.sample(10, make_rng(3))
    assert a.actions.tolist() == b.actions.tolist()
    assert len(set(a.actions.tolist())) == 10
    with pytest.raises(ValueError):
        buffer.sample(21, make_rng(0))
    with pytest.raises(ValueError):
        ReplayBuffer(capacity=0, feature_size=1)


def test_hyper_validation():
    with pytest.raises(GridConfigError):
        DQNHyper(batch_size=64, capacity=32)
    with pytest.raises(GridConfigError):
        DQNHyper(gamma=1.0)
    with pytest.raises(GridConfigError):
        ACHyper(actor_lr=0.0)
    with pytest.raises(GridConfigError):
        ACHyper(entropy_weight=-0.1)


def fixed_point_batch(online, gamma, dones):
    g = make_rng(1).generator
    states, next_states = g.normal(size=(6, 3)), g.normal(size=(6, 3))
    actions = g.integers(2, size=6)
    q = NeuralNet.forward(online, states)[np.arange(6), actions]
    q_next = NeuralNet.forward(online, next_states).max(axis=1)
    rewards = q - gamma * (1.0 - dones) * q_next
    return Batch(states, actions, rewards, next_states, dones)


@pytest.mark.parametrize("dones", [np.zeros(6), np.ones(6)])
def test_dqn_loss_zero_at_fixed_point(dones):
    online = random_net((3, 5, 2), 0)
    loss, grads = DQN.dqn_loss_and_grads(fixed_point_batch(online, 0.9, dones), online, online.copy(), 0.9)
    assert loss == pytest.approx(0.0, abs=1e-20)
    assert np.max(np.abs(grads.flat())) < 1e-12


def test_dqn_loss_terminal_uses_reward_only():
    online = random_net((2, 2), 1)
    target = random_net((2, 2), 2)
    batch = Batch(np.array([[1.0, 0.0]]), np.array([0]), np.array([3.0]), np.array([[0.0, 1.0]]), np.array([1.0]))
    q = NeuralNet.forward(online, batch.states)[0, 0]
    loss, _ = DQN.dqn_loss_and_grads(batch, online, target, 0.9)
    assert loss == pytest.approx((q - 3.0) ** 2)


@pytest.mark.parametrize("sizes", DQN_SHAPES)
def test_dqn_gradient_matches_finite_differences(sizes):
    for draw in range(10):
        online, target = random_net(sizes, 20 * draw + 3), random_net(sizes, 20 * draw + 4)
        g = make_rng(draw).generator
        batch = Batch(g.normal(size=(8, sizes[0])), g.integers(sizes[-1], size=8), g.normal(size=8),
                      g.normal(size=(8, sizes[0])), (g.random(8) < 0.3).astype(float))
        _, grads = DQN.dqn_loss_and_grads(batch, online, target, 0.8)

        def loss(vector):
            return DQN.dqn_loss_and_grads(batch, Network.from_parameter_vector(sizes, vector), target, 0.8)[0]

        numeric = numeric_gradient(loss, online.parameter_vector())
        assert np.max(relative_error(grads.flat(), numeric)) < 1e-4


def test_target_sync_copies_online():
    online, target = random_net((3, 4, 2), 6), random_net((3, 4, 2), 7)
    synced = DQN.target_sync(online, target)
    assert np.array_equal(synced.parameter_vector(), online.parameter_vector())
    synced.weights[0][0, 0] += 1.0
    assert not np.array_equal(synced.parameter_vector(), online.parameter_vector())
    with pytest.raises(ValueError):
        DQN.target_sync(online, random_net((3, 2), 0))


def test_dqn_without_updates_returns_initial_network(dqn_mdp):
    hyper = DQNHyper(hidden_sizes=(8,), batch_size=4, capacity=100, warmup_steps=10 ** 6, episodes=3,
                     eval_every=1, eval_episodes=1, reward_scale=1.0)
    net, curve = DQN.train_dqn(lambda: TabularMDPEnvironment(dqn_mdp, horizon=5), hyper, seed=2)
    assert np.array_equal(net.parameter_vector(), init_network_for((3, 8, 2), 2).parameter_vector())
    assert curve.episodes == [1, 2, 3]


def test_dqn_is_deterministic(dqn_mdp):
    hyper = DQNHyper(hidden_sizes=(8,), batch_size=4, capacity=50, warmup_steps=5, target_sync_every=7,
                     episodes=6, eval_every=3, eval_episodes=2, reward_scale=1.0)
    run = lambda: DQN.train_dqn(lambda: TabularMDPEnvironment(dqn_mdp, horizon=10), hyper, seed=9)  # noqa: E731
    (n1, c1), (n2, c2) = run(), run()
    assert n1.to_bytes() == n2.to_bytes()
    assert c1.points == c2.points


def test_dqn_recovers_optimal_policy(dqn_mdp):
    hyper = DQNHyper(gamma=dqn_mdp.gamma, learning_rate=0.05, batch_size=16, capacity=2000, target_sync_every=50,
                     warmup_steps=100, epsilon_start=1.0, epsilon_end=0.1, epsilon_decay_episodes=150,
                     episodes=200, hidden_sizes=(16,), eval_every=50, eval_episodes=1, reward_scale=1.0)
    env = TabularMDPEnvironment(dqn_mdp, horizon=25)
    net, _ = DQN.train_dqn(lambda: TabularMDPEnvironment(dqn_mdp, horizon=25), hyper, seed=0)
    oracle = DynamicProgramming.value_iteration(dqn_mdp).policy.as_actions()
    assert oracle.tolist() == [0, 1, 1]
    assert [DQN.greedy_action(net, env.features(s)) for s in range(3)] == oracle.tolist()


def test_uniform_actor_log_prob():
    actor = Network.from_parameter_vector((3, 4), np.zeros(16))
    for a in range(4):
        assert ActorCritic.log_prob(actor, np.ones(3), a) == pytest.approx(-np.log(4))
    assert np.allclose(ActorCritic.policy(actor, np.ones(3)), 0.25)


@pytest.mark.parametrize("sizes", ACTOR_SHAPES)
def test_log_prob_gradient_matches_finite_differences(sizes):
    for draw in range(10):
        actor = random_net(sizes, 20 * draw + 8)
        x = make_rng(draw + 100).generator.normal(size=sizes[0])
        action = draw % sizes[-1]
        analytic = ActorCritic.log_prob_gradient(actor, x, action).flat()

        def log_prob(vector):
            return ActorCritic.log_prob(Network.from_parameter_vector(sizes, vector), x, action)

        numeric = numeric_gradient(log_prob, actor.parameter_vector())
        assert np.max(relative_error(analytic, numeric)) < 1e-4


def test_zero_td_error_leaves_critic_unchanged():
    actor, critic = random_net((3, 4, 2), 10), random_net((3, 4, 2), 11)
    x, x_next = np.array([0.1, -0.2, 0.3]), np.array([0.5, 0.0, -0.5])
    hyper = ACHyper(gamma=0.9, actor_lr=0.1, critic_lr=0.1)
    reward = NeuralNet.forward(critic, x)[1] - 0.9 * NeuralNet.forward(critic, x_next)[0]
    new_actor, new_critic, td = ActorCritic.actor_critic_step(ACTransition(x, 1, reward, x_next, 0, False),
                                                              actor, critic, hyper)
    assert td == pytest.approx(0.0, abs=1e-12)
    assert np.allclose(new_critic.parameter_vector(), critic.parameter_vector(), atol=1e-12)
    assert not np.array_equal(new_actor.parameter_vector(), actor.parameter_vector())


def test_actor_step_raises_probability_of_valuable_action():
    actor = random_net((2, 3, 3), 12)
    critic = Network.from_parameter_vector((2, 3), np.concatenate([np.zeros(6), [0.0, 5.0, 0.0]]))
    x = np.array([1.0, -1.0])
    before = ActorCritic.policy(actor, x)[1]
    new_actor, _, _ = ActorCritic.actor_critic_step(ACTransition(x, 1, 5.0, x, 1, True), actor, critic,
                                                    ACHyper(actor_lr=0.05, critic_lr=0.05))
    assert ActorCritic.policy(new_actor, x)[1] > before


def test_sample_action_frequencies():
    actor = Network.from_parameter_vector((1, 3), np.array([0.0, 0.0, 0.0, 0.0, np.log(2.0), np.log(5.0)]))
    rng = make_rng(4)
    n = 100000
    counts = np.bincount([ActorCritic.sample_action(actor, np.ones(1), rng) for _ in range(n)], minlength=3)
    assert np.allclose(counts / n, [0.125, 0.25, 0.625], atol=0.01)
    assert ActorCritic.mode_action(actor, np.ones(1)) == 2


def test_actor_critic_zero_episodes(ac_mdp):
    hyper = ACHyper(episodes=0, hidden_sizes=(4,))
    actor, critic, curve = ActorCritic.train_actor_critic(lambda: TabularMDPEnvironment(ac_mdp), hyper, seed=5)
    assert len(curve) == 0
    seed = int(make_rng(5).split("init").generator.integers(2 ** 63))
    assert np.array_equal(actor.parameter_vector(), NeuralNet.init_network((2, 4, 2), seed).parameter_vector())
    assert np.array_equal(critic.parameter_vector(),
                          NeuralNet.init_network((2, 4, 2), seed + 1).parameter_vector())


def test_actor_critic_is_deterministic(ac_mdp):
    hyper = ACHyper(episodes=6, hidden_sizes=(4,), eval_every=2, eval_episodes=1, reward_scale=1.0)
    run = lambda: ActorCritic.train_actor_critic(lambda: TabularMDPEnvironment(ac_mdp, horizon=8),  # noqa: E731
                                                 hyper, seed=13)
    (a1, k1, c1), (a2, k2, c2) = run(), run()
    assert a1.to_bytes() == a2.to_bytes() and k1.to_bytes() == k2.to_bytes()
    assert c1.points == c2.points


def test_actor_critic_recovers_optimal_policy(ac_mdp):
    hyper = ACHyper(gamma=ac_mdp.gamma, actor_lr=0.05, critic_lr=0.05, episodes=400, hidden_sizes=(16,),
                    eval_every=100, eval_episodes=1, reward_scale=1.0)
    env = TabularMDPEnvironment(ac_mdp, horizon=25)
    actor, _, _ = ActorCritic.train_actor_critic(lambda: TabularMDPEnvironment(ac_mdp, horizon=25), hyper, seed=0)
    oracle = DynamicProgramming.value_iteration(ac_mdp).policy.as_actions()
    assert oracle.tolist() == [1, 0]
    assert [ActorCritic.mode_action(actor, env.features(s)) for s in range(2)] == oracle.tolist()


def test_dqn_matches_value_iteration_on_chain(oracle_mdp):
    hyper = DQNHyper(gamma=oracle_mdp.gamma, learning_rate=0.02, batch_size=32, capacity=5000, target_sync_every=100,
                     warmup_steps=200, epsilon_start=1.0, epsilon_end=0.1, epsilon_decay_episodes=300,
                     episodes=600, hidden_sizes=(16,), eval_every=100, eval_episodes=1, reward_scale=0.1)
    env = TabularMDPEnvironment(oracle_mdp, horizon=20)
    net, _ = DQN.train_dqn(lambda: TabularMDPEnvironment(oracle_mdp, horizon=20), hyper, seed=0)
    oracle = DynamicProgramming.value_iteration(oracle_mdp).policy.as_actions()
    assert oracle.tolist() == [1, 1, 1, 1]
    assert [DQN.greedy_action(net, env.features(s)) for s in range(4)] == oracle.tolist()


def test_actor_critic_matches_value_iteration_on_chain(oracle_mdp):
    hyper = ACHyper(gamma=oracle_mdp.gamma, actor_lr=0.02, critic_lr=0.02, episodes=1500, hidden_sizes=(16,),
                    eval_every=500, eval_episodes=1, reward_scale=0.1)
    env = TabularMDPEnvironment(oracle_mdp, horizon=20)
    actor, _, _ = ActorCritic.train_actor_critic(lambda: TabularMDPEnvironment(oracle_mdp, horizon=20), hyper,
                                                 seed=0)
    oracle = DynamicProgramming.value_iteration(oracle_mdp).policy.as_actions()
    assert [ActorCritic.mode_action(actor, env.features(s)) for s in range(4)] == oracle.tolist()
