import itertools

import numpy as np
import pytest

from concepts.errors import GridConfigError
from concepts.grid_env.algorithms import build_action_templates
from concepts.mdp_core.algorithms import DynamicProgramming, TabularMDP, TabularMDPEnvironment
from concepts.rl_tabular.algorithms import (DiscretizationScheme, Discretizer, QLearning, QTable,
                                            TabularHyper)
from concepts.stochastic.algorithms import make_rng
from tests.helpers import make_state


@pytest.fixture
def scheme(grid_config):
    return DiscretizationScheme.for_config(grid_config, demand_bins=4, soc_bins=3, renewable_bins=2)


def test_scheme_dimensions(scheme, grid_config):
    assert scheme.radices == (4, 3, 2, 24)
    assert scheme.n_states == 4 * 3 * 2 * 24
    assert scheme.n_actions == 27
    assert scheme.action_set == tuple(build_action_templates(grid_config))


def test_scheme_validation(scheme):
    with pytest.raises(GridConfigError):
        DiscretizationScheme((0, 1, 1), (0, 1), (0, 1), False, 1, scheme.action_set)
    with pytest.raises(GridConfigError):
        DiscretizationScheme((0, 1), (0, 1), (0, 1), False, 1, ())
    with pytest.raises(GridConfigError):
        DiscretizationScheme((0, 1), (0, 1), (0, 1), False, 1, scheme.action_set[:1] * 2)


def test_values_outside_edges_clamp_to_end_bins(scheme, grid_config):
    low = make_state(grid_config, demand=-5.0, soc=0.0)
    high = make_state(grid_config, demand=1e6, soc=1e6, wind=1e6, step=30)
    assert Discretizer.bins(low, scheme) == (0, 0, 0, 0)
    assert Discretizer.bins(high, scheme) == (3, 2, 1, 23)


def test_states_in_same_bins_share_an_index(scheme, grid_config):
    a = make_state(grid_config, demand=120.0, soc=50.0, solar=1.0)
    b = make_state(grid_config, demand=121.0, soc=51.0, solar=2.0)
    assert Discretizer.bins(a, scheme) == Discretizer.bins(b, scheme)
    assert Discretizer.discretize(a, scheme) == Discretizer.discretize(b, scheme)


def test_encode_decode_bijection(scheme):
    seen = set()
    for bins in itertools.product(*(range(r) for r in scheme.radices)):
        index = Discretizer.encode(bins, scheme)
        assert Discretizer.decode(index, scheme) == bins
        seen.add(index)
    assert seen == set(range(scheme.n_states))


def test_encode_rejects_out_of_range(scheme):
    with pytest.raises(IndexError):
        Discretizer.encode((4, 0, 0, 0), scheme)
    with pytest.raises(IndexError):
        Discretizer.decode(scheme.n_states, scheme)


def test_q_update_full_overwrite():
    q = QTable.zeros(2, 2)
    q.values[1] = [3.0, 4.0]
    QLearning.q_update(q, 0, 1, 1.0, 1, TabularHyper(alpha=1.0, gamma=0.9))
    assert q.values[0, 1] == pytest.approx(1.0 + 0.9 * 4.0)


def test_q_update_zero_alpha_is_noop():
    q = QTable.zeros(2, 2)
    q.values[:] = [[1.0, 2.0], [3.0, 4.0]]
    before = q.values.copy()
    QLearning.q_update(q, 0, 1, 10.0, 1, TabularHyper(alpha=0.0, gamma=0.9))
    assert np.array_equal(q.values, before)


def test_q_update_formula_and_single_entry():
    q = QTable.zeros(3, 2)
    q.values[:] = [[2.0, 0.5], [4.0, 1.0], [-1.0, 7.0]]
    before = q.values.copy()
    QLearning.q_update(q, 0, 0, 1.0, 1, TabularHyper(alpha=0.5, gamma=0.9))
    assert q.values[0, 0] == pytest.approx(3.3)
    changed = np.argwhere(q.values != before)
    assert changed.tolist() == [[0, 0]]
    assert q.visits[0, 0] == 1 and q.visits.sum() == 1


def test_q_update_terminal_does_not_bootstrap():
    q = QTable.zeros(2, 1)
    q.values[1, 0] = 100.0
    QLearning.q_update(q, 0, 0, 2.0, 1, TabularHyper(alpha=1.0, gamma=0.9), done=True)
    assert q.values[0, 0] == 2.0


def test_q_update_visit_decay():
    q = QTable.zeros(1, 1)
    hyper = TabularHyper(gamma=0.0, alpha_decay="visit")
    for r in [4.0, 2.0, 6.0]:
        QLearning.q_update(q, 0, 0, r, 0, hyper)
    # 1/n step sizes give the running mean
    assert q.values[0, 0] == pytest.approx(4.0)


def test_q_update_index_checks():
    with pytest.raises(IndexError):
        QLearning.q_update(QTable.zeros(2, 2), 2, 0, 0.0, 0, TabularHyper())
    with pytest.raises(IndexError):
        QLearning.q_update(QTable.zeros(2, 2), 0, 2, 0.0, 0, TabularHyper())


def test_q_values_stay_bounded():
    rng = make_rng(5)
    hyper = TabularHyper(alpha=0.7, gamma=0.8)
    q = QTable.zeros(5, 3)
    bound = 2.0 / (1 - hyper.gamma)
    for _ in range(20000):
        QLearning.q_update(q, rng.integers(5), rng.integers(3), rng.random() * 4 - 2, rng.integers(5), hyper)
        assert np.max(np.abs(q.values)) <= bound + 1e-9


def test_epsilon_greedy_greedy_and_uniform():
    q = QTable.zeros(1, 4)
    q.values[0] = [0.0, 2.0, 2.0, 1.0]
    rng = make_rng(1)
    assert {QLearning.epsilon_greedy(q, 0, 0.0, rng) for _ in range(100)} == {1}
    n = 10 ** 6
    counts = np.bincount([QLearning.epsilon_greedy(q, 0, 1.0, rng) for _ in range(n)], minlength=4)
    assert np.all(np.abs(counts / n - 0.25) < 0.01)


def test_epsilon_greedy_reproducible():
    q = QTable.zeros(1, 3)
    a, b = make_rng(9), make_rng(9)
    assert [QLearning.epsilon_greedy(q, 0, 0.5, a) for _ in range(50)] == \
           [QLearning.epsilon_greedy(q, 0, 0.5, b) for _ in range(50)]


def test_hyper_validation():
    with pytest.raises(GridConfigError):
        TabularHyper(alpha=1.5)
    with pytest.raises(GridConfigError):
        TabularHyper(gamma=1.0)
    with pytest.raises(GridConfigError):
        TabularHyper(epsilon_start=0.1, epsilon_end=0.5)
    with pytest.raises(GridConfigError):
        TabularHyper(alpha_decay="harmonic")


def test_q_learning_matches_value_iteration(oracle_mdp):
    hyper = TabularHyper(gamma=oracle_mdp.gamma, epsilon_start=1.0, epsilon_end=1.0, episodes=500,
                         eval_every=500, eval_episodes=1, alpha_decay="visit", alpha_decay_power=0.51)
    q, curve = QLearning.train_tabular(lambda: TabularMDPEnvironment(oracle_mdp, horizon=100), None, hyper, seed=0)
    oracle = DynamicProgramming.value_iteration(oracle_mdp)
    assert int(q.visits.sum()) == 50000
    assert np.max(np.abs(q.values - oracle.q_values)) < 1e-2
    assert np.array_equal(DynamicProgramming.greedy_policy(q.values).as_actions(), oracle.policy.as_actions())
    assert curve.episodes == [500]


def test_zero_episodes_gives_empty_results(oracle_mdp):
    hyper = TabularHyper(gamma=0.9, episodes=0)
    q, curve = QLearning.train_tabular(lambda: TabularMDPEnvironment(oracle_mdp), None, hyper, seed=0)
    assert not q.values.any()
    assert len(curve) == 0


def test_training_is_deterministic(oracle_mdp):
    hyper = TabularHyper(gamma=0.9, episodes=30, eval_every=10, eval_episodes=2, epsilon_decay_episodes=20)
    run = lambda: QLearning.train_tabular(lambda: TabularMDPEnvironment(oracle_mdp, horizon=20), None,  # noqa: E731
                                          hyper, seed=4)
    (q1, c1), (q2, c2) = run(), run()
    assert np.array_equal(q1.values, q2.values)
    assert c1.points == c2.points
    assert c1.episodes == [10, 20, 30]


def test_visit_count_step_size_matches_value_iteration_without_discount(oracle_mdp):
    myopic = TabularMDP(oracle_mdp.transition, oracle_mdp.reward, gamma=0.0)
    hyper = TabularHyper(gamma=0.0, epsilon_start=1.0, epsilon_end=1.0, episodes=50, eval_every=50,
                         eval_episodes=1, alpha_decay="visit", alpha_decay_power=1.0)
    q, _ = QLearning.train_tabular(lambda: TabularMDPEnvironment(myopic, horizon=100), None, hyper, seed=1)
    oracle = DynamicProgramming.value_iteration(myopic)
    assert q.visits.min() > 0
    assert np.max(np.abs(q.values - oracle.q_values)) < 1e-12
