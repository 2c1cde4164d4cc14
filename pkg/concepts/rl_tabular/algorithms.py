"""Tabular Q-Learning over a discretized grid (or any discrete Environment)."""
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple
import logging

import numpy as np

from concepts.errors import GridConfigError, PolicyMismatchError
from concepts.grid_env.algorithms import ActionTemplate, GridConfig, GridState, build_action_templates
from concepts.mdp_core.algorithms import Environment, LearningCurve, linear_epsilon, rollout_evaluation
from concepts.stochastic.algorithms import RandomStream, make_rng

logger = logging.getLogger(__name__)


def _edges(values: Sequence[float], label: str) -> Tuple[float, ...]:
    edges = tuple(float(v) for v in values)
    if len(edges) < 2:
        raise GridConfigError(f"{label} needs at least two edges")
    if any(b <= a for a, b in zip(edges, edges[1:])):
        raise GridConfigError(f"{label} edges must be strictly increasing")
    return edges


@dataclass(frozen=True)
class DiscretizationScheme:
    """Bin boundaries per feature; k bins are given by k + 1 edges."""
    demand_edges: Tuple[float, ...]
    soc_edges: Tuple[float, ...]
    renewable_edges: Tuple[float, ...]
    include_hour: bool
    hours: int
    action_set: Tuple[ActionTemplate, ...]

    def __post_init__(self):
        object.__setattr__(self, "demand_edges", _edges(self.demand_edges, "demand"))
        object.__setattr__(self, "soc_edges", _edges(self.soc_edges, "soc"))
        object.__setattr__(self, "renewable_edges", _edges(self.renewable_edges, "renewable"))
        object.__setattr__(self, "action_set", tuple(self.action_set))
        if not self.action_set:
            raise GridConfigError("action_set must not be empty")
        if len(set(self.action_set)) != len(self.action_set):
            raise GridConfigError("action_set contains duplicates")
        if self.include_hour and self.hours < 1:
            raise GridConfigError("hours must be >= 1 when include_hour is set")

    @property
    def radices(self) -> Tuple[int, ...]:
        radices = (len(self.demand_edges) - 1, len(self.soc_edges) - 1, len(self.renewable_edges) - 1)
        return radices + ((self.hours,) if self.include_hour else ())

    @property
    def n_states(self) -> int:
        return int(np.prod(self.radices))

    @property
    def n_actions(self) -> int:
        return len(self.action_set)

    @classmethod
    def for_config(cls, config: GridConfig, demand_bins: int = 10, soc_bins: int = 5,
                   renewable_bins: int = 5, include_hour: bool = True,
                   delta_fraction: float = 0.1) -> "DiscretizationScheme":
        """Evenly spaced bins over the ranges the config can produce."""
        d = config.demand_params
        spread = d.daily_amplitude + d.seasonal_amplitude + 3.0 * d.noise_sd
        demand_lo = max(0.0, d.base - spread)
        demand_hi = d.base + spread
        if demand_hi <= demand_lo:
            demand_hi = demand_lo + 1.0
        renewable_hi = (config.solar_params.peak * (1.0 + 3.0 * config.solar_params.noise_factor_sd)
                        + config.wind_params.cap)
        s = config.storage
        return cls(
            demand_edges=tuple(np.linspace(demand_lo, demand_hi, demand_bins + 1)),
            soc_edges=tuple(np.linspace(s.soc_min, s.soc_max, soc_bins + 1)),
            renewable_edges=tuple(np.linspace(0.0, max(renewable_hi, 1.0), renewable_bins + 1)),
            include_hour=include_hour,
            hours=config.steps_per_episode,
            action_set=tuple(build_action_templates(config, delta_fraction)),
        )


@dataclass
class QTable:
    values: np.ndarray
    visits: np.ndarray

    @classmethod
    def zeros(cls, n_states: int, n_actions: int) -> "QTable":
        return cls(np.zeros((n_states, n_actions)), np.zeros((n_states, n_actions), dtype=np.int64))

    @property
    def n_states(self) -> int:
        return self.values.shape[0]

    @property
    def n_actions(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class TabularHyper:
    alpha: float = 0.1
    gamma: float = 0.95
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_episodes: int = 500
    episodes: int = 1000
    eval_every: int = 50
    eval_episodes: int = 5
    alpha_decay: str = "constant"  # or "visit": alpha = 1 / n(s, a) ** alpha_decay_power
    alpha_decay_power: float = 1.0

    def __post_init__(self):
        if not 0 <= self.alpha <= 1:
            raise GridConfigError("alpha must lie in [0, 1]")
        if not 0 <= self.gamma < 1:
            raise GridConfigError("gamma must lie in [0, 1)")
        if not (0 <= self.epsilon_end <= self.epsilon_start <= 1):
            raise GridConfigError("need 0 <= epsilon_end <= epsilon_start <= 1")
        if self.alpha_decay not in ("constant", "visit"):
            raise GridConfigError(f"unknown alpha_decay {self.alpha_decay!r}")
        if min(self.episodes, self.epsilon_decay_episodes) < 0 or self.eval_every < 1 or self.eval_episodes < 1:
            raise GridConfigError("episode counts must be >= 0 and eval cadence >= 1")


class Discretizer:
    @staticmethod
    def bins(state: GridState, scheme: DiscretizationScheme) -> Tuple[int, ...]:
        def bin_of(value, edges):
            idx = int(np.searchsorted(edges, value, side="right")) - 1
            return min(max(idx, 0), len(edges) - 2)

        bins = (
            bin_of(state.demand, scheme.demand_edges),
            bin_of(state.soc, scheme.soc_edges),
            bin_of(state.renewable_avail, scheme.renewable_edges),
        )
        if scheme.include_hour:
            bins += (min(state.step, scheme.hours - 1),)
        return bins

    @staticmethod
    def encode(bins: Sequence[int], scheme: DiscretizationScheme) -> int:
        """Mixed-radix index, first feature most significant."""
        index = 0
        for b, radix in zip(bins, scheme.radices):
            if not 0 <= b < radix:
                raise IndexError(f"bin {b} outside 0..{radix - 1}")
            index = index * radix + int(b)
        return index

    @staticmethod
    def decode(index: int, scheme: DiscretizationScheme) -> Tuple[int, ...]:
        if not 0 <= index < scheme.n_states:
            raise IndexError(f"state index {index} outside 0..{scheme.n_states - 1}")
        bins = []
        for radix in reversed(scheme.radices):
            index, b = divmod(index, radix)
            bins.append(b)
        return tuple(reversed(bins))

    @staticmethod
    def discretize(state: GridState, scheme: DiscretizationScheme) -> int:
        return Discretizer.encode(Discretizer.bins(state, scheme), scheme)


class QLearning:
    @staticmethod
    def q_update(q: QTable, s: int, a: int, r: float, s_next: int, hyper: TabularHyper,
                 done: bool = False) -> QTable:
        """Q(s,a) += alpha * (r + gamma * max Q(s',.) - Q(s,a)); terminal targets do not bootstrap."""
        if not (0 <= s < q.n_states and 0 <= s_next < q.n_states and 0 <= a < q.n_actions):
            raise IndexError(f"(s={s}, a={a}, s'={s_next}) outside table {q.values.shape}")
        q.visits[s, a] += 1
        if hyper.alpha_decay == "visit":
            alpha = 1.0 / float(q.visits[s, a]) ** hyper.alpha_decay_power
        else:
            alpha = hyper.alpha
        target = r if done else r + hyper.gamma * float(np.max(q.values[s_next]))
        q.values[s, a] += alpha * (target - q.values[s, a])
        return q

    @staticmethod
    def epsilon_greedy(q: QTable, s: int, epsilon: float, rng: RandomStream) -> int:
        if rng.random() < epsilon:
            return rng.integers(q.n_actions)
        return int(np.argmax(q.values[s]))

    @staticmethod
    def train_tabular(env_factory: Callable[[], Environment], scheme: Optional[DiscretizationScheme],
                      hyper: TabularHyper, seed: int) -> Tuple[QTable, LearningCurve]:
        """Epsilon-greedy Q-Learning over day episodes; greedy evaluation every eval_every episodes.

        With scheme=None the environment's own state_index is used.
        """
        root = make_rng(seed)
        env_rng = root.split("env")
        explore_rng = root.split("explore")
        env = env_factory()
        eval_env = env_factory()

        if scheme is not None:
            if env.n_actions != scheme.n_actions:
                raise PolicyMismatchError(
                    f"environment has {env.n_actions} actions, scheme has {scheme.n_actions}")
            n_states = scheme.n_states
            index = lambda obs: Discretizer.discretize(obs, scheme)  # noqa: E731
        else:
            n_states = env.n_states
            index = env.state_index
        q = QTable.zeros(n_states, env.n_actions)
        curve = LearningCurve()

        for episode in range(hyper.episodes):
            epsilon = linear_epsilon(episode, hyper.epsilon_start, hyper.epsilon_end,
                                     hyper.epsilon_decay_episodes)
            s = index(env.reset(env_rng))
            while True:
                a = QLearning.epsilon_greedy(q, s, epsilon, explore_rng)
                outcome = env.step(a, env_rng)
                s_next = index(outcome.observation)
                QLearning.q_update(q, s, a, outcome.reward, s_next, hyper, done=outcome.done)
                s = s_next
                if outcome.done or outcome.truncated:
                    break

            if (episode + 1) % hyper.eval_every == 0:
                mean_return, mean_cost = rollout_evaluation(
                    eval_env, lambda obs: int(np.argmax(q.values[index(obs)])),
                    hyper.eval_episodes, root.split("eval"))
                curve.append(episode + 1, mean_return, mean_cost)
                logger.info("qlearning episode %d: return %.3f cost %.3f epsilon %.3f",
                            episode + 1, mean_return, mean_cost, epsilon)
        return q, curve
