"""MDP building blocks shared by every agent.

TabularMDP plus exact dynamic-programming solvers serve as the ground truth
the learning agents are checked against. Environment is the interface all
training loops drive; TabularMDPEnvironment turns a TabularMDP into one.
"""
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple
import logging

import numpy as np

from concepts.errors import UnsupportedDiscountError
from concepts.stochastic.algorithms import RandomStream

logger = logging.getLogger(__name__)

PROBABILITY_TOLERANCE = 1e-12


@dataclass(frozen=True)
class TabularMDP:
    transition: np.ndarray  # P[s, a, s']
    reward: np.ndarray      # R[s, a]
    gamma: float

    def __post_init__(self):
        transition = np.asarray(self.transition, dtype=float)
        reward = np.asarray(self.reward, dtype=float)
        object.__setattr__(self, "transition", transition)
        object.__setattr__(self, "reward", reward)
        if transition.ndim != 3 or transition.shape[0] != transition.shape[2]:
            raise ValueError(f"transition must have shape (S, A, S), got {transition.shape}")
        if reward.shape != transition.shape[:2]:
            raise ValueError(f"reward must have shape {transition.shape[:2]}, got {reward.shape}")
        if np.any(transition < 0) or np.any(transition > 1):
            raise ValueError("transition probabilities must lie in [0, 1]")
        if np.max(np.abs(transition.sum(axis=2) - 1.0)) > PROBABILITY_TOLERANCE:
            raise ValueError("each transition row must sum to 1")
        if not np.all(np.isfinite(reward)):
            raise ValueError("rewards must be finite")
        if not 0 <= self.gamma < 1:
            raise UnsupportedDiscountError(f"gamma must lie in [0, 1), got {self.gamma}")

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transition.shape[1]


@dataclass(frozen=True)
class Policy:
    """Deterministic (actions[s]) or stochastic (distributions[s, a]) policy."""
    actions: Optional[np.ndarray] = None
    distributions: Optional[np.ndarray] = None

    def __post_init__(self):
        if (self.actions is None) == (self.distributions is None):
            raise ValueError("give exactly one of actions or distributions")
        if self.distributions is not None:
            dist = np.asarray(self.distributions, dtype=float)
            if np.any(dist < 0) or np.max(np.abs(dist.sum(axis=1) - 1.0)) > PROBABILITY_TOLERANCE:
                raise ValueError("policy distributions must be non-negative and sum to 1")
            object.__setattr__(self, "distributions", dist)
        else:
            object.__setattr__(self, "actions", np.asarray(self.actions, dtype=int))

    @property
    def is_deterministic(self) -> bool:
        return self.actions is not None

    def action_for(self, state: int) -> int:
        if self.is_deterministic:
            return int(self.actions[state])
        return int(np.argmax(self.distributions[state]))

    def as_actions(self) -> np.ndarray:
        """Deterministic action per state (mode of a stochastic policy)."""
        if self.is_deterministic:
            return self.actions.copy()
        return np.argmax(self.distributions, axis=1)


class ValueIterationResult(NamedTuple):
    values: np.ndarray
    q_values: np.ndarray
    policy: Policy
    sweeps: int


class DynamicProgramming:
    @staticmethod
    def value_iteration(mdp: TabularMDP, tol: float = 1e-10, max_sweeps: int = 1_000_000) -> ValueIterationResult:
        """Synchronous Bellman-optimality sweeps until the sup-norm residual drops below tol."""
        if not 0 <= mdp.gamma < 1:
            raise UnsupportedDiscountError(f"value iteration needs gamma in [0, 1), got {mdp.gamma}")
        if not tol > 0:
            raise ValueError("tol must be > 0")

        q = mdp.reward.copy()
        sweeps = 0
        while sweeps < max_sweeps:
            sweeps += 1
            q_next = mdp.reward + mdp.gamma * mdp.transition @ q.max(axis=1)
            residual = float(np.max(np.abs(q_next - q)))
            q = q_next
            if residual < tol:
                break
        logger.debug("value iteration finished after %d sweeps", sweeps)
        return ValueIterationResult(q.max(axis=1), q, DynamicProgramming.greedy_policy(q), sweeps)

    @staticmethod
    def episode_return(rewards: Sequence[float], gamma: float) -> float:
        """Discounted return sum_t gamma^t r_t."""
        total = 0.0
        discount = 1.0
        for r in rewards:
            total += discount * r
            discount *= gamma
        return total

    @staticmethod
    def greedy_policy(q: np.ndarray) -> Policy:
        """Argmax per state; the lowest action index wins ties."""
        q = np.asarray(q, dtype=float)
        if not np.all(np.isfinite(q)):
            raise ValueError("Q must be finite")
        return Policy(actions=np.argmax(q, axis=1))


def linear_epsilon(episode: int, start: float, end: float, decay_episodes: int) -> float:
    """Linear decay from start to end over decay_episodes, then flat."""
    if decay_episodes <= 0 or episode >= decay_episodes:
        return end
    return start + (end - start) * episode / decay_episodes


# ---------------------------------------------------------------------------
# Environment interface
# ---------------------------------------------------------------------------

class StepOutcome(NamedTuple):
    observation: Any
    reward: float
    done: bool
    truncated: bool
    info: Dict[str, Any]


class Environment:
    """Episode-based environment driven by the training loops.

    done marks a terminal transition (no bootstrap past it); truncated ends the
    episode on a time limit while the value of the next state still counts.
    """

    n_actions: int = 0
    n_states: Optional[int] = None
    feature_size: int = 0

    def reset(self, rng: RandomStream) -> Any:
        raise NotImplementedError

    def step(self, action: int, rng: RandomStream) -> StepOutcome:
        raise NotImplementedError

    def state_index(self, observation: Any) -> int:
        """Discrete state index, for tabular agents."""
        raise NotImplementedError

    def features(self, observation: Any) -> np.ndarray:
        """Real-valued feature vector, for network agents."""
        raise NotImplementedError


class TabularMDPEnvironment(Environment):
    """Samples a TabularMDP; episodes are cut at a time limit (truncated, not terminal)."""

    def __init__(self, mdp: TabularMDP, horizon: int = 100, start_state: Optional[int] = None):
        self.mdp = mdp
        self.horizon = horizon
        self.start_state = start_state
        self.n_actions = mdp.n_actions
        self.n_states = mdp.n_states
        self.feature_size = mdp.n_states
        self._cumulative = np.cumsum(mdp.transition, axis=2)
        self._state = 0
        self._t = 0

    def reset(self, rng: RandomStream) -> int:
        self._state = rng.integers(self.n_states) if self.start_state is None else self.start_state
        self._t = 0
        return self._state

    def step(self, action: int, rng: RandomStream) -> StepOutcome:
        s = self._state
        reward = float(self.mdp.reward[s, action])
        row = self._cumulative[s, action]
        s_next = min(int(np.searchsorted(row, rng.random(), side="right")), self.n_states - 1)
        self._state = s_next
        self._t += 1
        return StepOutcome(s_next, reward, False, self._t >= self.horizon, {'cost': -reward})

    def state_index(self, observation: int) -> int:
        return int(observation)

    def features(self, observation: int) -> np.ndarray:
        one_hot = np.zeros(self.n_states)
        one_hot[int(observation)] = 1.0
        return one_hot


# ---------------------------------------------------------------------------
# Learning curves
# ---------------------------------------------------------------------------

class CurvePoint(NamedTuple):
    episode: int
    mean_return: float
    mean_cost: float


@dataclass
class LearningCurve:
    points: List[CurvePoint] = field(default_factory=list)

    def append(self, episode: int, mean_return: float, mean_cost: float):
        if self.points and episode <= self.points[-1].episode:
            raise ValueError("curve episodes must be strictly increasing")
        self.points.append(CurvePoint(int(episode), float(mean_return), float(mean_cost)))

    @property
    def episodes(self) -> List[int]:
        return [p.episode for p in self.points]

    @property
    def returns(self) -> List[float]:
        return [p.mean_return for p in self.points]

    def __len__(self):
        return len(self.points)


def rollout_evaluation(env: Environment, choose_action: Callable[[Any], int], n_episodes: int,
                       rng: RandomStream) -> Tuple[float, float]:
    """Mean undiscounted return and mean cost of a fixed action rule."""
    total_return = 0.0
    total_cost = 0.0
    for _ in range(n_episodes):
        observation = env.reset(rng)
        while True:
            outcome = env.step(choose_action(observation), rng)
            total_return += outcome.reward
            total_cost += outcome.info.get('cost', -outcome.reward)
            observation = outcome.observation
            if outcome.done or outcome.truncated:
                break
    return total_return / n_episodes, total_cost / n_episodes
