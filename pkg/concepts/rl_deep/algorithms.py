"""DQN and Actor-Critic agents over the discrete action templates."""
from dataclasses import dataclass
from typing import Callable, NamedTuple, Tuple
import logging

import numpy as np

from concepts.errors import GridConfigError
from concepts.grid_env.algorithms import GridConfig, GridState
from concepts.mdp_core.algorithms import Environment, LearningCurve, linear_epsilon, rollout_evaluation
from concepts.nn_approx.algorithms import Gradients, Network, NeuralNet, log_softmax, softmax
from concepts.stochastic.algorithms import RandomStream, coerce_floats, make_rng

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Features
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FeatureScaler:
    """Normalization constants turning a GridState into a network input."""
    demand_scale: float
    solar_scale: float
    wind_scale: float
    soc_min: float
    soc_max: float
    p_max: Tuple[float, ...]
    steps_per_day: int

    def __post_init__(self):
        coerce_floats(self, ("demand_scale", "solar_scale", "wind_scale", "soc_min", "soc_max"))
        object.__setattr__(self, "p_max", tuple(float(p) for p in self.p_max))
        object.__setattr__(self, "steps_per_day", int(self.steps_per_day))

    @classmethod
    def from_config(cls, config: GridConfig) -> "FeatureScaler":
        d = config.demand_params
        demand_scale = d.base + d.daily_amplitude + d.seasonal_amplitude + 3.0 * d.noise_sd
        return cls(
            demand_scale=demand_scale if demand_scale > 0 else 1.0,
            solar_scale=config.solar_params.peak if config.solar_params.peak > 0 else 1.0,
            wind_scale=config.wind_params.cap,
            soc_min=config.storage.soc_min,
            soc_max=config.storage.soc_max,
            p_max=tuple(g.p_max if g.p_max > 0 else 1.0 for g in config.generators),
            steps_per_day=config.steps_per_episode,
        )

    @property
    def size(self) -> int:
        return 5 + len(self.p_max)

    def transform(self, state: GridState) -> np.ndarray:
        head = [
            state.step / self.steps_per_day,
            state.demand / self.demand_scale,
            state.solar_avail / self.solar_scale,
            state.wind_avail / self.wind_scale,
            (state.soc - self.soc_min) / (self.soc_max - self.soc_min),
        ]
        return np.array(head + [out / cap for out, cap in zip(state.gen_output, self.p_max)])

    def to_dict(self):
        return {
            'demand_scale': self.demand_scale,
            'solar_scale': self.solar_scale,
            'wind_scale': self.wind_scale,
            'soc_min': self.soc_min,
            'soc_max': self.soc_max,
            'p_max': list(self.p_max),
            'steps_per_day': self.steps_per_day,
        }


def featurize(state: GridState, config: GridConfig) -> np.ndarray:
    return FeatureScaler.from_config(config).transform(state)


# ---------------------------------------------------------------------------
# Replay buffer
# ---------------------------------------------------------------------------

class Batch(NamedTuple):
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    dones: np.ndarray


class ReplayBuffer:
    """Fixed-capacity FIFO ring of transitions."""

    def __init__(self, capacity: int, feature_size: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._states = np.zeros((capacity, feature_size))
        self._actions = np.zeros(capacity, dtype=np.int64)
        self._rewards = np.zeros(capacity)
        self._next_states = np.zeros((capacity, feature_size))
        self._dones = np.zeros(capacity)
        self._next = 0
        self._size = 0

    def __len__(self):
        return self._size

    def push(self, state: np.ndarray, action: int, reward: float, next_state: np.ndarray, done: bool):
        i = self._next
        self._states[i] = state
        self._actions[i] = action
        self._rewards[i] = reward
        self._next_states[i] = next_state
        self._dones[i] = 1.0 if done else 0.0
        self._next = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def contents(self) -> Batch:
        """Stored transitions, oldest first."""
        order = (np.arange(self._size) + (self._next if self._size == self.capacity else 0)) % self.capacity
        return self._take(order)

    def sample(self, batch_size: int, rng: RandomStream) -> Batch:
        """Uniform sample without replacement."""
        if batch_size > self._size:
            raise ValueError(f"cannot sample {batch_size} from {self._size} transitions")
        return self._take(rng.choice(self._size, batch_size, replace=False))

    def _take(self, idx: np.ndarray) -> Batch:
        return Batch(self._states[idx], self._actions[idx], self._rewards[idx],
                     self._next_states[idx], self._dones[idx])


# ---------------------------------------------------------------------------
# Hyperparameters
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DQNHyper:
    gamma: float = 0.95
    learning_rate: float = 0.005
    batch_size: int = 32
    capacity: int = 10000
    target_sync_every: int = 200
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_episodes: int = 200
    episodes: int = 400
    warmup_steps: int = 500
    train_every: int = 1
    hidden_sizes: Tuple[int, ...] = (64, 64)
    eval_every: int = 20
    eval_episodes: int = 5
    reward_scale: float = 1e-3

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(self.hidden_sizes))
        if self.batch_size < 1 or self.batch_size > self.capacity:
            raise GridConfigError("need 1 <= batch_size <= capacity")
        if self.target_sync_every < 1 or self.train_every < 1:
            raise GridConfigError("target_sync_every and train_every must be >= 1")
        if not 0 <= self.gamma < 1:
            raise GridConfigError("gamma must lie in [0, 1)")
        if not self.learning_rate > 0:
            raise GridConfigError("learning_rate must be > 0")
        if not (0 <= self.epsilon_end <= self.epsilon_start <= 1):
            raise GridConfigError("need 0 <= epsilon_end <= epsilon_start <= 1")
        if self.episodes < 0 or self.eval_every < 1 or self.eval_episodes < 1:
            raise GridConfigError("episodes must be >= 0 and eval cadence >= 1")


@dataclass(frozen=True)
class ACHyper:
    gamma: float = 0.95
    actor_lr: float = 0.005
    critic_lr: float = 0.005
    episodes: int = 400
    entropy_weight: float = 0.0
    hidden_sizes: Tuple[int, ...] = (64, 64)
    eval_every: int = 20
    eval_episodes: int = 5
    reward_scale: float = 1e-3

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(self.hidden_sizes))
        if not (self.actor_lr > 0 and self.critic_lr > 0):
            raise GridConfigError("learning rates must be > 0")
        if not 0 <= self.gamma < 1:
            raise GridConfigError("gamma must lie in [0, 1)")
        if self.entropy_weight < 0:
            raise GridConfigError("entropy_weight must be >= 0")
        if self.episodes < 0 or self.eval_every < 1 or self.eval_episodes < 1:
            raise GridConfigError("episodes must be >= 0 and eval cadence >= 1")


def _init_seed(root: RandomStream) -> int:
    return int(root.split("init").generator.integers(2 ** 63))


# ---------------------------------------------------------------------------
# DQN
# ---------------------------------------------------------------------------

class DQN:
    @staticmethod
    def dqn_loss_and_grads(batch: Batch, online: Network, target: Network, gamma: float) -> Tuple[float, Gradients]:
        """Mean squared TD error; the bootstrap term comes from the target network and is not differentiated."""
        n = len(batch.actions)
        if n == 0:
            raise ValueError("empty batch")
        rows = np.arange(n)
        q = NeuralNet.forward(online, batch.states)
        q_next = NeuralNet.forward(target, batch.next_states)
        targets = batch.rewards + gamma * (1.0 - batch.dones) * q_next.max(axis=1)
        td = q[rows, batch.actions] - targets
        upstream = np.zeros_like(q)
        upstream[rows, batch.actions] = 2.0 * td / n
        return float(np.mean(td ** 2)), NeuralNet.backward(online, batch.states, upstream)

    @staticmethod
    def target_sync(online: Network, target: Network) -> Network:
        """Hard copy of the online parameters."""
        if online.layer_sizes != target.layer_sizes:
            raise ValueError("online and target networks differ in shape")
        return online.copy()

    @staticmethod
    def greedy_action(net: Network, features: np.ndarray) -> int:
        return int(np.argmax(NeuralNet.forward(net, features)))

    @staticmethod
    def train_dqn(env_factory: Callable[[], Environment], hyper: DQNHyper, seed: int) -> Tuple[Network, LearningCurve]:
        root = make_rng(seed)
        env_rng = root.split("env")
        explore_rng = root.split("explore")
        replay_rng = root.split("replay")
        env = env_factory()
        eval_env = env_factory()

        online = NeuralNet.init_network((env.feature_size,) + hyper.hidden_sizes + (env.n_actions,),
                                        _init_seed(root))
        target = online.copy()
        buffer = ReplayBuffer(hyper.capacity, env.feature_size)
        curve = LearningCurve()
        steps = 0

        for episode in range(hyper.episodes):
            epsilon = linear_epsilon(episode, hyper.epsilon_start, hyper.epsilon_end,
                                     hyper.epsilon_decay_episodes)
            x = env.features(env.reset(env_rng))
            while True:
                if explore_rng.random() < epsilon:
                    a = explore_rng.integers(env.n_actions)
                else:
                    a = DQN.greedy_action(online, x)
                outcome = env.step(a, env_rng)
                x_next = env.features(outcome.observation)
                buffer.push(x, a, outcome.reward * hyper.reward_scale, x_next, outcome.done)
                steps += 1

                if steps > hyper.warmup_steps and len(buffer) >= hyper.batch_size and steps % hyper.train_every == 0:
                    batch = buffer.sample(hyper.batch_size, replay_rng)
                    _, grads = DQN.dqn_loss_and_grads(batch, online, target, hyper.gamma)
                    online = NeuralNet.apply_gradients(online, grads, hyper.learning_rate)
                if steps % hyper.target_sync_every == 0:
                    target = DQN.target_sync(online, target)
                    logger.debug("target network synced at step %d", steps)

                x = x_next
                if outcome.done or outcome.truncated:
                    break

            if (episode + 1) % hyper.eval_every == 0:
                net = online
                mean_return, mean_cost = rollout_evaluation(
                    eval_env, lambda obs: DQN.greedy_action(net, eval_env.features(obs)),
                    hyper.eval_episodes, root.split("eval"))
                curve.append(episode + 1, mean_return, mean_cost)
                logger.info("dqn episode %d: return %.3f cost %.3f epsilon %.3f",
                            episode + 1, mean_return, mean_cost, epsilon)
        return online, curve


# ---------------------------------------------------------------------------
# Actor-Critic
# ---------------------------------------------------------------------------

class ACTransition(NamedTuple):
    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray
    next_action: int
    done: bool


class ActorCritic:
    @staticmethod
    def policy(actor: Network, features: np.ndarray) -> np.ndarray:
        return softmax(NeuralNet.forward(actor, features))

    @staticmethod
    def log_prob(actor: Network, features: np.ndarray, action: int) -> float:
        return float(log_softmax(NeuralNet.forward(actor, features))[action])

    @staticmethod
    def log_prob_gradient(actor: Network, features: np.ndarray, action: int) -> Gradients:
        """Gradient of log pi(action | features) w.r.t. the actor parameters."""
        probs = ActorCritic.policy(actor, features)
        upstream = -probs
        upstream[action] += 1.0
        return NeuralNet.backward(actor, features, upstream)

    @staticmethod
    def sample_action(actor: Network, features: np.ndarray, rng: RandomStream) -> int:
        cumulative = np.cumsum(ActorCritic.policy(actor, features))
        return min(int(np.searchsorted(cumulative, rng.random() * cumulative[-1], side="right")),
                   len(cumulative) - 1)

    @staticmethod
    def mode_action(actor: Network, features: np.ndarray) -> int:
        return int(np.argmax(NeuralNet.forward(actor, features)))

    @staticmethod
    def actor_critic_step(transition: ACTransition, actor: Network, critic: Network,
                          hyper: ACHyper) -> Tuple[Network, Network, float]:
        """One online update: SARSA-style TD for the critic, grad log pi * Q(s,a) ascent for the actor."""
        if actor.n_inputs != critic.n_inputs or actor.n_outputs != critic.n_outputs:
            raise ValueError("actor and critic shapes disagree")
        q = NeuralNet.forward(critic, transition.state)
        q_sa = float(q[transition.action])
        bootstrap = 0.0 if transition.done else float(NeuralNet.forward(critic, transition.next_state)[transition.next_action])
        td_error = transition.reward + hyper.gamma * bootstrap - q_sa

        # Semi-gradient of td^2 w.r.t. Q(s, a)
        critic_upstream = np.zeros(critic.n_outputs)
        critic_upstream[transition.action] = -2.0 * td_error
        new_critic = NeuralNet.apply_gradients(
            critic, NeuralNet.backward(critic, transition.state, critic_upstream), hyper.critic_lr)

        logits = NeuralNet.forward(actor, transition.state)
        probs = softmax(logits)
        ascent = -probs * q_sa
        ascent[transition.action] += q_sa
        if hyper.entropy_weight > 0:
            log_probs = log_softmax(logits)
            entropy = -float(np.sum(probs * log_probs))
            ascent += hyper.entropy_weight * (-probs * (log_probs + entropy))
        new_actor = NeuralNet.apply_gradients(
            actor, NeuralNet.backward(actor, transition.state, -ascent), hyper.actor_lr)
        return new_actor, new_critic, td_error

    @staticmethod
    def train_actor_critic(env_factory: Callable[[], Environment], hyper: ACHyper,
                           seed: int) -> Tuple[Network, Network, LearningCurve]:
        root = make_rng(seed)
        env_rng = root.split("env")
        policy_rng = root.split("explore")
        env = env_factory()
        eval_env = env_factory()

        sizes = (env.feature_size,) + hyper.hidden_sizes + (env.n_actions,)
        init_seed = _init_seed(root)
        actor = NeuralNet.init_network(sizes, init_seed)
        critic = NeuralNet.init_network(sizes, init_seed + 1)
        curve = LearningCurve()

        for episode in range(hyper.episodes):
            x = env.features(env.reset(env_rng))
            a = ActorCritic.sample_action(actor, x, policy_rng)
            while True:
                outcome = env.step(a, env_rng)
                x_next = env.features(outcome.observation)
                a_next = 0 if outcome.done else ActorCritic.sample_action(actor, x_next, policy_rng)
                transition = ACTransition(x, a, outcome.reward * hyper.reward_scale, x_next, a_next, outcome.done)
                actor, critic, _ = ActorCritic.actor_critic_step(transition, actor, critic, hyper)
                x, a = x_next, a_next
                if outcome.done or outcome.truncated:
                    break

            if (episode + 1) % hyper.eval_every == 0:
                net = actor
                mean_return, mean_cost = rollout_evaluation(
                    eval_env, lambda obs: ActorCritic.mode_action(net, eval_env.features(obs)),
                    hyper.eval_episodes, root.split("eval"))
                curve.append(episode + 1, mean_return, mean_cost)
                logger.info("actor-critic episode %d: return %.3f cost %.3f", episode + 1, mean_return, mean_cost)
        return actor, critic, curve
