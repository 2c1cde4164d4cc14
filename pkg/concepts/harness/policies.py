"""Dispatch policies: one act(state, rng) interface over every agent type."""
from typing import Optional, Sequence, Tuple
import logging

import numpy as np

from concepts.baselines.algorithms import Baselines
from concepts.errors import PolicyMismatchError
from concepts.grid_env.algorithms import ActionTemplate, GridAction, GridConfig, GridState
from concepts.nn_approx.algorithms import Network, NeuralNet
from concepts.rl_deep.algorithms import FeatureScaler
from concepts.rl_tabular.algorithms import DiscretizationScheme, Discretizer, QTable
from concepts.stochastic.algorithms import RandomStream

logger = logging.getLogger(__name__)


def _check_templates(templates: Sequence[ActionTemplate], config: GridConfig):
    if not templates:
        raise PolicyMismatchError("policy has no action templates")
    widths = {len(t.gen_deltas) for t in templates}
    if widths != {config.n_generators}:
        raise PolicyMismatchError(
            f"policy templates address {sorted(widths)} generators, config has {config.n_generators}")


class DispatchPolicy:
    kind = "base"

    def act(self, state: GridState, rng: RandomStream) -> GridAction:
        raise NotImplementedError

    def check_config(self, config: GridConfig):
        """Raise PolicyMismatchError if the policy cannot drive this grid."""


class TemplatePolicy(DispatchPolicy):
    """Deterministic choice among discrete action templates."""
    templates: Tuple[ActionTemplate, ...] = ()

    def choose_index(self, state: GridState) -> int:
        raise NotImplementedError

    def act(self, state: GridState, rng: RandomStream) -> GridAction:
        return self.templates[self.choose_index(state)].to_action(state)

    def check_config(self, config: GridConfig):
        _check_templates(self.templates, config)


class TabularPolicy(TemplatePolicy):
    kind = "qlearning"

    def __init__(self, q: QTable, scheme: DiscretizationScheme):
        if q.values.shape != (scheme.n_states, scheme.n_actions):
            raise PolicyMismatchError(
                f"Q table {q.values.shape} does not match scheme ({scheme.n_states}, {scheme.n_actions})")
        self.q = q
        self.scheme = scheme
        self.templates = scheme.action_set

    def choose_index(self, state: GridState) -> int:
        return int(np.argmax(self.q.values[Discretizer.discretize(state, self.scheme)]))

    def check_config(self, config: GridConfig):
        super().check_config(config)
        if self.scheme.include_hour and self.scheme.hours != config.steps_per_episode:
            raise PolicyMismatchError(
                f"policy was built for {self.scheme.hours} steps per day, config has {config.steps_per_episode}")


class NetworkPolicy(TemplatePolicy):
    """Greedy (DQN) or mode (Actor-Critic) action of a network over normalized features."""

    def __init__(self, net: Network, scaler: FeatureScaler, templates: Sequence[ActionTemplate],
                 kind: str = "dqn"):
        if kind not in ("dqn", "actor_critic"):
            raise ValueError(f"unknown network policy kind {kind!r}")
        if net.n_inputs != scaler.size or net.n_outputs != len(templates):
            raise PolicyMismatchError(
                f"network {net.layer_sizes} does not match {scaler.size} features / {len(templates)} actions")
        self.net = net
        self.scaler = scaler
        self.templates = tuple(templates)
        self.kind = kind

    def choose_index(self, state: GridState) -> int:
        return int(np.argmax(NeuralNet.forward(self.net, self.scaler.transform(state))))

    def check_config(self, config: GridConfig):
        super().check_config(config)
        if len(self.scaler.p_max) != config.n_generators:
            raise PolicyMismatchError("feature scaler and config disagree on the generator count")


class PriorityListPolicy(DispatchPolicy):
    kind = "priority_list"

    def __init__(self, config: Optional[GridConfig] = None, n_generators: Optional[int] = None):
        self.config = config
        self.n_generators = config.n_generators if config is not None else n_generators

    def act(self, state: GridState, rng: RandomStream) -> GridAction:
        if self.config is None:
            raise PolicyMismatchError("priority list has no grid config; call check_config first")
        return Baselines.priority_list_dispatch(state, self.config)

    def check_config(self, config: GridConfig):
        if self.n_generators is not None and config.n_generators != self.n_generators:
            raise PolicyMismatchError(
                f"priority list was built for {self.n_generators} generators, config has {config.n_generators}")
        self.config = config
        self.n_generators = config.n_generators


class RandomPolicy(DispatchPolicy):
    kind = "random"

    def __init__(self, templates: Sequence[ActionTemplate]):
        self.templates = tuple(templates)

    def act(self, state: GridState, rng: RandomStream) -> GridAction:
        return Baselines.random_policy(state, self.templates, rng)

    def check_config(self, config: GridConfig):
        _check_templates(self.templates, config)
