"""Training runs, artifact writing and the agent comparison table."""
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence
import json
import logging
import os

import click
import numpy as np
import pandas as pd

from concepts.errors import GridSchedulingError
from concepts.grid_env.algorithms import ActionTemplate, GridConfig, GridDynamics, GridState, build_action_templates
from concepts.harness.algorithms import (DAYS_PER_YEAR, Harness, LearningCurve, MetricsReport, write_curve_csv,
                                         write_report_json)
from concepts.harness.config import AGENT_NAMES, Settings, load_config
from concepts.harness.persistence import load_policy, save_policy
from concepts.harness.policies import (DispatchPolicy, NetworkPolicy, PriorityListPolicy, RandomPolicy,
                                       TabularPolicy)
from concepts.mdp_core.algorithms import Environment, StepOutcome
from concepts.rl_deep.algorithms import DQN, ActorCritic, FeatureScaler
from concepts.rl_tabular.algorithms import DiscretizationScheme, Discretizer, QLearning
from concepts.stochastic.algorithms import RandomStream

logger = logging.getLogger(__name__)

CURVE_FILE = "curve.csv"
REPORT_FILE = "report.json"
POLICY_FILE = "policy.bin"
PLOT_FILE = "curves.png"


class GridTaskEnvironment(Environment):
    """The grid day as an Environment over discrete action templates; each episode draws its day of year."""

    def __init__(self, config: GridConfig, templates: Sequence[ActionTemplate],
                 scheme: Optional[DiscretizationScheme] = None):
        self.config = config
        self.templates = tuple(templates)
        self.scheme = scheme
        self.scaler = FeatureScaler.from_config(config)
        self.n_actions = len(self.templates)
        self.n_states = scheme.n_states if scheme is not None else None
        self.feature_size = self.scaler.size
        self._state: Optional[GridState] = None

    def reset(self, rng: RandomStream) -> GridState:
        self._state = GridDynamics.reset(self.config, rng.integers(DAYS_PER_YEAR), rng)
        return self._state

    def step(self, action: int, rng: RandomStream) -> StepOutcome:
        result = GridDynamics.step(self._state, self.templates[action].to_action(self._state), self.config, rng)
        self._state = result.next_state
        info = {'cost': result.breakdown.total_cost, 'breakdown': result.breakdown}
        return StepOutcome(result.next_state, result.breakdown.reward, result.done, False, info)

    def state_index(self, observation: GridState) -> int:
        return Discretizer.discretize(observation, self.scheme)

    def features(self, observation: GridState) -> np.ndarray:
        return self.scaler.transform(observation)


@dataclass
class TrainedAgent:
    name: str
    policy: DispatchPolicy
    curve: LearningCurve


def train_agent(settings: Settings, agent: Optional[str] = None, seed: Optional[int] = None) -> TrainedAgent:
    """Train (or build, for baselines) one agent under the settings."""
    name = agent or settings.experiment.agent
    seed = settings.experiment.seed if seed is None else seed
    config = settings.grid
    delta = settings.experiment.delta_fraction
    logger.info("training %s (seed %d)", name, seed)

    if name == "qlearning":
        bins = settings.tabular_bins
        scheme = DiscretizationScheme.for_config(config, bins.demand_bins, bins.soc_bins, bins.renewable_bins,
                                                 bins.include_hour, delta)
        q, curve = QLearning.train_tabular(lambda: GridTaskEnvironment(config, scheme.action_set, scheme),
                                           scheme, settings.tabular, seed)
        return TrainedAgent(name, TabularPolicy(q, scheme), curve)

    templates = build_action_templates(config, delta)
    if name == "dqn":
        net, curve = DQN.train_dqn(lambda: GridTaskEnvironment(config, templates), settings.dqn, seed)
        return TrainedAgent(name, NetworkPolicy(net, FeatureScaler.from_config(config), templates, "dqn"), curve)
    if name == "actor_critic":
        actor, _, curve = ActorCritic.train_actor_critic(
            lambda: GridTaskEnvironment(config, templates), settings.actor_critic, seed)
        return TrainedAgent(name, NetworkPolicy(actor, FeatureScaler.from_config(config), templates,
                                                "actor_critic"), curve)
    if name == "priority_list":
        return TrainedAgent(name, PriorityListPolicy(config), LearningCurve())
    if name == "random":
        return TrainedAgent(name, RandomPolicy(templates), LearningCurve())
    raise GridSchedulingError(f"unknown agent {name!r}; expected one of {', '.join(AGENT_NAMES)}")


def evaluate_trained(trained: TrainedAgent, settings: Settings, seed: int) -> MetricsReport:
    e = settings.experiment
    report = Harness.run_evaluation(trained.policy, settings.grid, e.eval_episodes, seed)[0]
    converged = (Harness.detect_convergence(trained.curve, e.convergence_window, e.convergence_band)
                 if len(trained.curve) >= e.convergence_window else None)
    return report.with_convergence(converged)


def _fail(exc: Exception) -> int:
    click.echo(f"error: {exc}", err=True)
    logger.debug("run failed", exc_info=True)
    return 1


def run_experiment(config_path: str, output_dir: str, seed: Optional[int] = None, agent: Optional[str] = None,
                   plot: bool = False) -> int:
    """Train the configured agent and write curve.csv, report.json and policy.bin. Returns an exit status."""
    try:
        settings = load_config(config_path).with_overrides(agent=agent, seed=seed)
        os.makedirs(output_dir, exist_ok=True)
        trained = train_agent(settings)
        report = evaluate_trained(trained, settings, settings.experiment.seed)
        write_curve_csv(trained.curve, os.path.join(output_dir, CURVE_FILE))
        write_report_json(report, os.path.join(output_dir, REPORT_FILE),
                          extra={'agent': trained.name, 'seed': settings.experiment.seed})
        save_policy(trained.policy, os.path.join(output_dir, POLICY_FILE))
        if plot:
            from concepts.harness.visualizer import plot_learning_curves
            plot_learning_curves({trained.name: trained.curve}, os.path.join(output_dir, PLOT_FILE))
    except (GridSchedulingError, OSError) as exc:
        return _fail(exc)
    logger.info("%s: cost %.2f, utilization %.2f%%, convergence %s", trained.name, report.total_cost,
                report.renewable_utilization, report.convergence_episode)
    return 0


def evaluate_policy_file(config_path: str, policy_path: str, output_dir: str, seed: Optional[int] = None) -> int:
    """Evaluate a saved policy and write report.json. Returns an exit status."""
    try:
        settings = load_config(config_path).with_overrides(seed=seed)
        policy = load_policy(policy_path)
        os.makedirs(output_dir, exist_ok=True)
        report = Harness.run_evaluation(policy, settings.grid, settings.experiment.eval_episodes,
                                        settings.experiment.seed)[0]
        write_report_json(report, os.path.join(output_dir, REPORT_FILE),
                          extra={'agent': policy.kind, 'seed': settings.experiment.seed})
    except (GridSchedulingError, OSError) as exc:
        return _fail(exc)
    return 0


COMPARISON_ROWS = [
    ("Total Operating Cost ($)", "total_cost"),
    ("Monthly Operating Cost ($/month)", "monthly_cost"),
    ("Renewable Energy Utilization (%)", "renewable_utilization"),
    ("Overall Energy Efficiency (%)", "energy_efficiency"),
    ("Imbalance Events", "imbalance_events"),
    ("Load Shedding Events", "shed_events"),
    ("Load Shed (MWh)", "shed_mwh_total"),
    ("System Stability", "stability_rating"),
    ("Convergence Speed (episodes)", "convergence_episode"),
]


def comparison_table(reports: Dict[str, MetricsReport]) -> pd.DataFrame:
    """Metrics as rows, methods as columns."""
    data = {name: [getattr(report, attr) for _, attr in COMPARISON_ROWS] for name, report in reports.items()}
    return pd.DataFrame(data, index=[label for label, _ in COMPARISON_ROWS])


def compare(config_path: str, output_dir: str, seed: Optional[int] = None, agents: Sequence[str] = AGENT_NAMES,
            plot: bool = False) -> int:
    """Train and evaluate every method under one config; writes comparison.csv/json and curves.csv."""
    try:
        settings = load_config(config_path).with_overrides(seed=seed)
        os.makedirs(output_dir, exist_ok=True)
        reports: Dict[str, MetricsReport] = {}
        curves: Dict[str, LearningCurve] = {}
        for name in agents:
            trained = train_agent(settings, name)
            reports[name] = evaluate_trained(trained, settings, settings.experiment.seed)
            curves[name] = trained.curve

        table = comparison_table(reports)
        table.to_csv(os.path.join(output_dir, "comparison.csv"), index_label="metric", lineterminator="\n")
        with open(os.path.join(output_dir, "comparison.json"), "w", encoding="utf-8", newline="\n") as fh:
            json.dump({name: r.to_dict() for name, r in reports.items()}, fh, indent=2, sort_keys=True)
            fh.write("\n")
        rows: List[tuple] = [(name, p.episode, p.mean_return, p.mean_cost)
                             for name, curve in curves.items() for p in curve.points]
        pd.DataFrame(rows, columns=["agent", "episode", "return", "cost"]).to_csv(
            os.path.join(output_dir, "curves.csv"), index=False, lineterminator="\n")
        if plot:
            from concepts.harness.visualizer import plot_comparison, plot_learning_curves
            plot_learning_curves({k: v for k, v in curves.items() if len(v)}, os.path.join(output_dir, PLOT_FILE))
            plot_comparison(reports, os.path.join(output_dir, "comparison.png"))
    except (GridSchedulingError, OSError) as exc:
        return _fail(exc)
    click.echo(table.to_string())
    return 0
