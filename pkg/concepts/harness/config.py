"""YAML experiment configuration with a strict schema.

Sections: grid, demand, solar, wind, penalties, agent.{qlearning,dqn,actor_critic},
experiment. Missing sections take the defaults below; unknown keys are errors.
"""
from dataclasses import dataclass
from typing import List, Literal, Optional
import logging

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from concepts.errors import ConfigParseError, GridConfigError
from concepts.grid_env.algorithms import GeneratorParams, GridConfig, StorageParams
from concepts.rl_deep.algorithms import ACHyper, DQNHyper
from concepts.rl_tabular.algorithms import TabularHyper
from concepts.stochastic.algorithms import DemandParams, SolarParams, WindParams

logger = logging.getLogger(__name__)

AGENT_NAMES = ("qlearning", "dqn", "actor_critic", "priority_list", "random")


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class GeneratorModel(_Strict):
    name: str = ""
    p_min: float
    p_max: float
    ramp_limit: float
    fuel_a: float
    fuel_b: float
    fuel_c: float
    startup_cost: float = 0.0


class StorageModel(_Strict):
    capacity: float = 100.0
    max_charge: float = 25.0
    max_discharge: float = 25.0
    eff_charge: float = 0.95
    eff_discharge: float = 0.95
    soc_min: float = 10.0
    soc_max: float = 90.0


def _default_generators() -> List[GeneratorModel]:
    return [
        GeneratorModel(name="g1", p_min=35, p_max=100, ramp_limit=30, fuel_a=600, fuel_b=18, fuel_c=0.02,
                       startup_cost=1000),
        GeneratorModel(name="g2", p_min=15, p_max=60, ramp_limit=40, fuel_a=400, fuel_b=35, fuel_c=0.05,
                       startup_cost=500),
    ]


class GridModel(_Strict):
    steps_per_episode: int = 24
    generators: List[GeneratorModel] = Field(default_factory=_default_generators)
    storage: StorageModel = Field(default_factory=StorageModel)


class DemandModel(_Strict):
    base: float = 70.0
    daily_amplitude: float = 12.0
    daily_peak_hour: float = 18.0
    seasonal_amplitude: float = 4.0
    noise_sd: float = 1.5


class SolarModel(_Strict):
    peak: float = 24.0
    sunrise_hour: float = 6.0
    sunset_hour: float = 18.0
    noise_factor_sd: float = 0.1


class WindModel(_Strict):
    scale: float = 6.0
    shape: float = 2.0
    cap: float = 12.0


class PenaltiesModel(_Strict):
    shed: float = 1000.0
    imbalance: float = 200.0
    curtail: float = 0.0


class QLearningModel(_Strict):
    alpha: float = 0.1
    gamma: float = 0.95
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_episodes: int = 500
    episodes: int = 1000
    eval_every: int = 50
    eval_episodes: int = 5
    alpha_decay: Literal["constant", "visit"] = "constant"
    alpha_decay_power: float = 1.0
    demand_bins: int = 10
    soc_bins: int = 5
    renewable_bins: int = 5
    include_hour: bool = True


class DQNModel(_Strict):
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
    hidden_sizes: List[int] = Field(default_factory=lambda: [64, 64])
    eval_every: int = 20
    eval_episodes: int = 5
    reward_scale: float = 1e-3


class ActorCriticModel(_Strict):
    gamma: float = 0.95
    actor_lr: float = 0.005
    critic_lr: float = 0.005
    episodes: int = 400
    entropy_weight: float = 0.0
    hidden_sizes: List[int] = Field(default_factory=lambda: [64, 64])
    eval_every: int = 20
    eval_episodes: int = 5
    reward_scale: float = 1e-3


class AgentModel(_Strict):
    qlearning: QLearningModel = Field(default_factory=QLearningModel)
    dqn: DQNModel = Field(default_factory=DQNModel)
    actor_critic: ActorCriticModel = Field(default_factory=ActorCriticModel)


class ExperimentModel(_Strict):
    agent: Literal["qlearning", "dqn", "actor_critic", "priority_list", "random"] = "qlearning"
    seed: int = Field(default=0, ge=0)
    eval_episodes: int = Field(default=20, ge=1)
    convergence_window: int = Field(default=5, ge=2)
    convergence_band: float = Field(default=0.05, ge=0)
    delta_fraction: float = Field(default=0.1, gt=0)


class ConfigFile(_Strict):
    grid: GridModel = Field(default_factory=GridModel)
    demand: DemandModel = Field(default_factory=DemandModel)
    solar: SolarModel = Field(default_factory=SolarModel)
    wind: WindModel = Field(default_factory=WindModel)
    penalties: PenaltiesModel = Field(default_factory=PenaltiesModel)
    agent: AgentModel = Field(default_factory=AgentModel)
    experiment: ExperimentModel = Field(default_factory=ExperimentModel)


@dataclass(frozen=True)
class TabularBins:
    demand_bins: int
    soc_bins: int
    renewable_bins: int
    include_hour: bool


@dataclass(frozen=True)
class ExperimentSettings:
    agent: str
    seed: int
    eval_episodes: int
    convergence_window: int
    convergence_band: float
    delta_fraction: float


@dataclass(frozen=True)
class Settings:
    grid: GridConfig
    tabular: TabularHyper
    tabular_bins: TabularBins
    dqn: DQNHyper
    actor_critic: ACHyper
    experiment: ExperimentSettings

    def with_overrides(self, agent: Optional[str] = None, seed: Optional[int] = None) -> "Settings":
        e = self.experiment
        experiment = ExperimentSettings(
            agent=e.agent if agent is None else agent,
            seed=e.seed if seed is None else seed,
            eval_episodes=e.eval_episodes,
            convergence_window=e.convergence_window,
            convergence_band=e.convergence_band,
            delta_fraction=e.delta_fraction,
        )
        if experiment.agent not in AGENT_NAMES:
            raise GridConfigError(f"unknown agent {experiment.agent!r}; expected one of {', '.join(AGENT_NAMES)}")
        return Settings(self.grid, self.tabular, self.tabular_bins, self.dqn, self.actor_critic, experiment)


def _describe(error: ValidationError, lines: Optional[List[Optional[int]]] = None) -> str:
    parts = []
    for i, item in enumerate(error.errors()):
        path = ".".join(str(p) for p in item['loc'])
        if item['type'] == "extra_forbidden":
            text = f"unknown key '{path}'"
        else:
            text = f"{path}: {item['msg']}"
        if lines and lines[i] is not None:
            text = f"line {lines[i]}: {text}"
        parts.append(text)
    return "; ".join(parts)


def _line_of(node, loc) -> Optional[int]:
    """1-based line of the YAML key at loc, or of its deepest ancestor present in the document."""
    line = node.start_mark.line + 1 if node is not None else None
    for key in loc:
        if isinstance(node, yaml.MappingNode):
            match = next(((k, v) for k, v in node.value if k.value == str(key)), None)
            if match is None:
                break
            key_node, node = match
            line = key_node.start_mark.line + 1
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and 0 <= key < len(node.value):
            node = node.value[key]
            line = node.start_mark.line + 1
        else:
            break
    return line


def _to_settings(model: ConfigFile) -> Settings:
    g = model.grid
    grid = GridConfig(
        generators=tuple(GeneratorParams(**gen.model_dump()) for gen in g.generators),
        storage=StorageParams(**g.storage.model_dump()),
        demand_params=DemandParams(**model.demand.model_dump()),
        solar_params=SolarParams(**model.solar.model_dump()),
        wind_params=WindParams(**model.wind.model_dump()),
        steps_per_episode=g.steps_per_episode,
        penalty_shed=model.penalties.shed,
        penalty_imbalance=model.penalties.imbalance,
        penalty_curtail=model.penalties.curtail,
    )
    grid.validate()
    q = model.agent.qlearning.model_dump()
    bins = TabularBins(**{k: q.pop(k) for k in ("demand_bins", "soc_bins", "renewable_bins", "include_hour")})
    dqn = model.agent.dqn.model_dump()
    dqn['hidden_sizes'] = tuple(dqn['hidden_sizes'])
    ac = model.agent.actor_critic.model_dump()
    ac['hidden_sizes'] = tuple(ac['hidden_sizes'])
    return Settings(
        grid=grid,
        tabular=TabularHyper(**q),
        tabular_bins=bins,
        dqn=DQNHyper(**dqn),
        actor_critic=ACHyper(**ac),
        experiment=ExperimentSettings(**model.experiment.model_dump()),
    )


def parse_config(text: str) -> Settings:
    """Parse YAML text into validated Settings."""
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        problem = getattr(exc, "problem", None) or str(exc)
        raise ConfigParseError(problem, line=mark.line + 1 if mark is not None else None) from exc
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigParseError("top level of the config must be a mapping", line=1)
    try:
        model = ConfigFile.model_validate(raw)
    except ValidationError as exc:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
        lines = [_line_of(root, item['loc']) for item in exc.errors()]
        raise ConfigParseError(_describe(exc, lines), line=lines[0]) from exc
    return _to_settings(model)


def settings_from_dict(data: dict) -> Settings:
    """Validate an already-parsed config mapping."""
    try:
        model = ConfigFile.model_validate(data)
    except ValidationError as exc:
        raise GridConfigError(_describe(exc)) from exc
    return _to_settings(model)


def load_config(path: str) -> Settings:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    logger.debug("loading config %s", path)
    return parse_config(text)


def default_settings() -> Settings:
    return _to_settings(ConfigFile())
