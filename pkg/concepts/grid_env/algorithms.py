"""Grid MDP: state, actions, feasibility projection, power balance and costs.

Sign convention for storage: positive storage_power discharges to the bus,
negative charges from it.
"""
from dataclasses import dataclass
from itertools import product
from typing import List, NamedTuple, Tuple
import math

from concepts.errors import EpisodeCompleteError, GridConfigError
from concepts.stochastic.algorithms import (
    DemandParams,
    RandomStream,
    SolarParams,
    StochasticModels,
    WindParams,
    coerce_floats,
)

BALANCE_TOLERANCE_MW = 1e-9


@dataclass(frozen=True)
class GeneratorParams:
    p_min: float
    p_max: float
    ramp_limit: float
    fuel_a: float
    fuel_b: float
    fuel_c: float
    startup_cost: float
    name: str = ""

    def __post_init__(self):
        coerce_floats(self, ("p_min", "p_max", "ramp_limit", "fuel_a", "fuel_b", "fuel_c", "startup_cost"))
        label = self.name or "generator"
        if not 0 <= self.p_min <= self.p_max:
            raise GridConfigError(f"{label}: need 0 <= p_min <= p_max, got {self.p_min}, {self.p_max}")
        if not self.ramp_limit > 0:
            raise GridConfigError(f"{label}: ramp_limit must be > 0")
        if self.fuel_b < 0 or self.fuel_c < 0 or self.startup_cost < 0:
            raise GridConfigError(f"{label}: fuel_b, fuel_c and startup_cost must be >= 0")


@dataclass(frozen=True)
class StorageParams:
    capacity: float
    max_charge: float
    max_discharge: float
    eff_charge: float
    eff_discharge: float
    soc_min: float
    soc_max: float

    def __post_init__(self):
        coerce_floats(self, ("capacity", "max_charge", "max_discharge", "eff_charge", "eff_discharge",
                              "soc_min", "soc_max"))
        if not 0 <= self.soc_min < self.soc_max <= self.capacity:
            raise GridConfigError(
                f"storage: need 0 <= soc_min < soc_max <= capacity, got {self.soc_min}, "
                f"{self.soc_max}, {self.capacity}")
        if not (self.max_charge > 0 and self.max_discharge > 0):
            raise GridConfigError("storage: max_charge and max_discharge must be > 0")
        if not (0 < self.eff_charge <= 1 and 0 < self.eff_discharge <= 1):
            raise GridConfigError("storage: efficiencies must lie in (0, 1]")

    @property
    def soc_midpoint(self) -> float:
        return (self.soc_min + self.soc_max) / 2.0


@dataclass(frozen=True)
class GridConfig:
    generators: Tuple[GeneratorParams, ...]
    storage: StorageParams
    demand_params: DemandParams
    solar_params: SolarParams
    wind_params: WindParams
    steps_per_episode: int = 24
    penalty_shed: float = 1000.0
    penalty_imbalance: float = 200.0
    penalty_curtail: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "generators", tuple(self.generators))
        coerce_floats(self, ("penalty_shed", "penalty_imbalance", "penalty_curtail"))
        self.validate()

    def validate(self):
        if not self.generators:
            raise GridConfigError("at least one generator is required")
        if self.steps_per_episode < 1:
            raise GridConfigError("steps_per_episode must be >= 1")
        if min(self.penalty_shed, self.penalty_imbalance, self.penalty_curtail) < 0:
            raise GridConfigError("penalties must be >= 0")

    @property
    def dt(self) -> float:
        """Step length in hours."""
        return 24.0 / self.steps_per_episode

    @property
    def n_generators(self) -> int:
        return len(self.generators)


@dataclass(frozen=True)
class GridState:
    step: int
    day_of_year: int
    demand: float
    solar_avail: float
    wind_avail: float
    gen_output: Tuple[float, ...]
    gen_on: Tuple[bool, ...]
    soc: float

    @property
    def renewable_avail(self) -> float:
        return self.solar_avail + self.wind_avail


@dataclass(frozen=True)
class GridAction:
    gen_setpoint: Tuple[float, ...]
    gen_commit: Tuple[bool, ...]
    storage_power: float

    def __post_init__(self):
        object.__setattr__(self, "gen_setpoint", tuple(float(x) for x in self.gen_setpoint))
        object.__setattr__(self, "gen_commit", tuple(bool(x) for x in self.gen_commit))
        object.__setattr__(self, "storage_power", float(self.storage_power))
        if len(self.gen_setpoint) != len(self.gen_commit):
            raise ValueError("gen_setpoint and gen_commit lengths differ")
        if not all(math.isfinite(x) for x in self.gen_setpoint) or not math.isfinite(self.storage_power):
            raise ValueError("action values must be finite")


@dataclass(frozen=True)
class RewardBreakdown:
    fuel_cost: float
    startup_cost: float
    shed_penalty: float
    imbalance_penalty: float
    curtail_penalty: float
    shed_mwh: float
    curtailed_mwh: float
    renewable_used_mwh: float
    reward: float
    overgeneration_mwh: float = 0.0
    thermal_mwh: float = 0.0
    discharge_mwh: float = 0.0
    charge_mwh: float = 0.0
    demand_mwh: float = 0.0
    renewable_available_mwh: float = 0.0
    residual_mwh: float = 0.0

    @property
    def total_cost(self) -> float:
        return (self.fuel_cost + self.startup_cost + self.shed_penalty
                + self.imbalance_penalty + self.curtail_penalty)


@dataclass(frozen=True)
class TransitionResult:
    next_state: GridState
    breakdown: RewardBreakdown
    applied_action: GridAction
    done: bool


class PowerBalance(NamedTuple):
    renewable_used: float
    curtailed: float
    shed: float
    overgeneration: float


@dataclass(frozen=True)
class ActionTemplate:
    """Relative action: per-generator setpoint deltas plus an absolute storage power."""
    gen_deltas: Tuple[float, ...]
    storage_power: float

    def __post_init__(self):
        object.__setattr__(self, "gen_deltas", tuple(float(d) for d in self.gen_deltas))
        object.__setattr__(self, "storage_power", float(self.storage_power))

    def to_action(self, state: GridState) -> GridAction:
        setpoints = [out + delta for out, delta in zip(state.gen_output, self.gen_deltas)]
        return GridAction(setpoints, [True] * len(setpoints), self.storage_power)

    def to_dict(self):
        return {'gen_deltas': list(self.gen_deltas), 'storage_power': self.storage_power}


def build_action_templates(config: GridConfig, delta_fraction: float = 0.1) -> List[ActionTemplate]:
    """Per-generator {-d, 0, +d} x storage {charge_full, idle, discharge_full}, duplicates dropped."""
    per_gen = [(-delta_fraction * g.p_max, 0.0, delta_fraction * g.p_max) for g in config.generators]
    storage = (-config.storage.max_charge, 0.0, config.storage.max_discharge)
    templates = []
    seen = set()
    for deltas in product(*per_gen):
        for power in storage:
            template = ActionTemplate(tuple(deltas), power)
            if template not in seen:
                seen.add(template)
                templates.append(template)
    return templates


class GridDynamics:
    @staticmethod
    def reset(config: GridConfig, day_of_year: int, rng: RandomStream) -> GridState:
        """Start of day: all units on at p_min, storage at mid-band."""
        config.validate()
        if not 0 <= day_of_year <= 365:
            raise GridConfigError(f"day_of_year must be in 0..365, got {day_of_year}")
        demand, solar, wind = StochasticModels.sample_conditions(
            0.0, day_of_year, config.demand_params, config.solar_params, config.wind_params, rng)
        return GridState(
            step=0,
            day_of_year=day_of_year,
            demand=demand,
            solar_avail=solar,
            wind_avail=wind,
            gen_output=tuple(float(g.p_min) for g in config.generators),
            gen_on=tuple(True for _ in config.generators),
            soc=config.storage.soc_midpoint,
        )

    @staticmethod
    def storage_limits(state: GridState, config: GridConfig) -> Tuple[float, float]:
        """(charge_limit, discharge_limit) in MW keeping soc inside its band after one step."""
        s = config.storage
        dt = config.dt
        discharge = min(s.max_discharge, (state.soc - s.soc_min) * s.eff_discharge / dt)
        charge = min(s.max_charge, (s.soc_max - state.soc) / (s.eff_charge * dt))
        return max(0.0, charge), max(0.0, discharge)

    @staticmethod
    def clamp_action(state: GridState, action: GridAction, config: GridConfig) -> GridAction:
        """Project an action onto the feasible set; never fails."""
        if len(action.gen_setpoint) != config.n_generators:
            raise ValueError(
                f"action has {len(action.gen_setpoint)} generators, config has {config.n_generators}")
        setpoints = []
        for g, prev, was_on, commit, target in zip(config.generators, state.gen_output, state.gen_on,
                                                   action.gen_commit, action.gen_setpoint):
            if not commit:
                setpoints.append(0.0)
                continue
            if was_on:
                lo = max(g.p_min, prev - g.ramp_limit)
                hi = min(g.p_max, prev + g.ramp_limit)
            else:
                # Start-up: at least p_min, at most one ramp (or p_min if that is larger)
                lo = g.p_min
                hi = max(g.p_min, min(g.p_max, g.ramp_limit))
            setpoints.append(min(max(target, lo), hi))

        charge_limit, discharge_limit = GridDynamics.storage_limits(state, config)
        storage_power = min(max(action.storage_power, -charge_limit), discharge_limit)
        return GridAction(setpoints, action.gen_commit, storage_power)

    @staticmethod
    def power_balance(state: GridState, applied: GridAction, config: GridConfig) -> PowerBalance:
        """Fixed merit order: thermal and discharge first, renewables fill, surplus curtailed, deficit shed."""
        thermal = sum(applied.gen_setpoint)
        discharge = max(applied.storage_power, 0.0)
        charge = max(-applied.storage_power, 0.0)
        renewable = state.renewable_avail

        need = state.demand + charge - thermal - discharge
        if need >= 0:
            used = min(renewable, need)
            return PowerBalance(used, renewable - used, need - used, 0.0)
        # Thermal plus discharge already exceed the load: the surplus is absorbed, every renewable MW curtailed
        return PowerBalance(0.0, renewable, 0.0, -need)

    @staticmethod
    def balance_residual(state: GridState, thermal: float, discharge: float, charge: float,
                         balance: PowerBalance) -> float:
        """|sources - sinks| in MW; zero up to rounding under the merit-order rule."""
        sources = thermal + balance.renewable_used + discharge + balance.shed
        sinks = state.demand + charge + balance.overgeneration
        return abs(sources - sinks)

    @staticmethod
    def fuel_cost(output: float, params: GeneratorParams, dt: float) -> float:
        """Quadratic fuel cost over dt hours; an idle unit costs nothing."""
        if output == 0:
            return 0.0
        return dt * (params.fuel_a + params.fuel_b * output + params.fuel_c * output * output)

    @staticmethod
    def next_soc(state: GridState, storage_power: float, config: GridConfig) -> float:
        s = config.storage
        dt = config.dt
        if storage_power > 0:
            soc = state.soc - storage_power * dt / s.eff_discharge
        elif storage_power < 0:
            soc = state.soc + (-storage_power) * dt * s.eff_charge
        else:
            soc = state.soc
        return min(max(soc, s.soc_min), s.soc_max)

    @staticmethod
    def step(state: GridState, action: GridAction, config: GridConfig, rng: RandomStream) -> TransitionResult:
        """One sampled transition of the day-long MDP."""
        if state.step >= config.steps_per_episode:
            raise EpisodeCompleteError(f"episode finished at step {state.step}; call reset()")
        dt = config.dt
        applied = GridDynamics.clamp_action(state, action, config)
        balance = GridDynamics.power_balance(state, applied, config)

        fuel = sum(GridDynamics.fuel_cost(p, g, dt) for p, g in zip(applied.gen_setpoint, config.generators))
        startup = sum(g.startup_cost for g, was_on, on in zip(config.generators, state.gen_on, applied.gen_commit)
                      if on and not was_on)

        thermal = sum(applied.gen_setpoint)
        discharge = max(applied.storage_power, 0.0)
        charge = max(-applied.storage_power, 0.0)
        shed_mwh = balance.shed * dt
        curtailed_mwh = balance.curtailed * dt
        over_mwh = balance.overgeneration * dt
        residual_mwh = GridDynamics.balance_residual(state, thermal, discharge, charge, balance) * dt
        if residual_mwh <= BALANCE_TOLERANCE_MW * dt:
            residual_mwh = 0.0
        shed_penalty = config.penalty_shed * shed_mwh
        imbalance_penalty = config.penalty_imbalance * residual_mwh
        curtail_penalty = config.penalty_curtail * curtailed_mwh

        breakdown = RewardBreakdown(
            fuel_cost=fuel,
            startup_cost=startup,
            shed_penalty=shed_penalty,
            imbalance_penalty=imbalance_penalty,
            curtail_penalty=curtail_penalty,
            shed_mwh=shed_mwh,
            curtailed_mwh=curtailed_mwh,
            renewable_used_mwh=balance.renewable_used * dt,
            reward=-(fuel + startup + shed_penalty + imbalance_penalty + curtail_penalty),
            overgeneration_mwh=over_mwh,
            thermal_mwh=thermal * dt,
            discharge_mwh=discharge * dt,
            charge_mwh=charge * dt,
            demand_mwh=state.demand * dt,
            renewable_available_mwh=state.renewable_avail * dt,
            residual_mwh=residual_mwh,
        )

        next_step = state.step + 1
        demand, solar, wind = StochasticModels.sample_conditions(
            next_step * dt, state.day_of_year, config.demand_params, config.solar_params,
            config.wind_params, rng)
        next_state = GridState(
            step=next_step,
            day_of_year=state.day_of_year,
            demand=demand,
            solar_avail=solar,
            wind_avail=wind,
            gen_output=applied.gen_setpoint,
            gen_on=applied.gen_commit,
            soc=GridDynamics.next_soc(state, applied.storage_power, config),
        )
        return TransitionResult(next_state, breakdown, applied, next_step == config.steps_per_episode)
