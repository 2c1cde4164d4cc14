"""Non-learning reference policies: merit-order dispatch and uniform random templates."""
from typing import List, Sequence, Tuple
import logging

from concepts.grid_env.algorithms import ActionTemplate, GridAction, GridConfig, GridDynamics, GridState
from concepts.stochastic.algorithms import RandomStream

logger = logging.getLogger(__name__)


class Baselines:
    @staticmethod
    def reachable_range(state: GridState, config: GridConfig) -> List[Tuple[float, float]]:
        """Per-unit (lo, hi) setpoint range for the next interval, keeping every unit committed."""
        ranges = []
        for g, prev, was_on in zip(config.generators, state.gen_output, state.gen_on):
            if was_on:
                ranges.append((max(g.p_min, prev - g.ramp_limit), min(g.p_max, prev + g.ramp_limit)))
            else:
                ranges.append((g.p_min, max(g.p_min, min(g.p_max, g.ramp_limit))))
        return ranges

    @staticmethod
    def merit_order(state: GridState, config: GridConfig) -> List[int]:
        """Unit indices by marginal cost b + 2cP, cheapest first; ties keep config order."""
        marginal = [g.fuel_b + 2.0 * g.fuel_c * out for g, out in zip(config.generators, state.gen_output)]
        return sorted(range(config.n_generators), key=lambda i: (marginal[i], i))

    @staticmethod
    def priority_list_dispatch(state: GridState, config: GridConfig) -> GridAction:
        """Merit-order economic dispatch against the current demand and renewable availability."""
        ranges = Baselines.reachable_range(state, config)
        thermal_hi = sum(hi for _, hi in ranges)
        renewables = state.renewable_avail
        charge_limit, discharge_limit = GridDynamics.storage_limits(state, config)

        if state.demand > thermal_hi + renewables:
            storage_power = min(discharge_limit, state.demand - thermal_hi - renewables)
        elif renewables > state.demand:
            storage_power = -min(charge_limit, renewables - state.demand)
        else:
            storage_power = 0.0
        target = state.demand - renewables - storage_power

        setpoints = [min(max(out if on else lo, lo), hi)
                     for out, on, (lo, hi) in zip(state.gen_output, state.gen_on, ranges)]
        order = Baselines.merit_order(state, config)
        gap = target - sum(setpoints)
        if gap > 0:
            for i in order:
                raise_by = min(gap, ranges[i][1] - setpoints[i])
                setpoints[i] += raise_by
                gap -= raise_by
                if gap <= 0:
                    break
        elif gap < 0:
            for i in reversed(order):
                lower_by = min(-gap, setpoints[i] - ranges[i][0])
                setpoints[i] -= lower_by
                gap += lower_by
                if gap >= 0:
                    break

        action = GridAction(setpoints, [True] * config.n_generators, storage_power)
        return GridDynamics.clamp_action(state, action, config)

    @staticmethod
    def random_template_index(n_templates: int, rng: RandomStream) -> int:
        if n_templates < 1:
            raise ValueError("need at least one action template")
        return rng.integers(n_templates)

    @staticmethod
    def random_policy(state: GridState, action_templates: Sequence[ActionTemplate], rng: RandomStream) -> GridAction:
        """Uniform choice over the templates, one draw per call."""
        return action_templates[Baselines.random_template_index(len(action_templates), rng)].to_action(state)


def priority_list_dispatch(state: GridState, config: GridConfig) -> GridAction:
    return Baselines.priority_list_dispatch(state, config)


def random_policy(state: GridState, action_templates: Sequence[ActionTemplate], rng: RandomStream) -> GridAction:
    return Baselines.random_policy(state, action_templates, rng)
