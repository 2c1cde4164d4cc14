from concepts.grid_env.algorithms import GeneratorParams, GridConfig, GridState, StorageParams
from concepts.stochastic.algorithms import DemandParams, SolarParams, WindParams

G1 = GeneratorParams(p_min=20, p_max=100, ramp_limit=30, fuel_a=50, fuel_b=20, fuel_c=0.02, startup_cost=500,
                     name="g1")
G2 = GeneratorParams(p_min=10, p_max=60, ramp_limit=40, fuel_a=30, fuel_b=40, fuel_c=0.05, startup_cost=300,
                     name="g2")
STORAGE = StorageParams(capacity=100, max_charge=25, max_discharge=25, eff_charge=0.95, eff_discharge=0.95,
                        soc_min=10, soc_max=90)


def make_config(generators=(G1, G2), storage=STORAGE, steps=24, demand=None, solar=None, wind=None, **penalties):
    return GridConfig(
        generators=generators,
        storage=storage,
        demand_params=demand or DemandParams(base=120, daily_amplitude=30, daily_peak_hour=18,
                                             seasonal_amplitude=15, noise_sd=5),
        solar_params=solar or SolarParams(peak=40, sunrise_hour=6, sunset_hour=18, noise_factor_sd=0.15),
        wind_params=wind or WindParams(scale=20, shape=2, cap=40),
        steps_per_episode=steps,
        **penalties,
    )


def make_state(config, demand=100.0, solar=0.0, wind=0.0, outputs=None, on=None, soc=50.0, step=0, day=0):
    outputs = tuple(outputs if outputs is not None else (g.p_min for g in config.generators))
    on = tuple(on if on is not None else (True,) * len(outputs))
    return GridState(step=step, day_of_year=day, demand=demand, solar_avail=solar, wind_avail=wind,
                     gen_output=outputs, gen_on=on, soc=soc)


