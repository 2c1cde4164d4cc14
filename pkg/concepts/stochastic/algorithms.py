"""Seeded demand, solar and wind models driving the grid environment."""
from dataclasses import dataclass
from typing import Tuple
import hashlib
import math

import numpy as np

from concepts.errors import GridConfigError

HOURS_PER_DAY = 24.0
DAYS_PER_YEAR = 365.0


def coerce_floats(obj, names):
    for name in names:
        object.__setattr__(obj, name, float(getattr(obj, name)))


@dataclass(frozen=True)
class DemandParams:
    base: float
    daily_amplitude: float = 0.0
    daily_peak_hour: float = 18.0
    seasonal_amplitude: float = 0.0
    noise_sd: float = 0.0

    def __post_init__(self):
        coerce_floats(self, ("base", "daily_amplitude", "daily_peak_hour", "seasonal_amplitude", "noise_sd"))
        if self.base < 0:
            raise GridConfigError(f"demand base must be >= 0, got {self.base}")
        if self.daily_amplitude < 0 or self.seasonal_amplitude < 0:
            raise GridConfigError("demand amplitudes must be >= 0")
        if self.noise_sd < 0:
            raise GridConfigError("demand noise_sd must be >= 0")


@dataclass(frozen=True)
class SolarParams:
    peak: float
    sunrise_hour: float = 6.0
    sunset_hour: float = 18.0
    noise_factor_sd: float = 0.0

    def __post_init__(self):
        coerce_floats(self, ("peak", "sunrise_hour", "sunset_hour", "noise_factor_sd"))
        if self.peak < 0:
            raise GridConfigError(f"solar peak must be >= 0, got {self.peak}")
        if not 0 <= self.sunrise_hour < self.sunset_hour <= HOURS_PER_DAY:
            raise GridConfigError(
                f"need 0 <= sunrise < sunset <= 24, got {self.sunrise_hour}..{self.sunset_hour}")
        if self.noise_factor_sd < 0:
            raise GridConfigError("solar noise_factor_sd must be >= 0")


@dataclass(frozen=True)
class WindParams:
    scale: float
    shape: float
    cap: float

    def __post_init__(self):
        coerce_floats(self, ("scale", "shape", "cap"))
        if not (self.scale > 0 and self.shape > 0 and self.cap > 0):
            raise GridConfigError("wind scale, shape and cap must all be > 0")


class RandomStream:
    """Seeded random stream that can be split into independent labelled children."""

    def __init__(self, seed: int, spawn_key: Tuple[int, ...] = ()):
        if not 0 <= int(seed) < 2 ** 64:
            raise GridConfigError(f"seed must be an unsigned 64-bit integer, got {seed}")
        self._seed = int(seed)
        self._spawn_key = tuple(spawn_key)
        seed_seq = np.random.SeedSequence(entropy=self._seed, spawn_key=self._spawn_key)
        self._generator = np.random.Generator(np.random.PCG64(seed_seq))

    @property
    def seed(self) -> int:
        return self._seed

    @property
    def generator(self) -> np.random.Generator:
        return self._generator

    def split(self, label: str) -> "RandomStream":
        """Child stream keyed by label; the parent's draws are left untouched."""
        digest = hashlib.sha256(label.encode("utf-8")).digest()
        return RandomStream(self._seed, self._spawn_key + (int.from_bytes(digest[:4], "little"),))

    def random(self) -> float:
        return float(self._generator.random())

    def normal(self) -> float:
        return float(self._generator.standard_normal())

    def integers(self, high: int) -> int:
        return int(self._generator.integers(high))

    def choice(self, n: int, size: int, replace: bool = False) -> np.ndarray:
        return self._generator.choice(n, size=size, replace=replace)

    def __repr__(self):
        return f"RandomStream(seed={self._seed}, spawn_key={self._spawn_key})"


def make_rng(seed: int) -> RandomStream:
    return RandomStream(seed)


def split(rng: RandomStream, label: str) -> RandomStream:
    return rng.split(label)


class StochasticModels:
    """Each sampler consumes exactly one draw per call, whatever its parameters."""

    @staticmethod
    def demand_at(hour: float, day_of_year: int, params: DemandParams, rng: RandomStream) -> float:
        """Cosine daily and seasonal profile plus Gaussian noise, floored at 0."""
        noise = rng.normal() * params.noise_sd
        daily = params.daily_amplitude * math.cos(
            2.0 * math.pi * (hour - params.daily_peak_hour) / HOURS_PER_DAY)
        seasonal = params.seasonal_amplitude * math.cos(2.0 * math.pi * day_of_year / DAYS_PER_YEAR)
        return max(0.0, params.base + daily + seasonal + noise)

    @staticmethod
    def solar_at(hour: float, params: SolarParams, rng: RandomStream) -> float:
        """Half-sine daylight profile with multiplicative Gaussian noise."""
        factor = max(0.0, 1.0 + rng.normal() * params.noise_factor_sd)
        if hour < params.sunrise_hour or hour > params.sunset_hour:
            return 0.0
        phase = (hour - params.sunrise_hour) / (params.sunset_hour - params.sunrise_hour)
        value = params.peak * math.sin(math.pi * phase) * factor
        upper = params.peak * (1.0 + 3.0 * params.noise_factor_sd)
        return min(max(value, 0.0), upper)

    @staticmethod
    def wind_from_uniform(u: float, params: WindParams) -> float:
        """Weibull inverse CDF, capped."""
        sample = params.scale * (-math.log1p(-u)) ** (1.0 / params.shape)
        return min(params.cap, sample)

    @staticmethod
    def wind_at(params: WindParams, rng: RandomStream) -> float:
        return StochasticModels.wind_from_uniform(rng.random(), params)

    @staticmethod
    def sample_conditions(hour: float, day_of_year: int, demand: DemandParams, solar: SolarParams,
                          wind: WindParams, rng: RandomStream) -> Tuple[float, float, float]:
        """Demand, solar and wind for one interval, drawn in that fixed order."""
        return (
            StochasticModels.demand_at(hour, day_of_year, demand, rng),
            StochasticModels.solar_at(hour, solar, rng),
            StochasticModels.wind_at(wind, rng),
        )
