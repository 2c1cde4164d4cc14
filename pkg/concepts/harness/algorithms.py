"""Evaluation metrics, convergence detection and result writers."""
from dataclasses import asdict, dataclass
from typing import Dict, List, Optional, Tuple
import json
import logging
import os

import pandas as pd

from concepts.grid_env.algorithms import GridConfig, GridDynamics
from concepts.mdp_core.algorithms import CurvePoint, LearningCurve
from concepts.stochastic.algorithms import make_rng

logger = logging.getLogger(__name__)

IMBALANCE_TOLERANCE_MWH = 1e-9
DAYS_PER_MONTH = 30
DAYS_PER_YEAR = 366

__all__ = [
    "CurvePoint", "LearningCurve", "MetricsReport", "StepRecord", "Harness",
    "evaluate", "detect_convergence", "write_curve_csv", "write_report_json",
]


@dataclass(frozen=True)
class StepRecord:
    episode: int
    step: int
    day_of_year: int
    reward: float
    cost: float
    demand_mwh: float
    renewable_available_mwh: float
    renewable_used_mwh: float
    curtailed_mwh: float
    thermal_mwh: float
    discharge_mwh: float
    charge_mwh: float
    shed_mwh: float
    overgeneration_mwh: float
    soc: float
    residual_mwh: float = 0.0


@dataclass(frozen=True)
class MetricsReport:
    total_cost: float
    mean_episode_cost: float
    monthly_cost: float
    renewable_utilization: float
    utilization_defined: bool
    energy_efficiency: float
    imbalance_events: int
    shed_events: int
    shed_mwh_total: float
    overgeneration_mwh_total: float
    stability_rating: str
    mean_episode_reward: float
    convergence_episode: Optional[int]
    n_episodes: int
    n_steps: int

    def with_convergence(self, episode: Optional[int]) -> "MetricsReport":
        values = asdict(self)
        values['convergence_episode'] = episode
        return MetricsReport(**values)

    def to_dict(self) -> Dict:
        return asdict(self)


def stability_rating(event_fraction: float) -> str:
    if event_fraction <= 0.01:
        return "High"
    if event_fraction <= 0.05:
        return "Medium"
    return "Low"


class Harness:
    @staticmethod
    def run_evaluation(policy, config: GridConfig, n_episodes: int, seed: int) -> Tuple[MetricsReport, List[StepRecord]]:
        """Roll the policy over n_episodes seeded days; returns the report and the per-step log."""
        if n_episodes < 1:
            raise ValueError("n_episodes must be >= 1")
        policy.check_config(config)
        root = make_rng(seed)
        env_rng = root.split("eval")
        policy_rng = root.split("policy")

        records: List[StepRecord] = []
        for episode in range(n_episodes):
            state = GridDynamics.reset(config, env_rng.integers(DAYS_PER_YEAR), env_rng)
            while True:
                result = GridDynamics.step(state, policy.act(state, policy_rng), config, env_rng)
                b = result.breakdown
                records.append(StepRecord(
                    episode=episode, step=state.step, day_of_year=state.day_of_year,
                    reward=b.reward, cost=b.total_cost,
                    demand_mwh=b.demand_mwh, renewable_available_mwh=b.renewable_available_mwh,
                    renewable_used_mwh=b.renewable_used_mwh, curtailed_mwh=b.curtailed_mwh,
                    thermal_mwh=b.thermal_mwh, discharge_mwh=b.discharge_mwh, charge_mwh=b.charge_mwh,
                    shed_mwh=b.shed_mwh, overgeneration_mwh=b.overgeneration_mwh,
                    soc=result.next_state.soc, residual_mwh=b.residual_mwh,
                ))
                state = result.next_state
                if result.done:
                    break
        report = Harness.report_from_records(records, n_episodes)
        logger.info("evaluated %s over %d episodes: cost %.2f, utilization %.2f%%",
                    type(policy).__name__, n_episodes, report.total_cost, report.renewable_utilization)
        return report, records

    @staticmethod
    def report_from_records(records: List[StepRecord], n_episodes: int) -> MetricsReport:
        """Aggregate a step log into a MetricsReport."""
        total_cost = sum(r.cost for r in records)
        demand = sum(r.demand_mwh for r in records)
        used = sum(r.renewable_used_mwh for r in records)
        served = sum(max(0.0, r.demand_mwh - r.shed_mwh) for r in records)
        supplied = sum(r.thermal_mwh + r.renewable_available_mwh + r.discharge_mwh for r in records)
        shed_events = sum(1 for r in records if r.shed_mwh > 0)
        imbalance_events = sum(1 for r in records
                               if r.shed_mwh > 0 or r.residual_mwh > IMBALANCE_TOLERANCE_MWH)
        n_steps = len(records)
        mean_cost = total_cost / n_episodes
        return MetricsReport(
            total_cost=total_cost,
            mean_episode_cost=mean_cost,
            monthly_cost=mean_cost * DAYS_PER_MONTH,
            renewable_utilization=100.0 * used / demand if demand > 0 else 0.0,
            utilization_defined=demand > 0,
            energy_efficiency=100.0 * served / supplied if supplied > 0 else 0.0,
            imbalance_events=imbalance_events,
            shed_events=shed_events,
            shed_mwh_total=sum(r.shed_mwh for r in records),
            overgeneration_mwh_total=sum(r.overgeneration_mwh for r in records),
            stability_rating=stability_rating(imbalance_events / n_steps if n_steps else 0.0),
            mean_episode_reward=sum(r.reward for r in records) / n_episodes,
            convergence_episode=None,
            n_episodes=n_episodes,
            n_steps=n_steps,
        )

    @staticmethod
    def detect_convergence(curve: LearningCurve, window: int, band: float) -> Optional[int]:
        """Episode of the first evaluation point that opens a window of `window` returns
        all within band * |mean| of their own mean."""
        if window < 2:
            raise ValueError("window must be >= 2")
        if band < 0:
            raise ValueError("band must be >= 0")
        returns = curve.returns
        for start in range(len(returns) - window + 1):
            block = returns[start:start + window]
            mean = sum(block) / window
            if all(abs(v - mean) <= band * abs(mean) for v in block):
                return curve.points[start].episode
        return None


def evaluate(policy, config: GridConfig, n_episodes: int, seed: int) -> MetricsReport:
    return Harness.run_evaluation(policy, config, n_episodes, seed)[0]


def detect_convergence(curve: LearningCurve, window: int, band: float) -> Optional[int]:
    return Harness.detect_convergence(curve, window, band)


def curve_frame(curve: LearningCurve) -> pd.DataFrame:
    return pd.DataFrame(
        [(p.episode, p.mean_return, p.mean_cost) for p in curve.points],
        columns=["episode", "return", "cost"],
    )


def write_curve_csv(curve: LearningCurve, path: str):
    curve_frame(curve).to_csv(path, index=False, lineterminator="\n")


def read_curve_csv(path: str) -> LearningCurve:
    curve = LearningCurve()
    for row in pd.read_csv(path).itertuples(index=False):
        curve.append(int(row[0]), float(row[1]), float(row[2]))
    return curve


def write_report_json(report: MetricsReport, path: str, extra: Dict = None):
    payload = report.to_dict()
    if extra:
        payload.update(extra)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    logger.debug("wrote %s", os.path.abspath(path))
