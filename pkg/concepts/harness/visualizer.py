"""Learning-curve and comparison plots (PNG, Agg backend)."""
from typing import Dict
import logging

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from concepts.harness.algorithms import LearningCurve, MetricsReport  # noqa: E402

logger = logging.getLogger(__name__)

STYLE = {
    "axes.labelsize": 10,
    "font.size": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "figure.figsize": (7.0, 4.5),
}


def plot_learning_curves(curves: Dict[str, LearningCurve], path: str):
    with plt.rc_context(STYLE):
        fig, (ax_return, ax_cost) = plt.subplots(1, 2, sharex=True)
        for name, curve in curves.items():
            episodes = curve.episodes
            ax_return.plot(episodes, curve.returns, marker=".", label=name)
            ax_cost.plot(episodes, [p.mean_cost for p in curve.points], marker=".", label=name)
        ax_return.set_xlabel("episode")
        ax_return.set_ylabel("evaluation return")
        ax_cost.set_xlabel("episode")
        ax_cost.set_ylabel("evaluation cost ($/day)")
        if curves:
            ax_return.legend(loc="best")
        fig.tight_layout()
        fig.savefig(path, dpi=120)
        plt.close(fig)
    logger.info("wrote %s", path)


def plot_comparison(reports: Dict[str, MetricsReport], path: str):
    names = list(reports)
    with plt.rc_context(STYLE):
        fig, (ax_cost, ax_util) = plt.subplots(1, 2)
        ax_cost.bar(names, [reports[n].mean_episode_cost for n in names], color="tab:red")
        ax_cost.set_ylabel("mean cost ($/day)")
        ax_util.bar(names, [reports[n].renewable_utilization for n in names], color="tab:green")
        ax_util.set_ylabel("renewable utilization (%)")
        ax_util.set_ylim(0, 100)
        for ax in (ax_cost, ax_util):
            ax.tick_params(axis="x", labelrotation=45)
        fig.tight_layout()
        fig.savefig(path, dpi=120)
        plt.close(fig)
    logger.info("wrote %s", path)
