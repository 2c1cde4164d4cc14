import logging
import sys

import click

from concepts.harness.config import AGENT_NAMES
from concepts.harness.experiment import compare as run_compare
from concepts.harness.experiment import evaluate_policy_file, run_experiment

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


@click.group()
@click.option("--log-level", default="INFO", show_default=True,
              type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False))
def cli(log_level):
    """Grid load-scheduling experiments."""
    logging.basicConfig(level=log_level.upper(), format=LOG_FORMAT, stream=sys.stderr)


config_option = click.option("--config", "config_path", required=True, type=click.Path(dir_okay=False),
                             help="YAML experiment config.")
out_option = click.option("--out", "output_dir", required=True, type=click.Path(file_okay=False),
                          help="Directory for result files.")
seed_option = click.option("--seed", type=click.IntRange(min=0), default=None,
                           help="Overrides experiment.seed.")


@cli.command()
@config_option
@out_option
@seed_option
@click.option("--agent", type=click.Choice(AGENT_NAMES), default=None, help="Overrides experiment.agent.")
@click.option("--plot", is_flag=True, help="Also write curves.png.")
def train(config_path, output_dir, seed, agent, plot):
    """Train one agent; writes curve.csv, report.json and policy.bin."""
    sys.exit(run_experiment(config_path, output_dir, seed=seed, agent=agent, plot=plot))


@cli.command()
@config_option
@out_option
@seed_option
@click.option("--policy", "policy_path", required=True, type=click.Path(dir_okay=False),
              help="policy.bin written by train.")
def evaluate(config_path, output_dir, seed, policy_path):
    """Evaluate a saved policy; writes report.json."""
    sys.exit(evaluate_policy_file(config_path, policy_path, output_dir, seed=seed))


@cli.command()
@config_option
@out_option
@seed_option
@click.option("--agent", "agents", type=click.Choice(AGENT_NAMES), multiple=True,
              help="Restrict the comparison (repeatable); default is every method.")
@click.option("--plot", is_flag=True, help="Also write curves.png and comparison.png.")
def compare(config_path, output_dir, seed, agents, plot):
    """Run every method under one config and print the comparison table."""
    sys.exit(run_compare(config_path, output_dir, seed=seed, agents=agents or AGENT_NAMES, plot=plot))


if __name__ == "__main__":
    cli()
