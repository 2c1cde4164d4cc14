from flask import Flask, request, jsonify
import logging

from cli import cli
from concepts.errors import GridSchedulingError
from concepts.grid_env.algorithms import GridDynamics, build_action_templates
from concepts.harness.algorithms import Harness
from concepts.harness.config import settings_from_dict
from concepts.harness.experiment import evaluate_trained, train_agent
from concepts.harness.policies import PriorityListPolicy, RandomPolicy
from concepts.mdp_core.algorithms import DynamicProgramming, TabularMDP
from concepts.stochastic.algorithms import make_rng

logger = logging.getLogger(__name__)

app = Flask(__name__)
app.cli.add_command(cli, name="grid")

MAX_API_EPISODES = 2000
MAX_API_TRAIN_EPISODES = 1000
BASELINES = ('priority_list', 'random')


def _training_episodes(settings):
    agent = settings.experiment.agent
    if agent == 'qlearning':
        return settings.tabular.episodes
    if agent == 'dqn':
        return settings.dqn.episodes
    if agent == 'actor_critic':
        return settings.actor_critic.episodes
    return 0


def _baseline_policy(name, settings):
    if name == 'priority_list':
        return PriorityListPolicy(settings.grid)
    if name == 'random':
        return RandomPolicy(build_action_templates(settings.grid, settings.experiment.delta_fraction))
    raise GridSchedulingError(f"policy must be one of {', '.join(BASELINES)}, got {name!r}")


@app.errorhandler(GridSchedulingError)
@app.errorhandler(ValueError)
def bad_request(error):
    return jsonify({'error': str(error)}), 400


@app.errorhandler(KeyError)
def missing_field(error):
    return jsonify({'error': f"missing field {error.args[0]!r}"}), 400


@app.route('/')
def index():
    return jsonify({
        'routes': {
            'POST /grid/simulate': 'one baseline day, step by step',
            'POST /grid/evaluate': 'metrics for a baseline policy',
            'POST /experiments/train': 'short training run: learning curve and metrics',
            'POST /mdp/value_iteration': 'exact solution of a small tabular MDP',
        }
    })


@app.route('/grid/simulate', methods=['POST'])
def simulate_day():
    data = request.get_json(silent=True) or {}
    settings = settings_from_dict(data.get('config', {}))
    seed = int(data.get('seed', 0))
    day = int(data.get('day_of_year', 0))
    policy = _baseline_policy(data.get('policy', 'priority_list'), settings)
    policy.check_config(settings.grid)

    root = make_rng(seed)
    env_rng = root.split("eval")
    policy_rng = root.split("policy")
    state = GridDynamics.reset(settings.grid, day, env_rng)
    steps = []
    while True:
        result = GridDynamics.step(state, policy.act(state, policy_rng), settings.grid, env_rng)
        b = result.breakdown
        steps.append({
            'step': state.step,
            'demand': state.demand,
            'solar': state.solar_avail,
            'wind': state.wind_avail,
            'gen_setpoint': list(result.applied_action.gen_setpoint),
            'storage_power': result.applied_action.storage_power,
            'soc': result.next_state.soc,
            'cost': b.total_cost,
            'renewable_used_mwh': b.renewable_used_mwh,
            'curtailed_mwh': b.curtailed_mwh,
            'shed_mwh': b.shed_mwh,
        })
        state = result.next_state
        if result.done:
            break
    return jsonify({'steps': steps, 'total_cost': sum(s['cost'] for s in steps)})


@app.route('/grid/evaluate', methods=['POST'])
def evaluate_baseline():
    data = request.get_json(silent=True) or {}
    settings = settings_from_dict(data.get('config', {}))
    episodes = int(data.get('episodes', settings.experiment.eval_episodes))
    if not 1 <= episodes <= MAX_API_EPISODES:
        raise ValueError(f"episodes must be in 1..{MAX_API_EPISODES}")
    policy = _baseline_policy(data.get('policy', 'priority_list'), settings)
    report, _ = Harness.run_evaluation(policy, settings.grid, episodes, int(data.get('seed', 0)))
    return jsonify(report.to_dict())


@app.route('/experiments/train', methods=['POST'])
def train_experiment():
    data = request.get_json(silent=True) or {}
    settings = settings_from_dict(data.get('config', {})).with_overrides(
        agent=data.get('agent'), seed=data.get('seed'))
    episodes = _training_episodes(settings)
    if episodes > MAX_API_TRAIN_EPISODES:
        raise ValueError(f"{settings.experiment.agent} episodes must be <= {MAX_API_TRAIN_EPISODES} "
                         f"over the API, got {episodes}")
    if not 1 <= settings.experiment.eval_episodes <= MAX_API_EPISODES:
        raise ValueError(f"experiment.eval_episodes must be in 1..{MAX_API_EPISODES}")
    trained = train_agent(settings)
    report = evaluate_trained(trained, settings, settings.experiment.seed)
    return jsonify({
        'agent': trained.name,
        'curve': [{'episode': p.episode, 'return': p.mean_return, 'cost': p.mean_cost}
                  for p in trained.curve.points],
        'report': report.to_dict(),
    })


@app.route('/mdp/value_iteration', methods=['POST'])
def value_iteration():
    data = request.json
    mdp = TabularMDP(data['transition'], data['reward'], float(data['gamma']))
    result = DynamicProgramming.value_iteration(mdp, tol=float(data.get('tol', 1e-10)))
    return jsonify({
        'values': result.values.tolist(),
        'q_values': result.q_values.tolist(),
        'policy': result.policy.as_actions().tolist(),
        'sweeps': result.sweeps,
    })


if __name__ == '__main__':
    app.run(debug=True)
