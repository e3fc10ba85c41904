"""Parallel-agent orchestration: tasks, rollouts, metrics, rewards and the RL objective."""

import json

from . import _core
from ._core import SwarmError

__all__ = [
    "SwarmError",
    "error_code",
    "generate_task",
    "sample_tasks",
    "describe",
    "vocabulary",
    "zero_params",
    "rollout",
    "critical_steps",
    "total_steps",
    "metrics_row",
    "parl_reward",
    "objective",
    "gradient",
    "fd_check",
    "replay",
    "run_experiment",
]


def _dump(value):
    return "" if value is None else json.dumps(value)


def error_code(exc):
    """Machine-readable code of a SwarmError, e.g. "config-error"."""
    return str(exc).split(":", 1)[0]


def generate_task(kind, seed, a, b):
    """wide_search(n_items, sources), deep_search(depth, branching) or batch_download(n_files, file_cost)."""
    return json.loads(_core.generate_task(kind, seed, a, b))


def sample_tasks(distribution, seed, count):
    return json.loads(_core.sample_tasks(json.dumps(distribution), seed, count))


def describe(task):
    return _core.describe(json.dumps(task))


def vocabulary(config=None):
    return _core.vocabulary(_dump(config))


def zero_params(vocabulary_config=None):
    return json.loads(_core.zero_params(_dump(vocabulary_config)))


def rollout(task, policy, seed, vocabulary=None, env=None):
    """Run one episode. `policy` is a scripted snapshot id or a params dict."""
    scripted = isinstance(policy, str)
    text = policy if scripted else json.dumps(policy)
    return json.loads(_core.rollout(json.dumps(task), text, scripted, seed, _dump(vocabulary), _dump(env)))


def critical_steps(stages):
    return _core.critical_steps(json.dumps(stages))


def total_steps(stages):
    return _core.total_steps(json.dumps(stages))


def metrics_row(trace, kind):
    return json.loads(_core.metrics_row(json.dumps(trace), kind))


def parl_reward(task, trace, parl, t):
    return json.loads(_core.parl_reward(json.dumps(task), json.dumps(trace), json.dumps(parl), t))


def objective(params, groups, rl, term="total"):
    """`groups` is a list of lists of scored traces, one inner list per problem."""
    return _core.objective(json.dumps(params), json.dumps(groups), json.dumps(rl), term)


def gradient(params, groups, rl, term="total"):
    return _core.gradient(json.dumps(params), json.dumps(groups), json.dumps(rl), term)


def fd_check(params, groups, rl, epsilon=1e-6, term="total"):
    """Returns (analytic, finite_diff, max_rel_error)."""
    return _core.fd_check(json.dumps(params), json.dumps(groups), json.dumps(rl), epsilon, term)


def replay(record_line, params=()):
    """Returns (clean, divergences) for one JSONL trace record."""
    return _core.replay(record_line, [json.dumps(p) for p in params])


def run_experiment(config):
    return _core.run_experiment(json.dumps(config))
