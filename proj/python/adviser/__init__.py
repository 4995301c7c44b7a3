"""Python access to the adviser core: instance selection, MPI envelopes,
run-command parsing, the scaling simulator and run statistics."""

import json

from . import _adviser
from ._adviser import Error, aggregate_repetitions, decompose_grid, parallel_efficiency, transition

__all__ = [
    "Error",
    "aggregate_repetitions",
    "build_mpi_envelope",
    "calibrate_model",
    "decompose_grid",
    "estimate_cost",
    "model_wall_hours",
    "parallel_efficiency",
    "parse_run_command",
    "select_instance",
    "sim_execute",
    "transition",
]


def select_instance(requirements, catalog_path):
    """Cheapest feasible instance for a requirements dict; returns {instance, rationale}."""
    return json.loads(_adviser.select_instance(json.dumps(requirements), str(catalog_path)))


def estimate_cost(instance, wall_hours, nodes=1):
    """Cost in USD as a six-decimal string."""
    return _adviser.estimate_cost(json.dumps(instance), wall_hours, nodes)


def build_mpi_envelope(np, plan):
    return json.loads(_adviser.build_mpi_envelope(np, json.dumps(plan)))


def parse_run_command(argv):
    return json.loads(_adviser.parse_run_command(list(argv)))


def calibrate_model(observations):
    """observations: iterable of (np, num_nodes, wall_hours)."""
    return json.loads(_adviser.calibrate_model([tuple(o) for o in observations]))


def model_wall_hours(np, nodes, params):
    return _adviser.model_wall_hours(np, nodes, json.dumps(params))


def sim_execute(np, nodes, params, repetition=0):
    """Simulated wall time in hours."""
    return _adviser.sim_execute(np, nodes, json.dumps(params), repetition)
