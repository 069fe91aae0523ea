"""Discrete-event simulation of trust-aware hybrid opportunistic routing for sensor networks."""

from .experiment import run_scenario
from .metrics import MetricsRecord, avg_e2e_delay, energy_metrics, pdr
from .scenario import Scenario, load_scenario, parse_scenario, serialize_scenario

__all__ = [
    "MetricsRecord",
    "Scenario",
    "avg_e2e_delay",
    "energy_metrics",
    "load_scenario",
    "parse_scenario",
    "pdr",
    "run_scenario",
    "serialize_scenario",
]
