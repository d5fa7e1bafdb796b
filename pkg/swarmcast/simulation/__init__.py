"""Discrete-event swarm simulator, radio and adversary models, and metrics."""

from .adversary import Adversary, apply_adversary
from .metrics import MetricsReport, TraceRecord, write_trace
from .radio import RadioModel
from .scenario import AdversaryKind, AdversaryModel, Mobility, NodePlacement, Scenario, Waypoint
from .simulator import SimulationResult, Simulator, run

__all__ = [
    "Adversary",
    "AdversaryKind",
    "AdversaryModel",
    "MetricsReport",
    "Mobility",
    "NodePlacement",
    "RadioModel",
    "Scenario",
    "SimulationResult",
    "Simulator",
    "TraceRecord",
    "Waypoint",
    "apply_adversary",
    "run",
    "write_trace",
]
