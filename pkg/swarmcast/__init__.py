"""
Swarmcast

Secure multi-hop all-to-all telemetry broadcast for UAV swarms: a pure
per-node protocol engine, and a deterministic simulator to evaluate it.
"""

__version__ = "0.1.0"

from .config import ProtocolConfig, SimulationDefaults
from .core.forwarding import ForwardingMode
from .node import Delivery, FrameIn, NodeConfig, Output, SwarmNode, TelemetrySample, Tick

__all__ = [
    "Delivery",
    "ForwardingMode",
    "FrameIn",
    "NodeConfig",
    "Output",
    "ProtocolConfig",
    "SimulationDefaults",
    "SwarmNode",
    "TelemetrySample",
    "Tick",
]
