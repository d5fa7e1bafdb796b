"""
Pytest configuration and shared fixtures for swarmcast tests.
"""

import tempfile
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import networkx as nx
import numpy as np
import pytest

from swarmcast.config import ProtocolConfig
from swarmcast.core.codec import TelemetryPayload
from swarmcast.core.crypto import SessionKey
from swarmcast.core.forwarding import ForwardingMode
from swarmcast.core.replay import ReplayState
from swarmcast.simulation.scenario import NodePlacement, Scenario

SCENARIOS_DIR = Path(__file__).resolve().parent.parent / "scenarios"


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: full-size acceptance sweeps")
    config.addinivalue_line("markers", "integration: full simulator runs")


@pytest.fixture
def tmp_path():
    """Provide a temporary directory for test files."""
    with tempfile.TemporaryDirectory() as tmpdir:
        yield Path(tmpdir)


@pytest.fixture
def scenarios_dir() -> Path:
    """Directory holding the shipped scenario corpus."""
    return SCENARIOS_DIR


@pytest.fixture
def protocol_config() -> ProtocolConfig:
    return ProtocolConfig()


@pytest.fixture
def rng() -> np.random.Generator:
    """Seeded generator so every test run draws the same values."""
    return np.random.default_rng(20240601)


@pytest.fixture
def session_key() -> SessionKey:
    return SessionKey(bytes(range(16)))


@pytest.fixture
def replay_state() -> ReplayState:
    return ReplayState(freshness_window_ms=2000, window_bits=64)


@pytest.fixture
def sample_payload() -> TelemetryPayload:
    """A realistic telemetry sample over Ljubljana."""
    return TelemetryPayload(
        latitude=460569000,
        longitude=145058000,
        altitude=50000,
        velocity_x=-120,
        velocity_y=340,
        velocity_z=0,
        heading=9000,
        battery=87,
    )


def make_scenario(
    positions: List[Tuple[int, float, float]],
    mode: ForwardingMode = ForwardingMode.PER_SOURCE_TREES,
    duration_ms: int = 6000,
    loss_probability: float = 0.0,
    seed: int = 1,
    radio_range_m: float = 100.0,
    warmup_ms: int = 2500,
    drain_ms: int = 1000,
    protocol: Optional[ProtocolConfig] = None,
    name: str = "test",
) -> Scenario:
    """Build a static scenario from (id, x, y) triples."""
    scenario = Scenario(
        name=name,
        nodes=[NodePlacement(i, x, y) for i, x, y in positions],
        radio_range_m=radio_range_m,
        duration_ms=duration_ms,
        mode=mode,
        loss_probability=loss_probability,
        seed=seed,
        protocol=protocol or ProtocolConfig(),
        warmup_ms=warmup_ms,
        drain_ms=drain_ms,
    )
    scenario.validate()
    return scenario


def line_positions(n: int, spacing: float = 80.0) -> List[Tuple[int, float, float]]:
    return [(i + 1, i * spacing, 0.0) for i in range(n)]


def random_connected_positions(
    rng: np.random.Generator, max_nodes: int = 12, side: float = 250.0, radio_range: float = 100.0
) -> Dict[int, Tuple[float, float]]:
    """
    Uniform positions in a square, redrawn until the unit-disk graph is
    connected and every node lies within the default ttl of every other.
    """
    while True:
        n = int(rng.integers(2, max_nodes + 1))
        points = rng.uniform(0, side, size=(n, 2))
        graph = nx.Graph()
        graph.add_nodes_from(range(1, n + 1))
        for i in range(n):
            for j in range(i + 1, n):
                if np.linalg.norm(points[i] - points[j]) <= radio_range:
                    graph.add_edge(i + 1, j + 1)
        if nx.is_connected(graph) and nx.diameter(graph) < 8:
            return {i + 1: (float(points[i][0]), float(points[i][1])) for i in range(n)}
