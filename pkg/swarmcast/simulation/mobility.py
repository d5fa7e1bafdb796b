# swarmcast/simulation/mobility.py

"""
Node kinematics and synthetic telemetry.

Waypoint mobility interpolates linearly between timed waypoints, starting
from the node's t=0 position and holding the last waypoint afterwards.
"""

import math
from typing import Tuple

import numpy as np

from ..config import DEFAULT_SIMULATION_DEFAULTS, SimulationDefaults
from ..core.codec import TelemetryPayload
from .scenario import NodePlacement

METERS_PER_DEGREE_LAT = 111_320.0


def _track(node: NodePlacement) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    times = np.array([0] + [w.t_ms for w in node.waypoints], dtype=float)
    xs = np.array([node.x] + [w.x for w in node.waypoints], dtype=float)
    ys = np.array([node.y] + [w.y for w in node.waypoints], dtype=float)
    return times, xs, ys


def position_at(node: NodePlacement, t_ms: int) -> Tuple[float, float]:
    if not node.waypoints:
        return node.x, node.y
    times, xs, ys = _track(node)
    return float(np.interp(t_ms, times, xs)), float(np.interp(t_ms, times, ys))


def velocity_at(node: NodePlacement, t_ms: int) -> Tuple[float, float]:
    """Velocity in m/s on the waypoint leg active at ``t_ms`` (zero when holding)."""
    if not node.waypoints:
        return 0.0, 0.0
    times, xs, ys = _track(node)
    leg = int(np.searchsorted(times, t_ms, side="right")) - 1
    if leg < 0 or leg >= len(times) - 1:
        return 0.0, 0.0
    dt_s = (times[leg + 1] - times[leg]) / 1000.0
    return (xs[leg + 1] - xs[leg]) / dt_s, (ys[leg + 1] - ys[leg]) / dt_s


def distance(a: Tuple[float, float], b: Tuple[float, float]) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def synthesize_telemetry(
    node: NodePlacement, t_ms: int, defaults: SimulationDefaults = DEFAULT_SIMULATION_DEFAULTS
) -> TelemetryPayload:
    """
    Telemetry sample for ``node`` at ``t_ms``.

    Local x/y meters are projected onto latitude/longitude around the
    reference point; heading follows the velocity vector (0 = north,
    clockwise) and battery drains linearly from 100 %.
    """
    x, y = position_at(node, t_ms)
    vx, vy = velocity_at(node, t_ms)

    lat = defaults.reference_latitude + y / METERS_PER_DEGREE_LAT
    lon = defaults.reference_longitude + x / (
        METERS_PER_DEGREE_LAT * math.cos(math.radians(defaults.reference_latitude))
    )
    heading_deg = math.degrees(math.atan2(vx, vy)) % 360.0 if (vx or vy) else 0.0
    battery = 100.0 - defaults.battery_drain_per_min * t_ms / 60_000.0

    return TelemetryPayload(
        latitude=int(round(lat * 1e7)),
        longitude=int(round(lon * 1e7)),
        altitude=int(round(defaults.altitude_m * 1000)),
        velocity_x=int(np.clip(round(vx * 100), -32768, 32767)),
        velocity_y=int(np.clip(round(vy * 100), -32768, 32767)),
        velocity_z=0,
        heading=int(round(heading_deg * 100)) % 36000,
        battery=int(np.clip(math.floor(battery), 0, 100)),
    )
