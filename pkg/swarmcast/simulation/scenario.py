# swarmcast/simulation/scenario.py

"""
Scenario description and loading.

Scenario files are JSON documents (``.scn``) whose keys are exactly the
Scenario field names. An optional ``protocol`` object overrides
ProtocolConfig fields for every node of the run.
"""

import json
import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from ..config import DEFAULT_SIMULATION_DEFAULTS, ProtocolConfig, SimulationDefaults
from ..core.forwarding import ForwardingMode
from ..exceptions import ConfigurationError, InvalidScenarioError

logger = logging.getLogger(__name__)

MAX_SEED = (1 << 64) - 1
TAMPER_SCOPES = ("authenticated", "frame")
SCENARIO_KEYS = (
    "name",
    "description",
    "nodes",
    "radio_range_m",
    "duration_ms",
    "mode",
    "loss_probability",
    "mobility",
    "adversary",
    "seed",
    "protocol",
    "warmup_ms",
    "drain_ms",
)


class Mobility(Enum):
    STATIC = "static"
    WAYPOINT = "waypoint"


class AdversaryKind(Enum):
    EAVESDROP = "eavesdrop"
    TAMPER = "tamper"
    REPLAY = "replay"
    JAM = "jam"


@dataclass(frozen=True)
class Waypoint:
    t_ms: int
    x: float
    y: float


@dataclass(frozen=True)
class NodePlacement:
    """A node's id, its position at t=0 and its timed waypoints."""

    id: int
    x: float
    y: float
    waypoints: Tuple[Waypoint, ...] = ()


@dataclass(frozen=True)
class AdversaryModel:
    """
    Outside attacker positioned in the field.

    The adversary holds no session key. It overhears frames sent within
    ``range_m`` and its own transmissions reach honest nodes within the same
    range.
    """

    kind: AdversaryKind
    x: float
    y: float
    range_m: float
    delay_ms: int = 0
    scope: str = "authenticated"
    jam_loss_probability: float = 0.0
    max_injections: Optional[int] = None


@dataclass
class Scenario:
    name: str
    nodes: List[NodePlacement]
    radio_range_m: float
    duration_ms: int
    mode: ForwardingMode = ForwardingMode.PER_SOURCE_TREES
    loss_probability: float = 0.0
    mobility: Mobility = Mobility.STATIC
    adversary: Optional[AdversaryModel] = None
    seed: int = 0
    protocol: ProtocolConfig = field(default_factory=ProtocolConfig)
    warmup_ms: int = DEFAULT_SIMULATION_DEFAULTS.warmup_ms
    drain_ms: int = DEFAULT_SIMULATION_DEFAULTS.drain_ms

    @property
    def roster(self) -> frozenset:
        return frozenset(n.id for n in self.nodes)

    def placement(self, node_id: int) -> NodePlacement:
        for node in self.nodes:
            if node.id == node_id:
                return node
        raise KeyError(node_id)

    def with_mode(self, mode: ForwardingMode) -> "Scenario":
        return replace(self, mode=mode)

    def with_seed(self, seed: int) -> "Scenario":
        scenario = replace(self, seed=seed)
        scenario.validate()
        return scenario

    def validate(self) -> None:
        """
        Check every field.

        Raises:
            InvalidScenarioError: Naming the first offending field
        """
        if not self.nodes:
            raise InvalidScenarioError("nodes", "at least one node is required")
        ids = [n.id for n in self.nodes]
        if len(set(ids)) != len(ids):
            raise InvalidScenarioError("nodes", "node ids must be unique")
        for i, node in enumerate(self.nodes):
            if not isinstance(node.id, int) or not 0 < node.id <= 0xFFFF:
                raise InvalidScenarioError(f"nodes[{i}].id", "must be an integer in 1..65535")
            if not (math.isfinite(node.x) and math.isfinite(node.y)):
                raise InvalidScenarioError(f"nodes[{i}]", "position must be finite")
            last_t = 0
            for j, wp in enumerate(node.waypoints):
                if not (math.isfinite(wp.x) and math.isfinite(wp.y)):
                    raise InvalidScenarioError(f"nodes[{i}].waypoints[{j}]", "must be finite")
                if wp.t_ms <= last_t:
                    raise InvalidScenarioError(
                        f"nodes[{i}].waypoints[{j}]", "times must be positive and increasing"
                    )
                last_t = wp.t_ms
            if node.waypoints and self.mobility == Mobility.STATIC:
                raise InvalidScenarioError("mobility", "waypoints require mobility 'waypoint'")

        if not (math.isfinite(self.radio_range_m) and self.radio_range_m > 0):
            raise InvalidScenarioError("radio_range_m", "must be a positive finite number")
        if not 0.0 <= self.loss_probability < 1.0:
            raise InvalidScenarioError("loss_probability", "must be in [0, 1)")
        if self.duration_ms <= 0:
            raise InvalidScenarioError("duration_ms", "must be positive")
        if self.warmup_ms < 0 or self.drain_ms < 0:
            raise InvalidScenarioError("warmup_ms", "warmup and drain must be non-negative")
        if self.warmup_ms + self.drain_ms >= self.duration_ms:
            raise InvalidScenarioError(
                "duration_ms", "must exceed warmup_ms + drain_ms to leave a measurement window"
            )
        if not 0 <= self.seed <= MAX_SEED:
            raise InvalidScenarioError("seed", "must be an unsigned 64-bit integer")

        adversary = self.adversary
        if adversary is not None:
            if not (math.isfinite(adversary.x) and math.isfinite(adversary.y)):
                raise InvalidScenarioError("adversary", "position must be finite")
            if not adversary.range_m > 0:
                raise InvalidScenarioError("adversary.range_m", "must be positive")
            if adversary.delay_ms < 0:
                raise InvalidScenarioError("adversary.delay_ms", "must be non-negative")
            if adversary.scope not in TAMPER_SCOPES:
                raise InvalidScenarioError(
                    "adversary.scope", f"must be one of {', '.join(TAMPER_SCOPES)}"
                )
            if not 0.0 <= adversary.jam_loss_probability < 1.0:
                raise InvalidScenarioError("adversary.jam_loss_probability", "must be in [0, 1)")

        try:
            self.protocol.validate()
        except ConfigurationError as e:
            raise InvalidScenarioError("protocol", str(e)) from None

    # -- Serialization --------------------------------------------------------

    @classmethod
    def from_dict(
        cls, data: Dict[str, Any], defaults: Optional[SimulationDefaults] = None
    ) -> "Scenario":
        """
        Build and validate a scenario from its JSON object form.

        Raises:
            InvalidScenarioError: On missing, unknown or invalid fields
        """
        if not isinstance(data, dict):
            raise InvalidScenarioError("scenario", "must be a JSON object")
        defaults = defaults or DEFAULT_SIMULATION_DEFAULTS

        unknown = sorted(set(data) - set(SCENARIO_KEYS))
        if unknown:
            raise InvalidScenarioError(unknown[0], "unknown field")
        for required in ("nodes", "radio_range_m", "duration_ms"):
            if required not in data:
                raise InvalidScenarioError(required, "missing required field")

        scenario = cls(
            name=str(data.get("name", "scenario")),
            nodes=[_node_from_dict(i, n) for i, n in enumerate(_as_list(data["nodes"], "nodes"))],
            radio_range_m=_as_float(data["radio_range_m"], "radio_range_m"),
            duration_ms=_as_int(data["duration_ms"], "duration_ms"),
            mode=_parse_enum(ForwardingMode.parse, data.get("mode", "per-source-trees"), "mode"),
            loss_probability=_as_float(data.get("loss_probability", 0.0), "loss_probability"),
            mobility=_parse_enum(Mobility, data.get("mobility", "static"), "mobility"),
            adversary=_adversary_from_dict(data.get("adversary")),
            seed=_as_int(data.get("seed", 0), "seed"),
            protocol=_protocol_from_dict(data.get("protocol")),
            warmup_ms=_as_int(data.get("warmup_ms", defaults.warmup_ms), "warmup_ms"),
            drain_ms=_as_int(data.get("drain_ms", defaults.drain_ms), "drain_ms"),
        )
        scenario.validate()
        return scenario

    @classmethod
    def from_file(cls, path: str) -> "Scenario":
        """
        Load a scenario file.

        Raises:
            FileNotFoundError: If the file doesn't exist
            InvalidScenarioError: If the file is not a valid scenario
        """
        scenario_path = Path(path)
        if not scenario_path.exists():
            raise FileNotFoundError(f"Scenario file not found: {path}")
        try:
            with open(scenario_path, "r") as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            raise InvalidScenarioError("file", f"not valid JSON ({e})") from None
        scenario = cls.from_dict(data)
        logger.debug(f"Loaded scenario {scenario.name} from {path}")
        return scenario

    def to_dict(self) -> Dict[str, Any]:
        nodes = []
        for n in self.nodes:
            node: Dict[str, Any] = {"id": n.id, "x": n.x, "y": n.y}
            if n.waypoints:
                node["waypoints"] = [[w.t_ms, w.x, w.y] for w in n.waypoints]
            nodes.append(node)
        data: Dict[str, Any] = {
            "name": self.name,
            "nodes": nodes,
            "radio_range_m": self.radio_range_m,
            "loss_probability": self.loss_probability,
            "mobility": self.mobility.value,
            "duration_ms": self.duration_ms,
            "mode": self.mode.value,
            "adversary": None,
            "seed": self.seed,
            "warmup_ms": self.warmup_ms,
            "drain_ms": self.drain_ms,
        }
        if self.adversary is not None:
            a = self.adversary
            data["adversary"] = {
                "kind": a.kind.value,
                "x": a.x,
                "y": a.y,
                "range_m": a.range_m,
                "delay_ms": a.delay_ms,
                "scope": a.scope,
                "jam_loss_probability": a.jam_loss_probability,
                "max_injections": a.max_injections,
            }
        overrides = {
            k: v for k, v in self.protocol.to_dict().items() if v != getattr(ProtocolConfig(), k)
        }
        if overrides:
            data["protocol"] = overrides
        return data


def load_scenario(path: str) -> Scenario:
    return Scenario.from_file(path)


# -- Field parsing helpers ----------------------------------------------------


def _as_list(value: Any, name: str) -> list:
    if not isinstance(value, list):
        raise InvalidScenarioError(name, "must be a list")
    return value


def _as_int(value: Any, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise InvalidScenarioError(name, "must be an integer")
    return value


def _as_float(value: Any, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise InvalidScenarioError(name, "must be a number")
    return float(value)


def _parse_enum(parser: Any, value: Any, name: str) -> Any:
    try:
        return parser(value)
    except (ValueError, AttributeError):
        raise InvalidScenarioError(name, f"unsupported value {value!r}") from None


def _node_from_dict(index: int, data: Any) -> NodePlacement:
    where = f"nodes[{index}]"
    if not isinstance(data, dict):
        raise InvalidScenarioError(where, "must be an object with id, x, y")
    for key in ("id", "x", "y"):
        if key not in data:
            raise InvalidScenarioError(f"{where}.{key}", "missing required field")
    waypoints = []
    for j, wp in enumerate(_as_list(data.get("waypoints", []), f"{where}.waypoints")):
        if not isinstance(wp, list) or len(wp) != 3:
            raise InvalidScenarioError(f"{where}.waypoints[{j}]", "must be [t_ms, x, y]")
        waypoints.append(
            Waypoint(
                _as_int(wp[0], f"{where}.waypoints[{j}]"),
                _as_float(wp[1], f"{where}.waypoints[{j}]"),
                _as_float(wp[2], f"{where}.waypoints[{j}]"),
            )
        )
    return NodePlacement(
        id=_as_int(data["id"], f"{where}.id"),
        x=_as_float(data["x"], f"{where}.x"),
        y=_as_float(data["y"], f"{where}.y"),
        waypoints=tuple(waypoints),
    )


def _adversary_from_dict(data: Any) -> Optional[AdversaryModel]:
    if data is None:
        return None
    if not isinstance(data, dict):
        raise InvalidScenarioError("adversary", "must be an object or null")
    for key in ("kind", "x", "y", "range_m"):
        if key not in data:
            raise InvalidScenarioError(f"adversary.{key}", "missing required field")
    max_injections = data.get("max_injections")
    return AdversaryModel(
        kind=_parse_enum(AdversaryKind, data["kind"], "adversary.kind"),
        x=_as_float(data["x"], "adversary.x"),
        y=_as_float(data["y"], "adversary.y"),
        range_m=_as_float(data["range_m"], "adversary.range_m"),
        delay_ms=_as_int(data.get("delay_ms", 0), "adversary.delay_ms"),
        scope=str(data.get("scope", "authenticated")),
        jam_loss_probability=_as_float(
            data.get("jam_loss_probability", 0.0), "adversary.jam_loss_probability"
        ),
        max_injections=None
        if max_injections is None
        else _as_int(max_injections, "adversary.max_injections"),
    )


def _protocol_from_dict(data: Any) -> ProtocolConfig:
    if data is None:
        return ProtocolConfig()
    if not isinstance(data, dict):
        raise InvalidScenarioError("protocol", "must be an object")
    try:
        return ProtocolConfig.from_dict(data)
    except (ConfigurationError, TypeError) as e:
        raise InvalidScenarioError("protocol", str(e)) from None
