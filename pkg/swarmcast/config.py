"""
Configuration management for swarmcast.

Provides centralized protocol and simulation settings with support for
environment variables and JSON configuration files.
"""

import json
import os
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Dict

from .exceptions import ConfigurationError

NHT_POLICIES = ("every_frame", "interval")


def _coerce(field_type: Any, env_value: str) -> Any:
    """Convert an environment string to the declared field type."""
    if field_type in (bool, "bool"):
        return env_value.lower() in ("true", "1", "yes")
    if field_type in (int, "int"):
        return int(env_value)
    if field_type in (float, "float"):
        return float(env_value)
    return env_value


@dataclass
class ProtocolConfig:
    """Protocol constants shared by every node of a swarm."""

    # Framing
    mtu_bytes: int = 1400
    max_ttl: int = 8

    # Routing timers
    ogm_interval_ms: int = 1000
    neighbor_timeout_ms: int = 3000
    route_timeout_ms: int = 5000

    # Telemetry
    telemetry_interval_ms: int = 500

    # Security
    freshness_window_ms: int = 2000
    replay_window_bits: int = 64
    keyx_retry_ms: int = 1000

    # Forwarding
    dedup_capacity: int = 4096
    nht_max_entries: int = 64
    nht_policy: str = "every_frame"
    nht_interval_ms: int = 1000
    aggregation_delay_ms: int = 0

    # Logging settings
    log_level: str = "INFO"
    log_format: str = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

    @classmethod
    def from_env(cls, prefix: str = "SWARMCAST_") -> "ProtocolConfig":
        """
        Load configuration from environment variables.

        Environment variables should be prefixed (default: SWARMCAST_)
        and match the field names in uppercase.

        Example:
            SWARMCAST_MTU_BYTES=1200
            SWARMCAST_NHT_POLICY=interval

        Args:
            prefix: Prefix for environment variables

        Returns:
            ProtocolConfig instance with values from environment
        """
        config_dict = {}

        for f in fields(cls):
            env_value = os.getenv(f"{prefix}{f.name.upper()}")
            if env_value is not None:
                config_dict[f.name] = _coerce(f.type, env_value)

        return cls(**config_dict)

    @classmethod
    def from_file(cls, path: str) -> "ProtocolConfig":
        """
        Load configuration from a JSON file.

        Args:
            path: Path to JSON configuration file

        Returns:
            ProtocolConfig instance with values from file

        Raises:
            FileNotFoundError: If configuration file doesn't exist
            json.JSONDecodeError: If file contains invalid JSON
        """
        config_path = Path(path)

        if not config_path.exists():
            raise FileNotFoundError(f"Configuration file not found: {path}")

        with open(config_path) as f:
            config_dict = json.load(f)

        return cls.from_dict(config_dict)

    @classmethod
    def from_dict(cls, config_dict: Dict[str, Any]) -> "ProtocolConfig":
        """Build a configuration, rejecting unknown keys."""
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(config_dict) - known)
        if unknown:
            raise ConfigurationError(f"Unknown protocol settings: {', '.join(unknown)}")
        return cls(**config_dict)

    def to_file(self, path: str) -> None:
        """
        Save configuration to a JSON file.

        Args:
            path: Path where configuration should be saved
        """
        with open(path, "w") as f:
            json.dump(asdict(self), f, indent=2)

    def to_dict(self) -> Dict[str, Any]:
        """Convert configuration to dictionary."""
        return asdict(self)

    def update(self, **kwargs) -> "ProtocolConfig":
        """
        Create a new configuration with updated values.

        Args:
            **kwargs: Fields to update

        Returns:
            New ProtocolConfig instance with updated values
        """
        config_dict = asdict(self)
        config_dict.update(kwargs)
        return ProtocolConfig.from_dict(config_dict)

    def validate(self) -> None:
        """
        Validate configuration values.

        Raises:
            ConfigurationError: If any configuration value is invalid
        """
        if not 64 <= self.mtu_bytes <= 65535:
            raise ConfigurationError("mtu_bytes must be between 64 and 65535")

        if not 1 <= self.max_ttl <= 255:
            raise ConfigurationError("max_ttl must be between 1 and 255")

        for name in (
            "ogm_interval_ms",
            "neighbor_timeout_ms",
            "route_timeout_ms",
            "telemetry_interval_ms",
            "freshness_window_ms",
            "keyx_retry_ms",
            "nht_interval_ms",
        ):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"{name} must be positive")

        if self.aggregation_delay_ms < 0:
            raise ConfigurationError("aggregation_delay_ms cannot be negative")

        if not 1 <= self.replay_window_bits <= 1024:
            raise ConfigurationError("replay_window_bits must be between 1 and 1024")

        if self.dedup_capacity <= 0:
            raise ConfigurationError("dedup_capacity must be positive")

        if not 1 <= self.nht_max_entries <= 255:
            raise ConfigurationError("nht_max_entries must be between 1 and 255")

        if self.nht_policy not in NHT_POLICIES:
            raise ConfigurationError(f"nht_policy must be one of {NHT_POLICIES}")

        valid_log_levels = {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}
        if self.log_level.upper() not in valid_log_levels:
            raise ConfigurationError(f"log_level must be one of {valid_log_levels}")


@dataclass
class SimulationDefaults:
    """Simulator settings that scenarios may leave out."""

    warmup_ms: int = 2500
    drain_ms: int = 1000
    altitude_m: float = 50.0
    reference_latitude: float = 46.0569
    reference_longitude: float = 14.5058
    battery_drain_per_min: float = 1.0
    check_loops: bool = False

    @classmethod
    def from_env(cls, prefix: str = "SWARMCAST_SIM_") -> "SimulationDefaults":
        """Load simulation defaults from environment variables."""
        config_dict = {}

        for f in fields(cls):
            env_value = os.getenv(f"{prefix}{f.name.upper()}")
            if env_value is not None:
                config_dict[f.name] = _coerce(f.type, env_value)

        return cls(**config_dict)

    @classmethod
    def from_file(cls, path: str) -> "SimulationDefaults":
        """Load simulation defaults from JSON file."""
        config_path = Path(path)

        if not config_path.exists():
            raise FileNotFoundError(f"Configuration file not found: {path}")

        with open(config_path) as f:
            config_dict = json.load(f)

        return cls(**config_dict)

    def to_dict(self) -> Dict[str, Any]:
        """Convert configuration to dictionary."""
        return asdict(self)

    def validate(self) -> None:
        """Validate simulation defaults."""
        if self.warmup_ms < 0:
            raise ConfigurationError("warmup_ms cannot be negative")
        if self.drain_ms < 0:
            raise ConfigurationError("drain_ms cannot be negative")
        if self.battery_drain_per_min < 0:
            raise ConfigurationError("battery_drain_per_min cannot be negative")


# Default configurations
DEFAULT_PROTOCOL_CONFIG = ProtocolConfig()
DEFAULT_SIMULATION_DEFAULTS = SimulationDefaults()
