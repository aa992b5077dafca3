"""Agent-based simulation of cooperation, betrayal and welfare on small-world networks."""

from .config import ConfigError, RunConfig
from .engine import MetricsRecord, RunResult, SimulationError, build_world, ledger_check, run, step
from .topology import SmallWorldParams, Topology, generate_small_world

__all__ = [
    "ConfigError",
    "MetricsRecord",
    "RunConfig",
    "RunResult",
    "SimulationError",
    "SmallWorldParams",
    "Topology",
    "build_world",
    "generate_small_world",
    "ledger_check",
    "run",
    "step",
]

__version__ = "0.1.0"
