"""Deterministic adversarial simulation of incentivized IoT update delivery."""

from .harness.config import ScenarioConfig, load_config
from .harness.runner import RunResult, build_simulation, run_scenario
from .simulation import Simulation

__version__ = "0.1.0"

__all__ = [
    "RunResult",
    "ScenarioConfig",
    "Simulation",
    "build_simulation",
    "load_config",
    "run_scenario",
]
