"""Privacy-aware, game-theoretic task allocation for social-sensing edge computing."""

from .model import DeviceState, EdgeServer, NetworkModel, Task
from .scenario import ScenarioConfig, load_scenario, reference_scenario
from .engine import SCHEMES, Simulator, run_scheme

__all__ = ["DeviceState", "EdgeServer", "NetworkModel", "Task", "ScenarioConfig", "load_scenario",
           "reference_scenario", "SCHEMES", "Simulator", "run_scheme"]
__version__ = "0.1.0"
