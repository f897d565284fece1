"""Discrete-event simulator for a redundant permafrost-telemetry network.

Evaluates the Successful Transaction Rate of the telemetry service under nine
trustworthiness operating modes: classical social/consensus layers and their
quantum-assisted variants.
"""

from .engine import RandomStream, RunStats, SimulationError, Simulator
from .harness import SimConfig, grid, load_config, run_one, sweep, validate
from .metrics import mean_ci99, successful_transaction_rate
from .telemetry import MODE_LABELS, NINE_MODES, Layer, Mode, parse_mode, run_simulation

__all__ = [
    "RandomStream", "RunStats", "SimulationError", "Simulator",
    "SimConfig", "grid", "load_config", "run_one", "sweep", "validate",
    "mean_ci99", "successful_transaction_rate",
    "MODE_LABELS", "NINE_MODES", "Layer", "Mode", "parse_mode", "run_simulation",
]
