"""Simulator and schedulers for deadline-aware computation offloading to mobile workers."""

from .calibration import PRESETS, preset
from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .core import DeviceProfile, EnergyLedger, Status, TaskOutcome, TaskSpec
from .engine import TrialResult, run_trial
from .harness import report, run_campaign, sweep

__all__ = [
    "PRESETS", "preset", "ConfigError", "ExperimentConfig", "load_config", "parse_config",
    "DeviceProfile", "EnergyLedger", "Status", "TaskOutcome", "TaskSpec",
    "TrialResult", "run_trial", "report", "run_campaign", "sweep",
]

__version__ = "0.1.0"
