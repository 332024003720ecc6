"""Joint UAV trajectory design and NOMA multicast power allocation."""

from .driver import run_offline, sweep
from .mobility import MobilityConfig, generate_trace
from .model import (PowerSchedule, RunResult, ScenarioConfig, Trajectory, UserTrace,
                    internal_frame_config)
from .online import run_online
from .runio import load_scenario, save_result, verify_result

__all__ = [
    "MobilityConfig",
    "PowerSchedule",
    "RunResult",
    "ScenarioConfig",
    "Trajectory",
    "UserTrace",
    "generate_trace",
    "internal_frame_config",
    "load_scenario",
    "run_offline",
    "run_online",
    "save_result",
    "sweep",
    "verify_result",
]
