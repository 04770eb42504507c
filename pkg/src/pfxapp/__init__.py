"""Tunable proportional-fair uplink scheduler with a CCDF-driven xApp control loop."""
from .config import ChannelState, ConfigError, SimConfig, TrafficSource, load_config, uniform_config
from .ransim import Simulator, ThroughputSample
from .sched import SchedulerParams, TunablePFScheduler, compute_priority, update_denominator

__version__ = "0.1.0"

__all__ = [
    "ChannelState", "ConfigError", "SchedulerParams", "SimConfig", "Simulator", "ThroughputSample",
    "TrafficSource", "TunablePFScheduler", "compute_priority", "load_config", "uniform_config",
    "update_denominator",
]
