"""TCP Reno / New Reno / ABRA New Reno over a failure-prone path."""

from .cc import CongestionState, Mode, Variant
from .metrics import RunMetrics, packet_delivery_ratio, throughput
from .netsim import RouteSchedule, SimConfig, Simulation, simulate
from .rto import BackoffPolicy, RttEstimator

__all__ = [
    "BackoffPolicy",
    "CongestionState",
    "Mode",
    "RouteSchedule",
    "RttEstimator",
    "RunMetrics",
    "SimConfig",
    "Simulation",
    "Variant",
    "packet_delivery_ratio",
    "simulate",
    "throughput",
]

__version__ = "0.1.0"
