"""Time-based cache coherence for dual-criticality multicores: simulator and worst-case latency toolkit."""
from .core import (
    CacheGeometry,
    ConfigError,
    Criticality,
    MessageKind,
    ProtocolViolation,
    SimConfig,
    State,
    TimerConfig,
    criticality_of,
    tdm_period,
    timer_initial_values,
)
from .engine import DeadlockDetected, InvariantViolation, SimReport, Simulator, run
from .trace import OpKind, TraceFile, TraceOp, format_trace, parse_trace

__version__ = "0.1.0"
