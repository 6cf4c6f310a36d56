"""capsim: trace-driven simulation of power-capped DNN inference serving.

Selects batch-size / co-location configurations that maximize inference
throughput under an hourly fluctuating renewable-energy power cap, and
replays online violation handling against live cap streams.
"""

from .controller import (
    REACTIVE,
    ControlEvent,
    ControllerReport,
    ControllerState,
    ControlMode,
    EventKind,
    proactive,
    replay,
    step_proactive,
    step_reactive,
)
from .errors import CapsimError, ParseError, ValidationError
from .policy import (
    BATCHING,
    COMBINATION,
    MULTI_TENANT,
    PolicyKind,
    PolicyTag,
    Selection,
    feasible_set,
    improvement_pct,
    sampling_policy,
    select_config,
    select_sampling,
)
from .profile import (
    Config,
    ProfileEntry,
    ProfileGrid,
    SynthParams,
    compute_throughput,
    load_grid,
    profiling_cost,
    save_grid,
    synthesize_grid,
)
from .sim import (
    ComparisonTable,
    SimReport,
    StepRecord,
    compare,
    load_report,
    save_report,
    simulate,
    slice_report,
)
from .trace import (
    PowerTrace,
    TraceStats,
    load_trace,
    normalize_display,
    normalize_trace,
    save_trace,
    trace_stats,
)

__version__ = "0.1.0"

__all__ = [
    "BATCHING",
    "COMBINATION",
    "MULTI_TENANT",
    "REACTIVE",
    "CapsimError",
    "ComparisonTable",
    "Config",
    "ControlEvent",
    "ControlMode",
    "ControllerReport",
    "ControllerState",
    "EventKind",
    "ParseError",
    "PolicyKind",
    "PolicyTag",
    "PowerTrace",
    "ProfileEntry",
    "ProfileGrid",
    "Selection",
    "SimReport",
    "StepRecord",
    "SynthParams",
    "TraceStats",
    "ValidationError",
    "compare",
    "compute_throughput",
    "feasible_set",
    "improvement_pct",
    "load_grid",
    "load_report",
    "load_trace",
    "normalize_display",
    "normalize_trace",
    "proactive",
    "profiling_cost",
    "replay",
    "sampling_policy",
    "save_grid",
    "save_report",
    "save_trace",
    "select_config",
    "select_sampling",
    "simulate",
    "slice_report",
    "step_proactive",
    "step_reactive",
    "synthesize_grid",
    "trace_stats",
]
