"""Two-tier (local DRAM + CXL) memory page-placement simulator."""

from .core import (
    CounterSet,
    LruKind,
    NodeState,
    NoFreePages,
    OutOfMemory,
    PageFrame,
    PageType,
    ParseError,
    SpecError,
    Tier,
    TraceError,
    WatermarkSet,
    WatermarkState,
    resolve_watermarks,
)
from .policies import PolicyEngine, PolicyKind, PolicySpec, PromotionOutcome
from .simulator import (
    NodeConfig,
    SimConfig,
    SimReport,
    access_latency,
    run,
    steady_state_utilization,
)
from .workloads import (
    TraceEvent,
    WorkloadKind,
    WorkloadSpec,
    generate,
    read_trace,
    write_trace,
)

__version__ = "0.1.0"
