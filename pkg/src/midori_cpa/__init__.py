"""Midori64, Hamming-weight trace simulation and correlation power analysis."""

__version__ = "0.1.0"

from .cipher import (  # noqa: E402
    ALPHA0,
    ROUND_CONSTANTS,
    KeySchedule,
    MasterKey,
    ProbePoint,
    decrypt,
    encrypt,
    intermediate,
    key_schedule,
)
from .cpa import (  # noqa: E402
    AttackResult,
    CellResult,
    attack_full,
    attack_round1,
    attack_round2,
    pearson,
    recover_cell,
    success_metrics,
)
from .leakage import LeakageConfig, Trace, TraceSet, simulate_campaign, simulate_trace  # noqa: E402
from .trace_io import load_config, read_traceset, write_traceset  # noqa: E402

__all__ = [
    "ALPHA0", "ROUND_CONSTANTS", "AttackResult", "CellResult", "KeySchedule",
    "LeakageConfig", "MasterKey", "ProbePoint", "Trace", "TraceSet", "attack_full",
    "attack_round1", "attack_round2", "decrypt", "encrypt", "intermediate",
    "key_schedule", "load_config", "pearson", "read_traceset", "recover_cell",
    "simulate_campaign", "simulate_trace", "success_metrics", "write_traceset",
]
