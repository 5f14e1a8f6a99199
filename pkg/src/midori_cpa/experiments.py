"""Repeated simulate-and-attack runs for success-rate curves."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .cipher import MasterKey
from .cpa import attack_full, success_metrics
from .leakage import LeakageConfig, simulate_campaign


@dataclass(frozen=True)
class SweepRow:
    num_traces: int
    trials: int
    successes: int
    success_rate: float
    std_error: float
    mean_rank: float


def trial_seed(base_seed: int, num_traces: int, trial: int) -> int:
    """Independent 64-bit campaign seed for one (D, trial) grid point."""
    ss = np.random.SeedSequence([base_seed, num_traces, trial])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def run_trials(cfg: LeakageConfig, key: MasterKey, num_traces: int, trials: int) -> SweepRow:
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    results = [
        attack_full(simulate_campaign(
            num_traces, key, cfg.replace(seed=trial_seed(cfg.seed, num_traces, t))))
        for t in range(trials)
    ]
    report = success_metrics(results, key)
    p = report.full_key_success_rate
    return SweepRow(
        num_traces=num_traces,
        trials=trials,
        successes=round(p * trials),
        success_rate=p,
        std_error=math.sqrt(p * (1 - p) / trials),
        mean_rank=report.mean_rank,
    )


def run_sweep(cfg: LeakageConfig, key: MasterKey, grid: Sequence[int],
              trials: int) -> list[SweepRow]:
    return [run_trials(cfg, key, d, trials) for d in grid]
