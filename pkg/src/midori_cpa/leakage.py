"""Simulated power traces under a Hamming-weight leakage model.

Each trace has ``samples_per_trace`` samples. Sample ``poi_offset +
k * poi_stride`` carries the Hamming weight of one S-box output: k = 0..15
are the first-round outputs of cells 0..15, k = 16..31 the second-round
outputs. Every sample gets ``baseline`` plus Gaussian noise.

Averaging over ``repeats`` acquisitions is modelled by its effect on the
noise: the mean of ``repeats`` independent N(0, sigma^2) draws is drawn
directly as N(0, sigma^2 / repeats).

Randomness is split by purpose: plaintexts come from one campaign stream and
the noise of trace ``i`` from its own stream keyed by ``(seed, i)``, so any
trace can be regenerated on its own.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .cipher import (
    MasterKey,
    blocks_to_states,
    encrypt,
    encrypt_batch,
    key_schedule,
    mix_column_batch,
    round1_outputs_batch,
    shuffle_cell_batch,
    sub_cell_batch,
)
from .errors import ConfigValueError, InvariantError

NUM_POIS = 32

HAMMING_WEIGHT = np.array([bin(v).count("1") for v in range(256)], dtype=np.uint8)

_PLAINTEXT_STREAM = 0
_NOISE_STREAM = 1


@dataclass(frozen=True)
class LeakageConfig:
    noise_sigma: float = 1.0
    samples_per_trace: int = 100
    poi_offset: int = 10
    poi_stride: int = 2
    repeats: int = 1
    baseline: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not np.isfinite(self.noise_sigma) or self.noise_sigma < 0:
            raise ConfigValueError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if not np.isfinite(self.baseline):
            raise ConfigValueError(f"baseline must be finite, got {self.baseline}")
        if self.samples_per_trace < 1:
            raise ConfigValueError(
                f"samples_per_trace must be positive, got {self.samples_per_trace}")
        if self.poi_offset < 0:
            raise ConfigValueError(f"poi_offset must be >= 0, got {self.poi_offset}")
        if self.poi_stride < 1:
            raise ConfigValueError(f"poi_stride must be >= 1, got {self.poi_stride}")
        if self.repeats < 1:
            raise ConfigValueError(f"repeats must be >= 1, got {self.repeats}")
        if not 0 <= self.seed < 1 << 64:
            raise ConfigValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        last = self.poi_offset + (NUM_POIS - 1) * self.poi_stride
        if last >= self.samples_per_trace:
            raise InvariantError(
                f"poi_offset + 31*poi_stride = {self.poi_offset} + 31*{self.poi_stride}"
                f" = {last} must be < samples_per_trace = {self.samples_per_trace}")

    @property
    def poi_indices(self) -> np.ndarray:
        return self.poi_offset + self.poi_stride * np.arange(NUM_POIS)

    @property
    def effective_sigma(self) -> float:
        return self.noise_sigma / np.sqrt(self.repeats)

    def replace(self, **changes) -> LeakageConfig:
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class Trace:
    plaintext: int
    ciphertext: int
    samples: np.ndarray


@dataclass(frozen=True, eq=False)
class TraceSet:
    """``D`` plaintext/ciphertext records with ``T`` samples each.

    Stored column-wise: ``plaintexts`` and ``ciphertexts`` are ``(D,)``
    uint64 arrays and ``samples`` is a ``(D, T)`` float64 matrix.
    ``config`` and ``key_known`` are ``None`` for imported sets.
    """

    plaintexts: np.ndarray
    ciphertexts: np.ndarray
    samples: np.ndarray
    config: LeakageConfig | None = None
    key_known: MasterKey | None = None

    def __post_init__(self):
        pts = np.ascontiguousarray(self.plaintexts, dtype=np.uint64)
        cts = np.ascontiguousarray(self.ciphertexts, dtype=np.uint64)
        samples = np.ascontiguousarray(self.samples, dtype=np.float64)
        if samples.ndim != 2:
            raise ValueError("samples must be a 2-D (traces x samples) array")
        d = samples.shape[0]
        if d < 1:
            raise ValueError("a trace set needs at least one trace")
        if pts.shape != (d,) or cts.shape != (d,):
            raise ValueError("plaintexts, ciphertexts and samples disagree on trace count")
        if self.config is not None and samples.shape[1] != self.config.samples_per_trace:
            raise ValueError("sample length does not match config.samples_per_trace")
        for arr in (pts, cts, samples):
            arr.flags.writeable = False
        object.__setattr__(self, "plaintexts", pts)
        object.__setattr__(self, "ciphertexts", cts)
        object.__setattr__(self, "samples", samples)

    @property
    def num_traces(self) -> int:
        return self.samples.shape[0]

    @property
    def samples_per_trace(self) -> int:
        return self.samples.shape[1]

    def __len__(self) -> int:
        return self.num_traces

    def __getitem__(self, i: int) -> Trace:
        return Trace(int(self.plaintexts[i]), int(self.ciphertexts[i]), self.samples[i])

    def __iter__(self) -> Iterator[Trace]:
        return (self[i] for i in range(self.num_traces))

    @property
    def traces(self) -> list[Trace]:
        return list(self)

    def plaintext_states(self) -> np.ndarray:
        return blocks_to_states(self.plaintexts)

    def subset(self, n: int) -> TraceSet:
        return TraceSet(self.plaintexts[:n], self.ciphertexts[:n], self.samples[:n],
                        self.config, self.key_known)

    def same_data(self, other: TraceSet) -> bool:
        return (np.array_equal(self.plaintexts, other.plaintexts)
                and np.array_equal(self.ciphertexts, other.ciphertexts)
                and np.array_equal(self.samples, other.samples))


def leak_value(v: int) -> float:
    if not 0 <= v < 16:
        raise ValueError(f"not a nibble: {v}")
    return float(HAMMING_WEIGHT[v])


def _noise_rng(seed: int, trace_index: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence(seed, spawn_key=(_NOISE_STREAM, trace_index)))


def _plaintext_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(_PLAINTEXT_STREAM,)))


def _noise(cfg: LeakageConfig, trace_index: int) -> np.ndarray:
    rng = _noise_rng(cfg.seed, trace_index)
    return rng.normal(0.0, 1.0, cfg.samples_per_trace) * cfg.effective_sigma


def leaking_values(states: np.ndarray, key: MasterKey) -> np.ndarray:
    """The 32 leaking nibbles per plaintext state: ``(D, 16)`` -> ``(D, 32)``."""
    ks = key_schedule(key)
    r1 = round1_outputs_batch(states, ks.wk)
    u = mix_column_batch(shuffle_cell_batch(r1))
    r2 = sub_cell_batch(u ^ np.array(ks.round_keys[0], dtype=np.uint8))
    return np.concatenate([r1, r2], axis=1)


def simulate_trace(plaintext: int, key: MasterKey, cfg: LeakageConfig,
                   trace_index: int) -> Trace:
    if not isinstance(cfg, LeakageConfig):
        raise TypeError("cfg must be a LeakageConfig")
    if trace_index < 0:
        raise ValueError("trace_index must be >= 0")
    states = blocks_to_states(np.array([plaintext], dtype=np.uint64))
    samples = cfg.baseline + _noise(cfg, trace_index)
    samples[cfg.poi_indices] += HAMMING_WEIGHT[leaking_values(states, key)[0]]
    return Trace(plaintext, encrypt(plaintext, key), samples)


def random_plaintexts(num_traces: int, seed: int) -> np.ndarray:
    rng = _plaintext_rng(seed)
    return rng.integers(0, 1 << 64, size=num_traces, dtype=np.uint64, endpoint=False)


def simulate_campaign(num_traces: int, key: MasterKey, cfg: LeakageConfig) -> TraceSet:
    """Simulate ``num_traces`` traces for uniformly random plaintexts.

    Trace ``i`` equals ``simulate_trace(plaintexts[i], key, cfg, i)``.
    """
    if num_traces < 1:
        raise ValueError(f"num_traces must be >= 1, got {num_traces}")
    pts = random_plaintexts(num_traces, cfg.seed)
    samples = np.empty((num_traces, cfg.samples_per_trace))
    for i in range(num_traces):
        samples[i] = _noise(cfg, i)
    samples += cfg.baseline
    hw = HAMMING_WEIGHT[leaking_values(blocks_to_states(pts), key)]
    samples[:, cfg.poi_indices] += hw
    return TraceSet(pts, encrypt_batch(pts, key), samples, config=cfg, key_known=key)
