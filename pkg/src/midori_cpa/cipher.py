"""Midori64 block cipher.

A 64-bit block is read as 16 hex digits; digit 0 (the most significant) is
cell 0 of the state. Cells are laid out column-major, so cells 0-3 form the
first column. The 128-bit key is split as ``K = k0 || k1`` with ``k0`` the
most significant half.

Scalar functions operate on states given as tuples of 16 ints. The ``*_batch``
helpers operate on ``(D, 16)`` uint8 arrays and are what the simulator and
the attack use.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

State = tuple[int, ...]

MASK64 = (1 << 64) - 1
NUM_ROUNDS = 15  # full rounds; a final SubCell + whitening follows

SBOX: tuple[int, ...] = (
    0xC, 0xA, 0xD, 0x3, 0xE, 0xB, 0xF, 0x7,
    0x8, 0x9, 0x1, 0x5, 0x0, 0x2, 0x4, 0x6,
)

# Destination map: cell i of the input lands at SHUFFLE[i] of the output.
SHUFFLE: tuple[int, ...] = (0, 7, 14, 9, 5, 2, 11, 12, 15, 8, 1, 6, 10, 13, 4, 3)
INV_SHUFFLE: tuple[int, ...] = tuple(SHUFFLE.index(i) for i in range(16))

# Round constants alpha_0..alpha_14, one bit per cell (cell order).
ROUND_CONSTANTS: tuple[State, ...] = tuple(tuple(row) for row in (
    (0, 0, 0, 1, 0, 1, 0, 1, 1, 0, 1, 1, 0, 0, 1, 1),
    (0, 1, 1, 1, 1, 0, 0, 0, 1, 1, 0, 0, 0, 0, 0, 0),
    (1, 0, 1, 0, 0, 1, 0, 0, 0, 0, 1, 1, 0, 1, 0, 1),
    (0, 1, 1, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 1, 1),
    (0, 0, 0, 1, 0, 0, 0, 0, 0, 1, 0, 0, 1, 1, 1, 1),
    (1, 1, 0, 1, 0, 0, 0, 1, 0, 1, 1, 1, 0, 0, 0, 0),
    (0, 0, 0, 0, 0, 0, 1, 0, 0, 1, 1, 0, 0, 1, 1, 0),
    (0, 0, 0, 0, 1, 0, 1, 1, 1, 1, 0, 0, 1, 1, 0, 0),
    (1, 0, 0, 1, 0, 1, 0, 0, 1, 0, 0, 0, 0, 0, 0, 1),
    (0, 1, 0, 0, 0, 0, 0, 0, 1, 0, 1, 1, 1, 0, 0, 0),
    (0, 1, 1, 1, 0, 0, 0, 1, 1, 0, 0, 1, 0, 1, 1, 1),
    (0, 0, 1, 0, 0, 0, 1, 0, 1, 0, 0, 0, 1, 1, 1, 0),
    (0, 1, 0, 1, 0, 0, 0, 1, 0, 0, 1, 1, 0, 0, 0, 0),
    (1, 1, 1, 1, 1, 0, 0, 0, 1, 1, 0, 0, 1, 0, 1, 0),
    (1, 1, 0, 1, 1, 1, 1, 1, 1, 0, 0, 1, 0, 0, 0, 0),
))

ALPHA0: State = ROUND_CONSTANTS[0]

_HEXDIGITS = frozenset("0123456789abcdefABCDEF")
_SBOX_NP = np.array(SBOX, dtype=np.uint8)
_SHUFFLE_SRC_NP = np.array(INV_SHUFFLE, dtype=np.intp)
_SHIFTS_NP = np.array([60 - 4 * i for i in range(16)], dtype=np.uint64)


# -- conversions -----------------------------------------------------------

def block_to_state(block: int) -> State:
    if not 0 <= block <= MASK64:
        raise ValueError(f"block out of 64-bit range: {block:#x}")
    return tuple((block >> (60 - 4 * i)) & 0xF for i in range(16))


def state_to_block(state: Sequence[int]) -> int:
    _check_state(state)
    word = 0
    for nibble in state:
        word = (word << 4) | nibble
    return word


def parse_hex(text: str, width: int) -> int:
    """Parse a fixed-width hex string (``width`` digits, no prefix)."""
    text = text.strip()
    if len(text) != width:
        raise ValueError(f"expected {width} hex digits, got {len(text)}: {text!r}")
    if not all(c in _HEXDIGITS for c in text):
        raise ValueError(f"not a hex string: {text!r}")
    return int(text, 16)


def format_block(block: int) -> str:
    return f"{block:016X}"


def format_state(state: Sequence[int]) -> str:
    return format_block(state_to_block(state))


def _check_state(state: Sequence[int]) -> None:
    if len(state) != 16:
        raise ValueError(f"state must have 16 cells, got {len(state)}")
    for v in state:
        if not 0 <= v < 16:
            raise ValueError(f"cell value out of nibble range: {v}")


def xor_states(a: Sequence[int], b: Sequence[int]) -> State:
    return tuple(x ^ y for x, y in zip(a, b, strict=True))


# -- keys ------------------------------------------------------------------

@dataclass(frozen=True)
class MasterKey:
    k0: int
    k1: int

    def __post_init__(self):
        for name in ("k0", "k1"):
            v = getattr(self, name)
            if not 0 <= v <= MASK64:
                raise ValueError(f"{name} out of 64-bit range")

    @classmethod
    def from_int(cls, key: int) -> MasterKey:
        if not 0 <= key < 1 << 128:
            raise ValueError("key out of 128-bit range")
        return cls(key >> 64, key & MASK64)

    @classmethod
    def from_hex(cls, text: str) -> MasterKey:
        return cls.from_int(parse_hex(text, 32))

    @classmethod
    def random(cls, rng: np.random.Generator) -> MasterKey:
        k0, k1 = rng.integers(0, 1 << 64, size=2, dtype=np.uint64, endpoint=False)
        return cls(int(k0), int(k1))

    def to_int(self) -> int:
        return (self.k0 << 64) | self.k1

    def hex(self) -> str:
        return f"{self.to_int():032X}"

    def __str__(self) -> str:
        return self.hex()


@dataclass(frozen=True)
class KeySchedule:
    wk: State
    round_keys: tuple[State, ...]
    alphas: tuple[State, ...]


@functools.lru_cache(maxsize=256)
def key_schedule(key: MasterKey) -> KeySchedule:
    halves = (block_to_state(key.k0), block_to_state(key.k1))
    wk = xor_states(*halves)
    round_keys = tuple(
        xor_states(halves[r % 2], ROUND_CONSTANTS[r]) for r in range(NUM_ROUNDS)
    )
    return KeySchedule(wk=wk, round_keys=round_keys, alphas=ROUND_CONSTANTS)


# -- round components ------------------------------------------------------

def sbox(x: int) -> int:
    return SBOX[x]


def sub_cell(state: Sequence[int]) -> State:
    return tuple(SBOX[v] for v in state)


def shuffle_cell(state: Sequence[int]) -> State:
    out = [0] * 16
    for i, v in enumerate(state):
        out[SHUFFLE[i]] = v
    return tuple(out)


def inv_shuffle_cell(state: Sequence[int]) -> State:
    return tuple(state[SHUFFLE[i]] for i in range(16))


def mix_column(state: Sequence[int]) -> State:
    """Multiply every column by the almost-MDS matrix (zero diagonal, ones elsewhere).

    Each output cell is the XOR of the other three cells of its column.
    """
    out = []
    for base in (0, 4, 8, 12):
        col = state[base:base + 4]
        total = col[0] ^ col[1] ^ col[2] ^ col[3]
        out.extend(total ^ v for v in col)
    return tuple(out)


# -- cipher ----------------------------------------------------------------

def encrypt_state(state: Sequence[int], key: MasterKey,
                  sbox_outputs: list[State] | None = None) -> State:
    """Encrypt one state.

    If ``sbox_outputs`` is given, the state after each SubCell layer is
    appended to it (16 entries: rounds 1..15 plus the final layer).
    """
    ks = key_schedule(key)
    s = xor_states(state, ks.wk)
    for r in range(NUM_ROUNDS):
        s = sub_cell(s)
        if sbox_outputs is not None:
            sbox_outputs.append(s)
        s = mix_column(shuffle_cell(s))
        s = xor_states(s, ks.round_keys[r])
    s = sub_cell(s)
    if sbox_outputs is not None:
        sbox_outputs.append(s)
    return xor_states(s, ks.wk)


def decrypt_state(state: Sequence[int], key: MasterKey) -> State:
    ks = key_schedule(key)
    s = xor_states(state, ks.wk)
    s = sub_cell(s)
    for r in reversed(range(NUM_ROUNDS)):
        s = xor_states(s, ks.round_keys[r])
        s = inv_shuffle_cell(mix_column(s))
        s = sub_cell(s)
    return xor_states(s, ks.wk)


def encrypt(block: int, key: MasterKey) -> int:
    return state_to_block(encrypt_state(block_to_state(block), key))


def decrypt(block: int, key: MasterKey) -> int:
    return state_to_block(decrypt_state(block_to_state(block), key))


class ProbePoint(NamedTuple):
    """An S-box output the attack targets: ``round`` 1 or 2, ``cell`` 0..15."""

    round: int
    cell: int

    def validate(self) -> ProbePoint:
        if self.round not in (1, 2):
            raise ValueError(f"probe round must be 1 or 2, got {self.round}")
        if not 0 <= self.cell < 16:
            raise ValueError(f"probe cell must be in 0..15, got {self.cell}")
        return self


def intermediate(block: int, key: MasterKey, probe: ProbePoint) -> int:
    """S-box output of ``probe.cell`` in round ``probe.round``."""
    probe.validate()
    ks = key_schedule(key)
    p = block_to_state(block)
    if probe.round == 1:
        return SBOX[p[probe.cell] ^ ks.wk[probe.cell]]
    u = mix_column(shuffle_cell(sub_cell(xor_states(p, ks.wk))))
    return SBOX[u[probe.cell] ^ ks.round_keys[0][probe.cell]]


# -- batch (numpy) helpers -------------------------------------------------

def blocks_to_states(blocks: np.ndarray) -> np.ndarray:
    """``(D,)`` uint64 blocks -> ``(D, 16)`` uint8 states."""
    blocks = np.asarray(blocks, dtype=np.uint64)
    return ((blocks[:, None] >> _SHIFTS_NP) & np.uint64(0xF)).astype(np.uint8)


def states_to_blocks(states: np.ndarray) -> np.ndarray:
    states = np.asarray(states, dtype=np.uint64)
    return np.bitwise_or.reduce(states << _SHIFTS_NP, axis=1)


def sub_cell_batch(states: np.ndarray) -> np.ndarray:
    return _SBOX_NP[states]


def shuffle_cell_batch(states: np.ndarray) -> np.ndarray:
    return states[:, _SHUFFLE_SRC_NP]


def mix_column_batch(states: np.ndarray) -> np.ndarray:
    cols = states.reshape(-1, 4, 4)
    total = np.bitwise_xor.reduce(cols, axis=2, keepdims=True)
    return (cols ^ total).reshape(-1, 16)


def round1_outputs_batch(states: np.ndarray, wk: Sequence[int]) -> np.ndarray:
    """S-box outputs of the first round for plaintext states ``(D, 16)``."""
    return sub_cell_batch(states ^ np.asarray(wk, dtype=np.uint8))


def round2_inputs_batch(states: np.ndarray, wk: Sequence[int]) -> np.ndarray:
    """State entering the round-key addition of round 1 (before ``RK0``)."""
    return mix_column_batch(shuffle_cell_batch(round1_outputs_batch(states, wk)))


def encrypt_batch(blocks: np.ndarray, key: MasterKey) -> np.ndarray:
    ks = key_schedule(key)
    wk = np.array(ks.wk, dtype=np.uint8)
    s = blocks_to_states(blocks) ^ wk
    for r in range(NUM_ROUNDS):
        s = mix_column_batch(shuffle_cell_batch(sub_cell_batch(s)))
        s ^= np.array(ks.round_keys[r], dtype=np.uint8)
    s = sub_cell_batch(s) ^ wk
    return states_to_blocks(s)
