"""Classical decoding of repetition-code syndromes.

Syndrome forward model
----------------------
A decoding hypothesis assigns data-qubit flips f[i][n] (a flip of qubit i
occurring just before round n's parity map) and stored-measurement errors
u[a][n]. With the cumulative data frame x_i^n = XOR_{k<=n} f[i][k], the
true per-round parities are

    s_t^n = x_1^n xor x_2^n,    s_b^n = x_2^n xor x_3^n.

When the ancillas are reset every round the observed record is
a^n = s^n xor u^n; without reset the ancilla accumulates parity flips, so
a^n = (XOR_{j<=n} s^j) xor u^n.

Minimum-weight decoding finds the cheapest hypothesis consistent with an
observed record, at cost w_data * (number of data flips) + w_meas *
(number of measurement errors), and returns its net correction
c_i = XOR_n f[i][n]. Cost ties are broken toward the smallest correction
encoding c1*4 + c2*2 + c3, which makes the dynamic program, the lookup
table, and any brute-force enumeration agree bit for bit.

The decoder is a Viterbi-style dynamic program over 32 states
(x1, x2, x3, cumulative s_t, cumulative s_b); the lookup table shares its
transition tables and prefix structure so that all 4^N keys are decoded in
one pass.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, NamedTuple

import numpy as np

MAX_ROUNDS = 8          # lookup hardware supports eight cycles of two bits
MAX_MAJORITY_BITS = 32  # majority engine width

_POP8 = np.array([bin(i).count("1") for i in range(8)], dtype=np.float64)
_STATE_CORR = np.arange(32) >> 2  # data-frame part of each DP state


class Syndrome(NamedTuple):
    a_t: int
    a_b: int


class Correction(NamedTuple):
    c1: int
    c2: int
    c3: int

    @property
    def encoding(self) -> int:
        return self.c1 * 4 + self.c2 * 2 + self.c3

    @classmethod
    def from_encoding(cls, value: int) -> "Correction":
        return cls((value >> 2) & 1, (value >> 1) & 1, value & 1)


class DecoderWeights(NamedTuple):
    w_data: float = 1.0
    w_meas: float = 1.0


@dataclass(frozen=True)
class SyndromeHistory:
    rounds: tuple[Syndrome, ...]
    reset_mode: bool = False

    def __post_init__(self):
        object.__setattr__(
            self, "rounds", tuple(Syndrome(int(a), int(b)) for a, b in self.rounds)
        )
        n = len(self.rounds)
        if not 1 <= n <= MAX_ROUNDS:
            raise ValueError(f"history must hold 1..{MAX_ROUNDS} rounds, got {n}")
        for s in self.rounds:
            if s.a_t not in (0, 1) or s.a_b not in (0, 1):
                raise ValueError(f"syndrome bits must be 0/1, got {s}")

    @property
    def n_rounds(self) -> int:
        return len(self.rounds)

    def key(self) -> int:
        """Round-major integer key, a_t before a_b, first round most significant."""
        value = 0
        for s in self.rounds:
            value = (value << 2) | (s.a_t << 1) | s.a_b
        return value

    def bit_string(self) -> str:
        return "".join(f"{s.a_t}{s.a_b}" for s in self.rounds)


@dataclass(frozen=True)
class ErrorHypothesis:
    """Candidate explanation: data flips and stored-bit errors per round."""

    data_flips: np.ndarray   # shape (3, N), flip before round n's parity map
    meas_errors: np.ndarray  # shape (2, N), a_t row first

    def __post_init__(self):
        f = np.asarray(self.data_flips, dtype=np.uint8)
        u = np.asarray(self.meas_errors, dtype=np.uint8)
        if f.ndim != 2 or f.shape[0] != 3:
            raise ValueError(f"data_flips must be 3 x N, got shape {f.shape}")
        if u.shape != (2, f.shape[1]):
            raise ValueError(f"meas_errors must be 2 x {f.shape[1]}, got {u.shape}")
        object.__setattr__(self, "data_flips", f)
        object.__setattr__(self, "meas_errors", u)

    @property
    def n_rounds(self) -> int:
        return self.data_flips.shape[1]

    def correction(self) -> Correction:
        net = self.data_flips.sum(axis=1) % 2
        return Correction(int(net[0]), int(net[1]), int(net[2]))


def single_round_correction(s: Syndrome) -> Correction:
    """One-to-one map from a single syndrome to the flipped data qubit.

    (a_t, a_b) = (1,0) points at D1, (1,1) at the shared qubit D2, (0,1)
    at D3, and (0,0) means leave everything alone.
    """
    table = {
        (0, 0): Correction(0, 0, 0),
        (1, 0): Correction(1, 0, 0),
        (1, 1): Correction(0, 1, 0),
        (0, 1): Correction(0, 0, 1),
    }
    return table[(int(s[0]), int(s[1]))]


def predicted_syndrome(h: ErrorHypothesis, reset_mode: bool) -> SyndromeHistory:
    """Observed record produced by a hypothesis under the forward model."""
    frames = np.cumsum(h.data_flips, axis=1) % 2
    s_t = frames[0] ^ frames[1]
    s_b = frames[1] ^ frames[2]
    parities = np.stack([s_t, s_b])
    if not reset_mode:
        parities = np.cumsum(parities, axis=1) % 2
    observed = parities ^ h.meas_errors
    rounds = tuple(Syndrome(int(a), int(b)) for a, b in observed.T)
    return SyndromeHistory(rounds, reset_mode)


def _parity(x: int) -> int:
    x1, x2, x3 = (x >> 2) & 1, (x >> 1) & 1, x & 1
    return ((x1 ^ x2) << 1) | (x2 ^ x3)


@lru_cache(maxsize=None)
def _transition_tables(reset_mode: bool, w_data: float, w_meas: float):
    """Predecessor indices and costs for the 32-state round transition.

    For target state s' = (x', S') and observed round value a in 0..3:
      predecessor j picks the previous frame x = j;
      flip cost  = w_data * popcount(j xor x');
      stored-bit cost = w_meas * popcount(a xor base(s')), where base is the
      cumulative parity S' without reset and the per-round parity of x'
      with reset (the cumulative tracker stays frozen in that mode).
    """
    if w_data < 0 or w_meas < 0 or (w_data == 0 and w_meas == 0):
        raise ValueError(f"weights must be nonnegative and not both zero: {w_data}, {w_meas}")
    pred = np.empty((32, 8), dtype=np.intp)
    flip_cost = np.empty((32, 8), dtype=np.float64)
    meas_cost = np.empty((4, 32), dtype=np.float64)
    for sp in range(32):
        xp, cum = sp >> 2, sp & 3
        base = _parity(xp) if reset_mode else cum
        for a in range(4):
            meas_cost[a, sp] = w_meas * _POP8[a ^ base]
        for j in range(8):
            prev_cum = cum if reset_mode else cum ^ _parity(xp)
            pred[sp, j] = (j << 2) | prev_cum
            flip_cost[sp, j] = w_data * _POP8[j ^ xp]
    return pred, flip_cost, meas_cost


def min_weight_decode(m: SyndromeHistory, w: DecoderWeights = DecoderWeights()) -> Correction:
    """Minimum-cost correction for an observed syndrome record."""
    pred, flip_cost, meas_cost = _transition_tables(bool(m.reset_mode), *w)
    cost = np.full(32, np.inf)
    cost[0] = 0.0
    for s in m.rounds:
        a = (s.a_t << 1) | s.a_b
        cost = (cost[pred] + flip_cost).min(axis=1) + meas_cost[a]
    best = cost.min()
    return Correction.from_encoding(int(_STATE_CORR[cost == best].min()))


@dataclass(frozen=True)
class LookupTable:
    """Precomputed correction for every possible syndrome record.

    entries[k] is the correction encoding for the record whose round-major
    key is k; the table covers all 4^n_rounds keys.
    """

    n_rounds: int
    reset_mode: bool
    weights: DecoderWeights
    entries: np.ndarray

    def __post_init__(self):
        if len(self.entries) != 4**self.n_rounds:
            raise ValueError(
                f"table for {self.n_rounds} rounds needs {4 ** self.n_rounds} entries,"
                f" got {len(self.entries)}"
            )

    def correction_for_key(self, key: int) -> Correction:
        return Correction.from_encoding(int(self.entries[key]))

    def decode(self, m: SyndromeHistory) -> Correction:
        if m.n_rounds != self.n_rounds or bool(m.reset_mode) != self.reset_mode:
            raise ValueError(
                f"table built for {self.n_rounds} rounds (reset={self.reset_mode}), "
                f"got {m.n_rounds} rounds (reset={m.reset_mode})"
            )
        return self.correction_for_key(m.key())

    def dump_lines(self) -> Iterable[str]:
        """One `<2N-bit key> <3-bit correction>` line per key, keys ascending."""
        width = 2 * self.n_rounds
        for key in range(len(self.entries)):
            yield f"{key:0{width}b} {int(self.entries[key]):03b}"


def build_lookup_table(
    n_rounds: int,
    reset_mode: bool = False,
    weights: DecoderWeights = DecoderWeights(),
) -> LookupTable:
    """Decode every key at once via a shared-prefix dynamic program.

    Records sharing a key prefix share DP state, so the table for all
    4^N keys costs barely more than decoding 4^(N-1) records.
    """
    if not 1 <= n_rounds <= MAX_ROUNDS:
        raise ValueError(f"n_rounds must be 1..{MAX_ROUNDS}, got {n_rounds}")
    pred, flip_cost, meas_cost = _transition_tables(bool(reset_mode), *weights)
    costs = np.full((1, 32), np.inf)
    costs[0, 0] = 0.0
    for _ in range(n_rounds - 1):
        reached = (costs[:, pred] + flip_cost[None, :, :]).min(axis=2)
        costs = (reached[:, None, :] + meas_cost[None, :, :]).reshape(-1, 32)
    # Final round fused with the readout: the per-key minimum and its
    # tie-broken correction never materialize the full 4^N x 32 cost table.
    reached = (costs[:, pred] + flip_cost[None, :, :]).min(axis=2)
    entries = np.empty(4**n_rounds, dtype=np.uint8)
    for a in range(4):
        row = reached + meas_cost[a]
        best = row.min(axis=1, keepdims=True)
        candidates = np.where(row == best, _STATE_CORR[None, :], 8)
        entries[a::4] = candidates.min(axis=1)
    return LookupTable(n_rounds, bool(reset_mode), weights, entries)


def majority(bits) -> int:
    """Strict majority of up to 32 bits; even ties count as 0."""
    values = [int(b) for b in bits]
    if not 1 <= len(values) <= MAX_MAJORITY_BITS:
        raise ValueError(f"majority takes 1..{MAX_MAJORITY_BITS} bits, got {len(values)}")
    if any(v not in (0, 1) for v in values):
        raise ValueError(f"majority input must be bits, got {bits!r}")
    return 1 if sum(values) * 2 > len(values) else 0


def pauli_frame_update(data_bits, c: Correction) -> tuple[int, int, int]:
    """Apply a correction in software: XOR it onto the measured bits."""
    d = tuple(int(b) for b in data_bits)
    if len(d) != 3 or any(b not in (0, 1) for b in d):
        raise ValueError(f"data bits must be 3 bits, got {data_bits!r}")
    return (d[0] ^ c.c1, d[1] ^ c.c2, d[2] ^ c.c3)


def parse_syndrome_line(line: str):
    """Parse one recorded experiment: syndrome bits, optionally data bits.

    The canonical form is 2N contiguous binary characters (round-major, a_t
    first); whitespace between groups is tolerated. A trailing group making
    the total length odd is read as the three final data-qubit bits.
    Returns (rounds, data_bits or None).
    """
    compact = "".join(line.split())
    if not compact:
        raise ValueError("empty record")
    if set(compact) - {"0", "1"}:
        raise ValueError(f"record contains non-binary characters: {line.strip()!r}")
    data_bits = None
    if len(compact) % 2 == 1:
        if len(compact) < 5:
            raise ValueError(f"record too short to hold syndromes plus data bits: {line.strip()!r}")
        compact, tail = compact[:-3], compact[-3:]
        data_bits = tuple(int(b) for b in tail)
    n = len(compact) // 2
    if not 1 <= n <= MAX_ROUNDS:
        raise ValueError(f"record holds {n} rounds, supported range is 1..{MAX_ROUNDS}")
    rounds = tuple(
        Syndrome(int(compact[2 * i]), int(compact[2 * i + 1])) for i in range(n)
    )
    return rounds, data_bits
