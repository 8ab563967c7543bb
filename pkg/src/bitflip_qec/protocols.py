"""Protocol engine: cycles, trajectories, and seeded Monte Carlo averaging.

One error-correction cycle is the composition entangle -> measure ->
(optional) correct/reset. Within a cycle each trajectory consumes draws
from its own random stream in a fixed, documented order:

  1. ancilla-flip draws of coherent-error model E2 (At, then Ab),
  2. projection draws (At, then Ab),
  3. stored-bit readout-error draws (At, then Ab),
  4. back-action draws (At, then Ab),
  5. when per-cycle feedback runs, one draw per actually conditioned gate
     (corrections D1, D2, D3, then resets At, Ab).

The final data measurement draws projections D1, D2, D3 and then the three
readout-error flips. Streams are keyed by (master_seed, trajectory_index),
so results are identical for any worker count or scheduling order.

The decoder protocols differ only in where the correction lands: DEC with
error-free gates, DEC with a Pauli-frame update, and offline post-processing
all XOR the decoded correction onto the measured bits (the error-free
correction is software frame tracking, which is what makes the three
bitwise identical under shared seeds); DEC with noisy gates applies physical
conditional flips before the data measurement instead.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .decoder import (
    Correction,
    DecoderWeights,
    LookupTable,
    Syndrome,
    SyndromeHistory,
    build_lookup_table,
    majority,
    pauli_frame_update,
    single_round_correction,
)
from .density import (
    AB,
    AT,
    ANCILLA_QUBITS,
    DATA_QUBITS,
    apply_pauli_x,
    basis_state,
    measure_qubit,
    trajectory_rng,
)
from .device import (
    CoherentErrorModel,
    CompiledModel,
    DeviceParams,
    compile_model,
    incoherent_gate_failure,
)

# Width of the broadcast conditional-X window before the final measurement
# when decoder corrections are applied as physical pulses.
CORRECTIVE_GATES_NS = 120.0

_CHUNK = 128  # trajectories per work unit; fixed so scheduling cannot matter


class ProtocolKind(enum.Enum):
    UNCORRECTED = "uncorrected"
    REC = "rec"
    DEC = "dec"
    DEC_PFU = "dec-pfu"
    POST_PROCESSED = "post-processed"
    FREE_DECAY = "free-decay"

    @classmethod
    def parse(cls, text: str) -> "ProtocolKind":
        normalized = text.strip().lower().replace("_", "-")
        for kind in cls:
            if kind.value == normalized:
                return kind
        raise ValueError(
            f"unknown protocol {text!r}; choose from "
            + ", ".join(k.value for k in cls)
        )


_DECODED = (ProtocolKind.DEC, ProtocolKind.DEC_PFU, ProtocolKind.POST_PROCESSED)


@dataclass(frozen=True)
class TrajectoryRecord:
    """Classical outcome of one stochastic realization.

    correction_applied is the decoded correction for the decoder protocols
    and the XOR-aggregate of the per-cycle corrections for REC (whose
    individual rounds are kept in rec_cycle_corrections).
    """

    syndromes: SyndromeHistory | None
    data_bits: tuple[int, int, int]
    corrected_bits: tuple[int, int, int]
    majority_bit: int
    correction_applied: Correction
    rec_cycle_corrections: tuple[Correction, ...] | None = None


@dataclass(frozen=True)
class ExperimentResult:
    protocol: ProtocolKind
    n_cycles: int
    n_trajectories: int
    master_seed: int
    d1_mean: float
    d2_mean: float
    d3_mean: float
    m_mean: float
    d1_stderr: float
    d2_stderr: float
    d3_stderr: float
    m_stderr: float

    @staticmethod
    def stderr(p: float, k: int) -> float:
        return math.sqrt(p * (1.0 - p) / k)


@dataclass(frozen=True)
class ExperimentConfig:
    params: DeviceParams
    protocol: ProtocolKind
    n_cycles: int
    n_trajectories: int = 10_000
    master_seed: int = 0
    initial_state: str = "111"
    error_model: CoherentErrorModel = CoherentErrorModel.E2
    weights: DecoderWeights = DecoderWeights()
    noisy_dec_correction: bool = False
    coherent_rec_correction: bool = False
    # Fault-injection hooks: deterministic X flips applied before the given
    # round's entangling block (round n_cycles+1 means after the last cycle),
    # and stored-syndrome bit flips applied to the given ancilla's recorded
    # result of that round.
    inject_data_flips: tuple = ()
    inject_stored_flips: tuple = ()

    def __post_init__(self):
        if not 1 <= self.n_cycles <= 8:
            raise ValueError(f"n_cycles must be 1..8, got {self.n_cycles}")
        if self.n_trajectories < 1:
            raise ValueError(f"n_trajectories must be positive, got {self.n_trajectories}")
        if not 0 <= self.master_seed < 2**64:
            raise ValueError(f"master_seed must fit in 64 bits, got {self.master_seed}")
        bits = str(self.initial_state)
        if len(bits) != 3 or set(bits) - {"0", "1"}:
            raise ValueError(f"initial_state must be 3 bits, got {self.initial_state!r}")
        object.__setattr__(self, "initial_state", bits)
        for rnd, q in self.inject_data_flips:
            if not 1 <= rnd <= self.n_cycles + 1 or q not in DATA_QUBITS:
                raise ValueError(f"bad data-flip injection (round {rnd}, qubit {q})")
        for rnd, q in self.inject_stored_flips:
            if not 1 <= rnd <= self.n_cycles or q not in ANCILLA_QUBITS:
                raise ValueError(f"bad stored-flip injection (round {rnd}, ancilla {q})")


@lru_cache(maxsize=32)
def _dec_table(n_rounds: int, weights: DecoderWeights) -> LookupTable:
    return build_lookup_table(n_rounds, reset_mode=False, weights=weights)


def _run_cycle(
    rho: np.ndarray,
    model: CompiledModel,
    rng: np.random.Generator,
    with_correction: bool,
    with_reset: bool,
    coherent_correction: bool,
    stored_flips: tuple[int, int] = (0, 0),
):
    """One cycle; returns (state, stored syndrome, correction applied)."""
    p = model.params
    rho = model.entangle(rho, rng)
    rho = model.damp_all(rho, p.t_m)
    outcomes = []
    for q in (AT, AB):
        bit, rho = measure_qubit(rho, q, rng)
        outcomes.append(bit)
    stored = [
        bit ^ (1 if rng.random() < model.readout_error[q] else 0)
        for bit, q in zip(outcomes, (AT, AB))
    ]
    stored[0] ^= stored_flips[0]
    stored[1] ^= stored_flips[1]
    for q in (AT, AB):
        if rng.random() < model.backaction[q]:
            rho = apply_pauli_x(rho, q)
    rho = model.damp_all(rho, p.t_depl)
    syndrome = Syndrome(stored[0], stored[1])
    correction = Correction(0, 0, 0)
    if with_correction or with_reset:
        rho = model.damp_all(rho, p.lag_rec)
        if with_correction:
            correction = single_round_correction(syndrome)
        resets = (syndrome.a_t, syndrome.a_b) if with_reset else (0, 0)
        if coherent_correction:
            u = model.correction_matrix((*correction, *resets))
            rho = u @ rho @ u.conj().T
            rho = model.damp_all(rho, p.t_1q)
        else:
            for q, bit in zip(DATA_QUBITS, correction):
                if bit:
                    rho = incoherent_gate_failure(rho, q, model.gate_error_1q[q], rng)
            for q, bit in zip(ANCILLA_QUBITS, resets):
                if bit:
                    rho = incoherent_gate_failure(rho, q, model.gate_error_1q[q], rng)
    return rho, syndrome, correction


def run_cycle(
    state: np.ndarray,
    params: DeviceParams,
    model: CoherentErrorModel,
    rng: np.random.Generator,
    with_reset: bool = False,
    with_correction: bool = False,
    weights: DecoderWeights | None = None,
    coherent_correction: bool = False,
):
    """Public single-cycle entry point; returns (state, stored syndrome).

    `weights` is accepted for interface symmetry with the decoder protocols
    but unused here: per-cycle correction is the fixed single-syndrome map.
    """
    del weights
    compiled = compile_model(params, model)
    rho, syndrome, _ = _run_cycle(
        state, compiled, rng, with_correction, with_reset, coherent_correction
    )
    return rho, syndrome


def _measure_data(rho: np.ndarray, model: CompiledModel, rng: np.random.Generator):
    rho = model.damp_all(rho, model.params.t_m)
    outcomes = []
    for q in DATA_QUBITS:
        bit, rho = measure_qubit(rho, q, rng)
        outcomes.append(bit)
    bits = tuple(
        bit ^ (1 if rng.random() < model.readout_error[q] else 0)
        for bit, q in zip(outcomes, DATA_QUBITS)
    )
    return bits, rho


def measure_data_final(
    state: np.ndarray, params: DeviceParams, rng: np.random.Generator
) -> tuple[int, int, int]:
    """Final logical readout: damping, projections, stored-bit flips."""
    compiled = compile_model(params, CoherentErrorModel.E2)
    bits, _ = _measure_data(state, compiled, rng)
    return bits


def _free_decay_ns(model: CompiledModel, n_cycles: int) -> float:
    p = model.params
    return n_cycles * (model.tau1 + model.tau2 + p.t_m + p.t_depl)


def run_trajectory(config: ExperimentConfig, trajectory_index: int) -> TrajectoryRecord:
    """One stochastic realization of the configured experiment."""
    model = compile_model(config.params, config.error_model)
    rng = trajectory_rng(config.master_seed, trajectory_index)
    rho = basis_state(config.initial_state + "00")
    kind = config.protocol

    if kind is ProtocolKind.FREE_DECAY:
        rho = model.damp_all(rho, _free_decay_ns(model, config.n_cycles))
        bits, _ = _measure_data(rho, model, rng)
        return TrajectoryRecord(None, bits, bits, majority(bits), Correction(0, 0, 0))

    x_flips: dict[int, list[int]] = {}
    for rnd, q in config.inject_data_flips:
        x_flips.setdefault(rnd, []).append(q)
    stored_flips: dict[int, list[int]] = {}
    for rnd, q in config.inject_stored_flips:
        stored_flips.setdefault(rnd, []).append(q)

    per_cycle_feedback = kind is ProtocolKind.REC
    rounds = []
    cycle_corrections = []
    for rnd in range(1, config.n_cycles + 1):
        for q in x_flips.get(rnd, ()):
            rho = apply_pauli_x(rho, q)
        mask = stored_flips.get(rnd, ())
        rho, syndrome, applied = _run_cycle(
            rho,
            model,
            rng,
            with_correction=per_cycle_feedback,
            with_reset=per_cycle_feedback,
            coherent_correction=config.coherent_rec_correction,
            stored_flips=(1 if AT in mask else 0, 1 if AB in mask else 0),
        )
        rounds.append(syndrome)
        cycle_corrections.append(applied)
    for q in x_flips.get(config.n_cycles + 1, ()):
        rho = apply_pauli_x(rho, q)
    history = SyndromeHistory(tuple(rounds), reset_mode=per_cycle_feedback)

    if kind in (ProtocolKind.UNCORRECTED, ProtocolKind.REC):
        bits, _ = _measure_data(rho, model, rng)
        if kind is ProtocolKind.REC:
            net = Correction(0, 0, 0)
            for c in cycle_corrections:
                net = Correction(*(a ^ b for a, b in zip(net, c)))
            return TrajectoryRecord(
                history, bits, bits, majority(bits), net, tuple(cycle_corrections)
            )
        return TrajectoryRecord(history, bits, bits, majority(bits), Correction(0, 0, 0))

    correction = _dec_table(config.n_cycles, config.weights).decode(history)
    if kind is ProtocolKind.DEC and config.noisy_dec_correction:
        rho = model.damp_all(rho, CORRECTIVE_GATES_NS)
        for q, bit in zip(DATA_QUBITS, correction):
            if bit:
                rho = incoherent_gate_failure(rho, q, model.gate_error_1q[q], rng)
        bits, _ = _measure_data(rho, model, rng)
        return TrajectoryRecord(history, bits, bits, majority(bits), correction)

    # Error-free decoder correction is software frame tracking, identical
    # for real-time PFU and offline post-processing.
    bits, _ = _measure_data(rho, model, rng)
    corrected = pauli_frame_update(bits, correction)
    return TrajectoryRecord(history, bits, corrected, majority(corrected), correction)


def _prepare_shared_state(config: ExperimentConfig) -> None:
    """Warm every cache a trajectory may touch before threads fan out."""
    model = compile_model(config.params, config.error_model)
    if config.protocol is ProtocolKind.FREE_DECAY:
        model.prepare_duration(_free_decay_ns(model, config.n_cycles))
    if config.protocol in _DECODED:
        _dec_table(config.n_cycles, config.weights)
        if config.noisy_dec_correction:
            model.prepare_duration(CORRECTIVE_GATES_NS)
    if config.protocol is ProtocolKind.REC and config.coherent_rec_correction:
        for syndrome in ((0, 0), (1, 0), (1, 1), (0, 1)):
            correction = single_round_correction(Syndrome(*syndrome))
            model.correction_matrix((*correction, *syndrome))


def run_experiment(config: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    """Average `n_trajectories` independent realizations.

    Trajectory k always draws from the stream keyed (master_seed, k) and the
    aggregation is an integer count, so the result is identical for any
    `workers` value.
    """
    _prepare_shared_state(config)
    k_total = config.n_trajectories

    def run_block(start: int) -> np.ndarray:
        counts = np.zeros(4, dtype=np.int64)
        for k in range(start, min(start + _CHUNK, k_total)):
            record = run_trajectory(config, k)
            counts[0] += record.corrected_bits[0]
            counts[1] += record.corrected_bits[1]
            counts[2] += record.corrected_bits[2]
            counts[3] += record.majority_bit
        return counts

    starts = range(0, k_total, _CHUNK)
    if workers <= 1:
        totals = sum((run_block(s) for s in starts), np.zeros(4, dtype=np.int64))
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            totals = sum(pool.map(run_block, starts), np.zeros(4, dtype=np.int64))

    means = totals / k_total
    stderrs = [ExperimentResult.stderr(p, k_total) for p in means]
    return ExperimentResult(
        protocol=config.protocol,
        n_cycles=config.n_cycles,
        n_trajectories=k_total,
        master_seed=config.master_seed,
        d1_mean=means[0],
        d2_mean=means[1],
        d3_mean=means[2],
        m_mean=means[3],
        d1_stderr=stderrs[0],
        d2_stderr=stderrs[1],
        d3_stderr=stderrs[2],
        m_stderr=stderrs[3],
    )


def parity_distribution(
    initial_state: str,
    params: DeviceParams,
    model: CoherentErrorModel,
    master_seed: int,
    n_trajectories: int,
) -> tuple[float, float, float, float]:
    """Empirical (ee, eo, oe, oo) distribution after one cycle.

    Labels read (top parity, bottom parity) with e = 0 and o = 1; the counts
    come from the stored (readout-error inclusive) syndrome of a single
    cycle, one trajectory stream per realization.
    """
    compiled = compile_model(params, model)
    counts = [0, 0, 0, 0]
    for k in range(n_trajectories):
        rng = trajectory_rng(master_seed, k)
        rho = basis_state(str(initial_state) + "00")
        _, syndrome, _ = _run_cycle(rho, compiled, rng, False, False, False)
        counts[(syndrome.a_t << 1) | syndrome.a_b] += 1
    return tuple(c / n_trajectories for c in counts)
