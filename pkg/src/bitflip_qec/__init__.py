"""Simulator and decoder toolkit for a three-qubit bit-flip code.

Five-transmon density-matrix Monte Carlo of repeated stabilizer
measurements, with per-cycle and multi-round (lookup-table) decoding,
Pauli-frame updates, fault-injection hooks, and a deterministic model of
the classical-control latency.
"""

from .decoder import (
    Correction,
    DecoderWeights,
    ErrorHypothesis,
    LookupTable,
    Syndrome,
    SyndromeHistory,
    build_lookup_table,
    majority,
    min_weight_decode,
    pauli_frame_update,
    predicted_syndrome,
    single_round_correction,
)
from .density import (
    AB,
    AT,
    D1,
    D2,
    D3,
    DIM,
    KrausChannel,
    UnitaryOp,
    apply_channel,
    apply_pauli_x,
    apply_unitary,
    basis_state,
    damping_channel,
    measure_qubit,
    trajectory_rng,
)
from .device import (
    CoherentErrorModel,
    ConfigError,
    DeviceParams,
    correction_unitary,
    cr_unitary,
    entangling_operation,
    incoherent_gate_failure,
    load_device_params,
    noiseless,
    table_s1,
)
from .latency import (
    DEFAULT_PIPELINE,
    OFFLINE,
    LatencyBudget,
    PipelineStep,
    TimelineEvent,
    build_timeline,
    processor_roundtrip,
    protocol_latency,
    timeline_added_latency,
)
from .protocols import (
    ExperimentConfig,
    ExperimentResult,
    ProtocolKind,
    TrajectoryRecord,
    measure_data_final,
    parity_distribution,
    run_cycle,
    run_experiment,
    run_trajectory,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
