"""Classical-control latency accounting and the real-time event timeline.

Latency is bookkept the way the control hardware does: a fixed pipeline of
steps between a qubit-state assignment and the corrective pulse leaving the
sequencer, plus protocol-level budgets expressed as (per-cycle, fixed)
additions over the uncorrected sequence. Quantities whose result only ever
lands on the measurement computer (offline majority or offline decoding)
carry the OFFLINE marker instead of a number; it compares greater than any
finite latency.

The timeline serializes classical processing with the quantum schedule (no
overlap credit is taken), except that storage of earlier rounds overlaps the
following cycle, which is what makes the decoder protocols' added latency
independent of the cycle count.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable

from .protocols import CORRECTIVE_GATES_NS, ProtocolKind


@dataclass(frozen=True)
class PipelineStep:
    name: str
    duration_ns: float

    def __post_init__(self):
        if self.duration_ns < 0:
            raise ValueError(f"step {self.name}: negative duration {self.duration_ns}")


# Pipeline between the last qubit-state assignment and the corrective pulse.
DEFAULT_PIPELINE = (
    PipelineStep("receiver_to_processor", 20.0),
    PipelineStep("measurement_storage", 50.0),
    PipelineStep("engine_call", 150.0),
    PipelineStep("processor_to_sequencer", 210.0),
    PipelineStep("sequencer_branch_waveform", 130.0),
    PipelineStep("dac_output", 30.0),
)

REC_FORWARD_NS = 400.0        # per-cycle aggregation and forwarding
REC_CORRECT_RESET_NS = 160.0  # per-cycle correction and reset pulses
REC_PER_CYCLE_NS = REC_FORWARD_NS + REC_CORRECT_RESET_NS


class _Offline:
    """Marker for results that only exist offline (effectively infinite)."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "OFFLINE"

    def __gt__(self, other):
        return True

    def __lt__(self, other):
        return False

    def __ge__(self, other):
        return True

    def __le__(self, other):
        return isinstance(other, _Offline)


OFFLINE = _Offline()


@dataclass(frozen=True)
class LatencyBudget:
    """Added latency relative to the uncorrected protocol."""

    per_cycle_ns: float
    fixed_ns: float | _Offline

    def __post_init__(self):
        if self.per_cycle_ns < 0:
            raise ValueError(f"negative per-cycle latency {self.per_cycle_ns}")
        if not isinstance(self.fixed_ns, _Offline) and self.fixed_ns < 0:
            raise ValueError(f"negative fixed latency {self.fixed_ns}")

    def total_ns(self, n_cycles: int) -> float | _Offline:
        if isinstance(self.fixed_ns, _Offline):
            if self.per_cycle_ns == 0.0:
                return OFFLINE
            return self.per_cycle_ns * n_cycles
        return self.per_cycle_ns * n_cycles + self.fixed_ns


def processor_roundtrip(steps: Iterable[PipelineStep] | None = None) -> float:
    """Time from a state assignment to the conditional pulse, summed stepwise."""
    if steps is None:
        steps = DEFAULT_PIPELINE
    steps = tuple(steps)
    if not steps:
        raise ValueError("pipeline must contain at least one step")
    return float(sum(s.duration_ns for s in steps))


def protocol_latency(
    protocol: ProtocolKind,
    n_cycles: int | None = None,
    steps: Iterable[PipelineStep] | None = None,
) -> LatencyBudget:
    """Closed-form added latency per protocol.

    Per-cycle correction pays forwarding plus correction/reset every cycle
    and computes its majority offline. The decoder protocols pay two engine
    calls (decode, then majority) and, with active correction, one
    corrective-gate window; nothing scales with the cycle count. The
    remaining protocols do all their classical work offline.
    """
    del n_cycles  # budgets do not depend on the cycle count
    rt = processor_roundtrip(steps)
    if protocol is ProtocolKind.REC:
        return LatencyBudget(REC_PER_CYCLE_NS, OFFLINE)
    if protocol is ProtocolKind.DEC:
        return LatencyBudget(0.0, 2 * rt + CORRECTIVE_GATES_NS)
    if protocol is ProtocolKind.DEC_PFU:
        return LatencyBudget(0.0, 2 * rt)
    return LatencyBudget(0.0, OFFLINE)


@dataclass(frozen=True)
class TimelineEvent:
    step_id: int
    actor: str  # Processor | Receiver | PulseSequencer
    name: str
    start_ns: float
    end_ns: float

    def __post_init__(self):
        if self.end_ns < self.start_ns:
            raise ValueError(f"event {self.name} ends before it starts")
        if self.actor not in ("Processor", "Receiver", "PulseSequencer"):
            raise ValueError(f"unknown actor {self.actor}")


def _cycle_schedule(params, n_cycles, insert_after_cycle_ns=0.0):
    """Start time of each cycle's gates and of each ancilla assignment."""
    tau_gates = _gate_span_ns(params)
    starts, assigns = [], []
    t = 0.0
    for _ in range(n_cycles):
        starts.append(t)
        assign = t + tau_gates + params.t_m
        assigns.append(assign)
        t = assign + insert_after_cycle_ns + params.t_depl
    return tau_gates, starts, assigns


def _gate_span_ns(params) -> float:
    tau1 = max(params.gate_duration["D2-At"], params.gate_duration["D3-Ab"])
    tau2 = max(params.gate_duration["D1-At"], params.gate_duration["D2-Ab"])
    return tau1 + tau2


def _pipeline_offsets(steps):
    offsets = [0.0]
    for s in steps:
        offsets.append(offsets[-1] + s.duration_ns)
    return offsets


def build_timeline(
    protocol: ProtocolKind,
    n_cycles: int,
    params,
    steps: Iterable[PipelineStep] | None = None,
) -> list[TimelineEvent]:
    """Real-time events of one run, following the hardware's step numbering.

    Only real-time work appears; anything done offline on the measurement
    computer (majority for the uncorrected and per-cycle protocols, decoding
    for post-processing) has no event, so the difference between a
    protocol's final event and the uncorrected one's reproduces the closed
    -form budgets exactly.
    """
    if steps is None:
        steps = DEFAULT_PIPELINE
    steps = tuple(steps)
    events: list[TimelineEvent] = []
    decoder_like = protocol in (ProtocolKind.DEC, ProtocolKind.DEC_PFU)

    if protocol is ProtocolKind.FREE_DECAY:
        tau_gates, _, assigns = _cycle_schedule(params, n_cycles)
        idle_end = assigns[-1]
        events.append(TimelineEvent(2, "PulseSequencer", "free_decay_idle", 0.0, idle_end))
        events.append(
            TimelineEvent(11, "PulseSequencer", "data_measurement", idle_end, idle_end + params.t_m)
        )
        return events

    insert = REC_PER_CYCLE_NS if protocol is ProtocolKind.REC else 0.0
    tau_gates, starts, assigns = _cycle_schedule(params, n_cycles, insert)

    if decoder_like:
        events.append(TimelineEvent(1, "Processor", "decoder_init", 0.0, 0.0))
    for k in range(n_cycles):
        g, me = starts[k], assigns[k]
        label = f"cycle{k + 1}"
        events.append(TimelineEvent(2, "PulseSequencer", f"{label}_gates", g, g + tau_gates))
        events.append(
            TimelineEvent(3, "PulseSequencer", f"{label}_ancilla_measurement", g + tau_gates, me)
        )
        if protocol is ProtocolKind.REC:
            events.append(TimelineEvent(4, "Receiver", f"{label}_assignment_feedback", me, me + 20.0))
            events.append(
                TimelineEvent(8, "Processor", f"{label}_syndrome_forward", me + 20.0, me + REC_FORWARD_NS)
            )
            events.append(
                TimelineEvent(
                    9, "PulseSequencer", f"{label}_correction_reset",
                    me + REC_FORWARD_NS, me + REC_PER_CYCLE_NS,
                )
            )
        elif decoder_like and k < n_cycles - 1:
            # Earlier rounds are stored while the next cycle already runs.
            events.append(TimelineEvent(4, "Receiver", f"{label}_assignment_feedback", me, me + 20.0))
            events.append(
                TimelineEvent(4, "Processor", f"{label}_syndrome_storage", me + 20.0, me + 70.0)
            )
        if k < n_cycles - 1:
            depl_start = me + insert
            events.append(
                TimelineEvent(
                    2, "PulseSequencer", f"{label}_cavity_depletion",
                    depl_start, depl_start + params.t_depl,
                )
            )

    last = assigns[-1]
    if protocol is ProtocolKind.REC:
        data_start = last + REC_PER_CYCLE_NS
        events.append(
            TimelineEvent(11, "PulseSequencer", "data_measurement", data_start, data_start + params.t_m)
        )
        return events

    if not decoder_like:  # uncorrected and post-processed
        events.append(
            TimelineEvent(11, "PulseSequencer", "data_measurement", last, last + params.t_m)
        )
        return events

    # Decoder protocols: the last round's feedback heads the decode pipeline.
    offsets = _pipeline_offsets(steps)
    rt = offsets[-1]
    step_map = _decode_step_events(steps, offsets)
    for step_id, actor, name, lo, hi in step_map:
        events.append(TimelineEvent(step_id, actor, f"decode_{name}", last + lo, last + hi))
    pulse_start = last + rt
    if protocol is ProtocolKind.DEC:
        events.append(
            TimelineEvent(
                9, "PulseSequencer", "corrective_gates", pulse_start, pulse_start + CORRECTIVE_GATES_NS
            )
        )
        data_start = pulse_start + CORRECTIVE_GATES_NS
    else:
        data_start = pulse_start
    events.append(TimelineEvent(10, "Processor", "majority_init", data_start, data_start))
    events.append(
        TimelineEvent(11, "PulseSequencer", "data_measurement", data_start, data_start + params.t_m)
    )
    dme = data_start + params.t_m
    majority_map = _majority_step_events(steps, offsets)
    for step_id, actor, name, lo, hi in majority_map:
        events.append(TimelineEvent(step_id, actor, f"majority_{name}", dme + lo, dme + hi))
    return events


def _decode_step_events(steps, offsets):
    """Map pipeline steps onto the decode chain's step numbering."""
    if len(steps) == 6:
        ids_actors = (
            (4, "Receiver"), (6, "Processor"), (7, "Processor"),
            (8, "Processor"), (9, "PulseSequencer"), (9, "PulseSequencer"),
        )
    else:
        ids_actors = tuple((7, "Processor") for _ in steps)
    return [
        (sid, actor, s.name, offsets[i], offsets[i + 1])
        for i, ((sid, actor), s) in enumerate(zip(ids_actors, steps))
    ]


def _majority_step_events(steps, offsets):
    if len(steps) == 6:
        ids_actors = (
            (12, "Receiver"), (13, "Processor"), (14, "Processor"),
            (15, "Processor"), (16, "PulseSequencer"), (16, "PulseSequencer"),
        )
    else:
        ids_actors = tuple((14, "Processor") for _ in steps)
    return [
        (sid, actor, s.name, offsets[i], offsets[i + 1])
        for i, ((sid, actor), s) in enumerate(zip(ids_actors, steps))
    ]


def timeline_added_latency(
    protocol: ProtocolKind,
    n_cycles: int,
    params,
    steps: Iterable[PipelineStep] | None = None,
) -> float:
    """Added real-time latency measured off the timeline itself."""
    end = max(e.end_ns for e in build_timeline(protocol, n_cycles, params, steps))
    base = max(
        e.end_ns for e in build_timeline(ProtocolKind.UNCORRECTED, n_cycles, params, steps)
    )
    return end - base


def timeline_to_csv(events: list[TimelineEvent], fp) -> None:
    writer = csv.writer(fp)
    writer.writerow(["step_id", "actor", "name", "start_ns", "end_ns"])
    for e in events:
        writer.writerow([e.step_id, e.actor, e.name, repr(e.start_ns), repr(e.end_ns)])
