"""Physical device model: parameters, noisy gates, and the entangling block.

Parameter units follow the characterization tables they come from:
coherence times in microseconds, durations in nanoseconds, ZZ couplings in
kHz, error rates as probabilities. ZZ frequencies enter Hamiltonians as
angular rates, 2*pi*eta (the kHz -> rad/ns conversion lives in one place,
`_zz_angular_rate_ns`, and is pinned by a unit test on the oscillation
period).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, fields, replace

import numpy as np
import yaml
from scipy.linalg import expm

from .density import (
    AB,
    AT,
    DIM,
    N_QUBITS,
    PAULI_I,
    PAULI_X,
    PAULI_Z,
    QUBIT_NAMES,
    KrausChannel,
    UnitaryOp,
    apply_pauli_x,
    damping_kraus,
    expand_matrix,
)

# Qubit pairs joined by a bus resonator (static ZZ crosstalk lives here).
COUPLED_PAIRS = ("At-D1", "At-D2", "Ab-D2", "Ab-D3", "D1-D2", "D2-D3")

# Data->ancilla CNOT gates the code uses, in "d-a" form.
CR_GATES = ("D1-At", "D2-At", "D2-Ab", "D3-Ab")

_QUBIT_INDEX = {name: i for i, name in enumerate(QUBIT_NAMES)}


class ConfigError(ValueError):
    """A device/experiment configuration value is missing or out of range."""


class CoherentErrorModel(enum.Enum):
    """How coherent CNOT error is represented.

    E1 folds an over-rotation angle into the cross-resonance Hamiltonian.
    E2 sets the over-rotation to zero and instead flips each ancilla with a
    characterized probability after the entangling block.
    """

    E1 = "E1"
    E2 = "E2"


def _pair_key(a: str, b: str) -> str:
    return f"{a}-{b}"


def _normalize_pair(key: str, allowed: tuple[str, ...], label: str) -> str:
    parts = key.split("-")
    if len(parts) == 2:
        fwd = _pair_key(parts[0], parts[1])
        rev = _pair_key(parts[1], parts[0])
        if fwd in allowed:
            return fwd
        if rev in allowed:
            return rev
    raise ConfigError(f"{label}.{key}: not a recognized qubit pair")


@dataclass(frozen=True)
class DeviceParams:
    """Every physical rate and duration the simulation consumes.

    Per-qubit dictionaries are keyed by qubit name (D1, D2, D3, At, Ab);
    pair dictionaries by "A-B" pair names listed in COUPLED_PAIRS and
    CR_GATES.
    """

    f01: dict = field(default_factory=dict)            # GHz, informational
    t1: dict = field(default_factory=dict)             # us
    t2: dict = field(default_factory=dict)             # us
    readout_error: dict = field(default_factory=dict)  # stored-bit flip probability
    backaction: dict = field(default_factory=dict)     # physical flip probability
    gate_error_1q: dict = field(default_factory=dict)  # X-gate failure probability
    zz_coupling: dict = field(default_factory=dict)    # kHz, keyed by coupled pair
    gate_duration: dict = field(default_factory=dict)  # ns, keyed by CR gate
    overrotation: dict = field(default_factory=dict)   # rad, keyed by CR gate
    ancilla_flip: dict = field(default_factory=dict)   # probability, keyed by ancilla
    t_1q: float = 40.0      # ns, single-qubit gate time
    t_m: float = 500.0      # ns, measurement duration
    t_depl: float = 600.0   # ns, cavity depletion window
    lag_rec: float = 560.0  # ns, feedback lag before per-cycle correction

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        per_qubit = ("f01", "t1", "t2", "readout_error", "backaction", "gate_error_1q")
        for name in per_qubit:
            table = getattr(self, name)
            for qubit in QUBIT_NAMES:
                if qubit not in table:
                    raise ConfigError(f"{name}.{qubit}: missing")
                value = table[qubit]
                if name in ("readout_error", "backaction", "gate_error_1q"):
                    if not 0.0 <= value <= 1.0:
                        raise ConfigError(f"{name}.{qubit}: probability {value} outside [0, 1]")
                elif name in ("t1", "t2") and not value > 0:
                    raise ConfigError(f"{name}.{qubit}: must be positive, got {value}")
        for qubit in QUBIT_NAMES:
            if self.t2[qubit] > 2 * self.t1[qubit]:
                raise ConfigError(
                    f"t2.{qubit}: {self.t2[qubit]} exceeds 2*t1 = {2 * self.t1[qubit]}"
                )
        for key, value in self.zz_coupling.items():
            if key not in COUPLED_PAIRS:
                raise ConfigError(f"zz_coupling.{key}: pair is not resonator-connected")
        for pair in COUPLED_PAIRS:
            if pair not in self.zz_coupling:
                raise ConfigError(f"zz_coupling.{pair}: missing")
        for table_name, keys in (("gate_duration", CR_GATES), ("overrotation", CR_GATES)):
            table = getattr(self, table_name)
            for key in keys:
                if key not in table:
                    raise ConfigError(f"{table_name}.{key}: missing")
            for key in table:
                if key not in keys:
                    raise ConfigError(f"{table_name}.{key}: not a data-ancilla gate")
        for key, value in self.gate_duration.items():
            if value < 0:
                raise ConfigError(f"gate_duration.{key}: negative duration {value}")
        for anc in ("At", "Ab"):
            if anc not in self.ancilla_flip:
                raise ConfigError(f"ancilla_flip.{anc}: missing")
            if not 0.0 <= self.ancilla_flip[anc] <= 1.0:
                raise ConfigError(
                    f"ancilla_flip.{anc}: probability {self.ancilla_flip[anc]} outside [0, 1]"
                )
        for name in ("t_1q", "t_m", "t_depl", "lag_rec"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name}: negative duration {getattr(self, name)}")

    def canonical(self) -> tuple:
        """Hashable snapshot used as a cache key for compiled models."""
        items = []
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, dict):
                items.append((f.name, tuple(sorted(value.items()))))
            else:
                items.append((f.name, value))
        return tuple(items)

    def to_dict(self) -> dict:
        return {f.name: dict(v) if isinstance(v := getattr(self, f.name), dict) else v
                for f in fields(self)}


# Defaults that are configuration choices rather than device characterization.
# `--show-config` flags these so nobody mistakes them for measured values.
PLACEHOLDER_NOTES = {
    "gate_duration": "placeholder timing, not device-characterized",
    "t_1q": "placeholder timing, not device-characterized",
    "t_m": "placeholder timing, not device-characterized",
    "backaction": "placeholder calibration input, not device-characterized",
    "ancilla_flip": "calibration input derived from two-qubit gate errors",
    "overrotation": "overestimate derived from two-qubit benchmarking errors",
}


def table_s1() -> DeviceParams:
    """Characterized five-transmon device preset.

    Coherent over-rotation angles derive from the two-qubit benchmarking
    errors through eps ~ beta^2/4, deliberately attributing the whole decay
    to over-rotation; per-ancilla flip probabilities sum the same errors.
    Durations and back-action rates are documented placeholders
    (see PLACEHOLDER_NOTES).
    """
    eps_2q = {"D1-At": 0.07, "D2-At": 0.075, "D2-Ab": 0.07, "D3-Ab": 0.035}
    return DeviceParams(
        f01={"D1": 5.412, "D2": 5.220, "D3": 5.408, "At": 5.313, "Ab": 5.362},
        t1={"D1": 29.0, "D2": 7.7, "D3": 42.0, "At": 48.0, "Ab": 49.0},
        t2={"D1": 12.0, "D2": 10.0, "D3": 38.0, "At": 26.0, "Ab": 39.0},
        readout_error={"D1": 0.25, "D2": 0.13, "D3": 0.22, "At": 0.075, "Ab": 0.135},
        backaction={"D1": 0.0, "D2": 0.0, "D3": 0.0, "At": 0.01, "Ab": 0.01},
        gate_error_1q={"D1": 0.0015, "D2": 0.01, "D3": 0.001, "At": 0.003, "Ab": 0.004},
        zz_coupling={
            "At-D1": 30.0,
            "At-D2": 25.0,
            "Ab-D2": 8.0,
            "Ab-D3": 35.0,
            "D1-D2": 32.0,
            "D2-D3": 72.0,
        },
        gate_duration={g: 400.0 for g in CR_GATES},
        overrotation={g: 2.0 * math.sqrt(e) for g, e in eps_2q.items()},
        ancilla_flip={"At": 0.07 + 0.075, "Ab": 0.07 + 0.035},
    )


def noiseless() -> DeviceParams:
    """All error rates zero, infinite coherence, default timings."""
    inf = math.inf
    return DeviceParams(
        f01={q: 5.0 for q in QUBIT_NAMES},
        t1={q: inf for q in QUBIT_NAMES},
        t2={q: inf for q in QUBIT_NAMES},
        readout_error={q: 0.0 for q in QUBIT_NAMES},
        backaction={q: 0.0 for q in QUBIT_NAMES},
        gate_error_1q={q: 0.0 for q in QUBIT_NAMES},
        zz_coupling={p: 0.0 for p in COUPLED_PAIRS},
        gate_duration={g: 400.0 for g in CR_GATES},
        overrotation={g: 0.0 for g in CR_GATES},
        ancilla_flip={"At": 0.0, "Ab": 0.0},
    )


PRESETS = {"table-s1": table_s1, "noiseless": noiseless}


def params_from_dict(data: dict, base: DeviceParams | None = None) -> DeviceParams:
    """Build DeviceParams from a plain mapping, merging over `base` if given."""
    if base is None:
        base = table_s1()
    known = {f.name for f in fields(DeviceParams)}
    updates = {}
    for key, value in data.items():
        if key not in known:
            raise ConfigError(f"{key}: unknown device parameter")
        current = getattr(base, key)
        if isinstance(current, dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{key}: expected a mapping of per-qubit values")
            merged = dict(current)
            for sub, v in value.items():
                if key in ("zz_coupling",):
                    sub = _normalize_pair(sub, COUPLED_PAIRS, key)
                elif key in ("gate_duration", "overrotation"):
                    sub = _normalize_pair(sub, CR_GATES, key)
                merged[sub] = float(v)
            updates[key] = merged
        else:
            updates[key] = float(value)
    return replace(base, **updates)


def load_device_params(path, base: DeviceParams | None = None) -> DeviceParams:
    """Read a YAML device-parameter file (flat keys matching DeviceParams)."""
    with open(path) as fp:
        data = yaml.safe_load(fp) or {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: device parameter file must be a mapping")
    return params_from_dict(data, base=base)


def echo_coupling_set(d: int) -> tuple[str, ...]:
    """Coupled pairs that survive the echo during a CR gate with data qubit d.

    The echoed gate cancels stray ZZ involving the drive's data qubit, so
    every pair containing d is removed.
    """
    name = QUBIT_NAMES[d]
    return tuple(p for p in COUPLED_PAIRS if name not in p.split("-"))


def _zz_angular_rate_ns(eta_khz: float) -> float:
    """Angular ZZ rate in rad/ns for a coupling quoted in kHz."""
    return 2.0 * math.pi * eta_khz * 1e-6


def _two_site_zz(pair: str) -> np.ndarray:
    a, b = pair.split("-")
    return expand_matrix(
        np.kron(PAULI_Z, PAULI_Z), (_QUBIT_INDEX[a], _QUBIT_INDEX[b])
    )


# Single-qubit 90-degree rotations with the sign convention that makes the
# ideal gate an exact CNOT (control = data, target = ancilla) up to a
# global phase; fixed once for the whole package.
_RZ90 = expm(1j * (math.pi / 4) * PAULI_Z)
_RX90 = expm(1j * (math.pi / 4) * PAULI_X)


def cr_unitary(
    d: int, a: int, params: DeviceParams, model: CoherentErrorModel
) -> UnitaryOp:
    """Noisy CNOT built from the echoed cross-resonance interaction.

    Evolves under (pi/2 + beta)/(2t) Z_d X_a plus the stray ZZ terms of the
    echo-surviving coupled pairs for the gate duration, then applies the
    perfect 90-degree Z (data) and X (ancilla) rotations. Under E2 the
    over-rotation beta is zero (ancilla flips are drawn stochastically
    elsewhere).
    """
    gate = _pair_key(QUBIT_NAMES[d], QUBIT_NAMES[a])
    if gate not in CR_GATES:
        raise ValueError(f"{gate}: not a connected data-ancilla gate")
    t_ns = params.gate_duration[gate]
    beta = params.overrotation[gate] if model is CoherentErrorModel.E1 else 0.0
    h = ((math.pi / 2 + beta) / (2.0 * t_ns)) * expand_matrix(
        np.kron(PAULI_Z, PAULI_X), (d, a)
    )
    for pair in echo_coupling_set(d):
        h = h + _zz_angular_rate_ns(params.zz_coupling[pair]) * _two_site_zz(pair)
    u = expand_matrix(_RZ90, (d,)) @ expand_matrix(_RX90, (a,)) @ expm(-1j * h * t_ns)
    return UnitaryOp(tuple(range(N_QUBITS)), u)


def correction_unitary(
    corrections, params: DeviceParams, coherent_zz: bool = True
) -> UnitaryOp:
    """Simultaneous conditional X gates on the full register.

    `corrections` holds five 0/1 flags ordered D1, D2, D3, At, Ab selecting
    which qubits are flipped. With `coherent_zz` the gate evolves under
    pi/(2 t_1q) times the selected X product plus all six stray ZZ terms for
    t_1q; otherwise it is the exact Pauli product.
    """
    mask = tuple(int(b) for b in corrections)
    if len(mask) != N_QUBITS or any(b not in (0, 1) for b in mask):
        raise ValueError(f"corrections must be 5 bits, got {corrections!r}")
    product = np.eye(1, dtype=complex)
    for bit in mask:
        product = np.kron(product, PAULI_X if bit else PAULI_I)
    if not coherent_zz:
        return UnitaryOp(tuple(range(N_QUBITS)), product)
    h = (math.pi / (2.0 * params.t_1q)) * product
    for pair in COUPLED_PAIRS:
        h = h + _zz_angular_rate_ns(params.zz_coupling[pair]) * _two_site_zz(pair)
    return UnitaryOp(tuple(range(N_QUBITS)), expm(-1j * h * params.t_1q))


def incoherent_gate_failure(
    rho: np.ndarray, q: int, p_fail: float, rng: np.random.Generator
) -> np.ndarray:
    """Conditional X gate that silently fails with probability p_fail.

    Draws one uniform variate; a draw below p_fail means the pulse did
    nothing, otherwise the flip is applied exactly.
    """
    if not 0.0 <= p_fail <= 1.0:
        raise ValueError(f"p_fail {p_fail} outside [0, 1]")
    if rng.random() < p_fail:
        return rho
    return apply_pauli_x(rho, q)


class CompiledModel:
    """Per-(params, error model) cache of expanded matrices and channels.

    Everything here is immutable after prepare() and safe to share across
    trajectory workers.
    """

    # First the shared qubit talks to the top ancilla while D3 talks to the
    # bottom one, then D1 takes the top ancilla while the shared qubit moves
    # to the bottom: (D2->At, D3->Ab) then (D1->At, D2->Ab).
    PAIR_ORDER = ((("D2", "At"), ("D3", "Ab")), (("D1", "At"), ("D2", "Ab")))

    def __init__(self, params: DeviceParams, model: CoherentErrorModel):
        self.params = params
        self.model = model
        self.cr_matrices = []
        for pair_group in self.PAIR_ORDER:
            for d_name, a_name in pair_group:
                u = cr_unitary(_QUBIT_INDEX[d_name], _QUBIT_INDEX[a_name], params, model)
                self.cr_matrices.append(np.ascontiguousarray(u.matrix))
        self.tau1 = max(
            params.gate_duration[_pair_key(d, a)] for d, a in self.PAIR_ORDER[0]
        )
        self.tau2 = max(
            params.gate_duration[_pair_key(d, a)] for d, a in self.PAIR_ORDER[1]
        )
        self.gamma = (params.ancilla_flip["At"], params.ancilla_flip["Ab"])
        self.readout_error = tuple(params.readout_error[q] for q in QUBIT_NAMES)
        self.backaction = tuple(params.backaction[q] for q in QUBIT_NAMES)
        self.gate_error_1q = tuple(params.gate_error_1q[q] for q in QUBIT_NAMES)
        self._damping = {}
        self._correction_units = {}
        for t_ns in (self.tau1, self.tau2, params.t_m, params.t_depl,
                     params.lag_rec, params.t_1q):
            self._damping_procs(t_ns)

    def _damping_procs(self, t_ns: float):
        procs = self._damping.get(t_ns)
        if procs is None:
            procs = tuple(
                KrausChannel(
                    q, damping_kraus(self.params.t1[name], self.params.t2[name], t_ns / 1e3)
                ).process_matrix()
                for q, name in enumerate(QUBIT_NAMES)
            )
            self._damping[t_ns] = procs
        return procs

    def prepare_duration(self, t_ns: float) -> None:
        """Warm the damping cache before handing the model to worker threads."""
        self._damping_procs(t_ns)

    def damp_all(self, rho: np.ndarray, t_ns: float) -> np.ndarray:
        if t_ns == 0.0:
            return rho
        from .density import apply_process_matrices

        return apply_process_matrices(rho, self._damping_procs(t_ns))

    def correction_matrix(self, mask: tuple) -> np.ndarray:
        u = self._correction_units.get(mask)
        if u is None:
            u = np.ascontiguousarray(
                correction_unitary(mask, self.params, coherent_zz=True).matrix
            )
            self._correction_units[mask] = u
        return u

    def entangle(self, rho: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """One entangling block: two simultaneous CNOT pairs with damping.

        Under E2, each ancilla is then flipped with its characterized
        probability (one draw for At, then one for Ab).
        """
        u = self.cr_matrices
        rho = u[0] @ rho @ u[0].conj().T
        rho = u[1] @ rho @ u[1].conj().T
        rho = self.damp_all(rho, self.tau1)
        rho = u[2] @ rho @ u[2].conj().T
        rho = u[3] @ rho @ u[3].conj().T
        rho = self.damp_all(rho, self.tau2)
        if self.model is CoherentErrorModel.E2:
            for anc, gamma in zip((AT, AB), self.gamma):
                if rng.random() < gamma:
                    rho = apply_pauli_x(rho, anc)
        return rho


_MODEL_CACHE: dict = {}


def compile_model(params: DeviceParams, model: CoherentErrorModel) -> CompiledModel:
    key = (params.canonical(), model)
    compiled = _MODEL_CACHE.get(key)
    if compiled is None:
        compiled = CompiledModel(params, model)
        _MODEL_CACHE[key] = compiled
    return compiled


def entangling_operation(
    rho: np.ndarray,
    params: DeviceParams,
    model: CoherentErrorModel,
    rng: np.random.Generator,
) -> np.ndarray:
    """Parity-mapping block of one cycle (see CompiledModel.entangle)."""
    return compile_model(params, model).entangle(rho, rng)
