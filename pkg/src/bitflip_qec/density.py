"""Dense density-matrix simulation of the five-qubit register.

The register holds the three data qubits and the two ancillas of the
bit-flip code in a fixed tensor order:

    index 0..4  =  D1, D2, D3, At, Ab

A state is a plain 32x32 complex numpy array (Hermitian, unit trace).
Basis index bit 4-q (counting from the least significant bit) carries
qubit q, i.e. D1 is the most significant bit of the basis label.

All operations are pure: they return new arrays and never mutate their
input, so states can be shared freely between trajectory workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

N_QUBITS = 5
DIM = 2**N_QUBITS

D1, D2, D3, AT, AB = range(N_QUBITS)
QUBIT_NAMES = ("D1", "D2", "D3", "At", "Ab")
DATA_QUBITS = (D1, D2, D3)
ANCILLA_QUBITS = (AT, AB)

TRACE_TOL = 1e-10
HERMITICITY_TOL = 1e-10
UNITARITY_TOL = 1e-10
CPTP_TOL = 1e-10
MIN_PROJECTION_PROB = 1e-15

PAULI_I = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)

# Basis-index bookkeeping per qubit: which basis states have the qubit
# excited, and 0/1 selector masks used for projections.
_BIT_OF = tuple(((np.arange(DIM) >> (N_QUBITS - 1 - q)) & 1) for q in range(N_QUBITS))
_EXCITED = tuple(mask.astype(bool) for mask in _BIT_OF)
_SELECTOR = tuple(
    tuple((_BIT_OF[q] == outcome).astype(float) for outcome in (0, 1))
    for q in range(N_QUBITS)
)
_X_PERM = tuple(np.arange(DIM) ^ (1 << (N_QUBITS - 1 - q)) for q in range(N_QUBITS))


class DegenerateProjectionError(RuntimeError):
    """Requested measurement branch has numerically vanishing probability."""


def basis_state(bits) -> np.ndarray:
    """Density matrix of the computational state |d1 d2 d3 at ab>.

    `bits` is a string like "11100" or a sequence of five 0/1 integers,
    ordered D1, D2, D3, At, Ab.
    """
    values = [int(b) for b in bits]
    if len(values) != N_QUBITS or any(v not in (0, 1) for v in values):
        raise ValueError(f"expected {N_QUBITS} bits, got {bits!r}")
    index = 0
    for v in values:
        index = (index << 1) | v
    rho = np.zeros((DIM, DIM), dtype=complex)
    rho[index, index] = 1.0
    return rho


def trace(rho: np.ndarray) -> float:
    return float(np.trace(rho).real)


def hermiticity_defect(rho: np.ndarray) -> float:
    return float(np.abs(rho - rho.conj().T).max())


def min_eigenvalue(rho: np.ndarray) -> float:
    return float(np.linalg.eigvalsh((rho + rho.conj().T) / 2).min())


def assert_valid_density(rho: np.ndarray, check_positivity: bool = False) -> None:
    """Invariant check used by tests and debug paths (positivity is O(n^3))."""
    if abs(trace(rho) - 1.0) > TRACE_TOL:
        raise ValueError(f"trace {trace(rho)} deviates from 1 beyond {TRACE_TOL}")
    defect = hermiticity_defect(rho)
    if defect > HERMITICITY_TOL:
        raise ValueError(f"hermiticity defect {defect} beyond {HERMITICITY_TOL}")
    if check_positivity and min_eigenvalue(rho) < -1e-9:
        raise ValueError(f"negative eigenvalue {min_eigenvalue(rho)}")


def expand_matrix(matrix: np.ndarray, support: tuple[int, ...]) -> np.ndarray:
    """Embed a 2^k x 2^k operator acting on `support` into the full register.

    The operator's tensor factors follow the order of `support`; identity
    acts everywhere else.
    """
    k = len(support)
    if matrix.shape != (2**k, 2**k):
        raise ValueError(f"matrix shape {matrix.shape} does not match support {support}")
    if len(set(support)) != k:
        raise ValueError(f"duplicate qubits in support {support}")
    if any(q < 0 or q >= N_QUBITS for q in support):
        raise ValueError(f"support {support} outside register")
    rest = [q for q in range(N_QUBITS) if q not in support]
    full = np.kron(matrix, np.eye(2 ** (N_QUBITS - k), dtype=complex))
    order = list(support) + rest
    perm = np.argsort(order)
    axes = tuple(perm) + tuple(N_QUBITS + p for p in perm)
    tensor = full.reshape((2,) * (2 * N_QUBITS)).transpose(axes)
    return np.ascontiguousarray(tensor.reshape(DIM, DIM))


@dataclass(frozen=True)
class UnitaryOp:
    """Unitary on an ordered subset of register qubits."""

    support: tuple[int, ...]
    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "support", tuple(self.support))
        object.__setattr__(self, "matrix", np.asarray(self.matrix, dtype=complex))
        if len(set(self.support)) != len(self.support):
            raise ValueError(f"duplicate qubits in support {self.support}")
        dim = 2 ** len(self.support)
        if self.matrix.shape != (dim, dim):
            raise ValueError(
                f"matrix shape {self.matrix.shape} does not match support {self.support}"
            )
        defect = np.abs(
            self.matrix.conj().T @ self.matrix - np.eye(dim)
        ).max()
        if defect > UNITARITY_TOL:
            raise ValueError(f"matrix is not unitary (defect {defect:.3e})")

    def expanded(self) -> np.ndarray:
        if len(self.support) == N_QUBITS and self.support == tuple(range(N_QUBITS)):
            return self.matrix
        return expand_matrix(self.matrix, self.support)


def apply_unitary(rho: np.ndarray, u: UnitaryOp) -> np.ndarray:
    """Conjugate the state: U rho U^dagger, identity off the support."""
    full = u.expanded()
    return full @ rho @ full.conj().T


@dataclass(frozen=True)
class KrausChannel:
    """Trace-preserving single-qubit channel given by 2x2 Kraus operators."""

    qubit: int
    operators: tuple[np.ndarray, ...]

    def __post_init__(self):
        object.__setattr__(
            self,
            "operators",
            tuple(np.asarray(op, dtype=complex) for op in self.operators),
        )
        if not 0 <= self.qubit < N_QUBITS:
            raise ValueError(f"qubit {self.qubit} outside register")
        if not self.operators:
            raise ValueError("channel needs at least one Kraus operator")
        total = sum(op.conj().T @ op for op in self.operators)
        defect = np.abs(total - np.eye(2)).max()
        if defect > CPTP_TOL:
            raise ValueError(f"channel is not trace preserving (defect {defect:.3e})")

    def process_matrix(self) -> np.ndarray:
        """4x4 action on the (row bit, column bit) pair of the qubit slot."""
        p = np.zeros((2, 2, 2, 2), dtype=complex)
        for op in self.operators:
            p += np.einsum("ab,cd->acbd", op, op.conj())
        return p.reshape(4, 4)


def apply_channel(rho: np.ndarray, ch: KrausChannel) -> np.ndarray:
    """Apply sum_j K_j rho K_j^dagger by contracting the qubit's slot locally."""
    q = ch.qubit
    left = 1 << q
    right = DIM >> (q + 1)
    t = rho.reshape(left, 2, right, left, 2, right)
    out = np.zeros_like(t)
    for op in ch.operators:
        out += np.einsum("ab,ubvldr,cd->uavlcr", op, t, op.conj())
    return out.reshape(DIM, DIM)


def damping_kraus(t1: float, t2: float, t: float) -> tuple[np.ndarray, ...]:
    """Kraus operators for combined relaxation and dephasing over time t.

    Contract: excited population decays by exp(-t/t1) and the magnitude of
    the off-diagonal coherence by exp(-t/t2). Times share one unit
    (microseconds throughout this package). Requires 0 < t2 <= 2*t1.
    """
    if not t1 > 0:
        raise ValueError(f"t1 must be positive, got {t1}")
    if not 0 < t2 <= 2 * t1:
        raise ValueError(f"t2 must satisfy 0 < t2 <= 2*t1, got t1={t1}, t2={t2}")
    if t < 0:
        raise ValueError(f"duration must be nonnegative, got {t}")
    gamma = -math.expm1(-t / t1) if t1 != math.inf else 0.0
    # Residual dephasing beyond what relaxation already causes:
    # sqrt(1-gamma) * (1 - 2 pz) = exp(-t/t2) exactly.
    rate = (1.0 / t2 if t2 != math.inf else 0.0) - (
        1.0 / (2 * t1) if t1 != math.inf else 0.0
    )
    pz = -math.expm1(-t * rate) / 2 if rate > 0 else 0.0
    amp = (
        np.array([[1, 0], [0, math.sqrt(1 - gamma)]], dtype=complex),
        np.array([[0, math.sqrt(gamma)], [0, 0]], dtype=complex),
    )
    phase = (
        math.sqrt(1 - pz) * PAULI_I,
        math.sqrt(pz) * PAULI_Z,
    )
    ops = tuple(p @ a for p in phase for a in amp)
    return tuple(op for op in ops if np.abs(op).max() > 0.0)


def damping_channel(qubit: int, t1: float, t2: float, t: float) -> KrausChannel:
    """Relaxation plus dephasing channel on one qubit (see damping_kraus)."""
    return KrausChannel(qubit, damping_kraus(t1, t2, t))


def apply_process_matrices(rho: np.ndarray, procs) -> np.ndarray:
    """Apply one independent single-qubit channel per register qubit.

    `procs` holds five 4x4 process matrices (see KrausChannel.process_matrix).
    Equivalent to chaining apply_channel over all qubits, with fewer
    intermediate arrays on the hot path.
    """
    t = rho.reshape((2,) * (2 * N_QUBITS))
    t = t.transpose(0, 5, 1, 6, 2, 7, 3, 8, 4, 9).reshape((4,) * N_QUBITS)
    for q, p in enumerate(procs):
        t = np.moveaxis(np.tensordot(p, t, axes=(1, q)), 0, q)
    t = t.reshape((2,) * (2 * N_QUBITS))
    t = t.transpose(0, 2, 4, 6, 8, 1, 3, 5, 7, 9)
    return np.ascontiguousarray(t.reshape(DIM, DIM))


def excited_probability(rho: np.ndarray, q: int) -> float:
    """Probability that qubit q is found in |1> (Born rule on the diagonal)."""
    diag = np.einsum("ii->i", rho).real
    return float(diag[_EXCITED[q]].sum())


def project_qubit(rho: np.ndarray, q: int, outcome: int) -> np.ndarray:
    """Renormalized projection of qubit q onto `outcome`."""
    p = excited_probability(rho, q)
    p_branch = p if outcome else 1.0 - p
    if p_branch < MIN_PROJECTION_PROB:
        raise DegenerateProjectionError(
            f"projection of qubit {QUBIT_NAMES[q]} onto {outcome} has probability {p_branch:.3e}"
        )
    sel = _SELECTOR[q][outcome]
    return rho * (sel[:, None] * sel[None, :]) / p_branch


def measure_qubit(rho: np.ndarray, q: int, rng: np.random.Generator):
    """Projective measurement of one qubit.

    Draws a single uniform variate; outcome 1 is taken when the draw falls
    below the excited-state probability. Returns (outcome, post-state).
    """
    p = excited_probability(rho, q)
    outcome = 1 if rng.random() < p else 0
    return outcome, project_qubit(rho, q, outcome)


def apply_pauli_x(rho: np.ndarray, q: int) -> np.ndarray:
    """Conjugate by X on qubit q (a basis relabeling)."""
    perm = _X_PERM[q]
    return rho[np.ix_(perm, perm)]


def trajectory_rng(master_seed: int, trajectory_index: int) -> np.random.Generator:
    """Independent, platform-stable random stream for one trajectory.

    Streams are keyed counter-style by (master_seed, trajectory_index), so
    trajectory k draws the same sequence no matter how work is scheduled.
    """
    if not 0 <= master_seed < 2**64:
        raise ValueError(f"master seed must fit in 64 bits, got {master_seed}")
    if trajectory_index < 0:
        raise ValueError(f"trajectory index must be nonnegative, got {trajectory_index}")
    key = np.array([master_seed, trajectory_index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
