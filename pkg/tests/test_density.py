import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bitflip_qec.density import (
    AB,
    AT,
    D1,
    D2,
    D3,
    DIM,
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    DegenerateProjectionError,
    KrausChannel,
    UnitaryOp,
    apply_channel,
    apply_pauli_x,
    apply_process_matrices,
    apply_unitary,
    basis_state,
    damping_channel,
    damping_kraus,
    excited_probability,
    expand_matrix,
    hermiticity_defect,
    measure_qubit,
    project_qubit,
    trace,
    trajectory_rng,
)
from oracles import conjugation_channel_reference, haar_unitary, random_density


def embed_single(state_2x2, q, rng=None):
    """Full-register state with `state_2x2` on qubit q and |0> elsewhere."""
    rho = basis_state("00000")
    full = np.eye(1, dtype=complex)
    for qq in range(5):
        full = np.kron(full, state_2x2 if qq == q else np.array([[1, 0], [0, 0]], complex))
    return full


PLUS = np.array([[0.5, 0.5], [0.5, 0.5]], dtype=complex)
EXCITED = np.array([[0, 0], [0, 1]], dtype=complex)


class TestUnitaries:
    def test_identity_leaves_state_unchanged(self):
        rng = np.random.default_rng(1)
        rho = random_density(rng)
        u = UnitaryOp((D2,), np.eye(2))
        np.testing.assert_allclose(apply_unitary(rho, u), rho, atol=1e-14)

    def test_x_on_d1_flips_basis_state(self):
        rho = basis_state("00000")
        u = UnitaryOp((D1,), PAULI_X)
        np.testing.assert_allclose(apply_unitary(rho, u), basis_state("10000"), atol=1e-14)

    @pytest.mark.parametrize("pauli", [PAULI_X, PAULI_Y, PAULI_Z])
    def test_pauli_involution(self, pauli):
        rng = np.random.default_rng(2)
        rho = random_density(rng)
        u = UnitaryOp((D3,), pauli)
        np.testing.assert_allclose(apply_unitary(apply_unitary(rho, u), u), rho, atol=1e-12)

    def test_trace_preserved(self):
        rng = np.random.default_rng(3)
        rho = random_density(rng)
        u = UnitaryOp((D1, AT), haar_unitary(rng, 4))
        assert abs(trace(apply_unitary(rho, u)) - 1.0) < 1e-12

    def test_rejects_non_unitary(self):
        with pytest.raises(ValueError, match="unitary"):
            UnitaryOp((D1,), np.array([[1, 0], [0, 2]]))

    def test_rejects_duplicate_support(self):
        with pytest.raises(ValueError, match="duplicate"):
            UnitaryOp((D1, D1), np.eye(4))

    def test_expand_matrix_matches_kron_order(self):
        # X on the last qubit only: block-diagonal bit flip of Ab.
        full = expand_matrix(PAULI_X, (AB,))
        rho = basis_state("00000")
        np.testing.assert_allclose(full @ rho @ full, basis_state("00001"), atol=1e-14)
        swapped = expand_matrix(np.kron(PAULI_X, PAULI_Z), (AB, D1))
        direct = expand_matrix(np.kron(PAULI_Z, PAULI_X), (D1, AB))
        np.testing.assert_allclose(swapped, direct, atol=1e-14)


class TestChannels:
    def test_identity_channel(self):
        rng = np.random.default_rng(4)
        rho = random_density(rng)
        ch = KrausChannel(D2, (np.eye(2),))
        np.testing.assert_allclose(apply_channel(rho, ch), rho, atol=1e-14)

    def test_rejects_non_trace_preserving(self):
        with pytest.raises(ValueError, match="trace preserving"):
            KrausChannel(D1, (0.5 * np.eye(2),))

    def test_amplitude_damping_at_t1(self):
        ch = damping_channel(D1, 29.0, 29.0, 29.0)  # t = T1
        rho = embed_single(EXCITED, D1)
        out = apply_channel(rho, ch)
        assert abs(excited_probability(out, D1) - math.exp(-1)) < 1e-9

    def test_full_damping_reaches_ground(self):
        rng = np.random.default_rng(5)
        rho = random_density(rng)
        ch = damping_channel(AT, 10.0, 12.0, 1e9)
        out = apply_channel(rho, ch)
        assert excited_probability(out, AT) < 1e-9

    def test_zero_time_is_identity(self):
        rng = np.random.default_rng(6)
        rho = random_density(rng)
        ch = damping_channel(D3, 42.0, 38.0, 0.0)
        np.testing.assert_allclose(apply_channel(rho, ch), rho, atol=1e-12)

    def test_coherence_decay_matches_t2(self):
        # D1-like qubit: T1 = 29 us, T2 = 12 us, one microsecond of idling.
        ch = damping_channel(D1, 29.0, 12.0, 1.0)
        rho = embed_single(PLUS, D1)
        out = apply_channel(rho, ch)
        coherence = abs(out[0, 16])
        assert abs(coherence - 0.5 * math.exp(-1.0 / 12.0)) < 1e-9

    def test_semigroup_property(self):
        rng = np.random.default_rng(7)
        rho = random_density(rng)
        once = apply_channel(rho, damping_channel(D2, 7.7, 10.0, 2.6))
        twice = apply_channel(
            apply_channel(rho, damping_channel(D2, 7.7, 10.0, 1.3)),
            damping_channel(D2, 7.7, 10.0, 1.3),
        )
        np.testing.assert_allclose(once, twice, atol=1e-12)

    def test_rejects_unphysical_t2(self):
        with pytest.raises(ValueError, match="t2"):
            damping_kraus(10.0, 20.5, 1.0)

    def test_infinite_times_are_identity(self):
        ops = damping_kraus(math.inf, math.inf, 5.0)
        total = sum(op @ EXCITED @ op.conj().T for op in ops)
        np.testing.assert_allclose(total, EXCITED, atol=1e-14)

    @given(
        t1=st.floats(0.5, 100.0),
        ratio=st.floats(0.05, 2.0),
        t=st.floats(0.0, 50.0),
    )
    @settings(max_examples=60, deadline=None)
    def test_cptp_for_any_parameters(self, t1, ratio, t):
        ops = damping_kraus(t1, ratio * t1, t)
        total = sum(op.conj().T @ op for op in ops)
        assert np.abs(total - np.eye(2)).max() < 1e-10

    @pytest.mark.parametrize("t", [0.1, 1.0, 10.0])
    def test_decay_laws(self, t):
        rng = np.random.default_rng(8)
        t1, t2 = 29.0, 12.0
        ops = damping_kraus(t1, t2, t)
        for _ in range(5):
            vec = rng.normal(size=2) + 1j * rng.normal(size=2)
            vec /= np.linalg.norm(vec)
            rho = np.outer(vec, vec.conj())
            out = sum(op @ rho @ op.conj().T for op in ops)
            assert abs(out[1, 1].real - rho[1, 1].real * math.exp(-t / t1)) < 1e-9
            assert abs(abs(out[0, 1]) - abs(rho[0, 1]) * math.exp(-t / t2)) < 1e-9

    def test_local_contraction_matches_full_conjugation(self):
        rng = np.random.default_rng(9)
        rho = random_density(rng)
        for q in range(5):
            ops = damping_kraus(17.0, 9.0, 3.0)
            local = apply_channel(rho, KrausChannel(q, ops))
            full = conjugation_channel_reference(rho, ops, q)
            np.testing.assert_allclose(local, full, atol=1e-13)

    def test_process_matrices_match_chained_channels(self):
        rng = np.random.default_rng(10)
        rho = random_density(rng)
        channels = [
            KrausChannel(q, damping_kraus(10.0 + q, 8.0 + q, 1.5)) for q in range(5)
        ]
        chained = rho
        for ch in channels:
            chained = apply_channel(chained, ch)
        fast = apply_process_matrices(rho, [ch.process_matrix() for ch in channels])
        np.testing.assert_allclose(fast, chained, atol=1e-13)


class TestMeasurement:
    def test_excited_state_is_deterministic(self):
        rho = basis_state("00010")  # At excited
        rng = trajectory_rng(0, 0)
        outcome, post = measure_qubit(rho, AT, rng)
        assert outcome == 1
        np.testing.assert_allclose(post, rho, atol=1e-12)

    def test_born_rule_statistics(self):
        rho = embed_single(PLUS, D2)
        total = 0
        for k in range(100_000):
            rng = trajectory_rng(42, k)
            outcome, _ = measure_qubit(rho, D2, rng)
            total += outcome
        assert abs(total / 100_000 - 0.5) < 0.005

    def test_bell_pair_collapse(self):
        bell = np.zeros((4, 4), dtype=complex)
        for i in (0, 3):
            for j in (0, 3):
                bell[i, j] = 0.5
        rho = np.kron(bell, np.diag([1.0] + [0.0] * 7)).astype(complex)
        for k in range(20):
            rng = trajectory_rng(3, k)
            outcome, post = measure_qubit(rho, D1, rng)
            assert abs(excited_probability(post, D2) - outcome) < 1e-10

    def test_degenerate_projection_raises(self):
        rho = basis_state("00000")
        with pytest.raises(DegenerateProjectionError):
            project_qubit(rho, D3, 1)

    def test_post_state_is_normalized(self):
        rng_state = np.random.default_rng(11)
        rho = random_density(rng_state)
        rng = trajectory_rng(5, 1)
        _, post = measure_qubit(rho, AB, rng)
        assert abs(trace(post) - 1.0) < 1e-10


class TestPauliX:
    def test_flip_d2_in_basis(self):
        rho = basis_state("11100")
        np.testing.assert_allclose(apply_pauli_x(rho, D2), basis_state("10100"), atol=1e-14)

    def test_double_flip_is_identity(self):
        rng = np.random.default_rng(12)
        rho = random_density(rng)
        np.testing.assert_allclose(apply_pauli_x(apply_pauli_x(rho, AT), AT), rho, atol=1e-12)

    def test_commutes_with_damping_on_other_qubit(self):
        rng = np.random.default_rng(13)
        rho = random_density(rng)
        ch = damping_channel(D3, 12.0, 9.0, 2.0)
        a = apply_channel(apply_pauli_x(rho, D1), ch)
        b = apply_pauli_x(apply_channel(rho, ch), D1)
        np.testing.assert_allclose(a, b, atol=1e-12)


class TestRng:
    def test_identical_seed_identical_stream(self):
        a = trajectory_rng(123, 7).random(16)
        b = trajectory_rng(123, 7).random(16)
        np.testing.assert_array_equal(a, b)

    def test_different_indices_differ(self):
        a = trajectory_rng(123, 0).random(8)
        b = trajectory_rng(123, 1).random(8)
        assert not np.array_equal(a, b)

    def test_seed_range_checked(self):
        with pytest.raises(ValueError):
            trajectory_rng(-1, 0)
        with pytest.raises(ValueError):
            trajectory_rng(2**64, 0)


@given(seed=st.integers(0, 2**32))
@settings(max_examples=25, deadline=None)
def test_random_operation_sequences_preserve_invariants(seed):
    rng = np.random.default_rng(seed)
    stream = trajectory_rng(seed, 0)
    rho = random_density(rng)
    for _ in range(8):
        kind = rng.integers(0, 4)
        if kind == 0:
            q = int(rng.integers(0, 5))
            rho = apply_unitary(rho, UnitaryOp((q,), haar_unitary(rng, 2)))
        elif kind == 1:
            q = int(rng.integers(0, 5))
            rho = apply_channel(rho, damping_channel(q, 20.0, 15.0, rng.random() * 5))
        elif kind == 2:
            rho = apply_pauli_x(rho, int(rng.integers(0, 5)))
        else:
            _, rho = measure_qubit(rho, int(rng.integers(0, 5)), stream)
        assert abs(trace(rho) - 1.0) < 1e-10
        assert hermiticity_defect(rho) < 1e-10
