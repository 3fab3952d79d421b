import numpy as np
import pytest

import beable_sim as bs
from beable_sim.errors import InputError

from conftest import SX, SY, SZ, random_hermitian, random_state


class TestOperatorInvariants:
    def test_hermitian_flag_rejects_non_hermitian(self):
        with pytest.raises(InputError):
            bs.Operator([[0, 1], [0, 0]], hermitian=True)

    def test_projector_flag_rejects_non_idempotent(self):
        with pytest.raises(InputError):
            bs.Operator(2 * np.eye(2), hermitian=True, projector=True)

    def test_projector_accepts_rank_one(self):
        p = bs.Operator(np.diag([1.0, 0.0]), hermitian=True, projector=True)
        assert p.projector

    def test_entries_are_read_only(self):
        a = bs.Operator(SZ, hermitian=True)
        with pytest.raises(ValueError):
            a.entries[0, 0] = 5.0

    def test_non_square_rejected(self):
        with pytest.raises(InputError):
            bs.Operator(np.zeros((2, 3)))


class TestQuantumState:
    def test_rejects_unnormalized(self):
        with pytest.raises(InputError):
            bs.QuantumState([1.0, 1.0])

    def test_carries_time(self):
        s = bs.QuantumState([1.0, 0.0], time=2.5)
        assert s.time == 2.5


class TestCommutator:
    def test_identity_commutes(self, rng):
        h = random_hermitian(rng, 4)
        c = bs.commutator(bs.identity(4), h)
        assert np.max(np.abs(c.entries)) == 0.0

    def test_pauli_algebra(self):
        # [sigma_z, sigma_x] = 2i sigma_y, by hand from the 2x2 algebra
        c = bs.commutator(bs.Operator(SZ), bs.Operator(SX))
        assert np.allclose(c.entries, 2j * SY, atol=1e-15)

    def test_self_commutes(self, rng):
        a = random_hermitian(rng, 3)
        assert np.max(np.abs(bs.commutator(a, a).entries)) == 0.0

    def test_dimension_mismatch(self):
        with pytest.raises(InputError):
            bs.commutator(bs.Operator(SZ), bs.identity(3))

    def test_hermitian_pair_gives_anti_hermitian(self, rng):
        for _ in range(10):
            a = random_hermitian(rng, 6)
            b = random_hermitian(rng, 6)
            c = bs.commutator(a, b).entries
            scale = max(np.max(np.abs(c)), 1.0)
            assert np.max(np.abs(c + c.conj().T)) <= 1e-12 * scale


class TestExpectation:
    def test_eigenstate(self):
        assert bs.expectation(bs.QuantumState([1, 0]), bs.Operator(SZ)) == pytest.approx(1.0)

    def test_balanced_superposition(self):
        s = bs.QuantumState(np.array([1, 1]) / np.sqrt(2))
        assert bs.expectation(s, bs.Operator(SZ)) == pytest.approx(0.0, abs=1e-15)

    def test_off_diagonal(self):
        assert bs.expectation(bs.QuantumState([1, 0]), bs.Operator(SX)) == pytest.approx(0.0)

    def test_spectral_bounds(self, rng):
        h = random_hermitian(rng, 8)
        prop = bs.diagonalize(h)
        for _ in range(20):
            s = random_state(rng, 8)
            val = bs.expectation(s, h).real
            assert prop.energies[0] - 1e-10 <= val <= prop.energies[-1] + 1e-10


class TestDiagonalize:
    def test_pauli_spectrum(self):
        prop = bs.diagonalize(bs.Operator(SZ, hermitian=True))
        assert np.allclose(prop.energies, [-1.0, 1.0])

    def test_rabi_spectrum(self):
        omega = 0.7
        prop = bs.diagonalize(bs.Operator(0.5 * omega * SX, hermitian=True))
        assert np.allclose(prop.energies, [-omega / 2, omega / 2])

    def test_zero_operator(self):
        prop = bs.diagonalize(bs.Operator(np.zeros((3, 3)), hermitian=True))
        assert np.allclose(prop.energies, 0.0)
        assert np.allclose(np.abs(prop.basis.conj().T @ prop.basis), np.eye(3))

    def test_requires_hermitian_flag(self):
        with pytest.raises(InputError):
            bs.diagonalize(bs.Operator(SZ))

    def test_eigenvalues_ascending(self, rng):
        prop = bs.diagonalize(random_hermitian(rng, 10))
        assert np.all(np.diff(prop.energies) >= 0)


class TestEvolve:
    def test_zero_time_is_identity(self, rng):
        h = random_hermitian(rng, 4)
        s = random_state(rng, 4)
        assert bs.evolve(s, bs.diagonalize(h), 0.0) is s

    def test_rabi_expectation_curve(self, rabi):
        # analytic two-level solution: <sigma_z>(t) = cos(omega t)
        for t in np.linspace(0.0, 6.0, 13):
            st = rabi.state(t)
            assert bs.expectation(st, bs.Operator(SZ)).real == pytest.approx(
                np.cos(rabi.omega * t), abs=1e-12)

    def test_stationary_state_global_phase(self, rng):
        h = random_hermitian(rng, 5)
        prop = bs.diagonalize(h)
        k = 2
        s = bs.QuantumState(prop.basis[:, k])
        out = bs.evolve(s, prop, 0.8)
        assert np.allclose(out.amplitudes,
                           np.exp(-1j * prop.energies[k] * 0.8) * s.amplitudes,
                           atol=1e-12)

    def test_unitarity_random(self, rng):
        for dim in (2, 5, 16):
            prop = bs.diagonalize(random_hermitian(rng, dim))
            for _ in range(5):
                s = random_state(rng, dim)
                dt = rng.uniform(-10, 10)
                out = bs.evolve(s, prop, dt)
                assert abs(np.linalg.norm(out.amplitudes) - 1.0) <= 1e-9
                assert out.time == pytest.approx(s.time + dt)

    def test_reversibility(self, rng):
        for _ in range(10):
            prop = bs.diagonalize(random_hermitian(rng, 6))
            s = random_state(rng, 6)
            dt = rng.uniform(-10, 10)
            back = bs.evolve(bs.evolve(s, prop, dt), prop, -dt)
            assert np.max(np.abs(back.amplitudes - s.amplitudes)) <= 1e-9

    def test_dimension_mismatch(self, rng):
        prop = bs.diagonalize(random_hermitian(rng, 3))
        with pytest.raises(InputError):
            bs.evolve(bs.QuantumState([1, 0]), prop, 0.1)
