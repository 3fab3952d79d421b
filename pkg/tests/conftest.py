import numpy as np
import pytest

import beable_sim as bs

SX = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SY = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SZ = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
I2 = np.eye(2, dtype=complex)


def random_hermitian(rng, dim):
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return bs.Operator((a + a.conj().T) / 2, hermitian=True)


def random_state(rng, dim, time=0.0):
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return bs.QuantumState(v / np.linalg.norm(v), time=time)


class RabiModel:
    """H = (omega/2) sigma_x with the sigma_z beable, starting in |up>."""

    def __init__(self, omega=1.0):
        self.omega = omega
        self.hamiltonian = bs.Operator(0.5 * omega * SX, hermitian=True)
        self.propagator = bs.diagonalize(self.hamiltonian)
        self.beable = bs.from_hermitian(bs.Operator(SZ, hermitian=True), label="sz")
        self.beable_set = bs.validate_commuting_set([self.beable])
        self.state0 = bs.QuantumState([1.0, 0.0])
        self.field = bs.VelocityField(self.beable_set, self.propagator)

    def state(self, t):
        return bs.evolve(self.state0, self.propagator, t)


@pytest.fixture(scope="session")
def rabi():
    return RabiModel()


@pytest.fixture
def rng():
    return np.random.default_rng(20260808)
