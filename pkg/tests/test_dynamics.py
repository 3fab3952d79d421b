import numpy as np
import pytest

import beable_sim as bs
from beable_sim.dynamics import Symmetrization, _subset_weights
from beable_sim.errors import InputError, NodeError

from conftest import I2, SZ, random_hermitian, random_state


def two_qubit_set():
    a = bs.from_hermitian(bs.Operator(np.kron(SZ, I2), hermitian=True), label="a")
    b = bs.from_hermitian(bs.Operator(np.kron(I2, SZ), hermitian=True), label="b")
    return bs.validate_commuting_set([a, b])


def random_model(rng, dim, n_beables):
    """Random Hamiltonian plus beables made commuting by sharing an eigenbasis."""
    h = random_hermitian(rng, dim)
    prop = bs.diagonalize(h)
    shared = np.linalg.eigh(random_hermitian(rng, dim).entries)[1]
    beables = []
    for i in range(n_beables):
        vals = np.sort(rng.normal(size=dim))
        mat = (shared * vals) @ shared.conj().T
        beables.append(bs.from_hermitian(
            bs.Operator((mat + mat.conj().T) / 2, hermitian=True), label=f"b{i}"))
    bset = bs.validate_commuting_set(beables)
    state = random_state(rng, dim)
    return h, prop, bset, state


class TestQuantumProbability:
    def test_joint_eigenstate(self):
        bset = two_qubit_set()
        up_up = bs.QuantumState([1, 0, 0, 0])
        for cells in [(0, 0), (0, 1), (1, 0), (1, 1)]:
            p = bs.quantum_probability(up_up, bset, cells)
            assert p == pytest.approx(1.0 if cells == (1, 1) else 0.0, abs=1e-12)

    def test_balanced_superposition(self, rabi):
        s = bs.QuantumState(np.array([1, 1]) / np.sqrt(2))
        assert bs.quantum_probability(s, rabi.beable_set, [0]) == pytest.approx(0.5)

    def test_rabi_occupation(self, rabi):
        for t in (0.4, 1.3, 2.2):
            p1 = bs.quantum_probability(rabi.state(t), rabi.beable_set, [1])
            assert p1 == pytest.approx(np.cos(t / 2) ** 2, abs=1e-12)

    def test_sums_to_one(self, rng):
        _, _, bset, state = random_model(rng, 6, 2)
        _, probs = bs.quantum_distribution(state, bset)
        assert abs(probs.sum() - 1.0) <= 1e-8

    def test_cell_out_of_range(self, rabi):
        with pytest.raises(InputError):
            bs.quantum_probability(rabi.state0, rabi.beable_set, [2])


class TestSymmetrizedCurrent:
    def test_l3_weights(self):
        w = _subset_weights(3)
        assert w == pytest.approx([2 / 6, 1 / 6, 2 / 6])
        # four subset terms of the L=3 expansion sum to 1
        assert w[0] + w[1] + w[1] + w[2] == pytest.approx(1.0)

    def test_single_beable_rabi(self, rabi):
        # J(0.5) = (omega/2) <sigma_y>, with <sigma_y>(t) = -sin(omega t)
        for t in (0.3, 1.0, 2.0):
            j = bs.symmetrized_current(rabi.state(t), rabi.beable_set, 0, [0.5],
                                       rabi.propagator)
            assert j == pytest.approx(-0.5 * np.sin(t), abs=1e-12)

    def test_zero_at_top_boundary(self, rng):
        _, prop, bset, state = random_model(rng, 5, 2)
        lam = np.array([0.1, bset[1].n_cells - 0.5])
        assert bs.symmetrized_current(state, bset, 1, lam, prop) == pytest.approx(0.0, abs=1e-12)

    def test_l3_matches_explicit_expansion(self, rng):
        sz3 = [np.kron(np.kron(SZ, I2), I2), np.kron(np.kron(I2, SZ), I2),
               np.kron(np.kron(I2, I2), SZ)]
        beables = [bs.from_hermitian(bs.Operator(m, hermitian=True), label=f"q{i}")
                   for i, m in enumerate(sz3)]
        bset = bs.validate_commuting_set(beables)
        h = random_hermitian(rng, 8)
        prop = bs.diagonalize(h)
        state = random_state(rng, 8)
        lam = np.array([0.3, -0.2, 0.9])

        j_mat = bs.current_operator(beables[0], lam[0], prop).entries
        p2 = beables[1].projectors[bs.cell_index(beables[1], lam[1])].entries
        p3 = beables[2].projectors[bs.cell_index(beables[2], lam[2])].entries
        explicit = (2 * j_mat @ p2 @ p3 + p2 @ j_mat @ p3
                    + p3 @ j_mat @ p2 + 2 * p2 @ p3 @ j_mat) / 6
        expected = np.vdot(state.amplitudes, explicit @ state.amplitudes)
        assert abs(expected.imag) <= 1e-9
        got = bs.symmetrized_current(state, bset, 0, lam, prop)
        assert got == pytest.approx(expected.real, abs=1e-12)

    def test_ordered_variant(self, rng):
        _, prop, bset, state = random_model(rng, 6, 2)
        lam = np.array([0.2, 0.7])
        j_mat = bs.current_operator(bset[0], lam[0], prop).entries
        p2 = bset[1].projectors[bs.cell_index(bset[1], lam[1])].entries
        expected = np.vdot(state.amplitudes, (j_mat @ p2) @ state.amplitudes).real
        got = bs.symmetrized_current(state, bset, 0, lam, prop,
                                     Symmetrization.ORDERED_REAL_PART)
        assert got == pytest.approx(expected, abs=1e-12)


class TestVelocity:
    def test_conserved_beables_are_static(self, rng):
        h = random_hermitian(rng, 5)
        prop = bs.diagonalize(h)
        b = bs.from_hermitian(h)  # commutes with H
        field = bs.VelocityField(bs.validate_commuting_set([b]), prop)
        state = random_state(rng, 5)
        for lam in rng.uniform(-0.5, b.n_cells - 0.5, size=10):
            v = bs.velocity(field, state, [lam])
            assert np.max(np.abs(v)) <= 1e-10

    def test_rabi_ratio(self, rabi):
        t = 0.9
        st = rabi.state(t)
        v = bs.velocity(rabi.field, st, [0.5])
        expected = (0.5 * -np.sin(t)) / np.cos(t / 2) ** 2
        assert v[0] == pytest.approx(expected, abs=1e-12)

    def test_zero_at_top_boundary(self, rabi):
        v = bs.velocity(rabi.field, rabi.state(0.4), [1.5])
        assert v[0] == pytest.approx(0.0, abs=1e-12)

    def test_node_error_carries_context(self, rabi):
        # |up> puts zero probability in cell 0
        with pytest.raises(NodeError) as err:
            bs.velocity(rabi.field, rabi.state0, [0.2])
        assert err.value.cells == (0,)
        assert err.value.probability <= 1e-12

    def test_matches_reference_path(self, rng):
        # compiled eigenbasis evaluation vs the raw-operator reference
        for dim, n_b in [(4, 1), (6, 2), (8, 3)]:
            _, prop, bset, state = random_model(rng, dim, n_b)
            field = bs.VelocityField(bset, prop)
            for _ in range(5):
                lam = np.array([rng.uniform(-0.5, b.n_cells - 0.5) for b in bset])
                cells = [bs.cell_index(b, x) for b, x in zip(bset, lam)]
                p = bs.quantum_probability(state, bset, cells)
                if p < 1e-6:
                    continue
                ref = np.array([
                    bs.symmetrized_current(state, bset, ell, lam, prop)
                    for ell in range(n_b)
                ]) / p
                got = bs.velocity(field, state, lam)
                assert np.max(np.abs(got - ref)) <= 1e-10 * max(1.0, np.max(np.abs(ref)))

    def test_affine_within_cell(self, rng):
        _, prop, bset, state = random_model(rng, 6, 2)
        field = bs.VelocityField(bset, prop)
        tuples, probs = bs.quantum_distribution(state, bset)
        cells = tuples[int(np.argmax(probs))]
        offsets = (-0.45, 0.0, 0.25)
        vals = []
        for x in offsets:
            lam = np.array([cells[0] + x, float(cells[1])])
            vals.append(bs.velocity(field, state, lam)[0])
        slope_a = (vals[1] - vals[0]) / (offsets[1] - offsets[0])
        slope_b = (vals[2] - vals[1]) / (offsets[2] - offsets[1])
        assert slope_a == pytest.approx(slope_b, abs=1e-10)


class TestIntegrateTrajectory:
    def test_conserved_beables_stay_put(self, rng):
        h = random_hermitian(rng, 4)
        prop = bs.diagonalize(h)
        b = bs.from_hermitian(h)
        field = bs.VelocityField(bs.validate_commuting_set([b]), prop)
        state = random_state(rng, 4)
        lam0 = 0.25
        traj = bs.integrate_trajectory(field, state, [lam0], t_final=5.0, output_dt=0.5)
        assert traj.status is bs.TrajectoryStatus.COMPLETED
        assert np.max(np.abs(traj.lambdas - lam0)) <= 1e-8
        assert np.all(traj.xis == traj.xis[0, 0])

    def test_flip_time_matches_two_state_oracle(self, rabi):
        # lambda0 = 1.3 -> L0 = 0.8 -> xi0 = -0.6; flip when cos t = xi0
        t_star = np.arccos(-0.6)

        def lam_at(t):
            traj = bs.integrate_trajectory(rabi.field, rabi.state0, [1.3],
                                           t_final=t, output_dt=t)
            return traj.lambdas[-1, 0]

        lo, hi = 2.0, 2.4
        assert lam_at(lo) > 0.5 > lam_at(hi)
        for _ in range(40):
            mid = 0.5 * (lo + hi)
            if lam_at(mid) > 0.5:
                lo = mid
            else:
                hi = mid
        assert abs(0.5 * (lo + hi) - t_star) <= 1e-6

    def test_xis_track_lambda_cells(self, rabi):
        traj = bs.integrate_trajectory(rabi.field, rabi.state0, [1.3],
                                       t_final=2.5, output_dt=0.05)
        assert traj.status is bs.TrajectoryStatus.COMPLETED
        assert np.all(np.diff(traj.times) > 0)
        for k in range(traj.times.size):
            assert traj.xis[k, 0] == bs.eigenvalue_at(rabi.beable, traj.lambdas[k, 0])
        # the flip to -1 happened and is within one output step of the oracle
        flips = np.where(np.diff(traj.xis[:, 0]) != 0)[0]
        assert flips.size == 1
        t_star = np.arccos(-0.6)
        assert traj.times[flips[0]] <= t_star <= traj.times[flips[0] + 1]

    def test_forward_backward_roundtrip(self, rabi):
        lam0 = 1.1
        fwd = bs.integrate_trajectory(rabi.field, rabi.state0, [lam0],
                                      t_final=2.5, output_dt=2.5)
        state_t = rabi.state(2.5)
        back = bs.integrate_trajectory(rabi.field, state_t, fwd.final_lambdas,
                                       t_final=0.0, output_dt=2.5)
        assert back.times[-1] == 0.0
        assert abs(back.final_lambdas[0] - lam0) <= 1e-6

    def test_node_abort_status(self, rabi):
        # cell 0 has zero probability in |up>, so the velocity is undefined
        traj = bs.integrate_trajectory(rabi.field, rabi.state0, [0.2],
                                       t_final=1.0, output_dt=0.1)
        assert traj.status is bs.TrajectoryStatus.NODE_ABORTED
        assert traj.abort_cells == (0,)
        assert traj.abort_time == 0.0
        assert traj.times.size == 1  # the initial sample was still recorded

    def test_multi_cell_hopping(self, rng):
        # driven truncated oscillator: the beable walks through several cells
        dim = 6
        number = bs.Operator(np.diag(np.arange(float(dim))), hermitian=True)
        lower = np.zeros((dim, dim))
        for n in range(1, dim):
            lower[n - 1, n] = np.sqrt(n)
        h = bs.Operator(number.entries + 0.9 * (lower + lower.T), hermitian=True)
        prop = bs.diagonalize(h)
        b = bs.from_hermitian(number, label="n")
        field = bs.VelocityField(bs.validate_commuting_set([b]), prop)
        state = bs.QuantumState(np.eye(dim)[0])
        traj = bs.integrate_trajectory(field, state, [0.2], t_final=4.0, output_dt=0.02)
        assert traj.status is bs.TrajectoryStatus.COMPLETED
        assert len(np.unique(traj.xis)) >= 3
        assert np.all(traj.lambdas >= -0.5)
        assert np.all(traj.lambdas < dim - 0.5)
        # the conserved level value drifts only at integrator tolerance
        level0 = bs.level_expectation(state, b, 0.2)
        for k in (10, 100, -1):
            st = bs.evolve(state, prop, traj.times[k])
            level = bs.level_expectation(st, b, traj.lambdas[k, 0])
            assert abs(level - level0) <= 1e-6

    def test_two_beable_integration_continuity(self, rng):
        _, prop, bset, state = random_model(rng, 4, 2)
        field = bs.VelocityField(bset, prop)
        lam0 = bs.sample_initial(state, bset, 3)
        traj = bs.integrate_trajectory(field, state, lam0, t_final=3.0, output_dt=0.05)
        if traj.status is bs.TrajectoryStatus.COMPLETED:
            steps = np.abs(np.diff(traj.lambdas, axis=0))
            assert np.max(steps) < 0.5  # no teleporting between samples

    def test_step_underflow_raises(self, rabi, monkeypatch):
        # a right-hand side the error control can never satisfy must surface
        # as a numeric error instead of spinning forever
        import beable_sim.dynamics as dyn

        def hopeless_step(rhs, t, y, h, k1):
            return y + h * k1, np.full_like(y, 1e6), k1

        monkeypatch.setattr(dyn, "_dp54_step", hopeless_step)
        from beable_sim.errors import NumericError
        with pytest.raises(NumericError, match="underflow"):
            bs.integrate_trajectory(rabi.field, rabi.state0, [1.2],
                                    t_final=1.0, output_dt=0.5)

    def test_output_dt_must_be_positive(self, rabi):
        with pytest.raises(InputError):
            bs.integrate_trajectory(rabi.field, rabi.state0, [1.2],
                                    t_final=1.0, output_dt=0.0)


class TestContinuityEquation:
    def test_random_systems(self, rng):
        # the central consistency requirement: dP/dt = -div J
        total = 0
        for dim, n_b in [(4, 1), (6, 2), (8, 3)]:
            _, prop, bset, state = random_model(rng, dim, n_b)
            field = bs.VelocityField(bset, prop)
            checked = 0
            tries = 0
            while checked < 34 and tries < 2000:
                tries += 1
                t = rng.uniform(0.0, 3.0)
                st = bs.evolve(state, prop, t)
                lam = np.array([rng.uniform(-0.5, b.n_cells - 0.5) for b in bset])
                resid = bs.continuity_residual(field, st, lam, h=1e-5)
                if resid is None:
                    continue
                checked += 1
                h = 1e-5
                s_p = bs.evolve(st, prop, h)
                s_m = bs.evolve(st, prop, -h)
                cells = [bs.cell_index(b, x) for b, x in zip(bset, lam)]
                dpdt = (bs.quantum_probability(s_p, bset, cells)
                        - bs.quantum_probability(s_m, bset, cells)) / (2 * h)
                assert resid <= 1e-6 * max(1.0, abs(dpdt))
            total += checked
        assert total >= 100
