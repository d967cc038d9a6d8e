import math

import numpy as np
import pytest

from rydsim.dynamics import (
    DensityMatrix,
    LindbladChannel,
    Segment,
    apply_unitary,
    coherence,
    evolve,
    hermiticity_defect,
    matrices_close,
    population,
    tensor,
)
from rydsim.units import TWO_PI

GR_BASIS = ("g", "r")
ATOM_BASIS = ("g", "r", "r'")
PAIR_BASIS = ("gg", "gr", "rg", "rr")

SX = np.array([[0, 1], [1, 0]], dtype=complex)
I2 = np.eye(2, dtype=complex)


def drive_hamiltonian(rabi_mhz, dim=3):
    omega = TWO_PI * rabi_mhz
    h = np.zeros((dim, dim), dtype=complex)
    h[0, 1] = h[1, 0] = omega / 2
    return h


def w_vector():
    return np.array([0, 1, 1, 0], dtype=complex) / math.sqrt(2)


class TestTensor:
    def test_identity(self):
        np.testing.assert_array_equal(tensor(I2, I2), np.eye(4))

    def test_projector_bookkeeping(self):
        # |r><r| on atom 1: eigenvalue 1 for rg, 0 for gr
        proj = tensor(np.diag([0.0, 1.0]), I2)
        rg = PAIR_BASIS.index("rg")
        gr = PAIR_BASIS.index("gr")
        assert proj[rg, rg] == 1.0
        assert proj[gr, gr] == 0.0

    def test_sigma_x_square_against_direct_product(self):
        sxx = tensor(SX, SX)
        direct = sxx @ sxx  # 4x4 multiplication oracle
        np.testing.assert_allclose(direct, np.eye(4), atol=1e-15)
        np.testing.assert_allclose(sxx @ sxx, direct, atol=0)

    def test_rejects_non_square(self):
        with pytest.raises(ValueError):
            tensor(np.ones((2, 3)), I2)


class TestEvolve:
    def test_pi_pulse_inverts_population(self):
        rho0 = DensityMatrix.pure("g", ATOM_BASIS)
        h = drive_hamiltonian(2.0)
        traj = evolve(rho0, [Segment(h, 0.25)])
        assert abs(traj[-1][1].population("r") - 1.0) < 1e-6

    def test_exponential_decay(self):
        rho0 = DensityMatrix.pure("r", ATOM_BASIS)
        jump = np.zeros((3, 3), dtype=complex)
        jump[2, 1] = 1.0  # r -> r'
        ch = LindbladChannel.from_rate(1.0 / 146.0, jump)
        traj = evolve(rho0, [Segment(np.zeros((3, 3), complex), 146.0)], [ch])
        assert abs(traj[-1][1].population("r") - math.exp(-1)) < 1e-4

    def test_pure_dephasing_coherence(self):
        gamma = 0.08
        t = 12.0
        rho0 = DensityMatrix.from_state_vector(np.array([1, 1]) / math.sqrt(2), GR_BASIS)
        ch = LindbladChannel.from_rate(gamma, np.diag([0.0, 1.0]).astype(complex))
        traj = evolve(rho0, [Segment(np.zeros((2, 2), complex), t)], [ch])
        expected = 0.5 * math.exp(-gamma * t / 2)
        assert abs(abs(coherence(traj[-1][1], "g", "r")) - expected) < 1e-6

    def test_trajectory_includes_boundaries(self):
        rho0 = DensityMatrix.pure("g", GR_BASIS)
        h = np.zeros((2, 2), complex)
        traj = evolve(rho0, [Segment(h, 1.0), Segment(h, 2.5)])
        times = [t for t, _ in traj]
        np.testing.assert_allclose(times, [0.0, 1.0, 3.5])

    def test_sample_dt_produces_interior_points(self):
        rho0 = DensityMatrix.pure("g", GR_BASIS)
        traj = evolve(rho0, [Segment(drive_hamiltonian(2.0, 2), 1.0)], sample_dt=0.25)
        assert len(traj) >= 5

    def test_dimension_mismatch_raises(self):
        rho0 = DensityMatrix.pure("g", GR_BASIS)
        with pytest.raises(ValueError):
            evolve(rho0, [Segment(np.zeros((3, 3), complex), 1.0)])

    def test_non_hermitian_hamiltonian_raises(self):
        h = np.zeros((2, 2), complex)
        h[0, 1] = 1.0  # no conjugate partner
        with pytest.raises(ValueError):
            Segment(h, 1.0)

    def test_bad_dt_raises(self):
        rho0 = DensityMatrix.pure("g", GR_BASIS)
        with pytest.raises(ValueError):
            evolve(rho0, [Segment(np.zeros((2, 2), complex), 1.0)], dt_max=0.0)


class TestEvolveInvariants:
    def setup_method(self):
        self.h = drive_hamiltonian(2.0)
        jump = np.zeros((3, 3), complex)
        jump[0, 1] = 1.0
        self.channels = [
            LindbladChannel.from_rate(1 / 80.0, jump),
            LindbladChannel.from_rate(1 / 40.0, np.diag([1.0, 0, 0]).astype(complex)),
        ]
        self.rho0 = DensityMatrix.pure("g", ATOM_BASIS)

    def test_trace_drift_bound(self):
        dt = 1e-3
        traj = evolve(self.rho0, [Segment(self.h, 10.0)], self.channels, dt_max=dt)
        for t, dm in traj:
            drift = abs(float(np.real(np.trace(dm.matrix))) - 1.0)
            assert drift < 1e-9 * (t / dt + 1)

    def test_hermiticity_and_positivity(self):
        traj = evolve(
            self.rho0, [Segment(self.h, 8.0)], self.channels, sample_dt=1.0
        )
        for _, dm in traj:
            assert hermiticity_defect(dm.matrix) <= 1e-10
            assert dm.min_eigenvalue() >= -1e-8

    def test_halving_dt_is_converged(self):
        # drive for the default scan horizon of the Rabi preset
        seg = [Segment(self.h, 12.0)]
        p1 = evolve(self.rho0, seg, self.channels, dt_max=1e-3)[-1][1]
        p2 = evolve(self.rho0, seg, self.channels, dt_max=5e-4)[-1][1]
        for label in ATOM_BASIS:
            assert abs(p1.population(label) - p2.population(label)) < 1e-8

    def test_matches_matrix_exponential_without_channels(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            a = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
            h = (a + a.conj().T) / 2
            vec = rng.normal(size=3) + 1j * rng.normal(size=3)
            rho0 = DensityMatrix.from_state_vector(vec, ATOM_BASIS)
            t = 1.3
            final = evolve(rho0, [Segment(h, t)])[-1][1].matrix
            w, v = np.linalg.eigh(h)
            u = (v * np.exp(-1j * w * t)) @ v.conj().T
            np.testing.assert_allclose(final, u @ rho0.matrix @ u.conj().T, atol=1e-8)


class TestStateAccessors:
    def test_population_examples(self):
        assert population(DensityMatrix.pure("g", GR_BASIS), "g") == 1.0
        w = DensityMatrix.from_state_vector(w_vector(), PAIR_BASIS)
        assert abs(population(w, "gr") - 0.5) < 1e-12
        mixed = DensityMatrix(np.eye(4) / 4, PAIR_BASIS)
        assert abs(population(mixed, "rr") - 0.25) < 1e-12

    def test_population_unknown_label(self):
        with pytest.raises(ValueError, match="unknown basis label"):
            population(DensityMatrix.pure("g", GR_BASIS), "x")

    def test_coherence_examples(self):
        w = DensityMatrix.from_state_vector(w_vector(), PAIR_BASIS)
        assert abs(coherence(w, "gr", "rg") - 0.5) < 1e-12

        mixture = DensityMatrix(np.diag([0, 0.5, 0.5, 0]).astype(complex), PAIR_BASIS)
        assert coherence(mixture, "gr", "rg") == 0

    def test_coherence_phase_shifted_state(self):
        # mixed single-excitation state with coherence alpha * e^{i phi}
        alpha, phi = 0.5, math.pi
        m = np.diag([0, 0.5, 0.5, 0]).astype(complex)
        m[1, 2] = alpha * np.exp(1j * phi)
        m[2, 1] = np.conj(m[1, 2])
        rho = DensityMatrix(m, PAIR_BASIS)
        assert abs(coherence(rho, "gr", "rg") - (-0.5)) < 1e-12

    def test_coherence_requires_distinct_labels(self):
        w = DensityMatrix.from_state_vector(w_vector(), PAIR_BASIS)
        with pytest.raises(ValueError):
            coherence(w, "gr", "gr")

    def test_apply_unitary(self):
        rho = DensityMatrix.pure("g", GR_BASIS)
        u = np.array([[0, 1], [1, 0]], dtype=complex)
        assert apply_unitary(rho, u).population("r") == 1.0


class TestMatrixHelpers:
    def test_matrices_close_uses_tolerance(self):
        a = np.zeros((2, 2))
        b = np.full((2, 2), 1e-12)
        assert matrices_close(a, b, 1e-10)
        assert not matrices_close(a, b, 1e-14)
        assert not matrices_close(a, np.zeros((3, 3)), 1.0)

    def test_density_matrix_rejects_bad_input(self):
        with pytest.raises(ValueError):
            DensityMatrix(np.eye(3), ("a", "b"))  # label count mismatch
        with pytest.raises(ValueError):
            DensityMatrix(2 * np.eye(2), ("a", "b"))  # trace 4
        m = np.array([[0.5, 0.5], [0.2, 0.5]], dtype=complex)
        with pytest.raises(ValueError):
            DensityMatrix(m, ("a", "b"))  # not Hermitian

    def test_density_matrix_is_immutable(self):
        dm = DensityMatrix.pure("g", GR_BASIS)
        with pytest.raises(ValueError):
            dm.matrix[0, 0] = 0.0
