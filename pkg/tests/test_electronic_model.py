"""Tests for the diabatic model, adiabatic states, gauges and overlaps."""

import numpy as np
import pytest

from ldrdyn.electronic_model import (
    AdiabaticSet,
    DiabaticModel,
    ElectronicModel,
    GaugeMode,
    GaugeVariant,
    adiabatic_states,
    adiabatize,
    apply_gauge,
    berry_phase,
    ci_locus,
    circle_loop,
    diabatic_potential,
    electronic_overlap,
    mixing_angle,
    wilson_loop,
    wilson_phase,
)
from ldrdyn.exceptions import (
    ConfigurationError,
    DegenerateSegmentError,
    NoIsolatedIntersectionError,
)


@pytest.fixture
def random_points():
    return np.random.default_rng(5).uniform(-3.0, 3.0, size=(40, 2))


class TestDiabaticModel:
    """Linear coupling model."""

    def test_potential_values(self, ci_model):
        V = diabatic_potential(ci_model, (0.5, -1.0))
        assert V[0, 0] == pytest.approx(0.625 + 0.5)
        assert V[1, 1] == pytest.approx(0.625 + 1.0 - 0.5)
        assert V[0, 1] == V[1, 0] == pytest.approx(-0.2)

    def test_vectorized(self, ci_model, random_points):
        V = ci_model.diabatic_potential(random_points.reshape(8, 5, 2))
        assert V.shape == (8, 5, 2, 2)
        np.testing.assert_array_equal(V, np.swapaxes(V, -1, -2))

    def test_protocol(self, ci_model):
        assert isinstance(ci_model, ElectronicModel)
        assert ci_model.nstates == 2 and ci_model.ndim == 2

    def test_ci_locus(self, ci_model):
        x, y = ci_locus(ci_model)
        assert (x, y) == (0.5, 0.0)
        energies, _ = adiabatize(diabatic_potential(ci_model, (x, y)))
        assert energies[1] - energies[0] == pytest.approx(0.0, abs=1e-14)

    def test_no_intersection(self):
        with pytest.raises(NoIsolatedIntersectionError):
            ci_locus(DiabaticModel(kappa=0.0))

    def test_non_finite_parameter(self):
        with pytest.raises(ConfigurationError):
            DiabaticModel(lam=float("nan"))


class TestAdiabatize:
    """Closed-form 2x2 eigen-decomposition."""

    def test_eigen_equation(self, ci_model, random_points):
        V = ci_model.diabatic_potential(random_points)
        energies, vectors = adiabatize(V)
        for k in range(len(random_points)):
            for a in range(2):
                np.testing.assert_allclose(V[k] @ vectors[k, :, a], energies[k, a] * vectors[k, :, a], atol=1e-12)
        np.testing.assert_allclose(energies, np.linalg.eigvalsh(V), atol=1e-12)
        assert np.all(energies[:, 0] <= energies[:, 1])

    def test_residual_over_ten_thousand_points(self, ci_model):
        """V u_a = E_a u_a within 1e-12 across the production box."""
        points = np.random.default_rng(17).uniform(-6.0, 6.0, size=(10_000, 2))
        V = ci_model.diabatic_potential(points)
        energies, vectors = adiabatize(V)
        residual = np.einsum("kst,kta->ksa", V, vectors) - vectors * energies[:, None, :]
        assert np.max(np.abs(residual)) < 1e-12

    def test_orthonormal(self, ci_model, random_points):
        _, vectors = adiabatize(ci_model.diabatic_potential(random_points))
        gram = np.einsum("ksa,ksb->kab", vectors, vectors)
        np.testing.assert_allclose(gram, np.broadcast_to(np.eye(2), gram.shape), atol=1e-14)

    def test_mixing_angle_oracle(self):
        V = np.array([[0.3, 0.2], [0.2, -0.1]])
        theta = mixing_angle(V)
        assert theta == pytest.approx(0.5 * np.arctan2(0.4, -0.4))
        _, vectors = adiabatize(V)
        np.testing.assert_allclose(vectors[:, 0], [np.cos(theta), -np.sin(theta)])

    def test_degenerate_returns_diabatic_states(self):
        energies, vectors = adiabatize(np.eye(2) * 0.7)
        np.testing.assert_array_equal(vectors, np.eye(2))
        np.testing.assert_array_equal(energies, [0.7, 0.7])

    def test_general_fallback(self):
        V = np.diag([3.0, 1.0, 2.0])
        energies, vectors = adiabatize(V)
        np.testing.assert_allclose(energies, [1.0, 2.0, 3.0])
        assert vectors.shape == (3, 3)


class TestGauge:
    """Gauge modes and strategies."""

    def test_random_needs_seed(self):
        with pytest.raises(ConfigurationError):
            GaugeMode(GaugeVariant.RANDOM_PHASE)

    def test_fixed_positive(self, ci_model, random_points):
        aset = adiabatic_states(ci_model, random_points, GaugeMode())
        v = aset.vectors
        pivot = np.argmax(np.abs(v), axis=1)
        leading = np.take_along_axis(v, pivot[:, None, :], axis=1)[:, 0, :]
        np.testing.assert_allclose(leading.imag, 0.0, atol=1e-15)
        assert np.all(leading.real > 0)

    def test_random_phase_unit_modulus(self, ci_model, random_points):
        plain = adiabatic_states(ci_model, random_points)
        gauged = apply_gauge(plain, GaugeMode(GaugeVariant.RANDOM_PHASE, seed=3))
        np.testing.assert_allclose(np.abs(gauged.vectors), np.abs(plain.vectors), atol=1e-15)
        factors = gauged.vectors / np.where(plain.vectors == 0, 1, plain.vectors)
        expected = np.exp(-1j * gauged.phases)[:, None, :]
        mask = plain.vectors != 0
        np.testing.assert_allclose(factors[mask], np.broadcast_to(expected, factors.shape)[mask], atol=1e-14)

    def test_seed_reproducible(self, ci_model, random_points):
        mode = GaugeMode(GaugeVariant.RANDOM_PHASE, seed=9)
        a = adiabatic_states(ci_model, random_points, mode)
        b = adiabatic_states(ci_model, random_points, mode)
        np.testing.assert_array_equal(a.vectors, b.vectors)
        c = adiabatic_states(ci_model, random_points, GaugeMode(GaugeVariant.RANDOM_PHASE, seed=10))
        assert not np.array_equal(a.vectors, c.vectors)

    def test_random_sign(self, ci_model, random_points):
        plain = adiabatic_states(ci_model, random_points)
        signed = apply_gauge(plain, GaugeMode(GaugeVariant.RANDOM_SIGN, seed=1))
        ratio = (signed.vectors / plain.vectors)[:, 0, :]
        np.testing.assert_allclose(np.abs(ratio.real), 1.0, atol=1e-14)
        np.testing.assert_allclose(ratio.imag, 0.0, atol=1e-14)

    def test_adiabatic_set_defaults(self):
        aset = AdiabaticSet(energies=np.zeros((3, 2)), vectors=np.zeros((3, 2, 2), dtype=complex))
        assert aset.phases.shape == (3, 2)
        assert aset.nnodes == 3 and aset.nstates == 2


class TestOverlapTensor:
    """Electronic overlaps between nodes."""

    @pytest.fixture
    def aset(self, ci_model, small_basis):
        return adiabatic_states(
            ci_model, small_basis.nodes, GaugeMode(GaugeVariant.RANDOM_PHASE, seed=4)
        )

    def test_hermitian_identity_blocks(self, aset):
        A = electronic_overlap(aset)
        np.testing.assert_array_equal(A.matrix, A.matrix.conj().T)
        for n in (0, 17, 255):
            np.testing.assert_array_equal(A.block(n, n), np.eye(2))

    def test_entries(self, aset):
        A = electronic_overlap(aset)
        v = aset.vectors
        expected = np.vdot(v[3, :, 1], v[40, :, 0])
        assert A.entry(3, 1, 40, 0) == pytest.approx(expected, abs=1e-15)

    def test_gauge_covariance(self, ci_model, small_basis, aset):
        """A' = D^H A D between two gauges."""
        plain = adiabatic_states(ci_model, small_basis.nodes)
        A0 = electronic_overlap(plain).matrix
        A1 = electronic_overlap(aset).matrix
        d = np.exp(-1j * aset.phases).ravel()
        np.testing.assert_allclose(A1, d.conj()[:, None] * A0 * d[None, :], atol=1e-14)

    def test_same_state(self, aset):
        A = electronic_overlap(aset).same_state()
        blocks = A.matrix.reshape(aset.nnodes, 2, aset.nnodes, 2)
        assert np.all(blocks[:, 0, :, 1] == 0)
        assert np.all(blocks[:, 1, :, 0] == 0)
        np.testing.assert_array_equal(A.block(5, 5), np.eye(2))


class TestWilsonLoop:
    """Geometric phase from consecutive overlaps."""

    def test_enclosing_loop_phase_pi(self, ci_model):
        loop = circle_loop((0.5, 0.0), 0.3, 256)
        W = wilson_loop(ci_model, loop)
        assert wilson_phase(W) == pytest.approx(np.pi, abs=1e-6)
        assert abs(berry_phase(W)) == pytest.approx(np.pi, abs=1e-6)

    def test_non_enclosing_loop_phase_zero(self, ci_model):
        W = wilson_loop(ci_model, circle_loop((2.0, 2.0), 0.1, 64))
        assert wilson_phase(W) == pytest.approx(0.0, abs=1e-6)
        assert abs(W) == pytest.approx(1.0, abs=1e-3)

    def test_gauge_invariant(self, ci_model):
        loop = circle_loop((0.5, 0.0), 0.3, 256)
        reference = wilson_loop(ci_model, loop, gauge=GaugeMode())
        for seed in (1, 2, 3):
            for variant in (GaugeVariant.RANDOM_PHASE, GaugeVariant.RANDOM_SIGN):
                W = wilson_loop(ci_model, loop, gauge=GaugeMode(variant, seed=seed))
                assert abs(W - reference) < 1e-13

    def test_product_of_cosines_oracle(self, ci_model):
        """Real closed-form states give W = prod cos(delta theta)."""
        loop = circle_loop((0.5, 0.0), 0.3, 256)
        theta = mixing_angle(ci_model.diabatic_potential(loop))
        expected = np.prod(np.cos(np.roll(theta, -1) - theta))
        assert abs(wilson_loop(ci_model, loop) - expected) < 1e-12

    def test_refinement_increases_magnitude(self, ci_model):
        mags = [abs(wilson_loop(ci_model, circle_loop((0.5, 0.0), 0.3, n))) for n in (64, 256, 1024)]
        assert mags[0] < mags[1] < mags[2] <= 1.0
        assert mags[2] > 0.98

    def test_upper_state_also_pi(self, ci_model):
        W = wilson_loop(ci_model, circle_loop((0.5, 0.0), 0.3, 256), alpha=1)
        assert wilson_phase(W) == pytest.approx(np.pi, abs=1e-6)

    def test_degenerate_segment(self, ci_model):
        loop = np.array([[0.4, 0.0], [0.6, 0.0], [0.5, 1.0]])
        with pytest.raises(DegenerateSegmentError) as excinfo:
            wilson_loop(ci_model, loop)
        assert excinfo.value.segment == 0

    def test_loop_validation(self, ci_model):
        with pytest.raises(ConfigurationError):
            wilson_loop(ci_model, np.array([[0.0, 1.0], [1.0, 0.0]]))
        closed = np.array([[0.0, 1.0], [1.0, 0.0], [0.0, -1.0], [0.0, 1.0]])
        with pytest.raises(ConfigurationError):
            wilson_loop(ci_model, closed)

    def test_circle_counter_clockwise(self):
        loop = circle_loop((1.0, -1.0), 2.0, 4)
        np.testing.assert_allclose(loop, [[3.0, -1.0], [1.0, 1.0], [-1.0, -1.0], [1.0, -3.0]], atol=1e-15)
