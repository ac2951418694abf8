"""Tests for the LDR Hamiltonian, time stepping and observables."""

import logging

import numpy as np
import pytest
import scipy.linalg
from scipy.integrate import trapezoid

from ldrdyn.electronic_model import (
    DiabaticModel,
    GaugeMode,
    GaugeVariant,
    OverlapTensor,
    adiabatic_states,
    electronic_overlap,
)
from ldrdyn.exceptions import (
    AssemblyError,
    ConfigurationError,
    InsufficientCoverageError,
    NumericalBlowupError,
)
from ldrdyn.ldr_propagator import (
    CoefficientVector,
    GaussianPacket,
    OperatorKind,
    VibronicHamiltonian,
    assemble_hamiltonian,
    build_ldr_system,
    energy,
    expectation,
    initial_coefficients,
    local_coherence,
    nuclear_density,
    propagate,
    reduced_densities,
    rk4_step,
)
from ldrdyn.nuclear_basis import DEFAULT_WIDTH_FACTOR, build_basis
from ldrdyn.patterns.observer import Subject
from ldrdyn.series import OBSERVABLE_COLUMNS


class ChainModel:
    """One-coordinate two-state model with a position-dependent coupling."""

    nstates = 2
    ndim = 1

    def diabatic_potential(self, points):
        x = np.asarray(points, dtype=float)[..., 0]
        V = np.empty(x.shape + (2, 2))
        V[..., 0, 0] = 0.5 * x**2 + 0.4 * x
        V[..., 1, 1] = 0.5 * x**2 + 0.8 - 0.4 * x
        V[..., 0, 1] = V[..., 1, 0] = 0.3 * x + 0.1
        return V


def _primitive(x, c, w):
    return (np.pi * w**2) ** -0.25 * np.exp(-((x - c) ** 2) / (2.0 * w**2))


@pytest.fixture(scope="module")
def chain():
    """3-node x 2-state LDR system in a random gauge."""
    basis = build_basis([(-1.5, 1.5, 3, DEFAULT_WIDTH_FACTOR)])
    return build_ldr_system(ChainModel(), basis, GaugeMode(GaugeVariant.RANDOM_PHASE, seed=8))


def _normalized(values, nstates=2):
    values = np.asarray(values, dtype=complex)
    return CoefficientVector(values=values / np.linalg.norm(values), time=0.0, nstates=nstates)


class TestAssembleHamiltonian:
    """H = diag(E) + T (x) A."""

    def test_zero_kinetic_is_diagonal(self, chain):
        aset = chain.adiabatic
        H = assemble_hamiltonian(aset.energies, np.zeros((3, 3)), chain.overlaps)
        np.testing.assert_array_equal(H.matrix, np.diag(aset.energies.ravel()).astype(complex))

    def test_hermitian_real_diagonal(self, chain):
        H = chain.hamiltonian.matrix
        np.testing.assert_allclose(H, H.conj().T, atol=1e-12)
        assert np.all(np.diag(H).imag == 0)

    def test_brute_force_matrix(self, chain):
        """Matches explicit quadrature of the kinetic term and direct electronic overlaps."""
        basis = chain.basis
        factor = basis.factors[0]
        prim = factor.primitive
        x = np.linspace(-12.0, 12.0, 12001)
        g = np.stack([_primitive(x, c, prim.width) for c in prim.centers], axis=1)
        g_dd = g * ((x[:, None] - prim.centers) ** 2 / prim.width**4 - 1.0 / prim.width**2)
        chi = g @ factor.transform
        chi_dd = g_dd @ factor.transform
        T = trapezoid(chi[:, :, None] * (-0.5 / prim.mass) * chi_dd[:, None, :], x, axis=0)

        v = chain.adiabatic.vectors
        E = chain.adiabatic.energies
        brute = np.zeros((6, 6), dtype=complex)
        for m in range(3):
            for b in range(2):
                for n in range(3):
                    for a in range(2):
                        value = T[m, n] * np.vdot(v[m, :, b], v[n, :, a])
                        if m == n and a == b:
                            value += E[m, a]
                        brute[2 * m + b, 2 * n + a] = value
        np.testing.assert_allclose(chain.hamiltonian.matrix, brute, atol=1e-10)

    def test_same_state_overlaps_block_decouple(self, ci_model, small_basis):
        system = build_ldr_system(ci_model, small_basis, decoupled=True)
        blocks = system.hamiltonian.matrix.reshape(small_basis.size, 2, small_basis.size, 2)
        assert np.all(blocks[:, 0, :, 1] == 0)
        assert np.all(blocks[:, 1, :, 0] == 0)

    def test_dimension_mismatch(self, chain):
        with pytest.raises(AssemblyError):
            assemble_hamiltonian(chain.adiabatic.energies, np.zeros((4, 4)), chain.overlaps)
        with pytest.raises(AssemblyError):
            assemble_hamiltonian(chain.adiabatic.energies[:2], np.zeros((2, 2)), chain.overlaps)
        with pytest.raises(AssemblyError):
            assemble_hamiltonian(chain.adiabatic.energies.ravel(), np.zeros((3, 3)), chain.overlaps)

    def test_model_basis_dimension_mismatch(self, ci_model):
        basis = build_basis([(-1.5, 1.5, 3, DEFAULT_WIDTH_FACTOR)])
        with pytest.raises(AssemblyError):
            build_ldr_system(ci_model, basis)


class TestRK4:
    """Classical fourth-order Runge-Kutta."""

    def test_zero_hamiltonian(self):
        H = VibronicHamiltonian(np.zeros((4, 4), dtype=complex), 2, 2)
        C = _normalized([1.0, 2.0j, -0.5, 0.3])
        np.testing.assert_array_equal(rk4_step(H, C, 0.1).values, C.values)

    def test_diagonal_taylor_polynomial(self):
        E = np.array([0.3, -1.2, 2.0, 0.0])
        dt = 0.1
        H = VibronicHamiltonian(np.diag(E).astype(complex), 2, 2)
        C = _normalized(np.ones(4))
        new = rk4_step(H, C, dt).values
        z = -1j * E * dt
        taylor = 1 + z + z**2 / 2 + z**3 / 6 + z**4 / 24
        np.testing.assert_allclose(new, taylor * C.values, atol=1e-15)
        deviation = np.abs(new - np.exp(z) * C.values)
        assert np.all(deviation <= np.abs(E * dt) ** 5 / 120 + 1e-17)

    def test_norm_error_order(self):
        """Halving dt shrinks the one-step norm error by far more than 16."""
        H = VibronicHamiltonian(np.diag([1.0, 1.5]).astype(complex), 1, 2)
        C = _normalized([1.0, 1.0])
        errors = [abs(rk4_step(H, C, dt).norm - 1.0) for dt in (0.2, 0.1)]
        assert errors[0] / errors[1] > 30

    def test_time_advances(self, chain):
        C = _normalized(np.ones(6))
        assert rk4_step(chain.hamiltonian, C, 0.25).time == pytest.approx(0.25)

    def test_invalid_dt(self, chain):
        with pytest.raises(ConfigurationError):
            rk4_step(chain.hamiltonian, _normalized(np.ones(6)), 0.0)

    def test_blowup(self):
        H = VibronicHamiltonian(np.full((2, 2), 1e300, dtype=complex), 1, 2)
        with np.errstate(over="ignore", invalid="ignore"):
            with pytest.raises(NumericalBlowupError):
                rk4_step(H, _normalized([1.0, 1.0]), 1.0)

    def test_matches_matrix_exponential(self, chain):
        """RK4 at dt = 1e-3 agrees with expm(-iHt) over t = 10 within 1e-8."""
        rng = np.random.default_rng(21)
        C = _normalized(rng.normal(size=6) + 1j * rng.normal(size=6))
        exact = scipy.linalg.expm(-1j * chain.hamiltonian.matrix * 10.0) @ C.values
        for _ in range(10000):
            C = rk4_step(chain.hamiltonian, C, 1e-3)
        np.testing.assert_allclose(C.values, exact, atol=1e-8)


class TestInitialCoefficients:
    """Projection of the Gaussian packet onto the vibronic basis."""

    def test_captured_norm_production_basis(self, ci_model):
        basis = build_basis([(-6.0, 6.0, 32, DEFAULT_WIDTH_FACTOR)] * 2)
        aset = adiabatic_states(ci_model, basis.nodes)
        C = initial_coefficients(GaussianPacket(), basis, aset)
        assert C.captured_norm >= 0.999
        assert C.norm == pytest.approx(1.0, abs=1e-12)

    def test_diagonal_model_single_channel(self, small_basis):
        model = DiabaticModel(kappa=0.0, lam=0.0, delta=1.0)
        aset = adiabatic_states(model, small_basis.nodes)
        C = initial_coefficients(GaussianPacket(), small_basis, aset).as_matrix()
        assert np.all(C[:, 0] == 0)
        assert np.sum(np.abs(C[:, 1]) ** 2) == pytest.approx(1.0, abs=1e-12)

    def test_gauge_leaves_magnitudes(self, ci_model, small_basis):
        plain = adiabatic_states(ci_model, small_basis.nodes)
        gauged = adiabatic_states(ci_model, small_basis.nodes, GaugeMode(GaugeVariant.RANDOM_PHASE, seed=2))
        a = initial_coefficients(GaussianPacket(), small_basis, plain).as_matrix()
        b = initial_coefficients(GaussianPacket(), small_basis, gauged).as_matrix()
        np.testing.assert_allclose(np.abs(a), np.abs(b), atol=1e-15)

    def test_center_outside_basis(self, ci_model, small_basis):
        aset = adiabatic_states(ci_model, small_basis.nodes)
        with pytest.raises(ConfigurationError):
            initial_coefficients(GaussianPacket(center=(-9.0, 0.0)), small_basis, aset)

    def test_insufficient_coverage(self, ci_model):
        basis = build_basis([(-2.0, 2.0, 8, DEFAULT_WIDTH_FACTOR)] * 2)
        aset = adiabatic_states(ci_model, basis.nodes)
        with pytest.raises(InsufficientCoverageError) as excinfo:
            initial_coefficients(GaussianPacket(center=(0.0, 0.0), widths=(3.0, 3.0)), basis, aset)
        assert excinfo.value.captured_norm < 0.99

    def test_packet_validation(self):
        with pytest.raises(ConfigurationError):
            GaussianPacket(center=(0.0, 0.0), widths=(1.0,))
        with pytest.raises(ConfigurationError):
            GaussianPacket(widths=(1.0, 0.0))


class TestObservables:
    """Expectation values, coherence and reduced densities."""

    @pytest.fixture
    def state(self, ci_model, small_basis):
        system = build_ldr_system(
            ci_model, small_basis, GaugeMode(GaugeVariant.RANDOM_PHASE, seed=6)
        )
        rng = np.random.default_rng(3)
        n = 2 * small_basis.size
        C = _normalized(rng.normal(size=n) + 1j * rng.normal(size=n))
        return system, C

    def test_identity_gives_norm(self, state):
        system, C = state
        N = system.basis.size
        assert expectation(C, system.overlaps, OperatorKind.ELECTRONIC, np.eye(2)).real == pytest.approx(C.norm)
        assert expectation(C, system.overlaps, OperatorKind.NUCLEAR, np.ones(N)).real == pytest.approx(C.norm)
        full = expectation(C, system.overlaps, OperatorKind.NUCLEAR, np.eye(N))
        assert full.real == pytest.approx(C.norm, abs=1e-12)
        assert abs(full.imag) < 1e-12

    def test_per_node_projector(self, state):
        system, C = state
        N = system.basis.size
        O = np.broadcast_to(np.diag([0.0, 1.0]), (N, 2, 2))
        P1 = expectation(C, system.overlaps, OperatorKind.ELECTRONIC, O).real
        assert P1 == pytest.approx(np.sum(np.abs(C.as_matrix()[:, 1]) ** 2), abs=1e-14)

    def test_position(self, state):
        system, C = state
        x = system.basis.nodes[:, 0]
        expected = np.sum(x * np.sum(np.abs(C.as_matrix()) ** 2, axis=1))
        assert expectation(C, system.overlaps, OperatorKind.NUCLEAR, x).real == pytest.approx(expected)
        full = expectation(C, system.overlaps, OperatorKind.NUCLEAR, np.diag(x)).real
        assert full == pytest.approx(expected, abs=1e-12)

    def test_dimension_mismatch(self, state):
        system, C = state
        with pytest.raises(AssemblyError):
            expectation(C, system.overlaps, OperatorKind.ELECTRONIC, np.eye(3))
        with pytest.raises(AssemblyError):
            expectation(C, system.overlaps, OperatorKind.NUCLEAR, np.ones(5))

    def test_local_coherence(self):
        single = CoefficientVector(np.array([0.6, 0.0, 0.8, 0.0], dtype=complex), 0.0, 2)
        assert local_coherence(single, 0) == 0
        equal = CoefficientVector(np.array([1.0, 1.0, 0.0, 0.0], dtype=complex) / np.sqrt(2), 0.0, 2)
        assert abs(local_coherence(equal, 0)) == pytest.approx(0.5)

    def test_reduced_densities(self, state):
        system, C = state
        rho = reduced_densities(C, system.overlaps)
        np.testing.assert_allclose(rho.nuclear, rho.nuclear.conj().T, atol=1e-12)
        np.testing.assert_allclose(rho.electronic, rho.electronic.conj().T, atol=1e-12)
        assert np.trace(rho.nuclear).real == pytest.approx(C.norm, abs=1e-10)
        assert np.trace(rho.electronic).real == pytest.approx(C.norm, abs=1e-10)
        assert np.linalg.eigvalsh(rho.electronic).min() >= -1e-10
        assert 0.5 - 1e-10 <= rho.purity <= 1.0 + 1e-10

    def test_energy_real_and_matches(self, state):
        system, C = state
        H = system.hamiltonian.matrix
        assert energy(system.hamiltonian, C) == pytest.approx(np.vdot(C.values, H @ C.values).real)

    def test_density_recovers_packet(self, ci_model):
        basis = build_basis([(-6.0, 6.0, 24, DEFAULT_WIDTH_FACTOR)] * 2)
        system = build_ldr_system(ci_model, basis, GaugeMode(GaugeVariant.RANDOM_PHASE, seed=1))
        packet = GaussianPacket()
        C = initial_coefficients(packet, basis, system.adiabatic)

        axes = [np.linspace(-4.0, 4.0, 41)] * 2
        rho = nuclear_density(C, system.overlaps, basis, axes)
        np.testing.assert_allclose(rho, packet.amplitude(axes) ** 2, atol=1e-3)

        wide = [np.linspace(-6.0, 6.0, 121)] * 2
        total = trapezoid(trapezoid(nuclear_density(C, system.overlaps, basis, wide), wide[1]), wide[0])
        assert total == pytest.approx(1.0, abs=1e-3)


class TestPropagate:
    """Recording loop and physical limits."""

    def test_zero_final_time(self, ci_model, small_basis):
        system = build_ldr_system(ci_model, small_basis)
        C0 = initial_coefficients(GaussianPacket(), small_basis, system.adiabatic)
        result = propagate(system, C0, 0.01, 0.0, 10, probe_node=0)
        assert len(result.observables) == 1
        assert list(result.observables.columns) == OBSERVABLE_COLUMNS
        assert result.observables["pop_di_1"].iloc[0] == pytest.approx(1.0, abs=1e-12)

    def test_record_stride_and_snapshots(self, ci_model, small_basis, caplog):
        system = build_ldr_system(ci_model, small_basis)
        C0 = initial_coefficients(GaussianPacket(), small_basis, system.adiabatic)
        with caplog.at_level(logging.WARNING):
            result = propagate(system, C0, 0.01, 0.1, 3, probe_node=0, snapshot_times=(0.0, 0.05, 5.0))
        assert list(result.observables["t"]) == [0.0, 0.03, 0.06, 0.09, 0.1]
        assert list(result.diagnostics["t"]) == [0.0, 0.03, 0.06, 0.09, 0.1]
        assert sorted(result.snapshots) == [0.0, 0.05]
        assert result.snapshots[0.05].time == 0.05
        assert result.final.time == 0.1
        assert "beyond the final time" in caplog.text

    def test_populations_sum_to_norm(self, ci_model, small_basis):
        system = build_ldr_system(ci_model, small_basis)
        C0 = initial_coefficients(GaussianPacket(), small_basis, system.adiabatic)
        obs = propagate(system, C0, 0.005, 0.5, 10, probe_node=5).observables
        np.testing.assert_allclose(obs["pop_ad_0"] + obs["pop_ad_1"], obs["norm"], atol=1e-12)
        np.testing.assert_allclose(obs["pop_di_0"] + obs["pop_di_1"], obs["norm"], atol=1e-12)
        np.testing.assert_allclose(obs["norm"], 1.0, atol=1e-8)

    def test_harmonic_limit(self):
        """Without coupling the packet oscillates as -cos(t) on one surface."""
        model = DiabaticModel(kappa=0.0, lam=0.0, delta=1.0)
        basis = build_basis([(-6.0, 6.0, 32, DEFAULT_WIDTH_FACTOR), (-4.5, 4.5, 16, DEFAULT_WIDTH_FACTOR)])
        system = build_ldr_system(model, basis)
        C0 = initial_coefficients(GaussianPacket(), basis, system.adiabatic)
        obs = propagate(system, C0, 0.005, np.pi, 20, probe_node=0).observables

        np.testing.assert_allclose(obs["x_mean"], -np.cos(obs["t"]), atol=1e-3)
        np.testing.assert_allclose(obs["y_mean"], 0.0, atol=1e-8)
        assert np.all(obs["pop_ad_0"] == 0)
        np.testing.assert_allclose(obs["pop_ad_1"], obs["pop_ad_1"].iloc[0], atol=1e-10)

    def test_same_state_overlaps_freeze_populations(self, ci_model, small_basis):
        system = build_ldr_system(
            ci_model, small_basis, GaugeMode(GaugeVariant.RANDOM_PHASE, seed=4), decoupled=True
        )
        C0 = initial_coefficients(GaussianPacket(), small_basis, system.adiabatic)
        obs = propagate(system, C0, 0.005, 1.0, 10, probe_node=0).observables
        for column in ("pop_ad_0", "pop_ad_1"):
            np.testing.assert_allclose(obs[column], obs[column].iloc[0], atol=1e-8)

    def test_gauge_robustness(self, ci_model, small_basis):
        """Two random gauges give the same gauge-invariant records and densities."""
        runs = []
        for seed in (1, 2):
            system = build_ldr_system(
                ci_model, small_basis, GaugeMode(GaugeVariant.RANDOM_PHASE, seed=seed)
            )
            C0 = initial_coefficients(GaussianPacket(), small_basis, system.adiabatic)
            result = propagate(system, C0, 0.005, 1.0, 20, probe_node=100, snapshot_times=(1.0,))
            axes = [np.linspace(-5.0, 5.0, 31)] * 2
            rho = nuclear_density(result.snapshots[1.0], system.overlaps, small_basis, axes)
            runs.append((result.observables, rho))

        (obs_a, rho_a), (obs_b, rho_b) = runs
        for column in ("x_mean", "y_mean", "pop_ad_0", "pop_ad_1", "pop_di_0", "pop_di_1", "coh_abs", "norm"):
            np.testing.assert_allclose(obs_a[column], obs_b[column], atol=1e-9)
        np.testing.assert_allclose(rho_a, rho_b, atol=1e-9)

    def test_events(self, ci_model, small_basis):
        events = Subject()
        seen = []
        events.subscribe(lambda name, payload: seen.append(name))
        system = build_ldr_system(ci_model, small_basis)
        C0 = initial_coefficients(GaussianPacket(), small_basis, system.adiabatic)
        propagate(system, C0, 0.01, 0.02, 1, probe_node=0, events=events)
        assert seen == ["propagate:start"] + ["propagate:record"] * 3 + ["propagate:done"]

    def test_invalid_arguments(self, ci_model, small_basis):
        system = build_ldr_system(ci_model, small_basis)
        C0 = initial_coefficients(GaussianPacket(), small_basis, system.adiabatic)
        with pytest.raises(ConfigurationError):
            propagate(system, C0, 0.0, 1.0, 1, probe_node=0)
        with pytest.raises(ConfigurationError):
            propagate(system, C0, 0.01, -1.0, 1, probe_node=0)
        with pytest.raises(ConfigurationError):
            propagate(system, C0, 0.01, 1.0, 0, probe_node=0)
        with pytest.raises(ConfigurationError):
            propagate(system, C0, 0.01, 1.0, 1, probe_node=10**6)


def test_overlap_tensor_identity_is_blocked_identity():
    """A blocked identity tensor turns H into two independent single-surface blocks."""
    N, M = 4, 2
    A = OverlapTensor(np.kron(np.ones((N, N)), np.eye(M)).astype(complex), N, M)
    K = np.random.default_rng(0).normal(size=(N, N))
    K = K + K.T
    H = assemble_hamiltonian(np.zeros((N, M)), K, A).matrix
    np.testing.assert_allclose(H[0::2, 0::2], K)
    np.testing.assert_allclose(H[1::2, 1::2], K)
    assert np.all(H[0::2, 1::2] == 0)


def test_electronic_overlap_used_by_system(chain):
    np.testing.assert_array_equal(chain.overlaps.matrix, electronic_overlap(chain.adiabatic).matrix)
