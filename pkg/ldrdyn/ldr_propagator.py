"""Vibronic Hamiltonian in the local diabatic representation and its propagation.

The wavefunction is expanded in products of localized nuclear states and the
adiabatic electronic states computed at each node,

    Psi(r, R, t) = sum_{n, alpha} C_{n alpha}(t) phi_alpha(r; R_n) chi_n(R),

and the coefficients obey ``i dC/dt = H C`` with

    H_{m beta, n alpha} = E_beta(R_m) delta_mn delta_beta_alpha + T_mn A_{m beta, n alpha}.

Coefficient vectors are node-major: index ``n * nstates + alpha``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from ldrdyn.electronic_model import (
    AdiabaticSet,
    ElectronicModel,
    GaugeMode,
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
from ldrdyn.nuclear_basis import NuclearBasisND
from ldrdyn.patterns.observer import Subject
from ldrdyn.series import DIAGNOSTIC_COLUMNS, OBSERVABLE_COLUMNS, record_time, series_frame

logger = logging.getLogger(__name__)

MIN_CAPTURED_NORM = 0.99
_DENSITY_CHUNK = 4096


# ---------------------------------------------------------------------------
# Hamiltonian
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VibronicHamiltonian:
    """Dense Hermitian LDR Hamiltonian of dimension ``nnodes * nstates``."""

    matrix: np.ndarray
    nnodes: int
    nstates: int

    @property
    def dimension(self) -> int:
        return self.nnodes * self.nstates

    def spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvalsh(self.matrix))))


def assemble_hamiltonian(
    energies: np.ndarray, kinetic: np.ndarray, overlaps: OverlapTensor
) -> VibronicHamiltonian:
    """Build H from nodal adiabatic energies, the localized kinetic matrix and A.

    The potential enters only through its values at the nodes.

    Raises:
        AssemblyError: If the three inputs disagree on node or state counts.
    """
    energies = np.asarray(energies, dtype=float)
    kinetic = np.asarray(kinetic, dtype=float)
    if energies.ndim != 2:
        raise AssemblyError(f"energies must be (nodes, states), got shape {energies.shape}")
    N, M = energies.shape
    if kinetic.shape != (N, N):
        raise AssemblyError(f"kinetic matrix {kinetic.shape} does not match {N} nodes")
    if (overlaps.nnodes, overlaps.nstates) != (N, M) or overlaps.matrix.shape != (N * M, N * M):
        raise AssemblyError(
            f"overlap tensor ({overlaps.nnodes} nodes x {overlaps.nstates} states) "
            f"does not match energies ({N} x {M})"
        )

    H = np.kron(kinetic, np.ones((M, M))) * overlaps.matrix
    H[np.diag_indices(N * M)] += energies.ravel()
    return VibronicHamiltonian(matrix=H, nnodes=N, nstates=M)


@dataclass(frozen=True)
class LDRSystem:
    """Everything a propagation needs: basis, adiabatic data, overlaps and H."""

    basis: NuclearBasisND
    adiabatic: AdiabaticSet
    overlaps: OverlapTensor
    hamiltonian: VibronicHamiltonian
    decoupled: bool = False


def build_ldr_system(
    model: ElectronicModel,
    basis: NuclearBasisND,
    gauge: Optional[GaugeMode] = None,
    decoupled: bool = False,
) -> LDRSystem:
    """Adiabatize ``model`` at the basis nodes and assemble the Hamiltonian.

    With ``decoupled`` the overlap tensor is truncated to same-state blocks,
    which removes population transfer but keeps the geometric phase.
    """
    if model.ndim != basis.ndim:
        raise AssemblyError(f"model has {model.ndim} coordinates, basis has {basis.ndim}")
    aset = adiabatic_states(model, basis.nodes, gauge)
    overlaps = electronic_overlap(aset)
    if decoupled:
        overlaps = overlaps.same_state()
    H = assemble_hamiltonian(aset.energies, basis.kinetic, overlaps)
    logger.info(
        "Assembled LDR Hamiltonian: %d nodes x %d states%s",
        H.nnodes,
        H.nstates,
        " (same-state overlaps only)" if decoupled else "",
    )
    return LDRSystem(basis=basis, adiabatic=aset, overlaps=overlaps, hamiltonian=H, decoupled=decoupled)


# ---------------------------------------------------------------------------
# coefficients
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CoefficientVector:
    """Expansion coefficients C_{n alpha}(t), node-major."""

    values: np.ndarray
    time: float
    nstates: int
    captured_norm: float = 1.0

    @property
    def nnodes(self) -> int:
        return self.values.size // self.nstates

    @property
    def norm(self) -> float:
        """Squared norm ||C||^2."""
        return float(np.vdot(self.values, self.values).real)

    def as_matrix(self) -> np.ndarray:
        """View of shape ``(nnodes, nstates)``."""
        return self.values.reshape(-1, self.nstates)


@dataclass(frozen=True)
class GaussianPacket:
    """Product Gaussian on one diabatic state.

    Each coordinate carries (pi w^2)^(-1/4) exp(-(x - c)^2 / (2 w^2)); the
    defaults reproduce a vertical excitation to |1> from the ground-state
    minimum displaced to x = -1.
    """

    center: Tuple[float, ...] = (-1.0, 0.0)
    widths: Tuple[float, ...] = (1.0, 1.0)
    state: int = 1

    def __post_init__(self) -> None:
        if len(self.center) != len(self.widths):
            raise ConfigurationError("packet needs one width per center coordinate")
        if any(w <= 0 for w in self.widths):
            raise ConfigurationError(f"packet widths must be > 0, got {self.widths}")
        if self.state < 0:
            raise ConfigurationError(f"packet state must be >= 0, got {self.state}")

    def amplitude(self, axes: Sequence[np.ndarray]) -> np.ndarray:
        """Packet values on the product grid spanned by ``axes``."""
        result = np.ones(())
        for axis, c, w in zip(axes, self.center, self.widths):
            g = (np.pi * w**2) ** -0.25 * np.exp(-((np.asarray(axis) - c) ** 2) / (2.0 * w**2))
            result = np.multiply.outer(result, g)
        return result


def initial_coefficients(
    packet: GaussianPacket,
    basis: NuclearBasisND,
    aset: AdiabaticSet,
    min_captured: float = MIN_CAPTURED_NORM,
) -> CoefficientVector:
    """Project the packet onto the vibronic basis.

    C_{n alpha}(0) = <phi_alpha(R_n)|s> <R_n|g>, with the nuclear overlaps taken
    analytically through each factor's transform, then renormalized.

    Raises:
        ConfigurationError: If the packet does not fit the basis.
        InsufficientCoverageError: If less than ``min_captured`` of the norm
            is captured before renormalization.
    """
    if len(packet.center) != basis.ndim:
        raise ConfigurationError(
            f"packet has {len(packet.center)} coordinates, basis has {basis.ndim}"
        )
    ndiabatic = aset.vectors.shape[1]
    if packet.state >= ndiabatic:
        raise ConfigurationError(f"packet state {packet.state} out of range for {ndiabatic} states")
    if aset.nnodes != basis.size:
        raise AssemblyError(f"adiabatic set has {aset.nnodes} nodes, basis has {basis.size}")
    for d, (factor, c) in enumerate(zip(basis.factors, packet.center)):
        if not factor.nodes[0] <= c <= factor.nodes[-1]:
            raise ConfigurationError(
                f"packet center {c} outside basis coverage "
                f"[{factor.nodes[0]:g}, {factor.nodes[-1]:g}] in dimension {d}"
            )

    nuclear = np.ones(())
    for factor, c, w in zip(basis.factors, packet.center, packet.widths):
        nuclear = np.multiply.outer(nuclear, factor.project_gaussian(c, w))
    nuclear = nuclear.ravel()

    electronic = aset.vectors[:, packet.state, :].conj()
    C = electronic * nuclear[:, None]

    captured = float(np.vdot(C, C).real)
    if captured < min_captured:
        raise InsufficientCoverageError(captured, min_captured)
    logger.info("Initial packet: basis captures %.8f of the norm", captured)

    values = (C / np.sqrt(captured)).ravel()
    return CoefficientVector(values=values, time=0.0, nstates=aset.nstates, captured_norm=captured)


# ---------------------------------------------------------------------------
# time stepping
# ---------------------------------------------------------------------------


def rk4_step(H: VibronicHamiltonian, C: CoefficientVector, dt: float) -> CoefficientVector:
    """One classical fourth-order Runge-Kutta step of ``i dC/dt = H C``.

    Raises:
        ConfigurationError: If ``dt`` is not positive.
        NumericalBlowupError: If the new coefficients are not finite.
    """
    if not dt > 0:
        raise ConfigurationError(f"dt must be > 0, got {dt}")
    h = H.matrix
    c = C.values

    k1 = -1j * (h @ c)
    k2 = -1j * (h @ (c + 0.5 * dt * k1))
    k3 = -1j * (h @ (c + 0.5 * dt * k2))
    k4 = -1j * (h @ (c + dt * k3))
    new = c + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    if not np.all(np.isfinite(new)):
        raise NumericalBlowupError(
            f"non-finite coefficients at t={C.time + dt:g}; dt={dt:g} is probably too large "
            "for the spectral radius of H"
        )
    return replace(C, values=new, time=C.time + dt)


# ---------------------------------------------------------------------------
# observables
# ---------------------------------------------------------------------------


class OperatorKind(Enum):
    """Whether an operator acts on electrons (per node) or on nuclei."""

    ELECTRONIC = "electronic"
    NUCLEAR = "nuclear"


def expectation(
    C: CoefficientVector, overlaps: OverlapTensor, kind: OperatorKind, O: np.ndarray
) -> complex:
    """Expectation value of a purely electronic or purely nuclear operator.

    Electronic operators are given in each node's adiabatic frame, either one
    ``(M, M)`` matrix for all nodes or ``(N, M, M)``. Nuclear operators are
    ``(N, N)`` matrices in the localized basis or an ``(N,)`` diagonal.

    Raises:
        AssemblyError: If ``O`` does not fit ``kind`` and the system size.
    """
    c = C.as_matrix()
    N, M = c.shape
    O = np.asarray(O)

    if kind is OperatorKind.ELECTRONIC:
        if O.shape == (M, M):
            return complex(np.einsum("nb,ba,na->", c.conj(), O, c))
        if O.shape == (N, M, M):
            return complex(np.einsum("nb,nba,na->", c.conj(), O, c))
        raise AssemblyError(f"electronic operator shape {O.shape} fits neither ({M},{M}) nor ({N},{M},{M})")

    if O.shape == (N,):
        # A_{n beta, n alpha} = delta_beta_alpha on the diagonal blocks
        return complex(np.sum(O * np.sum(np.abs(c) ** 2, axis=1)))
    if O.shape == (N, N):
        A = overlaps.matrix.reshape(N, M, N, M)
        return complex(np.einsum("mb,mn,mbna,na->", c.conj(), O, A, c, optimize=True))
    raise AssemblyError(f"nuclear operator shape {O.shape} fits neither ({N},) nor ({N},{N})")


def local_coherence(C: CoefficientVector, n: int, ground: int = 0, excited: int = 1) -> complex:
    """C_{n,g} conj(C_{n,e}) at node ``n``; only its magnitude is gauge-invariant."""
    c = C.as_matrix()
    return complex(c[n, ground] * np.conj(c[n, excited]))


def adiabatic_populations(C: CoefficientVector) -> np.ndarray:
    return np.sum(np.abs(C.as_matrix()) ** 2, axis=0)


def diabatic_populations(C: CoefficientVector, aset: AdiabaticSet) -> np.ndarray:
    """Populations of the diabatic states, rotating each node back to the diabatic frame."""
    amplitudes = np.einsum("nsa,na->ns", aset.vectors, C.as_matrix())
    return np.sum(np.abs(amplitudes) ** 2, axis=0)


@dataclass(frozen=True)
class ReducedDensities:
    """Electronic (channel-labelled) and nuclear reduced density matrices.

    ``electronic`` treats the per-node adiabatic frames as one common frame
    labelled by channel index, although the frames differ between nodes.
    ``nuclear[n, m]`` is the coefficient of |R_n><R_m|.
    """

    electronic: np.ndarray
    nuclear: np.ndarray

    @property
    def purity(self) -> float:
        """tr(rho_e^2)."""
        return float(np.trace(self.electronic @ self.electronic).real)


def reduced_densities(C: CoefficientVector, overlaps: OverlapTensor) -> ReducedDensities:
    c = C.as_matrix()
    N, M = c.shape
    rho_e = c.T @ c.conj()
    A = overlaps.matrix.reshape(N, M, N, M)
    B = np.einsum("mb,mbna,na->mn", c.conj(), A, c, optimize=True)
    return ReducedDensities(electronic=rho_e, nuclear=B.T)


def energy(H: VibronicHamiltonian, C: CoefficientVector) -> float:
    """<C|H|C>."""
    return float(np.vdot(C.values, H.matrix @ C.values).real)


def nuclear_density(
    C: CoefficientVector,
    overlaps: OverlapTensor,
    basis: NuclearBasisND,
    axes: Sequence[np.ndarray],
) -> np.ndarray:
    """Total nuclear probability density on the product grid spanned by ``axes``.

    rho(R) = sum_{mn} (rho_n)_{nm} chi_m(R) chi_n(R); gauge-invariant because
    the nuclear reduced density is.
    """
    rho_n = reduced_densities(C, overlaps).nuclear
    phi = basis.amplitudes(axes)
    grid_shape = phi.shape[:-1]
    phi = phi.reshape(-1, basis.size)

    out = np.empty(phi.shape[0])
    for start in range(0, phi.shape[0], _DENSITY_CHUNK):
        block = phi[start:start + _DENSITY_CHUNK]
        out[start:start + _DENSITY_CHUNK] = np.einsum("gm,gm->g", block @ rho_n, block).real
    return out.reshape(grid_shape)


class LDRObservables:
    """Computes the observable and diagnostic records of one LDR state.

    Args:
        system: Assembled LDR system.
        probe_node: Node at which the local coherence is read.
    """

    def __init__(self, system: LDRSystem, probe_node: int) -> None:
        if not 0 <= probe_node < system.basis.size:
            raise ConfigurationError(f"probe node {probe_node} out of range for {system.basis.size} nodes")
        if system.hamiltonian.nstates != 2:
            raise ConfigurationError("observable records are defined for two electronic states")
        self.system = system
        self.probe_node = probe_node
        nodes = system.basis.nodes
        self._x = nodes[:, 0]
        self._y = nodes[:, 1] if system.basis.ndim > 1 else np.zeros(len(nodes))

    def observables(self, C: CoefficientVector, t: float) -> Dict[str, float]:
        overlaps = self.system.overlaps
        pop_ad = adiabatic_populations(C)
        pop_di = diabatic_populations(C, self.system.adiabatic)
        coh = local_coherence(C, self.probe_node)
        return {
            "t": t,
            "x_mean": expectation(C, overlaps, OperatorKind.NUCLEAR, self._x).real,
            "y_mean": expectation(C, overlaps, OperatorKind.NUCLEAR, self._y).real,
            "pop_ad_0": float(pop_ad[0]),
            "pop_ad_1": float(pop_ad[1]),
            "pop_di_0": float(pop_di[0]),
            "pop_di_1": float(pop_di[1]),
            "coh_re": coh.real,
            "coh_im": coh.imag,
            "coh_abs": abs(coh),
            "norm": C.norm,
        }

    def diagnostics(self, C: CoefficientVector, t: float) -> Dict[str, float]:
        rho = reduced_densities(C, self.system.overlaps)
        return {
            "t": t,
            "energy": energy(self.system.hamiltonian, C),
            "rho_e_00": float(rho.electronic[0, 0].real),
            "rho_e_11": float(rho.electronic[1, 1].real),
            "rho_e_01_re": float(rho.electronic[0, 1].real),
            "rho_e_01_im": float(rho.electronic[0, 1].imag),
            "purity_e": rho.purity,
        }


@dataclass
class PropagationResult:
    """Recorded series, coefficient snapshots and final state of a run."""

    observables: pd.DataFrame
    diagnostics: pd.DataFrame
    snapshots: Dict[float, CoefficientVector] = field(default_factory=dict)
    final: Optional[CoefficientVector] = None


def snapshot_steps(times: Sequence[float], dt: float, nsteps: int) -> Dict[int, float]:
    """Map requested snapshot times to step indices; times past the run are dropped."""
    steps: Dict[int, float] = {}
    for ts in times:
        step = int(round(ts / dt))
        if step > nsteps:
            logger.warning("Snapshot time %g lies beyond the final time; skipped", ts)
            continue
        steps[step] = ts
    return steps


def propagate(
    system: LDRSystem,
    c0: CoefficientVector,
    dt: float,
    t_final: float,
    record_every: int,
    probe_node: int,
    snapshot_times: Sequence[float] = (),
    events: Optional[Subject] = None,
) -> PropagationResult:
    """Integrate with RK4 from 0 to ``t_final`` and record observables.

    Records are taken every ``record_every`` steps and at the final step; the
    number of steps is ``round(t_final / dt)``.

    Raises:
        ConfigurationError: On non-positive ``dt`` or ``record_every`` or negative ``t_final``.
        NumericalBlowupError: Propagated from :func:`rk4_step`.
    """
    if not dt > 0:
        raise ConfigurationError(f"dt must be > 0, got {dt}")
    if t_final < 0:
        raise ConfigurationError(f"t_final must be >= 0, got {t_final}")
    if record_every < 1:
        raise ConfigurationError(f"record_every must be >= 1, got {record_every}")

    recorder = LDRObservables(system, probe_node)
    nsteps = int(round(t_final / dt))
    snaps = snapshot_steps(snapshot_times, dt, nsteps)
    obs_rows: List[Dict[str, float]] = []
    diag_rows: List[Dict[str, float]] = []
    snapshots: Dict[float, CoefficientVector] = {}

    if events is not None:
        events.notify("propagate:start", {"method": "ldr", "steps": nsteps, "dt": dt})

    C = c0
    for step in range(nsteps + 1):
        if step > 0:
            C = rk4_step(system.hamiltonian, C, dt)
        t = record_time(step, dt)
        if step in snaps:
            snapshots[snaps[step]] = replace(C, time=t)
        if step % record_every == 0 or step == nsteps:
            row = recorder.observables(C, t)
            obs_rows.append(row)
            diag_rows.append(recorder.diagnostics(C, t))
            logger.debug("t=%g norm=%.15f", t, row["norm"])
            if events is not None:
                events.notify("propagate:record", {"step": step, "steps": nsteps, "row": row})

    if events is not None:
        events.notify("propagate:done", {"method": "ldr", "records": len(obs_rows)})

    return PropagationResult(
        observables=series_frame(obs_rows, OBSERVABLE_COLUMNS),
        diagnostics=series_frame(diag_rows, DIAGNOSTIC_COLUMNS),
        snapshots=snapshots,
        final=replace(C, time=record_time(nsteps, dt)),
    )
