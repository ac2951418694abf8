"""Two-state conical-intersection model, adiabatic states and electronic overlaps.

The diabatic model is

    H = sum_{s=x,y} (a_s^+ a_s + 1/2) - kappa x sigma_z + lambda y sigma_x + Delta sigma^+ sigma^-

in dimensionless oscillator units with sigma_z = |1><1| - |0><0|. Dropping the
zero-point constant, the diabatic potential is

    V_00 = (x^2 + y^2)/2 + kappa x
    V_11 = (x^2 + y^2)/2 + Delta - kappa x
    V_01 = V_10 = lambda y

so the two surfaces touch at (Delta / (2 kappa), 0).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional, Protocol, Sequence, Tuple, runtime_checkable

import numpy as np

from ldrdyn.exceptions import (
    ConfigurationError,
    DegenerateSegmentError,
    NoIsolatedIntersectionError,
)
from ldrdyn.patterns.strategy import get_gauge_strategy

logger = logging.getLogger(__name__)

DEGENERACY_TOL = 1e-12
SEGMENT_TOL = 1e-12


@runtime_checkable
class ElectronicModel(Protocol):
    """Pluggable electronic model: nuclear points to diabatic Hermitian matrices."""

    @property
    def nstates(self) -> int: ...

    @property
    def ndim(self) -> int: ...

    def diabatic_potential(self, points: np.ndarray) -> np.ndarray:
        """Map points of shape ``(..., ndim)`` to matrices ``(..., nstates, nstates)``."""
        ...


@dataclass(frozen=True)
class DiabaticModel:
    """Linear vibronic coupling model with a single conical intersection.

    Attributes:
        kappa: Tuning-mode coupling.
        lam: Coupling-mode strength (lambda); 0 decouples the diabatic states.
        delta: Diabatic energy offset of state |1>.
    """

    kappa: float = 1.0
    lam: float = 0.2
    delta: float = 1.0

    def __post_init__(self) -> None:
        for name in ("kappa", "lam", "delta"):
            value = getattr(self, name)
            if not np.isfinite(value):
                raise ConfigurationError(f"{name} must be finite, got {value}")

    @property
    def nstates(self) -> int:
        return 2

    @property
    def ndim(self) -> int:
        return 2

    def diabatic_potential(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        x, y = points[..., 0], points[..., 1]
        harmonic = 0.5 * (x**2 + y**2)
        V = np.empty(points.shape[:-1] + (2, 2))
        V[..., 0, 0] = harmonic + self.kappa * x
        V[..., 1, 1] = harmonic + self.delta - self.kappa * x
        V[..., 0, 1] = self.lam * y
        V[..., 1, 0] = self.lam * y
        return V

    def __str__(self) -> str:
        return f"DiabaticModel(kappa={self.kappa}, lambda={self.lam}, delta={self.delta})"


def diabatic_potential(model: ElectronicModel, R: Sequence[float]) -> np.ndarray:
    """Diabatic potential matrix of ``model`` at one nuclear point."""
    return model.diabatic_potential(np.asarray(R, dtype=float))


def ci_locus(model: DiabaticModel) -> Tuple[float, float]:
    """Location of the conical intersection of the linear model.

    Raises:
        NoIsolatedIntersectionError: If kappa is 0.
    """
    if model.kappa == 0:
        raise NoIsolatedIntersectionError("kappa = 0: the model has no isolated intersection")
    return (model.delta / (2.0 * model.kappa), 0.0)


# ---------------------------------------------------------------------------
# adiabatization
# ---------------------------------------------------------------------------


def mixing_angle(V: np.ndarray) -> np.ndarray:
    """Half-angle 0.5 * atan2(2 V_01, V_11 - V_00) of real symmetric 2x2 matrices."""
    V = np.asarray(V, dtype=float)
    return 0.5 * np.arctan2(2.0 * V[..., 0, 1], V[..., 1, 1] - V[..., 0, 0])


def adiabatize(V: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Eigen-decompose diabatic matrices, energies ascending.

    Real symmetric 2x2 matrices use the closed form: with the mixing angle
    theta, the lower state is (cos theta, -sin theta) and the upper state
    (sin theta, cos theta). Degenerate matrices (gap below 1e-12) return the
    diabatic states themselves, lower state = |0>. Other shapes fall back to
    ``numpy.linalg.eigh``.

    Args:
        V: Array of shape ``(..., n, n)``.

    Returns:
        ``(energies, vectors)`` with shapes ``(..., n)`` and ``(..., n, n)``;
        columns of ``vectors`` are the adiabatic states.
    """
    V = np.asarray(V)
    if V.shape[-2:] != (2, 2) or np.iscomplexobj(V):
        energies, vectors = np.linalg.eigh(V)
        return energies, vectors

    a, b, c = V[..., 0, 0], V[..., 1, 1], V[..., 0, 1]
    mean = 0.5 * (a + b)
    half_gap = np.hypot(0.5 * (b - a), c)
    theta = np.where(half_gap < DEGENERACY_TOL, 0.0, mixing_angle(V))
    cos, sin = np.cos(theta), np.sin(theta)

    energies = np.stack([mean - half_gap, mean + half_gap], axis=-1)
    vectors = np.empty(V.shape)
    vectors[..., 0, 0] = cos
    vectors[..., 1, 0] = -sin
    vectors[..., 0, 1] = sin
    vectors[..., 1, 1] = cos
    return energies, vectors


# ---------------------------------------------------------------------------
# gauge
# ---------------------------------------------------------------------------


class GaugeVariant(Enum):
    """Phase convention for adiabatic eigenvectors."""

    FIXED_POSITIVE = "fixed-positive"
    RANDOM_PHASE = "random-phase"
    RANDOM_SIGN = "random-sign"


@dataclass(frozen=True)
class GaugeMode:
    """Gauge choice; random variants need a seed."""

    variant: GaugeVariant = GaugeVariant.FIXED_POSITIVE
    seed: Optional[int] = None

    def __post_init__(self) -> None:
        if self.variant is not GaugeVariant.FIXED_POSITIVE and self.seed is None:
            raise ConfigurationError(f"gauge '{self.variant.value}' requires a seed")

    def __str__(self) -> str:
        if self.seed is None:
            return f"GaugeMode({self.variant.value})"
        return f"GaugeMode({self.variant.value}, seed={self.seed})"


@dataclass(frozen=True)
class AdiabaticSet:
    """Adiabatic energies and gauge-carrying eigenvectors at a set of nodes.

    Attributes:
        energies: ``(nodes, states)``, ascending per node.
        vectors: ``(nodes, diabatic, states)`` complex; columns are states.
        phases: ``(nodes, states)`` accumulated gauge phases theta; the
            stored vectors equal the closed-form ones times exp(-1j theta).
    """

    energies: np.ndarray
    vectors: np.ndarray
    phases: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if self.phases is None:
            object.__setattr__(self, "phases", np.zeros(self.energies.shape))

    @property
    def nnodes(self) -> int:
        return int(self.energies.shape[0])

    @property
    def nstates(self) -> int:
        return int(self.energies.shape[1])

    @property
    def gap(self) -> np.ndarray:
        return self.energies[:, -1] - self.energies[:, 0]


def apply_gauge(aset: AdiabaticSet, mode: GaugeMode) -> AdiabaticSet:
    """Multiply every eigenvector column by a unit-modulus factor exp(-1j theta).

    Phases are drawn for all nodes at once in canonical node order, so the
    result depends only on the set and the seed.
    """
    strategy = get_gauge_strategy(mode.variant.value)
    rng = np.random.default_rng(mode.seed)
    theta = strategy(aset.vectors, rng)
    vectors = aset.vectors * np.exp(-1j * theta)[:, None, :]
    phases = np.angle(np.exp(1j * (aset.phases + theta)))
    return replace(aset, vectors=vectors, phases=phases)


def adiabatic_states(
    model: ElectronicModel, points: np.ndarray, gauge: Optional[GaugeMode] = None
) -> AdiabaticSet:
    """Adiabatize ``model`` at every point and apply ``gauge``."""
    V = model.diabatic_potential(np.asarray(points, dtype=float))
    energies, vectors = adiabatize(V)
    aset = AdiabaticSet(energies=energies, vectors=vectors.astype(complex))
    if gauge is not None:
        aset = apply_gauge(aset, gauge)
    return aset


# ---------------------------------------------------------------------------
# overlaps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OverlapTensor:
    """Blocked electronic overlap matrix A_{m beta, n alpha}.

    Stored dense with node-major, state-minor index ``n * nstates + alpha``.
    """

    matrix: np.ndarray
    nnodes: int
    nstates: int

    def block(self, m: int, n: int) -> np.ndarray:
        M = self.nstates
        return self.matrix[m * M:(m + 1) * M, n * M:(n + 1) * M]

    def entry(self, m: int, beta: int, n: int, alpha: int) -> complex:
        M = self.nstates
        return complex(self.matrix[m * M + beta, n * M + alpha])

    def same_state(self) -> "OverlapTensor":
        """Decoupled tensor A^alpha_{mn} delta_{beta alpha}; keeps geometric phase."""
        mask = np.kron(np.ones((self.nnodes, self.nnodes)), np.eye(self.nstates))
        return OverlapTensor(self.matrix * mask, self.nnodes, self.nstates)


def electronic_overlap(aset: AdiabaticSet) -> OverlapTensor:
    """Overlaps of all adiabatic states at all node pairs.

    The result is exactly Hermitian as stored and its diagonal node blocks are
    exact identities.
    """
    N, D, M = aset.vectors.shape
    Q = aset.vectors.transpose(1, 0, 2).reshape(D, N * M)
    A = Q.conj().T @ Q
    A = 0.5 * (A + A.conj().T)

    nodes = np.arange(N)
    A.reshape(N, M, N, M)[nodes, :, nodes, :] = np.eye(M)
    logger.debug("Electronic overlap tensor: %d nodes x %d states", N, M)
    return OverlapTensor(matrix=A, nnodes=N, nstates=M)


# ---------------------------------------------------------------------------
# Wilson loops
# ---------------------------------------------------------------------------


def circle_loop(center: Sequence[float], radius: float, points: int) -> np.ndarray:
    """Points on a circle, counter-clockwise, closure implicit."""
    t = 2.0 * np.pi * np.arange(points) / points
    return np.stack(
        [center[0] + radius * np.cos(t), center[1] + radius * np.sin(t)], axis=-1
    )


def wilson_loop(
    model: ElectronicModel,
    loop: np.ndarray,
    alpha: int = 0,
    gauge: Optional[GaugeMode] = None,
) -> complex:
    """Product of consecutive same-state overlaps around a closed loop.

    Raises:
        ConfigurationError: If the loop has fewer than 3 points or repeats its
            first point at the end.
        DegenerateSegmentError: If a consecutive overlap is below 1e-12.
    """
    loop = np.asarray(loop, dtype=float)
    if loop.shape[0] < 3:
        raise ConfigurationError("a loop needs at least 3 points")
    if np.allclose(loop[0], loop[-1]):
        raise ConfigurationError("the last loop point repeats the first; closure is implicit")

    aset = adiabatic_states(model, loop, gauge)
    v = aset.vectors[:, :, alpha]
    overlaps = np.einsum("kd,kd->k", v.conj(), np.roll(v, -1, axis=0))

    magnitudes = np.abs(overlaps)
    worst = int(np.argmin(magnitudes))
    if magnitudes[worst] < SEGMENT_TOL:
        raise DegenerateSegmentError(worst, float(magnitudes[worst]))
    return complex(np.prod(overlaps))


def wilson_phase(W: complex) -> float:
    """arg W in (-pi, pi], with -pi folded onto pi."""
    phase = float(np.angle(W))
    if phase <= -np.pi + 1e-9:
        phase += 2.0 * np.pi
    return phase


def berry_phase(W: complex) -> float:
    """Geometric phase -arg W."""
    return -float(np.angle(W))
