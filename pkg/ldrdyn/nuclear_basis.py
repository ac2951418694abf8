"""Localized nuclear basis built from primitive coherent states.

Primitive functions are real, zero-momentum, equal-width normalized Gaussians

    chi_mu(x) = (pi sigma^2)^(-1/4) exp(-(x - c_mu)^2 / (2 sigma^2))

placed on a uniform grid. Overlap, position and kinetic matrices have closed
forms; localizing them means solving ``X U = S U Lambda``, which yields an
orthonormal set of position eigenstates ``|R_n>`` with ``U^T S U = I``.
Multi-dimensional bases are direct products of 1-D localized factors.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from math import prod
from typing import Sequence, Tuple

import numpy as np
import numpy.typing as npt
import scipy.linalg

from ldrdyn.exceptions import CapacityError, ConfigurationError, IllConditionedBasisError

logger = logging.getLogger(__name__)

DEFAULT_WIDTH_FACTOR = 1.0 / np.sqrt(2.0)
MAX_CONDITION = 1e8
DEFAULT_MAX_NODES = 4096


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array)
    array.setflags(write=False)
    return array


# ---------------------------------------------------------------------------
# element kernels
# ---------------------------------------------------------------------------


def gaussian_overlap(x1: npt.ArrayLike, x2: npt.ArrayLike, width: float) -> np.ndarray:
    """Overlap of two normalized Gaussians of equal width ``width``."""
    d = np.subtract(x1, x2)
    return np.exp(-(d**2) / (4.0 * width**2))


def gaussian_position(x1: npt.ArrayLike, x2: npt.ArrayLike, width: float) -> np.ndarray:
    """Matrix element <chi_1| x |chi_2> for equal-width Gaussians."""
    return gaussian_overlap(x1, x2, width) * 0.5 * np.add(x1, x2)


def gaussian_kinetic(
    x1: npt.ArrayLike, x2: npt.ArrayLike, width: float, mass: float = 1.0
) -> np.ndarray:
    """Matrix element <chi_1| -(1/2m) d^2/dx^2 |chi_2> for equal-width Gaussians."""
    d = np.subtract(x1, x2)
    s = gaussian_overlap(x1, x2, width)
    return s * (1.0 - d**2 / (2.0 * width**2)) / (4.0 * width**2 * mass)


def gaussian_cross_overlap(
    x1: npt.ArrayLike, width1: float, x2: npt.ArrayLike, width2: float
) -> np.ndarray:
    """Overlap of two normalized real Gaussians with different widths."""
    d = np.subtract(x1, x2)
    w2 = width1**2 + width2**2
    return np.sqrt(2.0 * width1 * width2 / w2) * np.exp(-(d**2) / (2.0 * w2))


# ---------------------------------------------------------------------------
# primitive basis
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PrimitiveBasis1D:
    """Equal-width Gaussian primitives along one nuclear coordinate.

    Attributes:
        centers: Strictly increasing Gaussian centers.
        width: Common width sigma.
        mass: Nuclear mass for this coordinate.
    """

    centers: np.ndarray
    width: float
    mass: float = 1.0

    def __post_init__(self) -> None:
        centers = np.asarray(self.centers, dtype=float).ravel()
        if centers.size == 0:
            raise ConfigurationError("primitive basis needs at least one center")
        if not np.all(np.isfinite(centers)):
            raise ConfigurationError("centers must be finite")
        if centers.size > 1 and not np.all(np.diff(centers) > 0):
            raise ConfigurationError("centers must be strictly increasing")
        if not self.width > 0:
            raise ConfigurationError(f"width must be > 0, got {self.width}")
        if not self.mass > 0:
            raise ConfigurationError(f"mass must be > 0, got {self.mass}")
        object.__setattr__(self, "centers", _frozen(centers))

    @property
    def size(self) -> int:
        return int(self.centers.size)

    def __str__(self) -> str:
        return (
            f"PrimitiveBasis1D({self.size} Gaussians on "
            f"[{self.centers[0]:g}, {self.centers[-1]:g}], width={self.width:.4g})"
        )


def build_primitive_1d(
    grid_min: float,
    grid_max: float,
    count: int,
    width_factor: float = DEFAULT_WIDTH_FACTOR,
    mass: float = 1.0,
) -> PrimitiveBasis1D:
    """Place ``count`` Gaussians uniformly on ``[grid_min, grid_max]``.

    The width is ``width_factor`` times the center spacing.

    Raises:
        ConfigurationError: If the range, count or width factor is invalid.
    """
    if count < 2:
        raise ConfigurationError(f"count must be >= 2, got {count}")
    if not grid_max > grid_min:
        raise ConfigurationError(f"grid_max ({grid_max}) must exceed grid_min ({grid_min})")
    if not width_factor > 0:
        raise ConfigurationError(f"width_factor must be > 0, got {width_factor}")

    centers = np.linspace(grid_min, grid_max, count)
    spacing = (grid_max - grid_min) / (count - 1)
    return PrimitiveBasis1D(centers=centers, width=width_factor * spacing, mass=mass)


def _pair_grid(basis: PrimitiveBasis1D) -> Tuple[np.ndarray, np.ndarray]:
    c = basis.centers
    return c[:, None], c[None, :]


def overlap_matrix(basis: PrimitiveBasis1D, max_condition: float = MAX_CONDITION) -> np.ndarray:
    """Primitive overlap matrix S.

    Raises:
        IllConditionedBasisError: If cond(S) exceeds ``max_condition``.
    """
    x1, x2 = _pair_grid(basis)
    S = gaussian_overlap(x1, x2, basis.width)
    cond = float(np.linalg.cond(S))
    if not np.isfinite(cond) or cond > max_condition:
        raise IllConditionedBasisError(cond, max_condition)
    return S


def position_matrix(basis: PrimitiveBasis1D) -> np.ndarray:
    """Primitive position matrix X."""
    x1, x2 = _pair_grid(basis)
    return gaussian_position(x1, x2, basis.width)


def kinetic_matrix(basis: PrimitiveBasis1D) -> np.ndarray:
    """Primitive kinetic-energy matrix T_prim."""
    x1, x2 = _pair_grid(basis)
    return gaussian_kinetic(x1, x2, basis.width, basis.mass)


def primitive_amplitudes(basis: PrimitiveBasis1D, x: npt.ArrayLike) -> np.ndarray:
    """Evaluate every primitive at the points ``x``; shape ``(len(x), size)``."""
    pts = np.atleast_1d(np.asarray(x, dtype=float))
    norm = (np.pi * basis.width**2) ** -0.25
    d = pts[:, None] - basis.centers[None, :]
    return norm * np.exp(-(d**2) / (2.0 * basis.width**2))


def gaussian_projection(basis: PrimitiveBasis1D, center: float, width: float) -> np.ndarray:
    """Overlaps <chi_mu|g> with a normalized Gaussian g(center, width)."""
    return gaussian_cross_overlap(basis.centers, basis.width, center, width)


# ---------------------------------------------------------------------------
# localized basis
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LocalizedBasis1D:
    """Orthonormal position eigenstates of a primitive basis.

    Attributes:
        primitive: The primitive basis the states are built from.
        nodes: Position eigenvalues, ascending.
        transform: Columns are the expansion coefficients U_{mu n}.
        kinetic: Kinetic matrix in the localized basis, U^T T_prim U.
        overlap_cond: Condition number of the primitive overlap matrix.
    """

    primitive: PrimitiveBasis1D
    nodes: np.ndarray
    transform: np.ndarray
    kinetic: np.ndarray
    overlap_cond: float

    @property
    def size(self) -> int:
        return int(self.nodes.size)

    def amplitudes(self, x: npt.ArrayLike) -> np.ndarray:
        """Evaluate chi_n(x) for every node; shape ``(len(x), size)``."""
        return primitive_amplitudes(self.primitive, x) @ self.transform

    def project_gaussian(self, center: float, width: float) -> np.ndarray:
        """Coefficients <R_n|g> of a normalized Gaussian."""
        return self.transform.conj().T @ gaussian_projection(self.primitive, center, width)

    def weights(self) -> np.ndarray:
        """Quadrature weights w_n = (integral of chi_n)^2.

        Each primitive integrates to ``(4 pi sigma^2)^(1/4)``, so the weight
        follows from the column sums of the transform.
        """
        area = (4.0 * np.pi * self.primitive.width**2) ** 0.25
        return (area * self.transform.sum(axis=0)) ** 2


def localize(basis: PrimitiveBasis1D, max_condition: float = MAX_CONDITION) -> LocalizedBasis1D:
    """Solve ``X U = S U Lambda`` and return the localized basis.

    The generalized problem goes through scipy's symmetric-definite reduction
    (Cholesky factor of S, standard Hermitian solve), so ``U^T S U = I`` holds
    structurally. Each column is signed so that its largest coefficient is
    positive.

    Raises:
        IllConditionedBasisError: If S is too ill-conditioned or not
            numerically positive definite.
    """
    S = overlap_matrix(basis, max_condition)
    X = position_matrix(basis)
    T = kinetic_matrix(basis)
    cond = float(np.linalg.cond(S))

    try:
        nodes, U = scipy.linalg.eigh(X, S)
    except np.linalg.LinAlgError as exc:
        raise IllConditionedBasisError(cond, max_condition) from exc

    cols = np.arange(U.shape[1])
    pivot = np.argmax(np.abs(U), axis=0)
    U = U * np.sign(U[pivot, cols])

    K = U.T @ T @ U
    K = 0.5 * (K + K.T)

    logger.debug("Localized %s, cond(S)=%.3e", basis, cond)
    return LocalizedBasis1D(
        primitive=basis,
        nodes=_frozen(nodes),
        transform=_frozen(U),
        kinetic=_frozen(K),
        overlap_cond=cond,
    )


# ---------------------------------------------------------------------------
# product basis
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NuclearBasisND:
    """Direct product of localized 1-D factors.

    Node ``n`` corresponds to the multi-index ``np.unravel_index(n, shape)``
    (row-major, last factor fastest).
    """

    factors: Tuple[LocalizedBasis1D, ...]
    nodes: np.ndarray
    kinetic: np.ndarray

    @property
    def ndim(self) -> int:
        return len(self.factors)

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(f.size for f in self.factors)

    @property
    def size(self) -> int:
        return int(self.nodes.shape[0])

    def amplitudes(self, axes: Sequence[np.ndarray]) -> np.ndarray:
        """Node amplitudes on the product grid spanned by ``axes``.

        Returns:
            Array of shape ``(len(axes[0]), ..., len(axes[-1]), size)``.
        """
        if len(axes) != self.ndim:
            raise ConfigurationError(f"expected {self.ndim} grid axes, got {len(axes)}")
        result = self.factors[0].amplitudes(axes[0])
        for factor, axis in zip(self.factors[1:], axes[1:]):
            phi = factor.amplitudes(axis)
            result = np.einsum("...i,gj->...gij", result, phi)
            result = result.reshape(result.shape[:-2] + (-1,))
        return result

    def weights(self) -> np.ndarray:
        """Product quadrature weights, one per node."""
        w = self.factors[0].weights()
        for factor in self.factors[1:]:
            w = np.multiply.outer(w, factor.weights()).ravel()
        return w

    def nearest_node(self, point: Sequence[float]) -> int:
        """Index of the node closest to ``point``."""
        point = np.asarray(point, dtype=float)
        return int(np.argmin(np.sum((self.nodes - point) ** 2, axis=1)))

    def __str__(self) -> str:
        dims = " x ".join(str(s) for s in self.shape)
        return f"NuclearBasisND({dims} = {self.size} nodes)"


def tensor_product(
    factors: Sequence[LocalizedBasis1D], max_nodes: int = DEFAULT_MAX_NODES
) -> NuclearBasisND:
    """Combine localized factors into a direct-product basis.

    The kinetic matrix is the Kronecker sum of the factor kinetic matrices.

    Raises:
        ConfigurationError: If no factor is given.
        CapacityError: If the product has more than ``max_nodes`` nodes.
    """
    factors = tuple(factors)
    if not factors:
        raise ConfigurationError("tensor_product needs at least one factor")

    shape = tuple(f.size for f in factors)
    size = prod(shape)
    if size > max_nodes:
        raise CapacityError(f"product basis has {size} nodes, cap is {max_nodes}")

    mesh = np.meshgrid(*[f.nodes for f in factors], indexing="ij")
    nodes = np.stack([m.ravel() for m in mesh], axis=-1)

    kinetic = np.zeros((size, size))
    for d, factor in enumerate(factors):
        left = np.eye(prod(shape[:d]))
        right = np.eye(prod(shape[d + 1:]))
        kinetic += np.kron(np.kron(left, factor.kinetic), right)

    basis = NuclearBasisND(factors=factors, nodes=_frozen(nodes), kinetic=_frozen(kinetic))
    logger.info("Built %s", basis)
    return basis


def node_amplitude(basis: NuclearBasisND, n: int, R: Sequence[float]) -> float:
    """Value of the localized function chi_n at the point ``R``."""
    multi = np.unravel_index(n, basis.shape)
    value = 1.0
    for factor, index, coordinate in zip(basis.factors, multi, R):
        value *= factor.amplitudes([coordinate])[0, index]
    return value


def build_basis(
    axes: Sequence[Tuple[float, float, int, float]],
    mass: float = 1.0,
    max_nodes: int = DEFAULT_MAX_NODES,
    max_condition: float = MAX_CONDITION,
) -> NuclearBasisND:
    """Build and localize one primitive set per ``(min, max, count, width_factor)``."""
    factors = [
        localize(build_primitive_1d(lo, hi, count, width_factor, mass), max_condition)
        for lo, hi, count, width_factor in axes
    ]
    return tensor_product(factors, max_nodes)
