"""Strategy pattern: interchangeable gauge-phase rules.

A gauge strategy receives the eigenvector array of an adiabatic set, shaped
``(nodes, diabatic_states, adiabatic_states)``, and a seeded random generator,
and returns one phase angle per node and adiabatic state. The caller applies
``exp(-1j * theta)`` to each eigenvector column, so strategies stay pure and
are free to ignore the generator.
"""

from __future__ import annotations

from typing import Callable, Dict

import numpy as np

GaugeStrategy = Callable[[np.ndarray, np.random.Generator], np.ndarray]


def fixed_positive(vectors: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Phases that make the largest-magnitude component of each column real positive."""
    pivot = np.argmax(np.abs(vectors), axis=1)
    leading = np.take_along_axis(vectors, pivot[:, None, :], axis=1)[:, 0, :]
    return np.angle(leading)


def random_phase(vectors: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Independent uniform phases in [0, 2 pi), drawn in node-major order."""
    nnodes, _, nstates = vectors.shape
    return rng.uniform(0.0, 2.0 * np.pi, size=(nnodes, nstates))


def random_sign(vectors: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Random 0 or pi phases, i.e. random eigenvector signs."""
    nnodes, _, nstates = vectors.shape
    return np.pi * rng.integers(0, 2, size=(nnodes, nstates))


GAUGE_STRATEGIES: Dict[str, GaugeStrategy] = {
    "fixed-positive": fixed_positive,
    "random-phase": random_phase,
    "random-sign": random_sign,
}


def get_gauge_strategy(name: str) -> GaugeStrategy:
    """Look up a gauge strategy by its configuration name.

    Raises:
        ValueError: If the name is unknown.
    """
    try:
        return GAUGE_STRATEGIES[name]
    except KeyError:
        raise ValueError(f"Unknown gauge strategy: {name}") from None
