"""Exception hierarchy for the ldrdyn package.

Every concrete error also derives from the built-in exception callers would
expect (``ValueError`` or ``RuntimeError``), so ``except ValueError`` keeps
working around library calls.
"""

from __future__ import annotations

from typing import Optional


class LDRDynError(Exception):
    """Base class for all package errors."""


class ConfigurationError(LDRDynError, ValueError):
    """Invalid configuration value or parameter precondition.

    Messages start with the dotted key path when the value comes from a
    configuration file, e.g. ``propagation.dt: must be > 0``.
    """

    def __init__(self, message: str, key_path: Optional[str] = None) -> None:
        self.key_path = key_path
        if key_path:
            message = f"{key_path}: {message}"
        super().__init__(message)


class IllConditionedBasisError(LDRDynError, ValueError):
    """Primitive overlap matrix too ill-conditioned to localize."""

    def __init__(self, condition_number: float, threshold: float) -> None:
        self.condition_number = condition_number
        self.threshold = threshold
        super().__init__(
            f"overlap matrix condition number {condition_number:.3e} "
            f"exceeds threshold {threshold:.1e}"
        )


class CapacityError(LDRDynError, ValueError):
    """Product basis larger than the configured node cap."""


class AssemblyError(LDRDynError, ValueError):
    """Inconsistent dimensions while assembling matrices or operators."""


class InsufficientCoverageError(LDRDynError, ValueError):
    """Initial packet poorly represented by the nuclear basis."""

    def __init__(self, captured_norm: float, minimum: float) -> None:
        self.captured_norm = captured_norm
        self.minimum = minimum
        super().__init__(
            f"basis captures only {captured_norm:.6f} of the packet norm "
            f"(minimum {minimum})"
        )


class NoIsolatedIntersectionError(LDRDynError, ValueError):
    """Model has no isolated conical intersection (kappa = 0)."""


class DegenerateSegmentError(LDRDynError, ValueError):
    """Consecutive Wilson-loop overlap vanishes."""

    def __init__(self, segment: int, magnitude: float) -> None:
        self.segment = segment
        self.magnitude = magnitude
        super().__init__(
            f"loop segment {segment} has overlap magnitude {magnitude:.3e}; "
            "refine the loop or move it away from the degeneracy"
        )


class NumericalBlowupError(LDRDynError, RuntimeError):
    """Non-finite values appeared during time stepping."""


class AlignmentError(LDRDynError, ValueError):
    """Two observable series do not share the same time grid."""


class SchemaError(LDRDynError, ValueError):
    """A table read back from disk does not have the expected columns."""
