"""Factory for creating Simulator instances based on a method key.

Keeps construction of the LDR and split-operator simulators in one place so
the CLI only deals with method names.
"""

from __future__ import annotations

from typing import Optional

from ldrdyn.config import ExperimentConfig
from ldrdyn.patterns.observer import Subject
from ldrdyn.simulator import LDRSimulator, ReferenceSimulator, Simulator


def get_simulator(method: str, config: ExperimentConfig, events: Optional[Subject] = None) -> Simulator:
    """Return a Simulator for the given method key.

    Args:
        method: 'ldr', or 'reference' / 'splitop' (case-insensitive).
        config: Validated experiment configuration.
        events: Optional progress subject passed to the simulator.

    Raises:
        ValueError: if the method key is unknown.
    """
    key = (method or "").strip().lower()

    if key == "ldr":
        return LDRSimulator(config, events)
    if key in ("reference", "splitop"):
        return ReferenceSimulator(config, events)

    raise ValueError(f"Unknown simulation method: {method}")
