"""Simulation abstractions and implementations.

A `Simulator` turns a validated `ExperimentConfig` into recorded series and
density snapshots. The LDR and split-operator implementations share the
output schema, so comparisons do not care which method produced a table.
"""

from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

import numpy as np
import pandas as pd

from ldrdyn.config import ExperimentConfig
from ldrdyn.electronic_model import (
    DiabaticModel,
    ci_locus,
    circle_loop,
    wilson_loop,
    wilson_phase,
)
from ldrdyn.exceptions import ConfigurationError, NoIsolatedIntersectionError
from ldrdyn.ldr_propagator import (
    GaussianPacket,
    build_ldr_system,
    initial_coefficients,
    nuclear_density,
    propagate,
)
from ldrdyn.nuclear_basis import NuclearBasisND, build_basis
from ldrdyn.patterns.observer import Subject
from ldrdyn.reference_splitop import (
    SplitOperatorPropagator,
    UniformGrid2D,
    init_reference,
    propagate_reference,
)
from ldrdyn.series import (
    WILSON_COLUMNS,
    density_axes,
    density_frame,
    nodal_line_metric,
)

logger = logging.getLogger(__name__)


@dataclass
class SimulationOutput:
    """Tables produced by one simulator run.

    Attributes:
        method: Simulator key, ``ldr`` or ``reference``.
        observables: Series with the observable schema.
        diagnostics: Series with the diagnostic schema.
        densities: Long-format density frames keyed by snapshot time.
        nodal_metrics: Nodal-line metric per snapshot time.
        info: Run facts recorded in the manifest.
    """

    method: str
    observables: pd.DataFrame
    diagnostics: pd.DataFrame
    densities: Dict[float, pd.DataFrame] = field(default_factory=dict)
    nodal_metrics: Dict[float, float] = field(default_factory=dict)
    info: Dict[str, Any] = field(default_factory=dict)


def intersection_point(model: DiabaticModel) -> Tuple[float, float]:
    """Conical intersection, or the origin (with a warning) when there is none."""
    try:
        return ci_locus(model)
    except NoIsolatedIntersectionError:
        logger.warning("%s has no isolated intersection; using the origin instead", model)
        return (0.0, 0.0)


def nuclear_basis(config: ExperimentConfig) -> NuclearBasisND:
    return build_basis(
        [axis.as_tuple() for axis in config.basis.axes],
        mass=config.basis.mass,
        max_nodes=config.basis.max_nodes,
    )


def packet_from_config(config: ExperimentConfig) -> GaussianPacket:
    p = config.packet
    return GaussianPacket(center=tuple(p.center), widths=tuple(p.widths), state=p.state)


def probe_node(config: ExperimentConfig, basis: NuclearBasisND) -> int:
    """Basis node nearest to the intersection shifted by ``propagation.probe_offset``."""
    x_ci, y_ci = intersection_point(config.model.to_model())
    dx, dy = config.propagation.probe_offset
    return basis.nearest_node((x_ci + dx, y_ci + dy))


def reference_stride(record_interval: float, dt: float) -> int:
    """Reference steps per LDR record interval.

    Raises:
        ConfigurationError: If the interval is not a whole number of steps.
    """
    ratio = record_interval / dt
    stride = int(round(ratio))
    if stride < 1 or abs(ratio - stride) > 1e-9 * max(1.0, ratio):
        raise ConfigurationError(
            f"{dt} does not divide the record interval {record_interval}", "reference.dt"
        )
    return stride


class Simulator(ABC):
    """Abstract interface for propagation methods.

    Args:
        config: Validated experiment configuration.
        events: Optional subject notified of propagation progress.
    """

    method: str = ""

    def __init__(self, config: ExperimentConfig, events: Optional[Subject] = None) -> None:
        self.config = config
        self.events = events

    @abstractmethod
    def run(self) -> SimulationOutput:
        """Propagate and return the recorded tables."""
        raise NotImplementedError

    def _nodal_metrics(
        self, x: np.ndarray, y: np.ndarray, fields: Dict[float, np.ndarray]
    ) -> Dict[float, float]:
        x_ci, _ = intersection_point(self.config.model.to_model())
        return {t: nodal_line_metric(x, y, rho, x_ci) for t, rho in fields.items()}


class LDRSimulator(Simulator):
    """Local diabatic representation with RK4 time stepping."""

    method = "ldr"

    def run(self) -> SimulationOutput:
        cfg = self.config
        model = cfg.model.to_model()
        basis = nuclear_basis(cfg)
        system = build_ldr_system(model, basis, cfg.gauge.to_mode(), cfg.propagation.decoupled)
        c0 = initial_coefficients(packet_from_config(cfg), basis, system.adiabatic)
        probe = probe_node(cfg, basis)

        prop = cfg.propagation
        result = propagate(
            system,
            c0,
            prop.dt,
            prop.t_final,
            prop.record_every,
            probe,
            snapshot_times=cfg.outputs.density_times,
            events=self.events,
        )

        axes = [
            density_axes(axis.min, axis.max, n)
            for axis, n in zip(cfg.basis.axes, cfg.outputs.density_points)
        ]
        fields = {
            t: nuclear_density(C, system.overlaps, basis, axes) for t, C in result.snapshots.items()
        }
        densities = {t: density_frame(axes[0], axes[1], rho) for t, rho in fields.items()}

        return SimulationOutput(
            method=self.method,
            observables=result.observables,
            diagnostics=result.diagnostics,
            densities=densities,
            nodal_metrics=self._nodal_metrics(axes[0], axes[1], fields),
            info={
                "nodes": basis.size,
                "captured_norm": c0.captured_norm,
                "probe_node": probe,
                "probe_point": basis.nodes[probe].tolist(),
                "final_norm": result.final.norm if result.final is not None else None,
            },
        )


class ReferenceSimulator(Simulator):
    """Split-operator FFT propagation on a uniform grid."""

    method = "reference"

    def run(self) -> SimulationOutput:
        cfg = self.config
        ref = cfg.reference
        model = cfg.model.to_model()
        grid = UniformGrid2D.from_extents(ref.extents, ref.nx, ref.ny)
        propagator = SplitOperatorPropagator(grid, model, ref.dt, mass=cfg.basis.mass)
        wf0 = init_reference(grid, packet_from_config(cfg))

        # coherence is read at the grid point nearest the LDR probe node
        basis = nuclear_basis(cfg)
        node = probe_node(cfg, basis)
        probe_index = grid.nearest_index(basis.nodes[node])
        probe_weight = float(basis.weights()[node])

        stride = reference_stride(cfg.propagation.record_interval, ref.dt)
        result = propagate_reference(
            propagator,
            wf0,
            cfg.propagation.t_final,
            stride,
            probe_index,
            probe_weight,
            snapshot_times=cfg.outputs.density_times,
            events=self.events,
        )

        fields = {t: wf.density() for t, wf in result.snapshots.items()}
        densities = {t: density_frame(grid.x, grid.y, rho) for t, rho in fields.items()}

        return SimulationOutput(
            method=self.method,
            observables=result.observables,
            diagnostics=result.diagnostics,
            densities=densities,
            nodal_metrics=self._nodal_metrics(grid.x, grid.y, fields),
            info={
                "grid": str(grid),
                "record_stride": stride,
                "probe_index": list(probe_index),
                "probe_weight": probe_weight,
                "max_edge_density": result.max_edge_density,
            },
        )


def wilson_scan(config: ExperimentConfig) -> pd.DataFrame:
    """Wilson loop of every configured circle, one row per loop."""
    model = config.model.to_model()
    gauge = config.gauge.to_mode()
    rows = []
    for loop_cfg in config.wilson.loops:
        center = intersection_point(model) if loop_cfg.center is None else tuple(loop_cfg.center)
        loop = circle_loop(center, loop_cfg.radius, loop_cfg.points)
        W = wilson_loop(model, loop, loop_cfg.state, gauge)
        phase = wilson_phase(W)
        logger.info(
            "Wilson loop around (%g, %g), r=%g: arg W = %.12f", center[0], center[1], loop_cfg.radius, phase
        )
        rows.append(
            {
                "center_x": float(center[0]),
                "center_y": float(center[1]),
                "radius": loop_cfg.radius,
                "points": loop_cfg.points,
                "state": loop_cfg.state,
                "re_w": W.real,
                "im_w": W.imag,
                "arg_w": phase,
                "abs_w": abs(W),
            }
        )
    return pd.DataFrame(rows, columns=WILSON_COLUMNS)


def basis_report(config: ExperimentConfig) -> Tuple[pd.DataFrame, Dict[str, Any]]:
    """Node table and summary facts of the configured nuclear basis."""
    basis = nuclear_basis(config)
    columns = ["x", "y"] if basis.ndim == 2 else [f"q{d}" for d in range(basis.ndim)]
    nodes = pd.DataFrame(basis.nodes, columns=columns)
    nodes.insert(0, "node", np.arange(basis.size))
    nodes["weight"] = basis.weights()
    info = {
        "nodes": basis.size,
        "shape": list(basis.shape),
        "overlap_condition": [f.overlap_cond for f in basis.factors],
        "kinetic_spectral_radius": float(np.max(np.abs(np.linalg.eigvalsh(basis.kinetic)))),
        "extents": [[float(f.nodes[0]), float(f.nodes[-1])] for f in basis.factors],
    }
    return nodes, info
