"""LDR dynamics: local diabatic representation quantum dynamics through a conical intersection."""

__version__ = "0.1.0"

from ldrdyn.config import ConfigurationManager, ExperimentConfig, OutputFormat, parse_config
from ldrdyn.electronic_model import (
    AdiabaticSet,
    DiabaticModel,
    ElectronicModel,
    GaugeMode,
    GaugeVariant,
    OverlapTensor,
    electronic_overlap,
    wilson_loop,
)
from ldrdyn.exceptions import LDRDynError
from ldrdyn.ldr_propagator import (
    CoefficientVector,
    GaussianPacket,
    VibronicHamiltonian,
    assemble_hamiltonian,
    build_ldr_system,
    initial_coefficients,
    propagate,
)
from ldrdyn.nuclear_basis import NuclearBasisND, build_basis, localize
from ldrdyn.reference_splitop import SplitOperatorPropagator, UniformGrid2D, init_reference
from ldrdyn.simulator import LDRSimulator, ReferenceSimulator, Simulator

__all__ = [
    "AdiabaticSet",
    "CoefficientVector",
    "ConfigurationManager",
    "DiabaticModel",
    "ElectronicModel",
    "ExperimentConfig",
    "GaugeMode",
    "GaugeVariant",
    "GaussianPacket",
    "LDRDynError",
    "LDRSimulator",
    "NuclearBasisND",
    "OutputFormat",
    "OverlapTensor",
    "ReferenceSimulator",
    "Simulator",
    "SplitOperatorPropagator",
    "UniformGrid2D",
    "VibronicHamiltonian",
    "assemble_hamiltonian",
    "build_basis",
    "build_ldr_system",
    "electronic_overlap",
    "initial_coefficients",
    "init_reference",
    "localize",
    "parse_config",
    "propagate",
    "wilson_loop",
]
