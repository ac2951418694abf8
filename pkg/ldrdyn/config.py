"""Experiment configuration: dataclass sections, JSON loading and validation.

A configuration file is a JSON object with the sections ``model``, ``basis``,
``gauge``, ``packet``, ``propagation``, ``reference``, ``outputs``, ``wilson``
and ``comparison``. Every section is optional and falls back to the defaults
below; unknown keys are rejected at every level.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Type, TypeVar

from ldrdyn.electronic_model import DiabaticModel, GaugeMode, GaugeVariant
from ldrdyn.exceptions import ConfigurationError
from ldrdyn.nuclear_basis import DEFAULT_MAX_NODES, DEFAULT_WIDTH_FACTOR

logger = logging.getLogger(__name__)

E = TypeVar("E", bound=Enum)

DEFAULT_PROFILE = Path(__file__).parent / "profiles" / "default.json"


class OutputFormat(Enum):
    """Supported table formats."""

    CSV = "csv"
    PARQUET = "parquet"

    @property
    def suffix(self) -> str:
        return f".{self.value}"


@dataclass
class ModelConfig:
    """Parameters of the two-state conical-intersection model."""

    kappa: float = 1.0
    lam: float = 0.2
    delta: float = 1.0

    def to_model(self) -> DiabaticModel:
        return DiabaticModel(kappa=self.kappa, lam=self.lam, delta=self.delta)

    def to_dict(self) -> Dict[str, Any]:
        return {"kappa": self.kappa, "lambda": self.lam, "delta": self.delta}


@dataclass
class AxisConfig:
    """Primitive Gaussian grid along one nuclear coordinate."""

    min: float = -6.0
    max: float = 6.0
    count: int = 32
    width_factor: float = DEFAULT_WIDTH_FACTOR

    def as_tuple(self) -> Tuple[float, float, int, float]:
        return (self.min, self.max, self.count, self.width_factor)


@dataclass
class BasisConfig:
    """Nuclear basis: one axis per dimension plus mass and size cap."""

    axes: List[AxisConfig] = field(default_factory=lambda: [AxisConfig(), AxisConfig()])
    mass: float = 1.0
    max_nodes: int = DEFAULT_MAX_NODES

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class GaugeConfig:
    """Phase convention of the adiabatic states."""

    mode: GaugeVariant = GaugeVariant.FIXED_POSITIVE
    seed: Optional[int] = None

    def to_mode(self) -> GaugeMode:
        return GaugeMode(variant=self.mode, seed=self.seed)

    def to_dict(self) -> Dict[str, Any]:
        return {"mode": self.mode.value, "seed": self.seed}


@dataclass
class PacketConfig:
    """Initial Gaussian packet on one diabatic state."""

    center: List[float] = field(default_factory=lambda: [-1.0, 0.0])
    widths: List[float] = field(default_factory=lambda: [1.0, 1.0])
    state: int = 1

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class PropagationConfig:
    """Time stepping of the LDR equations of motion."""

    dt: float = 5e-3
    t_final: float = 40.0
    record_every: int = 10
    probe_offset: List[float] = field(default_factory=lambda: [0.1, 0.1])
    decoupled: bool = False

    @property
    def record_interval(self) -> float:
        return self.dt * self.record_every

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class ReferenceConfig:
    """Split-operator grid and time step."""

    nx: int = 128
    ny: int = 128
    extents: List[float] = field(default_factory=lambda: [-6.0, 6.0, -6.0, 6.0])
    dt: float = 2.5e-3

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class OutputConfig:
    """Where and how results are written."""

    directory: str = "./output"
    density_times: List[float] = field(default_factory=lambda: [0.0, 40.0])
    density_points: List[int] = field(default_factory=lambda: [121, 121])
    format: OutputFormat = OutputFormat.CSV

    def to_dict(self) -> Dict[str, Any]:
        config_dict = asdict(self)
        config_dict["format"] = self.format.value
        return config_dict


@dataclass
class WilsonLoopConfig:
    """One circular loop; ``center = None`` means the intersection point."""

    center: Optional[List[float]] = None
    radius: float = 0.3
    points: int = 256
    state: int = 0


@dataclass
class WilsonConfig:
    loops: List[WilsonLoopConfig] = field(
        default_factory=lambda: [
            WilsonLoopConfig(),
            WilsonLoopConfig(center=[2.0, 2.0], radius=0.1, points=64),
        ]
    )

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class ComparisonConfig:
    """Max-abs tolerances per observable column; unlisted columns are report-only."""

    tolerances: Dict[str, float] = field(
        default_factory=lambda: {
            "x_mean": 5e-2,
            "pop_ad_0": 5e-2,
            "pop_ad_1": 5e-2,
            "coh_abs": 2e-2,
        }
    )

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class ExperimentConfig:
    """Complete, validated experiment description."""

    model: ModelConfig = field(default_factory=ModelConfig)
    basis: BasisConfig = field(default_factory=BasisConfig)
    gauge: GaugeConfig = field(default_factory=GaugeConfig)
    packet: PacketConfig = field(default_factory=PacketConfig)
    propagation: PropagationConfig = field(default_factory=PropagationConfig)
    reference: ReferenceConfig = field(default_factory=ReferenceConfig)
    outputs: OutputConfig = field(default_factory=OutputConfig)
    wilson: WilsonConfig = field(default_factory=WilsonConfig)
    comparison: ComparisonConfig = field(default_factory=ComparisonConfig)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "model": self.model.to_dict(),
            "basis": self.basis.to_dict(),
            "gauge": self.gauge.to_dict(),
            "packet": self.packet.to_dict(),
            "propagation": self.propagation.to_dict(),
            "reference": self.reference.to_dict(),
            "outputs": self.outputs.to_dict(),
            "wilson": self.wilson.to_dict(),
            "comparison": self.comparison.to_dict(),
        }

    def __str__(self) -> str:
        return (
            f"ExperimentConfig({self.model.to_model()}, "
            f"gauge={self.gauge.mode.value}, dt={self.propagation.dt}, "
            f"t_final={self.propagation.t_final})"
        )


# ---------------------------------------------------------------------------
# validation helpers
# ---------------------------------------------------------------------------


def _join(path: str, key: str) -> str:
    return f"{path}.{key}" if path else key


def _section(data: Any, path: str, allowed: Sequence[str]) -> Dict[str, Any]:
    if not isinstance(data, dict):
        raise ConfigurationError("expected an object", path)
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        raise ConfigurationError(f"unknown key(s) {unknown}", path)
    return data


def _number(
    data: Dict[str, Any],
    key: str,
    path: str,
    default: float,
    positive: bool = False,
    nonnegative: bool = False,
) -> float:
    key_path = _join(path, key)
    value = data.get(key, default)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigurationError(f"expected a number, got {value!r}", key_path)
    value = float(value)
    if not math.isfinite(value):
        raise ConfigurationError("must be finite", key_path)
    if positive and not value > 0:
        raise ConfigurationError(f"must be > 0, got {value}", key_path)
    if nonnegative and value < 0:
        raise ConfigurationError(f"must be >= 0, got {value}", key_path)
    return value


def _integer(
    data: Dict[str, Any], key: str, path: str, default: Optional[int], minimum: Optional[int] = None
) -> Optional[int]:
    key_path = _join(path, key)
    value = data.get(key, default)
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigurationError(f"expected an integer, got {value!r}", key_path)
    if minimum is not None and value < minimum:
        raise ConfigurationError(f"must be >= {minimum}, got {value}", key_path)
    return value


def _vector(
    data: Dict[str, Any], key: str, path: str, default: List[float], length: Optional[int] = None
) -> List[float]:
    key_path = _join(path, key)
    value = data.get(key, default)
    if not isinstance(value, list):
        raise ConfigurationError(f"expected a list, got {value!r}", key_path)
    if length is not None and len(value) != length:
        raise ConfigurationError(f"expected {length} entries, got {len(value)}", key_path)
    return [float(v) for v in _checked(value, key_path)]


def _checked(values: List[Any], key_path: str) -> List[Any]:
    for i, v in enumerate(values):
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise ConfigurationError(f"entry {i} is not a finite number: {v!r}", key_path)
    return values


def _enum(data: Dict[str, Any], key: str, path: str, enum_cls: Type[E], default: E) -> E:
    value = data.get(key, default.value)
    try:
        return enum_cls(value)
    except ValueError:
        choices = [e.value for e in enum_cls]
        raise ConfigurationError(f"expected one of {choices}, got {value!r}", _join(path, key)) from None


# ---------------------------------------------------------------------------
# section loaders
# ---------------------------------------------------------------------------


def _load_model(data: Any) -> ModelConfig:
    path = "model"
    d = _section(data, path, ["kappa", "lambda", "delta"])
    base = ModelConfig()
    return ModelConfig(
        kappa=_number(d, "kappa", path, base.kappa),
        lam=_number(d, "lambda", path, base.lam),
        delta=_number(d, "delta", path, base.delta),
    )


def _load_axis(data: Any, path: str) -> AxisConfig:
    d = _section(data, path, ["min", "max", "count", "width_factor"])
    base = AxisConfig()
    axis = AxisConfig(
        min=_number(d, "min", path, base.min),
        max=_number(d, "max", path, base.max),
        count=_integer(d, "count", path, base.count, minimum=2),
        width_factor=_number(d, "width_factor", path, base.width_factor, positive=True),
    )
    if not axis.max > axis.min:
        raise ConfigurationError("max must exceed min", _join(path, "max"))
    return axis


def _load_basis(data: Any) -> BasisConfig:
    path = "basis"
    d = _section(data, path, ["axes", "mass", "max_nodes"])
    base = BasisConfig()
    axes = base.axes
    if "axes" in d:
        if not isinstance(d["axes"], list) or not d["axes"]:
            raise ConfigurationError("expected a non-empty list", "basis.axes")
        axes = [_load_axis(a, f"basis.axes[{i}]") for i, a in enumerate(d["axes"])]
    return BasisConfig(
        axes=axes,
        mass=_number(d, "mass", path, base.mass, positive=True),
        max_nodes=_integer(d, "max_nodes", path, base.max_nodes, minimum=1),
    )


def _load_gauge(data: Any) -> GaugeConfig:
    path = "gauge"
    d = _section(data, path, ["mode", "seed"])
    mode = _enum(d, "mode", path, GaugeVariant, GaugeConfig().mode)
    seed = _integer(d, "seed", path, None, minimum=0)
    if mode is not GaugeVariant.FIXED_POSITIVE and seed is None:
        raise ConfigurationError(f"required when mode is '{mode.value}'", "gauge.seed")
    return GaugeConfig(mode=mode, seed=seed)


def _load_packet(data: Any) -> PacketConfig:
    path = "packet"
    d = _section(data, path, ["center", "widths", "state"])
    base = PacketConfig()
    packet = PacketConfig(
        center=_vector(d, "center", path, base.center),
        widths=_vector(d, "widths", path, base.widths),
        state=_integer(d, "state", path, base.state, minimum=0),
    )
    if len(packet.widths) != len(packet.center):
        raise ConfigurationError("needs one width per center coordinate", "packet.widths")
    if any(w <= 0 for w in packet.widths):
        raise ConfigurationError("widths must be > 0", "packet.widths")
    return packet


def _load_propagation(data: Any) -> PropagationConfig:
    path = "propagation"
    d = _section(data, path, ["dt", "t_final", "record_every", "probe_offset", "decoupled"])
    base = PropagationConfig()
    decoupled = d.get("decoupled", base.decoupled)
    if not isinstance(decoupled, bool):
        raise ConfigurationError(f"expected true or false, got {decoupled!r}", "propagation.decoupled")
    return PropagationConfig(
        dt=_number(d, "dt", path, base.dt, positive=True),
        t_final=_number(d, "t_final", path, base.t_final, nonnegative=True),
        record_every=_integer(d, "record_every", path, base.record_every, minimum=1),
        probe_offset=_vector(d, "probe_offset", path, base.probe_offset),
        decoupled=decoupled,
    )


def _load_reference(data: Any) -> ReferenceConfig:
    path = "reference"
    d = _section(data, path, ["nx", "ny", "extents", "dt"])
    base = ReferenceConfig()
    ref = ReferenceConfig(
        nx=_integer(d, "nx", path, base.nx, minimum=1),
        ny=_integer(d, "ny", path, base.ny, minimum=1),
        extents=_vector(d, "extents", path, base.extents, length=4),
        dt=_number(d, "dt", path, base.dt, positive=True),
    )
    for key, n in (("nx", ref.nx), ("ny", ref.ny)):
        if n < 16 or n & (n - 1):
            raise ConfigurationError(f"must be a power of two >= 16, got {n}", _join(path, key))
    x0, x1, y0, y1 = ref.extents
    if not (x1 > x0 and y1 > y0):
        raise ConfigurationError("expected [x_min, x_max, y_min, y_max] with max > min", "reference.extents")
    return ref


def _load_outputs(data: Any) -> OutputConfig:
    path = "outputs"
    d = _section(data, path, ["directory", "density_times", "density_points", "format"])
    base = OutputConfig()
    directory = d.get("directory", base.directory)
    if not isinstance(directory, str) or not directory:
        raise ConfigurationError("expected a non-empty string", "outputs.directory")
    times = _vector(d, "density_times", path, base.density_times)
    if any(t < 0 for t in times):
        raise ConfigurationError("times must be >= 0", "outputs.density_times")
    points = d.get("density_points", base.density_points)
    if not isinstance(points, list) or not all(
        isinstance(p, int) and not isinstance(p, bool) and p >= 2 for p in points
    ):
        raise ConfigurationError("expected a list of integers >= 2", "outputs.density_points")
    return OutputConfig(
        directory=directory,
        density_times=times,
        density_points=points,
        format=_enum(d, "format", path, OutputFormat, base.format),
    )


def _load_wilson(data: Any) -> WilsonConfig:
    path = "wilson"
    d = _section(data, path, ["loops"])
    if "loops" not in d:
        return WilsonConfig()
    if not isinstance(d["loops"], list):
        raise ConfigurationError("expected a list", "wilson.loops")
    loops = []
    for i, item in enumerate(d["loops"]):
        lpath = f"wilson.loops[{i}]"
        ld = _section(item, lpath, ["center", "radius", "points", "state"])
        center = None if ld.get("center") is None else _vector(ld, "center", lpath, [], length=2)
        loops.append(
            WilsonLoopConfig(
                center=center,
                radius=_number(ld, "radius", lpath, 0.3, positive=True),
                points=_integer(ld, "points", lpath, 256, minimum=3),
                state=_integer(ld, "state", lpath, 0, minimum=0),
            )
        )
    return WilsonConfig(loops=loops)


def _load_comparison(data: Any) -> ComparisonConfig:
    path = "comparison"
    d = _section(data, path, ["tolerances"])
    if "tolerances" not in d:
        return ComparisonConfig()
    tol = d["tolerances"]
    if not isinstance(tol, dict):
        raise ConfigurationError("expected an object", "comparison.tolerances")
    return ComparisonConfig(
        tolerances={k: _number(tol, k, "comparison.tolerances", 0.0, nonnegative=True) for k in tol}
    )


_LOADERS = {
    "model": _load_model,
    "basis": _load_basis,
    "gauge": _load_gauge,
    "packet": _load_packet,
    "propagation": _load_propagation,
    "reference": _load_reference,
    "outputs": _load_outputs,
    "wilson": _load_wilson,
    "comparison": _load_comparison,
}


def config_from_dict(data: Dict[str, Any]) -> ExperimentConfig:
    """Validate a parsed JSON object and build the configuration.

    Raises:
        ConfigurationError: On unknown keys or invalid values, naming the key path.
    """
    d = _section(data, "", list(_LOADERS))
    sections = {name: loader(d[name]) for name, loader in _LOADERS.items() if name in d}
    config = ExperimentConfig(**sections)
    if len(config.packet.center) != len(config.basis.axes):
        raise ConfigurationError(
            f"expected {len(config.basis.axes)} coordinates to match basis.axes", "packet.center"
        )
    if len(config.propagation.probe_offset) != len(config.basis.axes):
        raise ConfigurationError(
            f"expected {len(config.basis.axes)} coordinates to match basis.axes",
            "propagation.probe_offset",
        )
    return config


class ConfigurationManager:
    """Loads, overrides and saves the experiment configuration."""

    def __init__(self) -> None:
        self.config = ExperimentConfig()
        self.source: Optional[Path] = None

    def load_config(self, data: Dict[str, Any]) -> ExperimentConfig:
        """Load configuration from an already-parsed dictionary."""
        self.config = config_from_dict(data)
        logger.debug("Configuration loaded: %s", self.config)
        return self.config

    def load_from_json(self, json_str: str) -> ExperimentConfig:
        """Load configuration from a JSON string."""
        try:
            data = json.loads(json_str)
        except json.JSONDecodeError as e:
            raise ConfigurationError(f"malformed JSON at line {e.lineno} column {e.colno}: {e.msg}") from e
        return self.load_config(data)

    def load_from_file(self, file_path: str | Path) -> ExperimentConfig:
        """Load configuration from a JSON file."""
        path = Path(file_path)
        if not path.is_file():
            raise ConfigurationError(f"configuration file not found: {path}")
        config = self.load_from_json(path.read_text(encoding="utf-8"))
        self.source = path
        logger.info("Configuration loaded from file: %s", path)
        return config

    def override_seed(self, seed: int) -> None:
        """Replace the gauge seed, e.g. from ``--seed``."""
        if seed < 0:
            raise ConfigurationError(f"must be >= 0, got {seed}", "gauge.seed")
        self.config = replace(self.config, gauge=replace(self.config.gauge, seed=seed))

    def override_directory(self, directory: str | Path) -> None:
        """Replace the output directory, e.g. from ``--out``."""
        self.config = replace(
            self.config, outputs=replace(self.config.outputs, directory=str(directory))
        )

    def to_json(self) -> str:
        return json.dumps(self.config.to_dict(), indent=2, sort_keys=True)

    def save_to_file(self, file_path: str | Path) -> None:
        """Save the effective configuration as JSON."""
        Path(file_path).write_text(self.to_json() + "\n", encoding="utf-8")
        logger.info("Configuration saved to file: %s", file_path)

    def __str__(self) -> str:
        return f"ConfigurationManager(source={self.source}, {self.config})"


def parse_config(path: str | Path) -> ExperimentConfig:
    """Read and validate an experiment configuration file."""
    return ConfigurationManager().load_from_file(path)
