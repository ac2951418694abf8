"""Test fixtures and configuration for pytest."""

import json
import sys
from pathlib import Path

import pytest

# Add project root to path so imports work
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from ldrdyn.electronic_model import DiabaticModel  # noqa: E402
from ldrdyn.nuclear_basis import DEFAULT_WIDTH_FACTOR, build_basis  # noqa: E402


@pytest.fixture
def ci_model():
    """kappa = 1, lambda = 0.2, Delta = 1."""
    return DiabaticModel(kappa=1.0, lam=0.2, delta=1.0)


@pytest.fixture(scope="session")
def small_basis():
    """16 x 16 localized basis on [-6, 6]^2."""
    return build_basis([(-6.0, 6.0, 16, DEFAULT_WIDTH_FACTOR)] * 2)


@pytest.fixture
def tiny_config():
    """A configuration small enough for end-to-end CLI runs."""
    return {
        "model": {"kappa": 1.0, "lambda": 0.2, "delta": 1.0},
        "basis": {
            "axes": [
                {"min": -5.0, "max": 5.0, "count": 12},
                {"min": -5.0, "max": 5.0, "count": 12},
            ]
        },
        "gauge": {"mode": "random-phase", "seed": 11},
        "propagation": {"dt": 0.01, "t_final": 0.5, "record_every": 5},
        "reference": {"nx": 32, "ny": 32, "extents": [-6.0, 6.0, -6.0, 6.0], "dt": 0.025},
        "outputs": {"density_times": [0.0, 0.5], "density_points": [21, 21]},
        "wilson": {"loops": [{"radius": 0.3, "points": 256}]},
    }


@pytest.fixture
def write_config(tmp_path):
    """Write a configuration dict to a JSON file and return its path."""

    def _write(data, name="config.json"):
        path = tmp_path / name
        path.write_text(json.dumps(data))
        return path

    return _write
