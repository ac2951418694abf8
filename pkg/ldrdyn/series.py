"""Tabular results: schemas, reading and writing, comparison and density metrics.

Every series produced by a propagator is a ``pandas.DataFrame`` with a fixed
column order. Tables go to disk as comma-separated text with full double
precision, or as Parquet through pyarrow.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence

import numpy as np
import pandas as pd

from ldrdyn.config import OutputFormat
from ldrdyn.exceptions import AlignmentError, ConfigurationError, SchemaError

logger = logging.getLogger(__name__)

OBSERVABLE_COLUMNS = [
    "t",
    "x_mean",
    "y_mean",
    "pop_ad_0",
    "pop_ad_1",
    "pop_di_0",
    "pop_di_1",
    "coh_re",
    "coh_im",
    "coh_abs",
    "norm",
]

DIAGNOSTIC_COLUMNS = [
    "t",
    "energy",
    "rho_e_00",
    "rho_e_11",
    "rho_e_01_re",
    "rho_e_01_im",
    "purity_e",
]

DENSITY_COLUMNS = ["x", "y", "rho"]

WILSON_COLUMNS = [
    "center_x",
    "center_y",
    "radius",
    "points",
    "state",
    "re_w",
    "im_w",
    "arg_w",
    "abs_w",
]

COMPARISON_COLUMNS = ["observable", "max_abs", "rms", "tolerance", "passed"]


def record_time(step: int, dt: float) -> float:
    """Time stamp of a step, rounded so different step sizes align exactly."""
    return round(step * dt, 12)


def time_label(t: float) -> str:
    """Short label used in snapshot file names, e.g. ``density_t40``."""
    return f"{t:g}"


def series_frame(rows: Iterable[Mapping[str, float]], columns: Sequence[str]) -> pd.DataFrame:
    """Build a frame from record dicts, enforcing the column order.

    Raises:
        SchemaError: If a record misses one of ``columns``.
    """
    df = pd.DataFrame(list(rows))
    if df.empty:
        return pd.DataFrame(columns=list(columns), dtype=float)
    missing = [c for c in columns if c not in df.columns]
    if missing:
        raise SchemaError(f"records are missing columns {missing}")
    return df[list(columns)].astype(float)


def density_axes(lo: float, hi: float, points: int) -> np.ndarray:
    """Uniform evaluation axis with both end points included."""
    return np.linspace(lo, hi, points)


def density_frame(x: np.ndarray, y: np.ndarray, rho: np.ndarray) -> pd.DataFrame:
    """Long-format ``(x, y, rho)`` rows of a field sampled on ``x`` by ``y``."""
    rho = np.asarray(rho)
    if rho.shape != (len(x), len(y)):
        raise SchemaError(f"density shape {rho.shape} does not match axes ({len(x)}, {len(y)})")
    X, Y = np.meshgrid(x, y, indexing="ij")
    return pd.DataFrame({"x": X.ravel(), "y": Y.ravel(), "rho": rho.ravel()})


def nodal_line_metric(
    x: np.ndarray, y: np.ndarray, rho: np.ndarray, x_ci: float, window: float = 1.5
) -> float:
    """Max density on the ``y = 0`` row near the intersection over the global max.

    The row is the axis point closest to ``y = 0``; only points with
    ``|x - x_ci| <= window`` count.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    rho = np.asarray(rho, dtype=float)
    peak = float(rho.max())
    if not peak > 0:
        raise ConfigurationError("density is zero everywhere; nodal-line metric undefined")
    row = int(np.argmin(np.abs(y)))
    near = np.abs(x - x_ci) <= window
    if not near.any():
        raise ConfigurationError(f"no density points within {window} of x = {x_ci}")
    return float(rho[near, row].max()) / peak


def write_table(df: pd.DataFrame, path_stem: str | Path, fmt: OutputFormat = OutputFormat.CSV) -> Path:
    """Write ``df`` next to ``path_stem`` with the suffix of ``fmt``."""
    path = Path(f"{path_stem}{fmt.suffix}")
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt is OutputFormat.PARQUET:
        df.to_parquet(path, engine="pyarrow", index=False)
    else:
        df.to_csv(path, index=False)
    logger.debug("Wrote %d rows to %s", len(df), path)
    return path


class SeriesCleaner:
    """Normalizes and validates tables read back from disk.

    Attributes:
        columns: Required columns, in output order.
    """

    def __init__(self, columns: Sequence[str] = OBSERVABLE_COLUMNS) -> None:
        self.columns = list(columns)

    def normalize_columns(self, df: pd.DataFrame) -> pd.DataFrame:
        """Strip whitespace from column names."""
        return df.rename(columns={c: str(c).strip() for c in df.columns})

    def check_schema(self, df: pd.DataFrame) -> pd.DataFrame:
        """Keep the required columns in order.

        Raises:
            SchemaError: If a required column is absent.
        """
        missing = [c for c in self.columns if c not in df.columns]
        if missing:
            raise SchemaError(f"missing columns {missing}; found {list(df.columns)}")
        return df[self.columns]

    def coerce_numeric_columns(self, df: pd.DataFrame) -> pd.DataFrame:
        """Convert every column to float.

        Raises:
            SchemaError: If a column holds non-numeric text.
        """
        try:
            return df.apply(pd.to_numeric).astype(float)
        except (ValueError, TypeError) as exc:
            raise SchemaError(f"non-numeric values: {exc}") from exc

    def clean(self, df: pd.DataFrame) -> pd.DataFrame:
        df = self.normalize_columns(df)
        df = self.check_schema(df)
        return self.coerce_numeric_columns(df)


class SeriesReader:
    """Loads a series written by :func:`write_table`.

    Usage:
        reader = SeriesReader()
        df = reader.fetch("output/ldr/observables.csv")
    """

    def __init__(self, cleaner: Optional[SeriesCleaner] = None) -> None:
        self.cleaner = cleaner or SeriesCleaner()

    def fetch(self, filepath: str | Path) -> pd.DataFrame:
        """Read a CSV or Parquet table and validate its columns.

        Raises:
            FileNotFoundError: If the file does not exist.
            SchemaError: If required columns are missing or non-numeric.
        """
        path = Path(filepath)
        if not path.exists():
            raise FileNotFoundError(f"series file not found: {path}")

        if path.suffix == OutputFormat.PARQUET.suffix:
            df = pd.read_parquet(path, engine="pyarrow")
        else:
            df = pd.read_csv(path, float_precision="round_trip")
        df = self.cleaner.clean(df)

        logger.info("Loaded %d rows and %d columns from %s", len(df), len(df.columns), path.name)
        return df


@dataclass(frozen=True)
class ComparisonReport:
    """Per-observable deviations between two aligned series.

    Observables without a tolerance are reported but never fail.
    """

    table: pd.DataFrame

    @property
    def passed(self) -> bool:
        return bool(self.table["passed"].all())

    @property
    def failures(self) -> List[str]:
        return list(self.table.loc[~self.table["passed"], "observable"])

    def deviation(self, observable: str) -> float:
        return float(self.table.set_index("observable").loc[observable, "max_abs"])

    def __str__(self) -> str:
        status = "PASS" if self.passed else f"FAIL {self.failures}"
        return f"ComparisonReport({len(self.table)} observables, {status})"


def compare_series(
    left: pd.DataFrame, right: pd.DataFrame, tolerances: Optional[Dict[str, float]] = None
) -> ComparisonReport:
    """Max-abs and RMS deviation of every observable column.

    Raises:
        AlignmentError: If the two time grids differ in length or any value.
        SchemaError: If a tolerance names an unknown observable.
    """
    tolerances = tolerances or {}
    observables = [c for c in left.columns if c != "t" and c in right.columns]
    unknown = sorted(set(tolerances) - set(observables))
    if unknown:
        raise SchemaError(f"tolerances for unknown observables {unknown}")

    t_left = left["t"].to_numpy()
    t_right = right["t"].to_numpy()
    if t_left.shape != t_right.shape:
        raise AlignmentError(f"series have {len(t_left)} and {len(t_right)} records")
    mismatch = np.flatnonzero(t_left != t_right)
    if mismatch.size:
        i = int(mismatch[0])
        raise AlignmentError(f"time grids differ at record {i}: {t_left[i]!r} != {t_right[i]!r}")

    rows = []
    for name in observables:
        diff = np.abs(left[name].to_numpy() - right[name].to_numpy())
        max_abs = float(diff.max()) if diff.size else 0.0
        rms = float(np.sqrt(np.mean(diff**2))) if diff.size else 0.0
        tol = tolerances.get(name, np.nan)
        rows.append(
            {
                "observable": name,
                "max_abs": max_abs,
                "rms": rms,
                "tolerance": tol,
                "passed": bool(np.isnan(tol) or max_abs <= tol),
            }
        )
    report = ComparisonReport(pd.DataFrame(rows, columns=COMPARISON_COLUMNS))
    logger.info("%s", report)
    return report
