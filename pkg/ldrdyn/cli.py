"""Command-line interface: ``ldr-dyn <subcommand> --config <path> [--out <dir>] [--seed <n>]``."""

from __future__ import annotations

import argparse
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd
import scipy

from ldrdyn import __version__
from ldrdyn.config import DEFAULT_PROFILE, ConfigurationManager, ExperimentConfig
from ldrdyn.patterns.factory import get_simulator
from ldrdyn.patterns.observer import ProgressLogger, Subject
from ldrdyn.series import SeriesReader, compare_series, time_label, write_table
from ldrdyn.simulator import SimulationOutput, basis_report, wilson_scan

logger = logging.getLogger(__name__)


class DynamicsApp:
    """Encapsulates CLI and app-level orchestration."""

    def __init__(self, manager: ConfigurationManager | None = None) -> None:
        self.manager = manager or ConfigurationManager()

    def _create_arg_parser(self) -> argparse.ArgumentParser:
        """Create and configure CLI argument parser."""
        parser = argparse.ArgumentParser(
            prog="ldr-dyn",
            description="Local diabatic representation dynamics through a conical intersection",
        )
        subparsers = parser.add_subparsers(dest="command", help="Available commands")

        common = argparse.ArgumentParser(add_help=False)
        common.add_argument(
            "--config",
            help="Experiment configuration JSON (default: bundled profile)",
        )
        common.add_argument("--out", help="Output directory (overrides outputs.directory)")
        common.add_argument("--seed", type=int, help="Gauge seed (overrides gauge.seed)")

        subparsers.add_parser("ldr", parents=[common], help="Run the LDR propagation")
        subparsers.add_parser(
            "reference", parents=[common], help="Run the split-operator reference propagation"
        )
        compare_parser = subparsers.add_parser(
            "compare", parents=[common], help="Compare two observable series"
        )
        compare_parser.add_argument(
            "--left", help="First series (default: <out>/ldr/observables)"
        )
        compare_parser.add_argument(
            "--right", help="Second series (default: <out>/reference/observables)"
        )
        subparsers.add_parser("wilson", parents=[common], help="Evaluate the configured Wilson loops")
        subparsers.add_parser(
            "basis-info", parents=[common], help="Describe the configured nuclear basis"
        )
        return parser

    def run(self, argv: Optional[List[str]] = None) -> int:
        """Run the app with given CLI arguments.

        Returns:
            Exit code: 0 on success, 1 when a comparison fails, 2 on error.
        """
        parser = self._create_arg_parser()
        args = parser.parse_args(argv)

        if not args.command:
            parser.print_help()
            return 0

        handlers = {
            "ldr": self._handle_ldr,
            "reference": self._handle_reference,
            "compare": self._handle_compare,
            "wilson": self._handle_wilson,
            "basis-info": self._handle_basis_info,
        }
        try:
            self._load_config(args)
            return handlers[args.command](args)
        except Exception as exc:
            message = " ".join(str(exc).split())
            logger.error("%s: %s", type(exc).__name__, message)
            return 2

    # -- helpers -----------------------------------------------------------

    def _load_config(self, args: argparse.Namespace) -> ExperimentConfig:
        self.manager.load_from_file(args.config or DEFAULT_PROFILE)
        if args.seed is not None:
            self.manager.override_seed(args.seed)
        if args.out:
            self.manager.override_directory(args.out)
        return self.manager.config

    @property
    def config(self) -> ExperimentConfig:
        return self.manager.config

    @property
    def out_dir(self) -> Path:
        return Path(self.config.outputs.directory)

    def _write_manifest(self, directory: Path, command: str, extra: Dict[str, Any]) -> Path:
        manifest = {
            "command": command,
            "version": __version__,
            "libraries": {"numpy": np.__version__, "scipy": scipy.__version__, "pandas": pd.__version__},
            "seed": self.config.gauge.seed,
            "config": self.config.to_dict(),
            "results": extra,
        }
        directory.mkdir(parents=True, exist_ok=True)
        path = directory / "manifest.json"
        path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path

    def _write_run(self, output: SimulationOutput) -> Path:
        fmt = self.config.outputs.format
        directory = self.out_dir / output.method
        write_table(output.observables, directory / "observables", fmt)
        write_table(output.diagnostics, directory / "diagnostics", fmt)
        for t, frame in output.densities.items():
            write_table(frame, directory / f"density_t{time_label(t)}", fmt)
        metrics = {time_label(t): m for t, m in output.nodal_metrics.items()}
        self._write_manifest(directory, output.method, {**output.info, "nodal_line_metric": metrics})
        logger.info("Wrote %s results to %s", output.method, directory)
        return directory

    def _simulate(self, method: str) -> int:
        events = Subject()
        events.subscribe(ProgressLogger())
        output = get_simulator(method, self.config, events).run()
        directory = self._write_run(output)

        last = output.observables.iloc[-1]
        print(f"\n=== {method.upper()} run ===")
        print(f"Records: {len(output.observables)}  final t={last['t']:g}  norm={last['norm']:.12f}")
        for t, metric in output.nodal_metrics.items():
            print(f"Nodal-line metric at t={t:g}: {metric:.4g}")
        print(f"Output: {directory}")
        return 0

    # -- handlers ----------------------------------------------------------

    def _handle_ldr(self, args: argparse.Namespace) -> int:
        """Handle ldr command."""
        return self._simulate("ldr")

    def _handle_reference(self, args: argparse.Namespace) -> int:
        """Handle reference command."""
        return self._simulate("reference")

    def _handle_compare(self, args: argparse.Namespace) -> int:
        """Handle compare command; exit code 1 when a tolerance is exceeded."""
        suffix = self.config.outputs.format.suffix
        left = Path(args.left) if args.left else self.out_dir / "ldr" / f"observables{suffix}"
        right = Path(args.right) if args.right else self.out_dir / "reference" / f"observables{suffix}"

        reader = SeriesReader()
        report = compare_series(
            reader.fetch(left), reader.fetch(right), self.config.comparison.tolerances
        )
        path = write_table(report.table, self.out_dir / "comparison", self.config.outputs.format)

        print(f"\n=== Comparison: {left} vs {right} ===")
        print(report.table.to_string(index=False))
        print(f"\n{'PASS' if report.passed else 'FAIL'} -> {path}")
        return 0 if report.passed else 1

    def _handle_wilson(self, args: argparse.Namespace) -> int:
        """Handle wilson command."""
        table = wilson_scan(self.config)
        directory = self.out_dir / "wilson"
        write_table(table, directory / "wilson", self.config.outputs.format)
        self._write_manifest(directory, "wilson", {"loops": len(table)})

        print("\n=== Wilson loops ===")
        print(table.to_string(index=False))
        return 0

    def _handle_basis_info(self, args: argparse.Namespace) -> int:
        """Handle basis-info command."""
        nodes, info = basis_report(self.config)
        directory = self.out_dir / "basis"
        write_table(nodes, directory / "basis_nodes", self.config.outputs.format)
        directory.mkdir(parents=True, exist_ok=True)
        (directory / "basis_info.json").write_text(
            json.dumps(info, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )

        print("\n=== Nuclear basis ===")
        print(f"Nodes: {info['nodes']} ({' x '.join(str(s) for s in info['shape'])})")
        print(f"cond(S) per axis: {', '.join(f'{c:.3e}' for c in info['overlap_condition'])}")
        print(f"Kinetic spectral radius: {info['kinetic_spectral_radius']:.6g}")
        return 0


def main(argv: Optional[List[str]] = None) -> int:
    """Console-script entry point."""
    logging.basicConfig(level=logging.INFO, format="%(levelname)s: %(message)s")
    return DynamicsApp().run(argv)
