#!/usr/bin/env python3
"""
gmhd2d command line: run, sweep, kernel, inspect.

Exit codes: 0 success, 1 usage/config/checkpoint errors, 2 blow-up (run) or
kernel quadrature failure (kernel).
"""

import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import click
import numpy as np
import pandas as pd

from gmhd2d.checkpoint import read_header, write_checkpoint
from gmhd2d.config import Config, RunConfig, load_run_config
from gmhd2d.diagnostics import NormSeries, bkm_report, energy_balance_residual, transient_bounds_check
from gmhd2d.errors import (
    BlowupDetected,
    CheckpointError,
    ConfigError,
    GMHDError,
    KernelQuadratureError,
    NonConvergentTailError,
)
from gmhd2d.fields import FlowState, make_initial_condition
from gmhd2d.kernel_lab import (
    gaussian_kernel,
    kernel_l1_bounds,
    kernel_mass,
    kernel_profile,
    kernel_sign_changes,
    l1_bounds_frame,
)
from gmhd2d.timestepper import run

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FAILURE = 2
U64 = click.IntRange(0, 2 ** 64 - 1)
SUMMARY_COLUMNS = [
    "alpha",
    "beta",
    "n",
    "status",
    "verdict",
    "bkm_integral",
    "int_linf_grad_j_sq",
    "final_time",
    "regime",
    "error",
]


def _ok(message: str):
    click.echo(f"✅ {message}")


def _fail(message: str):
    click.echo(f"❌ {message}")


def _checkpoint_path(directory: str, time: float) -> str:
    return os.path.join(directory, f"{Config.CHECKPOINT_PREFIX}_t{time:.6f}.bin")


def _prepare_output(directory: str):
    try:
        os.makedirs(directory, exist_ok=True)
    except OSError as exc:
        raise ConfigError("output.directory", f"cannot create {directory}: {exc}") from exc
    if not os.access(directory, os.W_OK):
        raise ConfigError("output.directory", f"{directory} is not writable")


@dataclass
class RunOutcome:
    status: str
    final_time: float
    report: Dict[str, object] = field(default_factory=dict)
    series_path: str = ""


def execute_run(config: RunConfig) -> RunOutcome:
    """Run one configured simulation and persist its series, checkpoints and report."""
    directory = config.output.directory
    _prepare_output(directory)
    series_path = os.path.join(directory, Config.SERIES_FILE)
    grid = config.grid()
    params = config.physics
    initial = make_initial_condition(config.ic, grid)

    series: Optional[NormSeries] = None
    if config.output.resume and os.path.exists(series_path):
        series = NormSeries.from_csv(series_path)
        series.truncate_after(initial.time)
        logger.info("resuming at t=%.6g with %d recorded rows", initial.time, len(series))

    interval = config.output.checkpoint_interval
    next_checkpoint = [initial.time + interval]

    def on_record(state: FlowState, current: NormSeries):
        if interval > 0 and state.time >= next_checkpoint[0] - 1e-12 * max(1.0, state.time):
            write_checkpoint(_checkpoint_path(directory, state.time), state, params)
            current.to_csv(series_path)
            while next_checkpoint[0] <= state.time + 1e-12 * max(1.0, state.time):
                next_checkpoint[0] += interval

    try:
        result = run(initial, params, config.stepper, config.diagnostics, series=series, on_record=on_record)
    except BlowupDetected as exc:
        if exc.series is not None:
            exc.series.to_csv(series_path)
            report = bkm_report(exc.series, config.diagnostics).summary()
        else:
            report = {"verdict": "blown_up"}
        report["regime"] = params.regime()
        report["reason"] = exc.reason
        _write_report(directory, report)
        return RunOutcome("blown_up", exc.time, report, series_path)

    result.series.to_csv(series_path)
    write_checkpoint(os.path.join(directory, f"{Config.CHECKPOINT_PREFIX}_final.bin"), result.state, params)
    report = bkm_report(result.series, config.diagnostics).summary()
    report["regime"] = params.regime()
    report["energy_balance_residual"] = energy_balance_residual(result.series)
    checks = transient_bounds_check(
        result.series,
        factor=config.diagnostics.bounded_factor,
        transient_fraction=config.diagnostics.transient_fraction,
        beta=params.beta,
    )
    report["transient_bounds_ok"] = all(checks.values()) if checks else True
    _write_report(directory, report)
    return RunOutcome("completed", result.state.time, report, series_path)


def _write_report(directory: str, report: Dict[str, object]):
    pd.DataFrame([report]).to_csv(os.path.join(directory, "report.csv"), index=False, float_format="%.17g")


def _run_cell(config: RunConfig) -> Dict[str, object]:
    """One sweep cell; never raises so the sweep keeps going."""
    row: Dict[str, object] = {
        "alpha": config.physics.alpha,
        "beta": config.physics.beta,
        "n": config.grid_n,
        "regime": config.physics.regime(),
        "error": "",
    }
    try:
        outcome = execute_run(config)
    except Exception as exc:
        if isinstance(exc, (GMHDError, ValueError, OSError)):
            message = str(exc)
        else:
            logger.exception("sweep cell alpha=%g beta=%g n=%d crashed", config.physics.alpha, config.physics.beta, config.grid_n)
            message = f"{type(exc).__name__}: {exc}"
        row.update(status="failed", verdict="", bkm_integral=math.nan, int_linf_grad_j_sq=math.nan,
                   final_time=math.nan, error=message)
        return row
    row.update(
        status=outcome.status,
        verdict=outcome.report.get("verdict", ""),
        bkm_integral=outcome.report.get("bkm_integral", math.nan),
        int_linf_grad_j_sq=outcome.report.get("int_linf_grad_j_sq", math.nan),
        final_time=outcome.final_time,
    )
    return row


def resolve_workers(flag: Optional[int], config: RunConfig) -> int:
    """--workers, then GMHD2D_WORKERS, then sweep.workers, then the CPU count."""
    if flag is not None:
        return flag
    if Config.WORKERS:
        try:
            workers = int(Config.WORKERS)
        except ValueError as exc:
            raise ConfigError("GMHD2D_WORKERS", f"expected an integer, found {Config.WORKERS!r}") from exc
        if workers < 1:
            raise ConfigError("GMHD2D_WORKERS", f"must be >= 1, found {workers}")
        return workers
    if config.sweep.workers is not None:
        return config.sweep.workers
    return os.cpu_count() or 1


def run_sweep(config: RunConfig, workers: int) -> pd.DataFrame:
    """Run every (alpha, beta, n) cell and assemble the summary table."""
    base = config.output.directory
    _prepare_output(base)
    cells = [
        config.with_overrides(alpha=a, beta=b, n=n, directory=os.path.join(base, f"alpha{a:g}_beta{b:g}_n{n}"))
        for a, b, n in config.sweep_cells()
    ]
    logger.info("sweep: %d cells on %d workers", len(cells), workers)
    if workers == 1:
        rows = [_run_cell(cell) for cell in cells]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_cell, cells))
    summary = pd.DataFrame(rows, columns=SUMMARY_COLUMNS)
    summary = summary.sort_values(["alpha", "beta", "n"], kind="mergesort").reset_index(drop=True)
    summary.to_csv(os.path.join(base, Config.SUMMARY_FILE), index=False, float_format="%.17g")
    return summary


def _load(config_path: str, out: Optional[str], seed: Optional[int]) -> RunConfig:
    config = load_run_config(config_path)
    return config.with_overrides(seed=seed, directory=out)


@click.group()
def cli():
    """Generalized MHD experiments with fractional magnetic diffusion."""
    logging.basicConfig(
        level=getattr(logging, Config.LOG_LEVEL.upper(), logging.INFO),
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )


@cli.command("run")
@click.option("--config", "config_path", required=True, type=click.Path(dir_okay=False), help="Run file.")
@click.option("--out", type=click.Path(file_okay=False), default=None, help="Output directory.")
@click.option("--seed", type=U64, default=None, help="Seed for random initial data.")
def run_command(config_path: str, out: Optional[str], seed: Optional[int]) -> int:
    """Integrate one configuration."""
    try:
        config = _load(config_path, out, seed)
        outcome = execute_run(config)
    except (GMHDError, ValueError, OSError) as exc:
        _fail(str(exc))
        return EXIT_USAGE
    if outcome.status == "blown_up":
        _fail(f"blow-up at t={outcome.final_time:.6g}; series written to {outcome.series_path}")
        return EXIT_FAILURE
    _ok(f"run finished at t={outcome.final_time:.6g}, verdict {outcome.report.get('verdict')}")
    return EXIT_OK


@cli.command("sweep")
@click.option("--config", "config_path", required=True, type=click.Path(dir_okay=False), help="Run file with a [sweep] section.")
@click.option("--out", type=click.Path(file_okay=False), default=None, help="Sweep root directory.")
@click.option("--workers", type=click.IntRange(min=1), default=None, help="Parallel cells.")
@click.option("--seed", type=U64, default=None, help="Seed for random initial data.")
def sweep_command(config_path: str, out: Optional[str], workers: Optional[int], seed: Optional[int]) -> int:
    """Run a grid of (alpha, beta, n) cells."""
    try:
        config = _load(config_path, out, seed)
        summary = run_sweep(config, resolve_workers(workers, config))
    except (ConfigError, CheckpointError) as exc:
        _fail(str(exc))
        return EXIT_USAGE
    failed = int((summary["status"] == "failed").sum())
    if failed:
        _fail(f"{failed} of {len(summary)} cells failed; see {Config.SUMMARY_FILE}")
    _ok(f"sweep finished: {len(summary)} cells")
    return EXIT_OK


@cli.command("kernel")
@click.option("--beta", "betas", type=float, multiple=True, help="Kernel exponent (repeatable).")
@click.option("--l-max", type=click.IntRange(0, 4), default=2, show_default=True)
@click.option("--eta", "etas", type=click.FloatRange(min=0.0), multiple=True, help="Lambda^eta order (repeatable).")
@click.option("--r-max", type=click.FloatRange(min=0.0, min_open=True), default=20.0, show_default=True)
@click.option("--samples", type=click.IntRange(min=2), default=2001, show_default=True)
@click.option("--out", type=click.Path(file_okay=False), default=None, help="Output directory.")
def kernel_command(
    betas: Sequence[float], l_max: int, etas: Sequence[float], r_max: float, samples: int, out: Optional[str]
) -> int:
    """Tabulate fractional heat kernels and their L^1 bounds."""
    if not betas:
        _fail("no --beta given")
        return EXIT_USAGE
    if any(not b > 0 for b in betas):
        _fail("every --beta must be positive")
        return EXIT_USAGE
    directory = out or os.path.join(Config.OUTPUT_DIR, "kernel")
    try:
        _prepare_output(directory)
    except ConfigError as exc:
        _fail(str(exc))
        return EXIT_USAGE
    etas = tuple(etas) or (0.5, 1.7)
    bounds = []
    try:
        for beta in betas:
            table = kernel_profile(beta, r_max, samples)
            table.to_csv(os.path.join(directory, f"kernel_beta{beta:g}.csv"))
            click.echo(f"beta={beta:g}: h(0)={table.values[0]:.12g}  mass={kernel_mass(table):.12g}")
            if beta == 1.0:
                error = float(np.max(np.abs(table.values - gaussian_kernel(table.radii))))
                click.echo(f"beta=1: max |h - exp(-r^2/4)/(4 pi)| = {error:.3e}")
            changes = kernel_sign_changes(table)
            click.echo(f"beta={beta:g}: {len(changes)} sign change(s)")
            bounds.extend(kernel_l1_bounds(beta, l_max, etas))
    except (KernelQuadratureError, NonConvergentTailError) as exc:
        _fail(str(exc))
        return EXIT_FAILURE
    except ValueError as exc:
        _fail(str(exc))
        return EXIT_USAGE
    l1_bounds_frame(bounds).to_csv(os.path.join(directory, "l1_bounds.csv"), index=False, float_format="%.17g")
    _ok(f"kernel tables written to {directory}")
    return EXIT_OK


@cli.command("inspect")
@click.argument("path", type=click.Path(dir_okay=False))
def inspect_command(path: str) -> int:
    """Print a checkpoint header."""
    try:
        header = read_header(path)
    except CheckpointError as exc:
        _fail(str(exc))
        return EXIT_USAGE
    except OSError as exc:
        _fail(f"cannot read {path}: {exc}")
        return EXIT_USAGE
    for name, value in header.as_dict().items():
        click.echo(f"{name:>12}: {value}")
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    try:
        result = cli.main(args=argv, prog_name="gmhd2d", standalone_mode=False)
    except click.ClickException as exc:
        exc.show()
        return EXIT_USAGE
    except click.Abort:
        _fail("aborted")
        return EXIT_USAGE
    return result if isinstance(result, int) else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
