import dataclasses
import itertools
import math
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import toml
from dotenv import load_dotenv

from gmhd2d.diagnostics import DiagnosticsConfig
from gmhd2d.dynamics import PhysicsParams
from gmhd2d.errors import ConfigError
from gmhd2d.fields import InitialCondition
from gmhd2d.spectral import Grid2D
from gmhd2d.timestepper import StepperConfig

# Load environment variables
load_dotenv()


class Config:
    """Environment settings for gmhd2d runs"""

    # Sweep parallelism (fallback for --workers)
    WORKERS = os.getenv("GMHD2D_WORKERS", "")

    # Output layout
    OUTPUT_DIR = os.getenv("GMHD2D_OUTPUT_DIR", "./runs")
    SERIES_FILE = os.getenv("GMHD2D_SERIES_FILE", "series.csv")
    CHECKPOINT_PREFIX = os.getenv("GMHD2D_CHECKPOINT_PREFIX", "checkpoint")
    SUMMARY_FILE = "summary.csv"

    LOG_LEVEL = os.getenv("GMHD2D_LOG_LEVEL", "INFO")

    # Sweep grids larger than this are rejected
    MAX_SWEEP_CELLS = 200


PHYSICS_PRESETS = ("custom", "magnetic_diffusion")

_FLOAT = (int, float)
_INT = (int,)
_STR = (str,)
_BOOL = (bool,)
_LIST = (list,)

SCHEMA: Dict[str, Dict[str, tuple]] = {
    "physics": {"preset": _STR, "nu": _FLOAT, "alpha": _FLOAT, "kappa": _FLOAT, "beta": _FLOAT},
    "grid": {"n": _INT, "box_length": _FLOAT},
    "ic": {
        "kind": _STR,
        "amplitude": _FLOAT,
        "magnetic_amplitude": _FLOAT,
        "seed": _INT,
        "k_min": _INT,
        "k_max": _INT,
        "mode": _LIST,
        "path": _STR,
    },
    "stepper": {
        "scheme": _STR,
        "cfl": _FLOAT,
        "dt_max": _FLOAT,
        "dt_fixed": _FLOAT,
        "t_end": _FLOAT,
        "blowup_threshold": _FLOAT,
    },
    "diagnostics": {
        "cadence": _FLOAT,
        "lp_exponents": _LIST,
        "delta": _FLOAT,
        "record_delta": _BOOL,
        "growth_slope": _FLOAT,
        "bounded_factor": _FLOAT,
        "transient_fraction": _FLOAT,
    },
    "output": {"directory": _STR, "checkpoint_interval": _FLOAT, "resume": _BOOL},
    "sweep": {"alpha": _LIST, "beta": _LIST, "n": _LIST, "workers": _INT},
}


@dataclass(frozen=True)
class OutputConfig:
    """Where a run writes; ``checkpoint_interval`` is simulation time (0 = final state only)."""

    directory: str = Config.OUTPUT_DIR
    checkpoint_interval: float = 0.0
    resume: bool = False

    def __post_init__(self):
        if not self.directory:
            raise ValueError("directory must not be empty")
        if not (self.checkpoint_interval >= 0 and math.isfinite(self.checkpoint_interval)):
            raise ValueError(f"checkpoint_interval must be >= 0, got {self.checkpoint_interval}")


@dataclass(frozen=True)
class SweepConfig:
    alpha: Tuple[float, ...] = ()
    beta: Tuple[float, ...] = ()
    n: Tuple[int, ...] = ()
    workers: Optional[int] = None

    def __post_init__(self):
        if self.workers is not None and self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")


@dataclass(frozen=True)
class RunConfig:
    """Everything one simulation needs."""

    physics: PhysicsParams = field(default_factory=PhysicsParams)
    grid_n: int = 128
    box_length: float = 2.0 * math.pi
    ic: InitialCondition = field(default_factory=InitialCondition)
    stepper: StepperConfig = field(default_factory=StepperConfig)
    diagnostics: DiagnosticsConfig = field(default_factory=DiagnosticsConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)

    def grid(self) -> Grid2D:
        return Grid2D(self.grid_n, self.box_length)

    def with_overrides(
        self,
        alpha: Optional[float] = None,
        beta: Optional[float] = None,
        n: Optional[int] = None,
        seed: Optional[int] = None,
        directory: Optional[str] = None,
    ) -> "RunConfig":
        """Copy with the given fields replaced (sweep cells, CLI flags)."""
        physics = self.physics
        if alpha is not None:
            physics = dataclasses.replace(physics, alpha=float(alpha))
        if beta is not None:
            physics = dataclasses.replace(physics, beta=float(beta))
        ic = self.ic if seed is None else dataclasses.replace(self.ic, seed=int(seed))
        output = self.output if directory is None else dataclasses.replace(self.output, directory=directory)
        return dataclasses.replace(
            self,
            physics=physics,
            grid_n=self.grid_n if n is None else int(n),
            ic=ic,
            output=output,
        )

    def sweep_cells(self) -> List[Tuple[float, float, int]]:
        """(alpha, beta, n) product; unset axes fall back to the base run."""
        alphas = self.sweep.alpha or (self.physics.alpha,)
        betas = self.sweep.beta or (self.physics.beta,)
        sizes = self.sweep.n or (self.grid_n,)
        cells = list(itertools.product(alphas, betas, sizes))
        if len(cells) > Config.MAX_SWEEP_CELLS:
            raise ConfigError("sweep", f"{len(cells)} cells exceed the limit of {Config.MAX_SWEEP_CELLS}")
        return cells


def _check_types(raw: Dict[str, Any]):
    for section, values in raw.items():
        if section not in SCHEMA:
            raise ConfigError(section, "unknown section")
        if not isinstance(values, dict):
            raise ConfigError(section, "expected a [section] table")
        for key, value in values.items():
            expected = SCHEMA[section].get(key)
            if expected is None:
                raise ConfigError(f"{section}.{key}", "unknown key")
            if isinstance(value, bool) and bool not in expected:
                raise ConfigError(f"{section}.{key}", f"expected {expected[-1].__name__}, got bool")
            if not isinstance(value, expected):
                raise ConfigError(f"{section}.{key}", f"expected {expected[-1].__name__}, got {type(value).__name__}")


def _numbers(section: str, key: str, values: list, kind=float) -> tuple:
    out = []
    for value in values:
        if isinstance(value, bool) or not isinstance(value, (int, float)) or (kind is int and not isinstance(value, int)):
            raise ConfigError(f"{section}.{key}", f"expected a list of {kind.__name__}, found {value!r}")
        out.append(kind(value))
    return tuple(out)


def _build(section: str, factory, values: Dict[str, Any]):
    """Construct a sub-config, turning its ValueError into a ConfigError naming the key."""
    try:
        return factory(**values)
    except ValueError as exc:
        message = str(exc)
        key = next((k for k in values if message.startswith(k) or f" {k} " in message), None)
        if key is None:
            key = next((k for k in SCHEMA[section] if message.startswith(k) or f" {k} " in message), None)
        raise ConfigError(f"{section}.{key}" if key else section, message) from exc


def parse_run_config(raw: Dict[str, Any]) -> RunConfig:
    """Validate a parsed config mapping into a RunConfig."""
    _check_types(raw)
    physics_raw = dict(raw.get("physics", {}))
    preset = physics_raw.pop("preset", "custom")
    if preset not in PHYSICS_PRESETS:
        raise ConfigError("physics.preset", f"unknown preset {preset!r}; expected one of {PHYSICS_PRESETS}")
    if preset == "magnetic_diffusion":
        for key in ("nu", "alpha"):
            if physics_raw.get(key, 0.0) != 0.0:
                raise ConfigError(f"physics.{key}", "must be 0 under the magnetic_diffusion preset")
    physics = _build("physics", PhysicsParams, {k: float(v) for k, v in physics_raw.items()})

    grid_raw = raw.get("grid", {})
    grid_n = grid_raw.get("n", 128)
    box_length = float(grid_raw.get("box_length", 2.0 * math.pi))
    _build("grid", Grid2D, {"n": grid_n, "box_length": box_length})

    ic_raw = dict(raw.get("ic", {}))
    if "mode" in ic_raw:
        mode = _numbers("ic", "mode", ic_raw["mode"], int)
        if len(mode) != 2:
            raise ConfigError("ic.mode", f"expected two integers, found {len(mode)}")
        ic_raw["mode"] = mode
    ic = _build("ic", InitialCondition, ic_raw)

    stepper = _build("stepper", StepperConfig, dict(raw.get("stepper", {})))

    diag_raw = dict(raw.get("diagnostics", {}))
    if "lp_exponents" in diag_raw:
        diag_raw["lp_exponents"] = _numbers("diagnostics", "lp_exponents", diag_raw["lp_exponents"])
    diagnostics = _build("diagnostics", DiagnosticsConfig, diag_raw)

    output = _build("output", OutputConfig, dict(raw.get("output", {})))
    if output.resume and ic.kind != "from_file":
        raise ConfigError("output.resume", "resume needs ic.kind = \"from_file\"")

    sweep_raw = dict(raw.get("sweep", {}))
    for key, kind in (("alpha", float), ("beta", float), ("n", int)):
        if key in sweep_raw:
            sweep_raw[key] = _numbers("sweep", key, sweep_raw[key], kind)
    sweep = _build("sweep", SweepConfig, sweep_raw)

    config = RunConfig(
        physics=physics,
        grid_n=grid_n,
        box_length=box_length,
        ic=ic,
        stepper=stepper,
        diagnostics=diagnostics,
        output=output,
        sweep=sweep,
    )
    config.sweep_cells()
    return config


def load_run_config(path: str) -> RunConfig:
    """Read a sectioned key = value run file."""
    try:
        raw = toml.load(path)
    except FileNotFoundError as exc:
        raise ConfigError("config", f"file not found: {path}") from exc
    except toml.TomlDecodeError as exc:
        raise ConfigError("config", f"cannot parse {path}: {exc}") from exc
    return parse_run_config(raw)
