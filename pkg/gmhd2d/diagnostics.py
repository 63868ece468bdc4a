"""
Norm diagnostics tracked along a run: energies, L^p / L^inf norms of omega and
j, homogeneous Sobolev norms of j, sup |grad j|, and the time integrals that
enter the BKM-type regularity criterion.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from gmhd2d.dynamics import PhysicsParams, dissipation_rate
from gmhd2d.errors import BlowupDetected
from gmhd2d.fields import FlowState, velocity_and_magnetic
from gmhd2d.spectral import Grid2D, SpectralField, inner_product, inverse_transform, spectral_derivative

logger = logging.getLogger(__name__)

STATUS_OK = "ok"
STATUS_BLOWUP = "blowup"
VERDICTS = ("bounded", "growing", "blown_up")
LOG_FLOOR = 1e-300


@dataclass(frozen=True)
class DiagnosticsConfig:
    """Recording cadence and the experimental thresholds used by the reports."""

    cadence: float = 0.05
    lp_exponents: Tuple[float, ...] = (4.0, 8.0)
    delta: Optional[float] = None
    record_delta: bool = True
    growth_slope: float = 0.25
    bounded_factor: float = 10.0
    transient_fraction: float = 0.1

    def __post_init__(self):
        if not (self.cadence > 0 and np.isfinite(self.cadence)):
            raise ValueError(f"cadence must be positive, got {self.cadence}")
        for p in self.lp_exponents:
            if not (1.0 <= p < math.inf):
                raise ValueError(f"L^p exponents must lie in [1, inf), got {p}")
        if self.delta is not None and not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if self.bounded_factor <= 0:
            raise ValueError("bounded_factor must be positive")
        if not (0.0 < self.transient_fraction < 1.0):
            raise ValueError("transient_fraction must lie in (0, 1)")


def default_delta(beta: float) -> Optional[float]:
    """delta = min(2 beta - 2, 1/2) / 2 inside (0, 2 beta - 2); undefined for beta <= 1"""
    if beta <= 1.0:
        return None
    return min(2.0 * beta - 2.0, 0.5) / 2.0


def sobolev_exponents(beta: float, config: DiagnosticsConfig) -> List[float]:
    """beta, r = beta - 1 and beta + r = 2 beta - 1 (the nonnegative ones), plus 1 + delta"""
    exponents = [s for s in (beta, beta - 1.0, 2.0 * beta - 1.0) if s >= 0.0]
    if config.record_delta:
        delta = config.delta if config.delta is not None else default_delta(beta)
        if delta is not None:
            exponents.append(1.0 + delta)
    unique: List[float] = []
    for s in exponents:
        if all(abs(s - t) > 1e-12 for t in unique):
            unique.append(s)
    return unique


def _label(value: float) -> str:
    return f"{value:.6g}"


def sobolev_name(s: float) -> str:
    return f"sobolev_j_s{_label(s)}"


def lp_norm(f: np.ndarray, p: float, grid: Grid2D) -> float:
    """((L/n)^2 sum |f|^p)^(1/p)"""
    if not (1.0 <= p < math.inf):
        raise ValueError(f"p must lie in [1, inf), got {p}")
    magnitude = np.abs(np.asarray(f, dtype=float))
    peak = float(np.max(magnitude)) if magnitude.size else 0.0
    if peak == 0.0:
        return 0.0
    # scaled by the peak so large p cannot overflow
    return peak * float(grid.cell_area * np.sum((magnitude / peak) ** p)) ** (1.0 / p)


def linf_norm(f: np.ndarray) -> float:
    return float(np.max(np.abs(f)))


def sobolev_norm(F: SpectralField, s: float) -> float:
    """Homogeneous ||Lambda^s F||_{L^2} by Parseval."""
    if not np.isfinite(s) or s < 0:
        raise ValueError(f"Sobolev exponent must be >= 0, got {s}")
    weight = F.grid.power(2.0 * s)
    total = float(np.sum(weight * np.abs(F.coeffs) ** 2)) / F.grid.box_length ** 2
    return math.sqrt(total)


def _integrands(values: Dict[str, float]) -> Dict[str, float]:
    """Accumulated quantity name -> integrand, derived from one record"""
    out = {
        "int_linf_grad_j_sq": values["linf_grad_j"] ** 2,
        "bkm_integral": values["linf_omega"] + values["linf_j"],
        "int_dissipation": values["dissipation"],
    }
    for name, value in values.items():
        if name.startswith("sobolev_j_s"):
            out["int_sobolev_j_sq_s" + name[len("sobolev_j_s"):]] = value ** 2
    return out


class NormSeries:
    """Time-stamped diagnostic records with trapezoid-accumulated integrals."""

    def __init__(self):
        self.times: List[float] = []
        self.records: List[Dict[str, float]] = []
        self.status: List[str] = []
        self.blowup_time: Optional[float] = None

    def __len__(self) -> int:
        return len(self.times)

    @property
    def blown_up(self) -> bool:
        return self.blowup_time is not None

    def append(self, time: float, values: Dict[str, float], status: str = STATUS_OK) -> Dict[str, float]:
        """Append instantaneous ``values`` at ``time`` and extend the running integrals."""
        if self.times and not time > self.times[-1]:
            raise ValueError(f"record time {time} does not follow last record time {self.times[-1]}")
        if self.blown_up:
            raise ValueError("series already ends in a blow-up marker")
        row = dict(values)
        current = _integrands(values)
        if self.records:
            previous_row = self.records[-1]
            previous = _integrands(previous_row)
            dt = time - self.times[-1]
            for name, value in current.items():
                row[name] = previous_row[name] + 0.5 * dt * (previous[name] + value)
        else:
            for name in current:
                row[name] = 0.0
        self.times.append(float(time))
        self.records.append(row)
        self.status.append(status)
        return row

    def mark_blowup(self, time: float):
        """Close the series with a blow-up marker at ``time``.

        A finite record is never relabelled: the marker is a new NaN row when
        ``time`` lies past the last record, and a row already written with the
        blow-up status (non-finite diagnostics) is the marker itself.
        """
        if self.blown_up:
            return
        self.blowup_time = float(time)
        if not self.times:
            return
        if time > self.times[-1]:
            self.times.append(float(time))
            self.records.append({name: math.nan for name in self.records[-1]})
            self.status.append(STATUS_BLOWUP)
        elif self.status[-1] != STATUS_BLOWUP:
            logger.warning(
                "blow-up at t=%.6g is not past the last finite record (t=%.6g); no marker row written",
                time,
                self.times[-1],
            )

    def last_record(self) -> Dict[str, float]:
        for values, status in zip(reversed(self.records), reversed(self.status)):
            if status == STATUS_OK:
                return dict(values)
        return {}

    def column(self, name: str) -> np.ndarray:
        return np.array([r.get(name, math.nan) for r in self.records], dtype=float)

    @property
    def columns(self) -> List[str]:
        return list(self.records[0].keys()) if self.records else []

    def truncate_after(self, time: float):
        """Drop records later than ``time`` (restart from a checkpoint)"""
        keep = [i for i, t in enumerate(self.times) if t <= time]
        self.times = [self.times[i] for i in keep]
        self.records = [self.records[i] for i in keep]
        self.status = [self.status[i] for i in keep]
        if self.blowup_time is not None and self.blowup_time > time:
            self.blowup_time = None
        if self.status and self.status[-1] == STATUS_BLOWUP:
            self.blowup_time = self.times[-1]

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.records, columns=self.columns)
        frame.insert(0, "time", self.times)
        frame["status"] = self.status
        return frame

    def to_csv(self, path: str):
        self.to_frame().to_csv(path, index=False, float_format="%.17g")

    @classmethod
    def from_csv(cls, path: str) -> "NormSeries":
        frame = pd.read_csv(path, float_precision="round_trip")
        series = cls()
        names = [c for c in frame.columns if c not in ("time", "status")]
        for row in frame.to_dict("records"):
            series.times.append(float(row["time"]))
            series.records.append({name: float(row[name]) for name in names})
            series.status.append(str(row["status"]))
        if series.status and series.status[-1] == STATUS_BLOWUP:
            series.blowup_time = series.times[-1]
        return series


def state_norms(state: FlowState, params: PhysicsParams, config: DiagnosticsConfig) -> Dict[str, float]:
    """All instantaneous quantities of one state, in a fixed column order."""
    grid = state.grid
    u_hat, b_hat = velocity_and_magnetic(state)
    omega = inverse_transform(state.omega_hat)
    j = inverse_transform(state.j_hat)
    u = [inverse_transform(c) for c in u_hat]
    b = [inverse_transform(c) for c in b_hat]
    grad_j = [inverse_transform(spectral_derivative(state.j_hat, axis)) for axis in (1, 2)]

    values: Dict[str, float] = {
        "energy_u": 0.5 * sum(inner_product(c, c) for c in u_hat),
        "energy_b": 0.5 * sum(inner_product(c, c) for c in b_hat),
        "l2_omega": sobolev_norm(state.omega_hat, 0.0),
        "l2_j": sobolev_norm(state.j_hat, 0.0),
    }
    for p in config.lp_exponents:
        values[f"lp_omega_p{_label(p)}"] = lp_norm(omega, p, grid)
    for p in config.lp_exponents:
        values[f"lp_j_p{_label(p)}"] = lp_norm(j, p, grid)
    values["linf_omega"] = linf_norm(omega)
    values["linf_j"] = linf_norm(j)
    values["linf_u"] = float(np.max(np.hypot(u[0], u[1])))
    values["linf_b"] = float(np.max(np.hypot(b[0], b[1])))
    for s in sobolev_exponents(params.beta, config):
        values[sobolev_name(s)] = sobolev_norm(state.j_hat, s)
    values["linf_grad_j"] = float(np.max(np.hypot(grad_j[0], grad_j[1])))
    values["dissipation"] = dissipation_rate(u_hat, b_hat, params)
    return values


def record(
    state: FlowState,
    params: PhysicsParams,
    series: NormSeries,
    config: Optional[DiagnosticsConfig] = None,
) -> NormSeries:
    """Append the diagnostics of ``state`` to ``series``.

    Non-finite quantities are still written, tagged with the blow-up marker,
    and then surface as BlowupDetected.
    """
    config = config or DiagnosticsConfig()
    if series.times and not state.time > series.times[-1]:
        raise ValueError(f"state time {state.time} does not follow last record time {series.times[-1]}")
    values = state_norms(state, params, config)
    bad = [name for name, value in values.items() if not np.isfinite(value)]
    if bad:
        series.append(state.time, values, status=STATUS_BLOWUP)
        series.mark_blowup(state.time)
        raise BlowupDetected(state.time, f"non-finite diagnostics: {', '.join(bad)}", series=series)
    series.append(state.time, values)
    logger.info(
        "t=%.4f  E=%.6e  |omega|_inf=%.4e  |grad j|_inf=%.4e",
        state.time,
        values["energy_u"] + values["energy_b"],
        values["linf_omega"],
        values["linf_grad_j"],
    )
    return series


@dataclass
class BKMReport:
    """Summary of the BKM-type integrals and the regularity verdict of one run."""

    bkm_integral: float
    int_linf_grad_j_sq: float
    times: np.ndarray = field(repr=False)
    bkm_profile: np.ndarray = field(repr=False)
    grad_j_profile: np.ndarray = field(repr=False)
    slopes: Dict[str, float] = field(default_factory=dict)
    verdict: str = "bounded"

    def summary(self) -> Dict[str, object]:
        return {
            "verdict": self.verdict,
            "bkm_integral": self.bkm_integral,
            "int_linf_grad_j_sq": self.int_linf_grad_j_sq,
            **{f"slope_{name}": value for name, value in self.slopes.items()},
        }


def _log_slope(times: np.ndarray, values: np.ndarray) -> float:
    if len(times) < 2 or np.ptp(times) == 0:
        return 0.0
    logs = np.log(np.maximum(values, LOG_FLOOR))
    return float(np.polyfit(times - times[0], logs, 1)[0])


def bkm_report(series: NormSeries, config: Optional[DiagnosticsConfig] = None) -> BKMReport:
    """Integrals of (|omega|_inf + |j|_inf) and |grad j|_inf^2 with a verdict."""
    if not len(series):
        raise ValueError("bkm_report needs a nonempty series")
    config = config or DiagnosticsConfig()
    ok = np.array([s == STATUS_OK for s in series.status])
    times = np.asarray(series.times)[ok]
    bkm = series.column("bkm_integral")[ok]
    grad = series.column("int_linf_grad_j_sq")[ok]
    report = BKMReport(
        bkm_integral=float(bkm[-1]) if len(bkm) else 0.0,
        int_linf_grad_j_sq=float(grad[-1]) if len(grad) else 0.0,
        times=times,
        bkm_profile=bkm,
        grad_j_profile=grad,
    )
    if len(times):
        tail = times >= times[0] + (2.0 / 3.0) * (times[-1] - times[0])
        sup_sum = (series.column("linf_omega") + series.column("linf_j"))[ok]
        grad_sq = series.column("linf_grad_j")[ok] ** 2
        report.slopes = {
            "sup_omega_plus_j": _log_slope(times[tail], sup_sum[tail]),
            "sup_grad_j_sq": _log_slope(times[tail], grad_sq[tail]),
        }
    if series.blown_up:
        report.verdict = "blown_up"
    elif any(slope > config.growth_slope for slope in report.slopes.values()):
        report.verdict = "growing"
    return report


def transient_quantities(beta: float) -> List[str]:
    names = ["l2_omega", "l2_j"]
    if beta - 1.0 >= 0.0:
        names.append(sobolev_name(beta - 1.0))
    return names


def transient_bounds_check(
    series: NormSeries,
    factor: float = 10.0,
    transient_fraction: float = 0.1,
    beta: Optional[float] = None,
) -> Dict[str, bool]:
    """Whether each L^2-level quantity stays below ``factor`` times its maximum over
    the initial transient (the first ``transient_fraction`` of the horizon).

    With ``beta`` given, ||Lambda^(beta-1) j|| joins ||omega|| and ||j||.
    """
    ok = np.array([s == STATUS_OK for s in series.status])
    times = np.asarray(series.times)[ok]
    if not len(times):
        return {}
    transient = times <= times[0] + transient_fraction * (times[-1] - times[0])
    names = transient_quantities(beta) if beta is not None else ["l2_omega", "l2_j"]
    result = {}
    for name in names:
        if name not in series.columns:
            continue
        values = series.column(name)[ok]
        result[name] = bool(np.max(values) <= factor * np.max(values[transient]))
    return result


def energy_balance_residual(series: NormSeries) -> float:
    """|E(T) + int_0^T dissipation - E(0)| / (E(0) T), with E = energy_u + energy_b."""
    ok = np.array([s == STATUS_OK for s in series.status])
    times = np.asarray(series.times)[ok]
    energy = (series.column("energy_u") + series.column("energy_b"))[ok]
    dissipated = series.column("int_dissipation")[ok]
    if len(times) < 2 or energy[0] == 0.0:
        return 0.0
    span = times[-1] - times[0]
    return abs(energy[-1] + dissipated[-1] - dissipated[0] - energy[0]) / (energy[0] * span)

