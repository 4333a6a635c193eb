# runs/writers.py
"""
CSV and manifest writers.

Every number goes through `fmt_number` (12 significant digits) and every file
is written with LF line endings, so identical runs give identical bytes.
"""
from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, List, Sequence, Tuple

import numpy as np

from common.utils import fmt_number
from dynamics.grid import Field, MixedField, RingGrid
from dynamics.laws import PressureLaw
from dynamics.stepper import SampleDiagnostics
from scenarios.metrics import StabilityMetrics

SINGLE_COLUMNS = ("x", "rho", "v")
MIXED_COLUMNS = SINGLE_COLUMNS + ("rho_h", "rho_c", "v_h", "v_c")
METRICS_COLUMNS = ("t", "amplitude", "velocity_amplitude", "mass", "clamp_count", "cfl")
STABILITY_COLUMNS = ("rho0", "k", "lookahead", "margin", "re_sigma_max", "agree_flag")
CRITICAL_COLUMNS = ("rho0", "k", "critical_lookahead")
SWEEP_COLUMNS = (
    "name",
    "scenario",
    "penetration",
    "lookahead",
    "duration",
    "final_amplitude",
    "peak_amplitude",
    "convergence_time",
    "mass_drift",
    "status",
)

FAILED_SENTINEL = "# FAILED"


def _cell(value) -> str:
    if value is None or isinstance(value, str):
        return value or ""
    return fmt_number(value)


class CsvSink:
    """A CSV file opened for writing, with `#` comment lines allowed."""

    def __init__(self, path: Path, header: Sequence[str]):
        self.path = Path(path)
        self._fh = open(self.path, "w", encoding="utf-8", newline="")
        self._writer = csv.writer(self._fh, lineterminator="\n")
        self._writer.writerow(header)

    def row(self, values: Iterable) -> None:
        self._writer.writerow([_cell(v) for v in values])

    def rows(self, table: Iterable[Iterable]) -> None:
        for values in table:
            self.row(values)

    def comment(self, text: str) -> None:
        self._fh.write(f"# {text}\n")

    def fail(self, error) -> None:
        """Flush what was written and mark the file as belonging to a failed run."""
        self._fh.write(f"{FAILED_SENTINEL}: {error}\n")
        self._fh.flush()

    def close(self) -> None:
        if not self._fh.closed:
            self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


# ---------- field snapshots ---------- #

def field_columns(state: Field, grid: RingGrid, pl: PressureLaw) -> List[np.ndarray]:
    """x, rho, v (and the per-class columns for mixed flow) as arrays."""
    if isinstance(state, MixedField):
        total = state.total
        v_h, v_c = state.velocities(pl)
        mean_v = (state.hdv.rho * v_h + state.cav.rho * v_c) / total
        return [grid.centers, total, mean_v, state.hdv.rho, state.cav.rho, v_h, v_c]
    return [grid.centers, state.rho, state.velocity(pl)]


class FieldsWriter(CsvSink):
    """fields.csv: one row per cell per sample instant."""

    def __init__(self, path: Path, grid: RingGrid, pl: PressureLaw, *, mixed: bool):
        self.grid = grid
        self.pl = pl
        super().__init__(path, ("t",) + (MIXED_COLUMNS if mixed else SINGLE_COLUMNS))

    def write(self, time: float, state: Field) -> None:
        columns = field_columns(state, self.grid, self.pl)
        for values in zip(*columns):
            self.row((time,) + values)


def write_profile(path: Path, state: Field, grid: RingGrid, pl: PressureLaw) -> None:
    """profile.csv: the final-time spatial profile."""
    mixed = isinstance(state, MixedField)
    with CsvSink(path, MIXED_COLUMNS if mixed else SINGLE_COLUMNS) as sink:
        sink.rows(zip(*field_columns(state, grid, pl)))


# ---------- metrics ---------- #

class MetricsWriter(CsvSink):
    """metrics.csv: amplitude series, then `#` summary lines."""

    def __init__(self, path: Path):
        super().__init__(path, METRICS_COLUMNS)

    def write(self, diag: SampleDiagnostics) -> None:
        self.row((
            diag.time,
            diag.amplitude,
            diag.velocity_amplitude,
            sum(diag.masses.values()),
            diag.clamp_count,
            diag.cfl,
        ))

    def summary(self, metrics: StabilityMetrics, mass_drift: float) -> None:
        for key, value in summary_items(metrics, mass_drift):
            self.comment(f"{key}={value}")


def summary_items(metrics: StabilityMetrics, mass_drift: float) -> List[Tuple[str, str]]:
    convergence = (
        fmt_number(metrics.convergence_time) if metrics.converged else "none"
    )
    return [
        ("final_amplitude", fmt_number(metrics.final_amplitude)),
        ("peak_amplitude", fmt_number(metrics.peak_amplitude)),
        ("convergence_time", convergence),
        ("fitted_rate", fmt_number(metrics.fitted_rate)),
        ("final_velocity_amplitude", fmt_number(metrics.final_velocity_amplitude)),
        ("mass_drift", fmt_number(mass_drift)),
    ]


# ---------- stability / sweep tables ---------- #

def agree_flag(agrees) -> str:
    if agrees is None:
        return "na"
    return "1" if agrees else "0"


def write_stability(path: Path, points) -> None:
    with CsvSink(path, STABILITY_COLUMNS) as sink:
        for p in points:
            sink.row((p.rho0, p.k, p.lookahead, p.margin, p.max_growth, agree_flag(p.agrees)))


def write_critical(path: Path, rows: Iterable[Tuple[float, float, object]]) -> None:
    """One row per (rho0, k); an unreachable distance is written as `none`."""
    with CsvSink(path, CRITICAL_COLUMNS) as sink:
        for rho0, k, distance in rows:
            sink.row((rho0, k, "none" if distance is None else distance))


def write_sweep_table(path: Path, rows: Iterable[Sequence]) -> None:
    with CsvSink(path, SWEEP_COLUMNS) as sink:
        sink.rows(rows)


# ---------- manifest ---------- #

def write_manifest(path: Path, entries: Iterable[Tuple[str, object]]) -> None:
    """key=value text; values containing newlines are flattened."""
    lines = []
    for key, value in entries:
        text = _cell(value) if not isinstance(value, str) else value
        lines.append(f"{key}={' '.join(str(text).splitlines())}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_manifest(path: Path) -> dict:
    entries = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            key, _, value = line.rstrip("\n").partition("=")
            if key:
                entries[key] = value
    return entries
