# runs/services.py
"""
Orchestration behind the management commands: build the scenario, drive the
stepper, stream samples to the writers and record the run.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence

from django.conf import settings

from common.utils import SolverError
from dynamics.grid import ClampCounter
from dynamics.stepper import Trajectory, iter_samples
from scenarios.initial import build_initial
from scenarios.metrics import StabilityMetrics, compute_metrics
from scenarios.presets import preset_members
from stability.dispersion import StabilityPoint, critical_lookahead, stability_map

from .config import RunConfig
from .models import RunCommand, SimulationRun
from .writers import (
    FieldsWriter,
    MetricsWriter,
    summary_items,
    write_manifest,
    write_critical,
    write_profile,
    write_stability,
    write_sweep_table,
)

logger = logging.getLogger(__name__)


@dataclass
class RunOutcome:
    output_dir: Path
    metrics: StabilityMetrics
    mass_drift: float
    clamp_count: int
    max_cfl: float

    def summary_line(self) -> str:
        items = dict(summary_items(self.metrics, self.mass_drift))
        return " ".join(
            f"{key}={items[key]}" for key in ("final_amplitude", "convergence_time", "mass_drift")
        )


@dataclass
class StabilityOutcome:
    output_dir: Path
    points: List[StabilityPoint]
    critical: List[tuple] = field(default_factory=list)

    @property
    def disagreements(self) -> int:
        return sum(1 for p in self.points if p.agrees is False)


@dataclass
class SweepOutcome:
    output_dir: Path
    preset: str
    results: dict = field(default_factory=dict)
    failures: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.failures


# ---------- helpers ---------- #

def resolve_output_dir(config: RunConfig, override=None) -> Path:
    if override:
        return Path(override)
    if config.output_dir:
        return Path(config.output_dir)
    return Path(settings.RINGFLOW_OUTPUT_ROOT)


def _start_record(command: str, config: RunConfig, output_dir: Path, label: str = "") -> Optional[SimulationRun]:
    if not settings.RINGFLOW_RECORD_RUNS:
        return None
    return SimulationRun.objects.create(
        command=command,
        label=label,
        scenario=config.scenario,
        lookahead=config.lookahead,
        penetration=config.penetration,
        duration=config.duration,
        output_dir=str(output_dir),
        config_text=config.to_text(),
    )


def _manifest_head(command: str, config: RunConfig) -> list:
    entries = [("solver_version", settings.RINGFLOW_VERSION), ("command", command)]
    text = config.to_text()
    for line in text.splitlines():
        key, _, value = line.partition(" = ")
        entries.append((f"config.{key}", value))
    return entries


# ---------- simulate ---------- #

def run_simulate(
    config: RunConfig,
    *,
    output_dir=None,
    label: str = "",
    command: str = RunCommand.SIMULATE,
) -> RunOutcome:
    """
    Run one scenario and write fields.csv, metrics.csv, profile.csv and
    manifest.txt into the output directory. A solver failure leaves the
    partial CSVs with a sentinel footer and is re-raised.
    """
    out = resolve_output_dir(config, output_dir)
    out.mkdir(parents=True, exist_ok=True)

    grid = config.grid()
    cfg = config.step_config()
    params = cfg.params
    initial = build_initial(config.scenario_spec(), grid, params)
    record = _start_record(command, config, out, label)
    counter = ClampCounter()
    trajectory = Trajectory()
    head = _manifest_head(command, config)

    logger.info("%s: %s run for %gs into %s", label or command, config.scenario, config.duration, out)
    fields_csv = FieldsWriter(out / "fields.csv", grid, params.pl, mixed=config.is_mixed)
    metrics_csv = MetricsWriter(out / "metrics.csv")
    try:
        try:
            for time, state, diag in iter_samples(
                initial, grid, cfg, config.duration, config.sample_every, counter=counter
            ):
                trajectory.append(time, state, diag)
                fields_csv.write(time, state)
                metrics_csv.write(diag)
        except SolverError as exc:
            logger.error("%s failed: %s", label or command, exc)
            fields_csv.fail(exc)
            metrics_csv.fail(exc)
            write_manifest(out / "manifest.txt", head + [
                ("status", "failed"),
                ("error", str(exc)),
                ("failed_step", exc.step),
                ("failed_time", exc.time),
                ("clamp_count", counter.count),
            ])
            if record is not None:
                record.mark_failed(exc)
            raise

        metrics = compute_metrics(trajectory, config.threshold)
        drift_by_class = trajectory.mass_drift()
        mass_drift = max(drift_by_class.values())
        metrics_csv.summary(metrics, mass_drift)
    finally:
        fields_csv.close()
        metrics_csv.close()

    write_profile(out / "profile.csv", trajectory.final, grid, params.pl)
    max_cfl = max(d.cfl for d in trajectory.diagnostics)
    write_manifest(out / "manifest.txt", head + [
        ("status", "completed"),
        ("samples", len(trajectory)),
        ("clamp_count", counter.count),
        ("max_cfl", max_cfl),
    ] + [
        (f"mass_drift.{name}", value) for name, value in sorted(drift_by_class.items())
    ] + summary_items(metrics, mass_drift))

    if record is not None:
        record.mark_completed(metrics=metrics, mass_drift=mass_drift)

    return RunOutcome(
        output_dir=out,
        metrics=metrics,
        mass_drift=mass_drift,
        clamp_count=counter.count,
        max_cfl=max_cfl,
    )


# ---------- stability ---------- #

def run_stability(
    config: RunConfig,
    rho_values: Sequence[float],
    k_values: Sequence[float],
    lookahead_values: Sequence[float],
    *,
    output_dir=None,
) -> StabilityOutcome:
    """
    Evaluate the criterion and dispersion growth on a grid into stability.csv,
    and the critical look-ahead distance of every (rho0, k) pair into critical.csv.
    """
    out = resolve_output_dir(config, output_dir)
    out.mkdir(parents=True, exist_ok=True)
    params = config.model_params()
    record = _start_record(RunCommand.STABILITY, config, out)

    points = stability_map(
        rho_values, k_values, lookahead_values, tau=params.tau, fd=params.fd, pl=params.pl
    )
    critical = [
        (float(rho0), float(k), critical_lookahead(float(rho0), float(k), params.fd, params.pl))
        for rho0 in rho_values
        for k in k_values
    ]
    write_stability(out / "stability.csv", points)
    write_critical(out / "critical.csv", critical)
    outcome = StabilityOutcome(output_dir=out, points=points, critical=critical)
    write_manifest(out / "manifest.txt", _manifest_head(RunCommand.STABILITY, config) + [
        ("status", "completed"),
        ("points", len(points)),
        ("disagreements", outcome.disagreements),
        ("critical_pairs", len(critical)),
    ])
    if record is not None:
        record.mark_completed()
    return outcome


# ---------- sweep ---------- #

def run_sweep(preset: str, output_dir, *, base: Optional[RunConfig] = None) -> SweepOutcome:
    """
    Run every member of a preset into its own subdirectory, then write the
    comparison table sweep.csv. Failed members are tabulated and skipped.
    """
    members = preset_members(preset)
    base = base or RunConfig()
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    outcome = SweepOutcome(output_dir=out, preset=preset)

    rows = []
    for member in members:
        spec = member.spec
        config = base.with_changes(
            scenario=spec.kind,
            penetration=spec.penetration,
            lookahead=spec.lookahead,
            duration=spec.duration,
        )
        head = (member.name, spec.kind, spec.penetration, spec.lookahead, spec.duration)
        try:
            result = run_simulate(
                config, output_dir=out / member.name, label=member.name, command=RunCommand.SWEEP
            )
        except SolverError as exc:
            logger.warning("sweep member %s failed: %s", member.name, exc)
            outcome.failures[member.name] = exc
            rows.append(head + (None, None, None, None, "failed"))
            continue
        outcome.results[member.name] = result
        metrics = result.metrics
        rows.append(head + (
            metrics.final_amplitude,
            metrics.peak_amplitude,
            metrics.convergence_time if metrics.converged else "none",
            result.mass_drift,
            "completed",
        ))

    write_sweep_table(out / "sweep.csv", rows)
    logger.info(
        "sweep %s: %d member(s) completed, %d failed",
        preset, len(outcome.results), len(outcome.failures),
    )
    return outcome


def format_sweep(outcome: SweepOutcome) -> List[str]:
    """Console lines for the comparison table."""
    lines = []
    for name, result in outcome.results.items():
        lines.append(f"{name}: {result.summary_line()}")
    for name, exc in outcome.failures.items():
        lines.append(f"{name}: failed ({exc})")
    return lines
