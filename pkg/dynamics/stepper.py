# dynamics/stepper.py
"""
Time stepping for single-class and mixed HDV/CAV traffic on the ring.

One step, per class:
  1. density transport with HLL fluxes,
  2. look-ahead density on the *updated* density,
  3. relative-flow transport with the same fluxes,
  4. implicit relaxation of y toward rho_new * (V(target) + h(rho_new)).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np

from common.utils import (
    DENSITY_FLOOR,
    CflViolationError,
    DomainError,
    JamOverflowError,
    SolverError,
)

from .grid import (
    ClampCounter,
    ClassField,
    Field,
    MixedField,
    RingGrid,
    class_masses,
    density_of,
    to_primitive,
)
from .laws import ModelParams, equilibrium_speed, pressure
from .lookahead import LookaheadSpec, observed_density
from .riemann import hll_combine, speeds_from_primitive

logger = logging.getLogger(__name__)

# Headroom above v_f before a recovered velocity counts as blow-up (m/s).
VELOCITY_HEADROOM = 1.0


@dataclass(frozen=True)
class StepConfig:
    dt: float = 0.05
    params: ModelParams = field(default_factory=ModelParams)
    cfl_limit: float = 0.9

    def __post_init__(self):
        if not self.dt > 0:
            raise DomainError(f"time step must be positive, got {self.dt}")
        if not 0 < self.cfl_limit <= 1:
            raise DomainError(f"cfl_limit must lie in (0, 1], got {self.cfl_limit}")

    def lookahead_for(self, grid: RingGrid) -> LookaheadSpec:
        return LookaheadSpec.for_grid(
            self.params.lookahead, grid, profile=self.params.weighting
        )


@dataclass(frozen=True)
class SampleDiagnostics:
    step: int
    time: float
    masses: Dict[str, float]
    amplitude: float
    velocity_amplitude: float
    clamp_count: int
    cfl: float


@dataclass
class Trajectory:
    """Sampled run: instants, snapshots and per-sample diagnostics."""

    times: List[float] = field(default_factory=list)
    snapshots: List[Field] = field(default_factory=list)
    diagnostics: List[SampleDiagnostics] = field(default_factory=list)

    def append(self, time: float, snapshot: Field, diagnostics: Optional[SampleDiagnostics]):
        if self.times and time <= self.times[-1]:
            raise DomainError(f"sample times must increase, got {time} after {self.times[-1]}")
        self.times.append(float(time))
        self.snapshots.append(snapshot)
        if diagnostics is not None:
            self.diagnostics.append(diagnostics)

    def __len__(self):
        return len(self.times)

    @property
    def final(self) -> Field:
        return self.snapshots[-1]

    def amplitudes(self) -> np.ndarray:
        return np.array([np.ptp(density_of(s)) for s in self.snapshots])

    def mass_drift(self) -> Dict[str, float]:
        """Relative change of each class mass between first and last sample."""
        if not self.diagnostics:
            return {}
        first, last = self.diagnostics[0].masses, self.diagnostics[-1].masses
        return {
            name: abs(last[name] - first[name]) / first[name] if first[name] else 0.0
            for name in first
        }


# -------------------------------------------------------------------
# Building blocks
# -------------------------------------------------------------------

def _class_speeds(rho, y, params: ModelParams, total=None):
    v = to_primitive(rho, y, params.pl, total=total)
    return speeds_from_primitive(rho, v, params.pl, total=total)


def cfl_number(state: Field, grid: RingGrid, cfg: StepConfig) -> float:
    """max |lambda| * dt / dx over every cell (and class)."""
    params = cfg.params
    if isinstance(state, MixedField):
        total = state.total
        parts = [
            _class_speeds(state.hdv.rho, state.hdv.y, params, total),
            _class_speeds(state.cav.rho, state.cav.y, params, total),
        ]
    else:
        parts = [_class_speeds(state.rho, state.y, params)]
    fastest = max(
        float(np.max(np.maximum(np.abs(lam1), np.abs(lam2)))) for lam1, lam2 in parts
    )
    return fastest * cfg.dt / grid.dx


def _check_cfl(state: Field, grid: RingGrid, cfg: StepConfig, step: int) -> float:
    courant = cfl_number(state, grid, cfg)
    if courant > cfg.cfl_limit:
        raise CflViolationError(
            f"Courant number {courant:.4f} exceeds the limit {cfg.cfl_limit}", step=step
        )
    return courant


def _transport(rho, y, params: ModelParams, ratio: float, *, total=None, counter=None):
    """Conservative HLL update of (rho, y); interface i+1/2 sits at index i."""
    pl = params.pl
    v = to_primitive(rho, y, pl, total=total, counter=counter)
    lam1, lam2 = speeds_from_primitive(rho, v, pl, total=total)
    f_rho, f_y = rho * v, y * v

    def ahead(a):
        return np.roll(a, -1)

    flux_rho, flux_y = hll_combine(
        (rho, y),
        (ahead(rho), ahead(y)),
        (f_rho, f_y),
        (ahead(f_rho), ahead(f_y)),
        np.minimum(lam1, ahead(lam1)),
        np.maximum(lam2, ahead(lam2)),
    )
    rho_new = rho - ratio * (flux_rho - np.roll(flux_rho, 1))
    y_new = y - ratio * (flux_y - np.roll(flux_y, 1))
    return apply_density_floor(rho_new, y_new)


def apply_density_floor(rho, y):
    """
    Lift cells below DENSITY_FLOOR to the floor and take the same mass back
    from the cells above it, in proportion to their excess, so the class mass
    is unchanged. Reduced cells keep their y / rho.
    """
    low = rho < DENSITY_FLOOR
    if not np.any(low):
        return rho, y
    lifted = np.where(low, DENSITY_FLOOR, rho)
    injected = float(np.sum(lifted - rho))
    excess = lifted - DENSITY_FLOOR
    available = float(np.sum(excess))
    if available > 0:
        lifted = np.maximum(lifted - excess * min(1.0, injected / available), DENSITY_FLOOR)
    logger.debug("density floor: %d cell(s) lifted, %.3e veh/km redistributed", np.count_nonzero(low), injected)
    with np.errstate(divide="ignore", invalid="ignore"):
        y = np.where(low, y, y * (lifted / rho))
    return lifted, y


def _check_finite(step: int, label: str, *arrays) -> None:
    if not all(np.all(np.isfinite(a)) for a in arrays):
        raise SolverError(f"non-finite {label}state after transport", step=step)


def _relax(y_transported, target, weight: float):
    """Implicit relaxation, written so that y == target is returned untouched."""
    return y_transported + weight * (target - y_transported)


def _accept(rho, y, params: ModelParams, step: int, *, total=None, label: str = "") -> None:
    if not (np.all(np.isfinite(rho)) and np.all(np.isfinite(y))):
        raise SolverError(f"non-finite {label}state", step=step)
    v = y / rho - pressure(params.pl, rho if total is None else total)
    ceiling = params.fd.v_f + VELOCITY_HEADROOM
    if np.any(v > ceiling):
        raise SolverError(
            f"{label}velocity {float(np.max(v)):.3f} m/s above {ceiling} m/s", step=step
        )


# -------------------------------------------------------------------
# Steps
# -------------------------------------------------------------------

def step_single(
    state: ClassField,
    grid: RingGrid,
    cfg: StepConfig,
    *,
    step: int = 0,
    counter: Optional[ClampCounter] = None,
    spec: Optional[LookaheadSpec] = None,
) -> ClassField:
    params = cfg.params
    spec = spec or cfg.lookahead_for(grid)
    _check_cfl(state, grid, cfg, step)

    rho_new, y_tr = _transport(state.rho, state.y, params, cfg.dt / grid.dx, counter=counter)
    _check_finite(step, "", rho_new, y_tr)
    rho_star = observed_density(rho_new, grid, spec)
    target = rho_new * (equilibrium_speed(params.fd, rho_star) + pressure(params.pl, rho_new))
    weight = cfg.dt / params.tau
    y_new = _relax(y_tr, target, weight / (1.0 + weight))

    _accept(rho_new, y_new, params, step)
    return ClassField(rho=rho_new, y=y_new)


def step_mixed(
    state: MixedField,
    grid: RingGrid,
    cfg: StepConfig,
    *,
    step: int = 0,
    counter: Optional[ClampCounter] = None,
    spec: Optional[LookaheadSpec] = None,
) -> MixedField:
    """
    HDVs relax toward V(total density), CAVs toward V(look-ahead of the total
    density). Transport of both classes uses h(total) frozen at the current
    time level.
    """
    params = cfg.params
    spec = spec or cfg.lookahead_for(grid)
    total = state.total
    _check_jam(total, params, step)
    _check_cfl(state, grid, cfg, step)

    ratio = cfg.dt / grid.dx
    rho_h, y_h = _transport(state.hdv.rho, state.hdv.y, params, ratio, total=total, counter=counter)
    rho_c, y_c = _transport(state.cav.rho, state.cav.y, params, ratio, total=total, counter=counter)

    _check_finite(step, "HDV ", rho_h, y_h)
    _check_finite(step, "CAV ", rho_c, y_c)
    total_new = rho_h + rho_c
    _check_jam(total_new, params, step)
    rho_star = observed_density(total_new, grid, spec)
    h_total = pressure(params.pl, total_new)

    weight = cfg.dt / params.tau
    w = weight / (1.0 + weight)
    y_h = _relax(y_h, rho_h * (equilibrium_speed(params.fd, total_new) + h_total), w)
    y_c = _relax(y_c, rho_c * (equilibrium_speed(params.fd, rho_star) + h_total), w)

    _accept(rho_h, y_h, params, step, total=total_new, label="HDV ")
    _accept(rho_c, y_c, params, step, total=total_new, label="CAV ")
    return MixedField(hdv=ClassField(rho=rho_h, y=y_h), cav=ClassField(rho=rho_c, y=y_c))


def _check_jam(total, params: ModelParams, step: int):
    if np.any(total >= params.fd.rho_j):
        raise JamOverflowError(
            f"total density {float(np.max(total)):.3f} reached jam density {params.fd.rho_j}",
            step=step,
        )


# -------------------------------------------------------------------
# Runs
# -------------------------------------------------------------------

def whole_steps(span: float, dt: float, name: str) -> int:
    count = int(round(span / dt))
    if count < 1 or abs(count * dt - span) > 1e-9 * max(1.0, span):
        raise DomainError(f"{name}={span} is not a positive multiple of dt={dt}")
    return count


def _diagnostics(state: Field, grid: RingGrid, cfg: StepConfig, step: int, counter: ClampCounter):
    pl = cfg.params.pl
    if isinstance(state, MixedField):
        speed = state.hdv.velocity(pl, total=state.total)
    else:
        speed = state.velocity(pl)
    return SampleDiagnostics(
        step=step,
        time=step * cfg.dt,
        masses=class_masses(state, grid),
        amplitude=float(np.ptp(density_of(state))),
        velocity_amplitude=float(np.ptp(speed)),
        clamp_count=counter.count,
        cfl=cfl_number(state, grid, cfg),
    )


def iter_samples(
    initial: Field,
    grid: RingGrid,
    cfg: StepConfig,
    duration: float,
    sample_every: float,
    *,
    counter: Optional[ClampCounter] = None,
) -> Iterator[Tuple[float, Field, SampleDiagnostics]]:
    """
    Step `initial` for `duration` seconds, yielding (time, state, diagnostics)
    at t=0, every `sample_every` seconds and at the final instant.
    Solver errors carry the failing step and time.
    """
    if not duration > 0:
        raise DomainError(f"duration must be positive, got {duration}")
    n_steps = whole_steps(duration, cfg.dt, "duration")
    stride = whole_steps(sample_every, cfg.dt, "sample_every")
    counter = counter if counter is not None else ClampCounter()
    spec = cfg.lookahead_for(grid)
    advance = step_mixed if isinstance(initial, MixedField) else step_single

    state = initial
    yield 0.0, state, _diagnostics(state, grid, cfg, 0, counter)
    for step in range(1, n_steps + 1):
        try:
            state = advance(state, grid, cfg, step=step, counter=counter, spec=spec)
        except SolverError as exc:
            raise exc.at(step=step, time=step * cfg.dt)
        if step % stride == 0 or step == n_steps:
            yield step * cfg.dt, state, _diagnostics(state, grid, cfg, step, counter)


def simulate(
    initial: Field,
    grid: RingGrid,
    cfg: StepConfig,
    duration: float,
    sample_every: float,
    *,
    counter: Optional[ClampCounter] = None,
) -> Trajectory:
    logger.info(
        "simulating %s for %gs (dt=%g, dx=%g, L_D=%g)",
        "mixed flow" if isinstance(initial, MixedField) else "single class",
        duration, cfg.dt, grid.dx, cfg.params.lookahead,
    )
    trajectory = Trajectory()
    for time, state, diag in iter_samples(
        initial, grid, cfg, duration, sample_every, counter=counter
    ):
        trajectory.append(time, state, diag)
    logger.info(
        "finished: final amplitude %.4f veh/km, %d clamp event(s)",
        trajectory.diagnostics[-1].amplitude, trajectory.diagnostics[-1].clamp_count,
    )
    return trajectory
