# scenarios/initial.py
"""
Initial conditions on the ring road.

All scenarios start from the sinusoidal density wave
    rho0(x) = 0.4 rho_j + a rho_j sin(2 pi x / L),   a = 0.1 by default
with every vehicle at the equilibrium speed of the (total) density. Mixed
scenarios split that total between HDVs and CAVs.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from common.utils import DENSITY_FLOOR, DomainError
from dynamics.grid import ClassField, Field, MixedField, RingGrid
from dynamics.laws import FundamentalDiagram, ModelParams, PressureLaw, equilibrium_speed

from .models import ScenarioKind

BASE_FRACTION = 0.4
WAVE_FRACTION = 0.1
# CAV share inside / outside the block of a segregated mix.
SEGREGATED_INSIDE = 0.999
SEGREGATED_OUTSIDE = 0.001


@dataclass(frozen=True)
class ScenarioSpec:
    kind: str = ScenarioKind.SINGLE_CLASS
    penetration: float = 0.0
    lookahead: float = 0.0
    duration: float = 600.0
    wave_fraction: float = WAVE_FRACTION

    def __post_init__(self):
        if self.kind not in ScenarioKind.values:
            raise DomainError(
                f"unknown scenario kind '{self.kind}', expected one of {', '.join(ScenarioKind.values)}"
            )
        if not 0 <= self.penetration <= 1:
            raise DomainError(f"penetration must lie in [0, 1], got {self.penetration}")
        if not self.duration > 0:
            raise DomainError(f"duration must be positive, got {self.duration}")
        if not self.lookahead >= 0:
            raise DomainError(f"look-ahead distance must be >= 0, got {self.lookahead}")
        if not 0 <= self.wave_fraction < BASE_FRACTION:
            raise DomainError(
                f"wave amplitude must lie in [0, {BASE_FRACTION}) of rho_j, got {self.wave_fraction}"
            )

    @property
    def is_mixed(self) -> bool:
        return self.kind != ScenarioKind.SINGLE_CLASS


def sinusoidal_density(x, fd: FundamentalDiagram, length: float, wave_fraction: float = WAVE_FRACTION):
    """The sinusoidal wave evaluated at positions `x` (m)."""
    x = np.asarray(x, dtype=float)
    rho = BASE_FRACTION * fd.rho_j + wave_fraction * fd.rho_j * np.sin(2 * np.pi * x / length)
    return float(rho) if rho.ndim == 0 else rho


def sinusoidal_ic(
    grid: RingGrid,
    fd: FundamentalDiagram,
    wave_fraction: float = WAVE_FRACTION,
) -> Tuple[np.ndarray, np.ndarray]:
    """(rho0, v0) sampled at cell centres, v0 = V(rho0). A zero wave gives the uniform equilibrium."""
    rho = sinusoidal_density(grid.centers, fd, grid.length, wave_fraction)
    return rho, equilibrium_speed(fd, rho)


def perturbation_ic(
    grid: RingGrid,
    fd: FundamentalDiagram,
    rho0: float,
    relative_amplitude: float = 1e-3,
    mode: int = 1,
) -> Tuple[np.ndarray, np.ndarray]:
    """Small single-mode wave around a uniform equilibrium, for growth-rate checks."""
    if mode < 1:
        raise DomainError(f"mode must be a positive integer, got {mode}")
    phase = 2 * np.pi * mode * grid.centers / grid.length
    rho = rho0 * (1.0 + relative_amplitude * np.sin(phase))
    return rho, equilibrium_speed(fd, rho)


def _mixed_from_split(rho_h, rho_c, fd: FundamentalDiagram, pl: PressureLaw) -> MixedField:
    rho_h = np.maximum(rho_h, DENSITY_FLOOR)
    rho_c = np.maximum(rho_c, DENSITY_FLOOR)
    total = rho_h + rho_c
    v = equilibrium_speed(fd, total)
    return MixedField(
        hdv=ClassField.from_primitive(rho_h, v, pl, total=total),
        cav=ClassField.from_primitive(rho_c, v, pl, total=total),
    )


def even_mix_ic(
    grid: RingGrid,
    fd: FundamentalDiagram,
    penetration: float,
    pl: PressureLaw = PressureLaw(),
    wave_fraction: float = WAVE_FRACTION,
) -> MixedField:
    """
    CAVs spread evenly: every cell carries the same CAV share r of its total
    density (a proportional split, the macroscopic reading of "evenly").
    """
    if not 0 <= penetration <= 1:
        raise DomainError(f"penetration must lie in [0, 1], got {penetration}")
    total, _ = sinusoidal_ic(grid, fd, wave_fraction)
    rho_c = penetration * total
    return _mixed_from_split(total - rho_c, rho_c, fd, pl)


def segregated_mix_ic(
    grid: RingGrid,
    fd: FundamentalDiagram,
    penetration: float,
    pl: PressureLaw = PressureLaw(),
    wave_fraction: float = WAVE_FRACTION,
) -> MixedField:
    """CAVs packed in one block ((1-r)/2 L, (1+r)/2 L) around the middle of the ring."""
    if not 0 < penetration < 1:
        raise DomainError(f"segregated mix needs penetration in (0, 1), got {penetration}")
    total, _ = sinusoidal_ic(grid, fd, wave_fraction)
    x = grid.centers
    lo = 0.5 * (1 - penetration) * grid.length
    hi = 0.5 * (1 + penetration) * grid.length
    inside = (x > lo) & (x < hi)
    rho_c = np.where(inside, SEGREGATED_INSIDE, SEGREGATED_OUTSIDE) * total
    return _mixed_from_split(total - rho_c, rho_c, fd, pl)


def build_initial(spec: ScenarioSpec, grid: RingGrid, params: ModelParams) -> Field:
    if spec.kind == ScenarioKind.MIXED_EVEN:
        return even_mix_ic(grid, params.fd, spec.penetration, params.pl, spec.wave_fraction)
    if spec.kind == ScenarioKind.MIXED_SEGREGATED:
        return segregated_mix_ic(grid, params.fd, spec.penetration, params.pl, spec.wave_fraction)
    rho, v = sinusoidal_ic(grid, params.fd, spec.wave_fraction)
    return ClassField.from_primitive(rho, v, params.pl)
