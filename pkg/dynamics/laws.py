# dynamics/laws.py
"""
Constitutive laws of the ARZ model: equilibrium speed V(rho), pressure h(rho)
and their derivatives.

Units everywhere: density veh/km, speed m/s, position m, time s. Derivatives
are therefore in (m/s) per (veh/km), and rho * h'(rho) is a speed.

All functions accept scalars or numpy arrays; scalars come back as floats.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from common.utils import DomainError

# Distance below the jam density where the pressure stops growing (veh/km).
PRESSURE_CAP_OFFSET = 0.5


def _as_density(rho) -> np.ndarray:
    arr = np.asarray(rho, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise DomainError(f"density must be non-negative, got {rho!r}")
    return arr


def _out(rho, value):
    return float(value) if np.ndim(rho) == 0 else value


# -------------------------------------------------------------------
# Parameter holders
# -------------------------------------------------------------------

@dataclass(frozen=True)
class FundamentalDiagram:
    """Piecewise-linear equilibrium speed law (free flow, linear ramp, jam)."""

    v_f: float = 20.0
    rho_f: float = 10.0
    rho_j: float = 140.0

    def __post_init__(self):
        if not self.v_f > 0:
            raise DomainError(f"free-flow speed must be positive, got {self.v_f}")
        if not 0 < self.rho_f < self.rho_j:
            raise DomainError(
                f"need 0 < rho_f < rho_j, got rho_f={self.rho_f}, rho_j={self.rho_j}"
            )

    @property
    def congested_slope(self) -> float:
        return -self.v_f / (self.rho_j - self.rho_f)


@dataclass(frozen=True)
class PressureLaw:
    """h(rho) = scale * sqrt((rho - rho_f) / (rho_j - rho)), clamped near rho_j."""

    scale: float = 8.0
    rho_f: float = 10.0
    rho_j: float = 140.0

    def __post_init__(self):
        if not self.scale > 0:
            raise DomainError(f"pressure scale must be positive, got {self.scale}")
        if not 0 <= self.rho_f < self.rho_j:
            raise DomainError(
                f"need rho_f < rho_j, got rho_f={self.rho_f}, rho_j={self.rho_j}"
            )
        if self.rho_cap <= self.rho_f:
            raise DomainError("pressure density range is narrower than the cap offset")

    @property
    def rho_cap(self) -> float:
        return self.rho_j - PRESSURE_CAP_OFFSET


@dataclass(frozen=True)
class ModelParams:
    """
    Global physical parameters of one run.

    `lookahead` is the observation distance L_D in metres (0 = local ARZ);
    `weighting` names the observation profile over that window.
    """

    fd: FundamentalDiagram = field(default_factory=FundamentalDiagram)
    pl: PressureLaw = field(default_factory=PressureLaw)
    tau: float = 3.0
    lookahead: float = 0.0
    weighting: str = "uniform"

    def __post_init__(self):
        if not self.tau > 0:
            raise DomainError(f"relaxation time must be positive, got {self.tau}")
        if not self.lookahead >= 0:
            raise DomainError(f"look-ahead distance must be >= 0, got {self.lookahead}")


# -------------------------------------------------------------------
# Equilibrium speed
# -------------------------------------------------------------------

def equilibrium_speed(fd: FundamentalDiagram, rho):
    """V(rho): v_f up to rho_f, linear down to 0 at rho_j, 0 beyond."""
    arr = _as_density(rho)
    ramp = 1.0 - (arr - fd.rho_f) / (fd.rho_j - fd.rho_f)
    return _out(rho, fd.v_f * np.clip(ramp, 0.0, 1.0))


def equilibrium_speed_derivative(fd: FundamentalDiagram, rho):
    """
    V'(rho). At the breakpoints the congested-branch value is returned:
    the ramp slope at rho_f, zero at rho_j.
    """
    arr = _as_density(rho)
    on_ramp = (arr >= fd.rho_f) & (arr < fd.rho_j)
    return _out(rho, np.where(on_ramp, fd.congested_slope, 0.0))


# -------------------------------------------------------------------
# Pressure
# -------------------------------------------------------------------

def pressure(pl: PressureLaw, rho):
    """h(rho); zero at or below rho_f, held at h(rho_cap) above rho_cap."""
    arr = np.clip(_as_density(rho), pl.rho_f, pl.rho_cap)
    return _out(rho, pl.scale * np.sqrt((arr - pl.rho_f) / (pl.rho_j - arr)))


def _pressure_slope(pl: PressureLaw, arr: np.ndarray) -> np.ndarray:
    span = pl.rho_j - pl.rho_f
    return (
        0.5 * pl.scale * span / (pl.rho_j - arr) ** 2
        * np.sqrt((pl.rho_j - arr) / (arr - pl.rho_f))
    )


def pressure_derivative(pl: PressureLaw, rho):
    """h'(rho) on the open interval (rho_f, rho_cap); singular at rho_f."""
    arr = _as_density(rho)
    if np.any(arr <= pl.rho_f) or np.any(arr >= pl.rho_cap):
        raise DomainError(
            f"pressure derivative defined on ({pl.rho_f}, {pl.rho_cap}), got {rho!r}"
        )
    return _out(rho, _pressure_slope(pl, arr))


def clamped_pressure_derivative(pl: PressureLaw, rho):
    """
    Solver-side h'(rho): 0 where the pressure is flat (rho <= rho_f) and the
    rho_cap value above rho_cap.
    """
    arr = _as_density(rho)
    inside = np.clip(arr, np.nextafter(pl.rho_f, np.inf), pl.rho_cap)
    with np.errstate(divide="ignore", invalid="ignore"):
        slope = _pressure_slope(pl, inside)
    return _out(rho, np.where(arr <= pl.rho_f, 0.0, slope))
