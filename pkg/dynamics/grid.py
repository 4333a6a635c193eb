# dynamics/grid.py
"""
Periodic 1-D grid and per-class field storage in conserved variables.

A class field stores density rho (veh/km) and the relative flow
y = rho * (v + h) (veh/km * m/s). Velocity is always recovered from the pair,
never stored, so the two representations cannot drift apart.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from common.utils import DENSITY_FLOOR, DomainError

from .laws import PressureLaw, pressure

logger = logging.getLogger(__name__)


# -------------------------------------------------------------------
# Grid
# -------------------------------------------------------------------

@dataclass(frozen=True)
class RingGrid:
    """Ring road of `length` metres cut into cells of width `dx`."""

    length: float = 1000.0
    dx: float = 5.0
    n_cells: int = field(init=False)

    def __post_init__(self):
        if not (self.length > 0 and self.dx > 0):
            raise DomainError(f"length and dx must be positive, got {self.length}, {self.dx}")
        ratio = self.length / self.dx
        n_cells = int(round(ratio))
        if abs(ratio - n_cells) > 1e-9:
            raise DomainError(f"length {self.length} is not a whole number of cells of {self.dx}")
        if n_cells < 4:
            raise DomainError(f"ring needs at least 4 cells, got {n_cells}")
        object.__setattr__(self, "n_cells", n_cells)

    @property
    def centers(self) -> np.ndarray:
        return (np.arange(self.n_cells) + 0.5) * self.dx

    def refined(self, factor: int = 2) -> "RingGrid":
        return RingGrid(length=self.length, dx=self.dx / factor)


# -------------------------------------------------------------------
# Diagnostics
# -------------------------------------------------------------------

@dataclass
class ClampCounter:
    """Counts cells whose recovered velocity had to be lifted to zero."""

    count: int = 0

    def record(self, n: int):
        if n:
            self.count += int(n)
            logger.debug("velocity clamped to 0 in %d cell(s), %d so far", n, self.count)


# -------------------------------------------------------------------
# Conversions
# -------------------------------------------------------------------

def to_conserved(rho, v, pl: PressureLaw, *, total=None):
    """y = rho * (v + h(total)); `total` defaults to rho (single class)."""
    rho = np.asarray(rho, dtype=float)
    basis = rho if total is None else np.asarray(total, dtype=float)
    y = rho * (np.asarray(v, dtype=float) + pressure(pl, basis))
    return float(y) if np.ndim(y) == 0 else y


def to_primitive(rho, y, pl: PressureLaw, *, total=None, counter: Optional[ClampCounter] = None):
    """
    v = y / rho - h(total), lifted to 0 where it would be negative.
    Each lifted cell is recorded on `counter` when one is given.
    """
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < DENSITY_FLOOR):
        raise DomainError("density below the floor in primitive recovery")
    basis = rho if total is None else np.asarray(total, dtype=float)
    v = np.asarray(y, dtype=float) / rho - pressure(pl, basis)
    negative = v < 0
    if np.any(negative):
        if counter is not None:
            counter.record(np.count_nonzero(negative))
        v = np.where(negative, 0.0, v)
    return float(v) if np.ndim(v) == 0 else v


# -------------------------------------------------------------------
# Fields
# -------------------------------------------------------------------

def _frozen_copy(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ClassField:
    """Density and relative flow of one vehicle class on every cell."""

    rho: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        rho = _frozen_copy(self.rho)
        y = _frozen_copy(self.y)
        if rho.ndim != 1 or rho.shape != y.shape:
            raise DomainError("rho and y must be 1-D arrays of equal length")
        if np.any(rho < DENSITY_FLOOR):
            raise DomainError(f"density below the floor {DENSITY_FLOOR} veh/km")
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "y", y)

    @classmethod
    def from_primitive(cls, rho, v, pl: PressureLaw, *, total=None) -> "ClassField":
        rho = np.maximum(np.asarray(rho, dtype=float), DENSITY_FLOOR)
        return cls(rho=rho, y=to_conserved(rho, v, pl, total=total))

    @property
    def n_cells(self) -> int:
        return self.rho.size

    def velocity(self, pl: PressureLaw, *, total=None, counter: Optional[ClampCounter] = None):
        return to_primitive(self.rho, self.y, pl, total=total, counter=counter)


@dataclass(frozen=True)
class MixedField:
    """HDV and CAV fields sharing one grid."""

    hdv: ClassField
    cav: ClassField

    def __post_init__(self):
        if self.hdv.n_cells != self.cav.n_cells:
            raise DomainError("HDV and CAV fields must live on the same grid")

    @property
    def n_cells(self) -> int:
        return self.hdv.n_cells

    @property
    def total(self) -> np.ndarray:
        return self.hdv.rho + self.cav.rho

    def velocities(self, pl: PressureLaw, *, counter: Optional[ClampCounter] = None):
        """(v_hdv, v_cav), both recovered against the pressure of the total density."""
        total = self.total
        return (
            self.hdv.velocity(pl, total=total, counter=counter),
            self.cav.velocity(pl, total=total, counter=counter),
        )


Field = Union[ClassField, MixedField]


def density_of(state: Field) -> np.ndarray:
    """Density seen by the road: the class density, or the total for mixed flow."""
    return state.total if isinstance(state, MixedField) else state.rho


def total_mass(state: Field, grid: RingGrid) -> float:
    """Number of vehicles on the ring: sum(rho) * dx / 1000."""
    if isinstance(state, MixedField):
        return total_mass(state.hdv, grid) + total_mass(state.cav, grid)
    return float(np.sum(state.rho)) * grid.dx / 1000.0


def class_masses(state: Field, grid: RingGrid) -> dict:
    if isinstance(state, MixedField):
        return {"hdv": total_mass(state.hdv, grid), "cav": total_mass(state.cav, grid)}
    return {"all": total_mass(state, grid)}
