# dynamics/lookahead.py
"""
Look-ahead (non-local) density: the average density a CAV observes over the
window of cells strictly downstream of its own, with periodic wrap.

Cell i observes cells i+1 .. i+m, m = round(L_D / dx).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from common.utils import DomainError

from .grid import RingGrid
from .models import WeightProfile

WEIGHT_SUM_TOLERANCE = 1e-12


@dataclass(frozen=True)
class LookaheadSpec:
    distance: float
    m_cells: int
    weights: Optional[np.ndarray] = None

    def __post_init__(self):
        if not self.distance >= 0:
            raise DomainError(f"look-ahead distance must be >= 0, got {self.distance}")
        if (self.m_cells == 0) != (self.distance == 0):
            raise DomainError("window is empty exactly when the distance is zero")
        if self.weights is not None:
            w = np.array(self.weights, dtype=float)
            w.setflags(write=False)
            _check_weights(w, self.m_cells)
            object.__setattr__(self, "weights", w)

    @classmethod
    def for_grid(
        cls,
        distance: float,
        grid: RingGrid,
        *,
        weights: Optional[Sequence[float]] = None,
        profile: str = WeightProfile.UNIFORM,
    ) -> "LookaheadSpec":
        """
        Window for `distance` metres on `grid`. Any positive distance covers at
        least one cell. Explicit `weights` win over the named `profile`; the
        uniform profile leaves weights unset.
        """
        if not distance >= 0:
            raise DomainError(f"look-ahead distance must be >= 0, got {distance}")
        m_cells = 0 if distance == 0 else max(1, int(round(distance / grid.dx)))
        if weights is None and m_cells and profile != WeightProfile.UNIFORM:
            weights = weight_profile(profile, m_cells)
        return cls(distance=float(distance), m_cells=m_cells, weights=weights)

    @property
    def is_local(self) -> bool:
        return self.m_cells == 0


def _check_weights(w: np.ndarray, m_cells: int):
    if w.ndim != 1 or w.size != m_cells:
        raise DomainError(f"expected {m_cells} weights, got {w.size}")
    if np.any(w < 0):
        raise DomainError("observation weights must be non-negative")
    if abs(w.sum() - 1.0) > WEIGHT_SUM_TOLERANCE:
        raise DomainError(f"observation weights must sum to 1, got {w.sum()!r}")


def weight_profile(name: str, m_cells: int) -> np.ndarray:
    """Normalised weights for offsets 1..m_cells under a named profile."""
    if m_cells < 1:
        raise DomainError("a weight profile needs at least one cell")
    offsets = np.arange(1, m_cells + 1, dtype=float)
    if name == WeightProfile.UNIFORM:
        raw = np.ones(m_cells)
    elif name == WeightProfile.LINEAR:
        raw = m_cells + 1.0 - offsets
    elif name == WeightProfile.EXPONENTIAL:
        raw = np.exp(-(offsets - 1.0) / max(m_cells / 3.0, 1.0))
    else:
        raise DomainError(
            f"unknown weight profile '{name}', expected one of {', '.join(WeightProfile.values)}"
        )
    return raw / raw.sum()


def _window_check(rho: np.ndarray, grid: RingGrid, spec: LookaheadSpec):
    if rho.shape != (grid.n_cells,):
        raise DomainError(f"field has {rho.size} cells, grid has {grid.n_cells}")
    if spec.m_cells > grid.n_cells:
        raise DomainError(
            f"look-ahead window of {spec.m_cells} cells exceeds the ring ({grid.n_cells} cells)"
        )


def lookahead_average(rho, grid: RingGrid, spec: LookaheadSpec) -> np.ndarray:
    """
    Uniform window mean rho*_i = (1/m) * sum_{j=1..m} rho_{(i+j) mod n}.

    Computed with one prefix sum over the wrapped field, so the cost does not
    depend on the window size. Values are taken relative to the first cell to
    keep the running sum small.
    """
    rho = np.asarray(rho, dtype=float)
    _window_check(rho, grid, spec)
    if spec.is_local:
        return rho.copy()

    m = spec.m_cells
    ref = rho[0]
    ahead = np.roll(rho, -1) - ref
    wrapped = np.concatenate((ahead, ahead[:m]))
    csum = np.concatenate(([0.0], np.cumsum(wrapped)))
    window = csum[m:m + grid.n_cells] - csum[:grid.n_cells]
    return ref + window / m


def weighted_lookahead_average(rho, grid: RingGrid, spec: LookaheadSpec) -> np.ndarray:
    """rho*_i = sum_j w_j * rho_{(i+j) mod n}; uniform weights reduce to lookahead_average."""
    if spec.weights is None:
        raise DomainError("weighted average needs observation weights")
    rho = np.asarray(rho, dtype=float)
    _window_check(rho, grid, spec)
    w = spec.weights
    _check_weights(w, spec.m_cells)
    if np.all(w == w[0]):
        return lookahead_average(rho, grid, spec)

    out = np.zeros_like(rho)
    for offset, weight in enumerate(w, start=1):
        if weight:
            out += weight * np.roll(rho, -offset)
    return out


def observed_density(rho, grid: RingGrid, spec: LookaheadSpec) -> np.ndarray:
    """Relaxation-target density for CAVs under `spec`."""
    if spec.weights is None:
        return lookahead_average(rho, grid, spec)
    return weighted_lookahead_average(rho, grid, spec)
