# dynamics/riemann.py
"""
ARZ eigenstructure and the HLL interface flux in conserved variables (rho, y).

For a class inside mixed traffic the pressure is evaluated at the total
density (`total=`), and the class sees the other class as frozen, so its
first characteristic speed is v - rho_class * h'(rho_total).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from common.utils import DENSITY_FLOOR, DomainError

from .grid import ClampCounter, to_primitive
from .laws import PressureLaw, clamped_pressure_derivative

# Fans narrower than this fall back to the left flux.
DEGENERATE_FAN_WIDTH = 1e-12


def _out(value):
    return float(value) if np.ndim(value) == 0 else value


@dataclass(frozen=True)
class ConservedState:
    """One or many cell states; `rho` and `y` may be scalars or equal-length arrays."""

    rho: object
    y: object

    def __post_init__(self):
        if np.any(np.asarray(self.rho, dtype=float) < DENSITY_FLOOR):
            raise DomainError(f"density below the floor {DENSITY_FLOOR} veh/km")


@dataclass(frozen=True)
class InterfaceFlux:
    f_rho: object
    f_y: object


# -------------------------------------------------------------------
# Point-wise quantities
# -------------------------------------------------------------------

def speeds_from_primitive(rho, v, pl: PressureLaw, *, total=None):
    """(lambda1, lambda2) = (v - rho * h'(total), v); h' is the solver-clamped slope."""
    basis = rho if total is None else total
    lam1 = np.asarray(v) - np.asarray(rho) * clamped_pressure_derivative(pl, basis)
    return _out(lam1), _out(np.asarray(v, dtype=float))


def characteristic_speeds(
    state: ConservedState,
    pl: PressureLaw,
    *,
    total=None,
    counter: Optional[ClampCounter] = None,
) -> Tuple[object, object]:
    v = to_primitive(state.rho, state.y, pl, total=total, counter=counter)
    return speeds_from_primitive(state.rho, v, pl, total=total)


def physical_flux(
    state: ConservedState,
    pl: PressureLaw,
    *,
    total=None,
    counter: Optional[ClampCounter] = None,
) -> InterfaceFlux:
    """(rho * v, y * v) with v recovered from the state."""
    v = to_primitive(state.rho, state.y, pl, total=total, counter=counter)
    return InterfaceFlux(
        f_rho=_out(np.asarray(state.rho) * v),
        f_y=_out(np.asarray(state.y) * v),
    )


def wave_speed_estimates(
    left: ConservedState,
    right: ConservedState,
    pl: PressureLaw,
    *,
    total_left=None,
    total_right=None,
):
    """Davis bounds: S_L = min of the lambda1's, S_R = max of the lambda2's."""
    l1, l2 = characteristic_speeds(left, pl, total=total_left)
    r1, r2 = characteristic_speeds(right, pl, total=total_right)
    return _out(np.minimum(l1, r1)), _out(np.maximum(l2, r2))


# -------------------------------------------------------------------
# HLL
# -------------------------------------------------------------------

def hll_combine(u_left, u_right, f_left, f_right, s_left, s_right):
    """
    Three-branch HLL formula, component-wise over the (rho, y) pairs.

    Interfaces whose two sides carry identical states and fluxes return the
    left flux untouched, so uniform regions produce bit-identical fluxes.
    """
    s_left = np.asarray(s_left, dtype=float)
    s_right = np.asarray(s_right, dtype=float)
    width = s_right - s_left
    fan = (s_left < 0) & (s_right > 0) & (width >= DEGENERATE_FAN_WIDTH)
    safe_width = np.where(fan, width, 1.0)

    same = np.ones(np.shape(s_left), dtype=bool)
    for ul, ur, fl, fr in zip(u_left, u_right, f_left, f_right):
        same &= (np.asarray(ul) == np.asarray(ur)) & (np.asarray(fl) == np.asarray(fr))

    combined = []
    for ul, ur, fl, fr in zip(u_left, u_right, f_left, f_right):
        ul, ur, fl, fr = (np.asarray(a, dtype=float) for a in (ul, ur, fl, fr))
        middle = (s_right * fl - s_left * fr + s_left * s_right * (ur - ul)) / safe_width
        value = np.where(
            s_left >= 0,
            fl,
            np.where(s_right <= 0, fr, np.where(fan, middle, fl)),
        )
        combined.append(_out(np.where(same, fl, value)))
    return tuple(combined)


def hll_flux(
    left: ConservedState,
    right: ConservedState,
    pl: PressureLaw,
    *,
    total_left=None,
    total_right=None,
    counter: Optional[ClampCounter] = None,
) -> InterfaceFlux:
    v_l = to_primitive(left.rho, left.y, pl, total=total_left, counter=counter)
    v_r = to_primitive(right.rho, right.y, pl, total=total_right, counter=counter)
    l1, l2 = speeds_from_primitive(left.rho, v_l, pl, total=total_left)
    r1, r2 = speeds_from_primitive(right.rho, v_r, pl, total=total_right)

    f_left = (np.asarray(left.rho) * v_l, np.asarray(left.y) * v_l)
    f_right = (np.asarray(right.rho) * v_r, np.asarray(right.y) * v_r)
    f_rho, f_y = hll_combine(
        (left.rho, left.y),
        (right.rho, right.y),
        f_left,
        f_right,
        np.minimum(l1, r1),
        np.maximum(l2, r2),
    )
    return InterfaceFlux(f_rho=f_rho, f_y=f_y)
