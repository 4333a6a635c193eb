# stability/dispersion.py
"""
Linear stability of the look-ahead ARZ model around a uniform equilibrium
(rho0, V(rho0)) under a wave perturbation exp(i k x + sigma t).

The perturbation amplitudes satisfy a 2x2 linear system whose determinant

    (s + ik psi)(s + ik psi + 1/tau) - ik rho0 (s phi + ik psi phi - zeta/tau) = 0

is a monic quadratic in the growth exponent s, with psi = V(rho0),
phi = h'(rho0) and zeta = V'(rho0) (e^{ik L_D} - 1) / (ik L_D).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from common.utils import DomainError
from dynamics.laws import (
    FundamentalDiagram,
    PressureLaw,
    equilibrium_speed,
    equilibrium_speed_derivative,
    pressure_derivative,
)

logger = logging.getLogger(__name__)

# Margins closer to zero than this are not used in sign-agreement audits.
AGREEMENT_DEADBAND = 0.005
# Growth rates at or below this count as "not growing".
GROWTH_TOLERANCE = 1e-12


@dataclass(frozen=True)
class PerturbationQuery:
    rho0: float
    k: float
    lookahead: float
    tau: float = 3.0
    fd: FundamentalDiagram = field(default_factory=FundamentalDiagram)
    pl: PressureLaw = field(default_factory=PressureLaw)

    def __post_init__(self):
        if not self.fd.rho_f < self.rho0 < self.fd.rho_j:
            raise DomainError(
                f"base density must lie in ({self.fd.rho_f}, {self.fd.rho_j}), got {self.rho0}"
            )
        if not self.k > 0:
            raise DomainError(f"wavenumber must be positive, got {self.k}")
        if not self.lookahead >= 0:
            raise DomainError(f"look-ahead distance must be >= 0, got {self.lookahead}")
        if not self.tau > 0:
            raise DomainError(f"relaxation time must be positive, got {self.tau}")


@dataclass(frozen=True)
class DispersionResult:
    psi: float
    phi: float
    zeta: complex
    roots: Tuple[complex, complex]
    max_growth: float


def _window_factor(x: float) -> complex:
    """(e^{ix} - 1) / (ix), with its limit 1 at x = 0."""
    if x == 0:
        return 1.0 + 0.0j
    return complex(np.expm1(1j * x) / (1j * x))


def sinc_factor(k: float, lookahead: float) -> float:
    """|sin(k L_D)| / (k L_D), defined as 1 at L_D = 0."""
    x = k * lookahead
    if x == 0:
        return 1.0
    return float(abs(np.sin(x)) / x)


def zeta(query: PerturbationQuery) -> complex:
    slope = equilibrium_speed_derivative(query.fd, query.rho0)
    return slope * _window_factor(query.k * query.lookahead)


def _coefficients(query: PerturbationQuery, psi: float, phi: float, z: complex):
    ik = 1j * query.k
    inv_tau = 1.0 / query.tau
    b = 2 * ik * psi + inv_tau - ik * query.rho0 * phi
    c = (ik * psi) ** 2 + ik * psi * inv_tau - ik * query.rho0 * (ik * psi * phi - z * inv_tau)
    return b, c


def determinant(query: PerturbationQuery, sigma: complex) -> complex:
    """Determinant of the perturbation system evaluated at `sigma`."""
    psi = equilibrium_speed(query.fd, query.rho0)
    phi = pressure_derivative(query.pl, query.rho0)
    z = zeta(query)
    ik = 1j * query.k
    growth = sigma + ik * psi
    return growth * (growth + 1.0 / query.tau) - ik * query.rho0 * (
        sigma * phi + ik * psi * phi - z / query.tau
    )


def solve_monic_quadratic(b: complex, c: complex) -> Tuple[complex, complex]:
    """
    Roots of s^2 + b s + c. The larger-magnitude root comes from the
    discriminant branch aligned with b; the other from the product c.
    """
    disc = np.sqrt(np.complex128(b * b - 4 * c))
    if (np.conj(b) * disc).real < 0:
        disc = -disc
    q = -0.5 * (b + disc)
    if q == 0:
        return 0j, 0j
    return complex(q), complex(c / q)


def dispersion_roots(query: PerturbationQuery) -> DispersionResult:
    psi = equilibrium_speed(query.fd, query.rho0)
    phi = pressure_derivative(query.pl, query.rho0)
    z = zeta(query)
    roots = solve_monic_quadratic(*_coefficients(query, psi, phi, z))
    return DispersionResult(
        psi=psi,
        phi=phi,
        zeta=z,
        roots=roots,
        max_growth=max(r.real for r in roots),
    )


def stability_criterion_margin(
    rho0: float,
    k: float,
    lookahead: float,
    fd: Optional[FundamentalDiagram] = None,
    pl: Optional[PressureLaw] = None,
) -> float:
    """h'(rho0) + |sin(k L_D)|/(k L_D) * V'(rho0); positive means stable."""
    fd = fd or FundamentalDiagram()
    pl = pl or PressureLaw()
    if not fd.rho_f < rho0 < fd.rho_j:
        raise DomainError(f"base density must lie in ({fd.rho_f}, {fd.rho_j}), got {rho0}")
    if not k > 0:
        raise DomainError(f"wavenumber must be positive, got {k}")
    return pressure_derivative(pl, rho0) + sinc_factor(k, lookahead) * equilibrium_speed_derivative(
        fd, rho0
    )


def critical_lookahead(
    rho0: float,
    k: float,
    fd: Optional[FundamentalDiagram] = None,
    pl: Optional[PressureLaw] = None,
) -> Optional[float]:
    """
    Smallest look-ahead distance with k L_D in [0, pi] at which the criterion
    margin stops being negative. 0 if the local model is already stable,
    None if the margin cannot reach zero (flat pressure).
    """
    fd = fd or FundamentalDiagram()
    pl = pl or PressureLaw()
    if stability_criterion_margin(rho0, k, 0.0, fd, pl) >= 0:
        return 0.0
    phi = pressure_derivative(pl, rho0)
    if phi <= 0:
        return None

    def margin_at(x: float) -> float:
        return stability_criterion_margin(rho0, k, x / k, fd, pl)

    x = brentq(margin_at, 1e-12, np.pi, xtol=1e-14)
    return x / k


# -------------------------------------------------------------------
# Maps
# -------------------------------------------------------------------

@dataclass(frozen=True)
class StabilityPoint:
    rho0: float
    k: float
    lookahead: float
    margin: float
    max_growth: float

    @property
    def agrees(self) -> Optional[bool]:
        """Sign agreement of margin and growth; None inside the margin dead-band."""
        if abs(self.margin) < AGREEMENT_DEADBAND:
            return None
        return (self.margin > 0) == (self.max_growth <= GROWTH_TOLERANCE)


def stability_map(
    rho_values: Sequence[float],
    k_values: Sequence[float],
    lookahead_values: Sequence[float],
    tau: float = 3.0,
    fd: Optional[FundamentalDiagram] = None,
    pl: Optional[PressureLaw] = None,
) -> List[StabilityPoint]:
    """Criterion margin and dispersion growth on the full grid, rho-major order."""
    fd = fd or FundamentalDiagram()
    pl = pl or PressureLaw()
    if not (len(rho_values) and len(k_values) and len(lookahead_values)):
        raise DomainError("stability map ranges must be non-empty")

    points = []
    for rho0 in rho_values:
        for k in k_values:
            for lookahead in lookahead_values:
                try:
                    query = PerturbationQuery(
                        rho0=float(rho0), k=float(k), lookahead=float(lookahead),
                        tau=tau, fd=fd, pl=pl,
                    )
                    margin = stability_criterion_margin(query.rho0, query.k, query.lookahead, fd, pl)
                    result = dispersion_roots(query)
                except DomainError as exc:
                    raise DomainError(
                        f"at rho0={rho0}, k={k}, lookahead={lookahead}: {exc}"
                    ) from exc
                points.append(StabilityPoint(
                    rho0=query.rho0,
                    k=query.k,
                    lookahead=query.lookahead,
                    margin=margin,
                    max_growth=result.max_growth,
                ))

    disagreements = sum(1 for p in points if p.agrees is False)
    if disagreements:
        logger.warning(
            "criterion and dispersion growth disagree at %d of %d point(s)",
            disagreements, len(points),
        )
    return points
