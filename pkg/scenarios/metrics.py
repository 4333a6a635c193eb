# scenarios/metrics.py
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from common.utils import DomainError
from dynamics.stepper import Trajectory

DEFAULT_THRESHOLD_FRACTION = 0.1


@dataclass(frozen=True)
class StabilityMetrics:
    amplitude_series: List[Tuple[float, float]]
    peak_amplitude: float
    final_amplitude: float
    convergence_time: Optional[float]
    fitted_rate: float
    velocity_amplitude_series: List[Tuple[float, float]] = field(default_factory=list)
    final_velocity_amplitude: Optional[float] = None

    @property
    def converged(self) -> bool:
        return self.convergence_time is not None


def fit_growth_rate(
    times: Sequence[float],
    amplitudes: Sequence[float],
    start: Optional[float] = None,
    end: Optional[float] = None,
) -> float:
    """Least-squares slope of log(amplitude) against time on [start, end]."""
    t = np.asarray(times, dtype=float)
    a = np.asarray(amplitudes, dtype=float)
    keep = a > 0
    if start is not None:
        keep &= t >= start
    if end is not None:
        keep &= t <= end
    if np.count_nonzero(keep) < 2:
        return 0.0
    slope, _ = np.polyfit(t[keep], np.log(a[keep]), 1)
    return float(slope)


def convergence_time(times, amplitudes, threshold: float) -> Optional[float]:
    """First sample after which the amplitude stays below `threshold` to the end."""
    t = np.asarray(times, dtype=float)
    above = np.flatnonzero(np.asarray(amplitudes, dtype=float) >= threshold)
    if above.size == 0:
        return float(t[0])
    if above[-1] == t.size - 1:
        return None
    return float(t[above[-1] + 1])


def compute_metrics(
    trajectory: Trajectory,
    threshold_fraction: float = DEFAULT_THRESHOLD_FRACTION,
) -> StabilityMetrics:
    """
    Amplitude = max - min of the (total) density per sample. Convergence needs
    the amplitude to stay below threshold_fraction * initial amplitude through
    the end of the run; the growth rate is fitted over the first quarter.
    """
    if not len(trajectory):
        raise DomainError("cannot compute metrics of an empty trajectory")
    if not 0 < threshold_fraction < 1:
        raise DomainError(f"threshold_fraction must lie in (0, 1), got {threshold_fraction}")

    times = np.asarray(trajectory.times)
    amps = trajectory.amplitudes()
    initial = amps[0]
    if initial == 0:
        converged_at = 0.0
    else:
        converged_at = convergence_time(times, amps, threshold_fraction * initial)

    quarter = times[0] + 0.25 * (times[-1] - times[0])
    speed_series = [(d.time, d.velocity_amplitude) for d in trajectory.diagnostics]
    return StabilityMetrics(
        amplitude_series=list(zip(times.tolist(), amps.tolist())),
        peak_amplitude=float(amps.max()),
        final_amplitude=float(amps[-1]),
        convergence_time=converged_at,
        fitted_rate=fit_growth_rate(times, amps, end=quarter),
        velocity_amplitude_series=speed_series,
        final_velocity_amplitude=speed_series[-1][1] if speed_series else None,
    )
