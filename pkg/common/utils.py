# common/utils.py
from __future__ import annotations

from typing import Optional

import numpy as np

# Densities below this are treated as "no vehicles" (veh/km).
DENSITY_FLOOR = 1e-6

# Exit codes used by the management commands.
EXIT_CONFIG_ERROR = 2
EXIT_SOLVER_ERROR = 3
EXIT_IO_ERROR = 4


# -----------------------------------------------------------------------------
# Exceptions
# -----------------------------------------------------------------------------

class RingflowError(Exception):
    """Base class for every error raised by the ringflow apps."""


class DomainError(RingflowError, ValueError):
    """Raised when an input lies outside the domain of an operation."""


class ConfigError(RingflowError):
    """Raised when a run config cannot be parsed or validated."""

    def __init__(self, message: str, *, key: str = "", line: Optional[int] = None):
        self.key = key
        self.line = line
        where = []
        if key:
            where.append(f"key '{key}'")
        if line is not None:
            where.append(f"line {line}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(f"{prefix}{message}")


class SolverError(RingflowError):
    """
    Raised when the time stepper cannot produce an admissible state.
    `step` and `time` locate the failure inside the run.
    """

    def __init__(self, message: str, *, step: Optional[int] = None, time: Optional[float] = None):
        self.step = step
        self.time = time
        self.detail = message
        super().__init__(self._render())

    def _render(self) -> str:
        where = []
        if self.step is not None:
            where.append(f"step {self.step}")
        if self.time is not None:
            where.append(f"t={self.time:g}s")
        return f"{self.detail} ({', '.join(where)})" if where else self.detail

    def at(self, *, step: Optional[int] = None, time: Optional[float] = None) -> "SolverError":
        """Attach (or refine) the failure location and return self for re-raising."""
        if step is not None:
            self.step = step
        if time is not None:
            self.time = time
        self.args = (self._render(),)
        return self


class CflViolationError(SolverError):
    """Courant number above the configured limit."""


class JamOverflowError(SolverError):
    """Total density reached the jam density."""


# -----------------------------------------------------------------------------
# Formatting / parsing helpers
# -----------------------------------------------------------------------------

def fmt_number(value) -> str:
    """Fixed CSV/manifest number format: 12 significant digits, '.' separator."""
    if value is None:
        return ""
    return format(float(value), ".12g")


def parse_range(raw: str, *, name: str = "range") -> np.ndarray:
    """
    Parse an inclusive `a:b:n` range into `n` evenly spaced values.
    A bare number is a one-point range.
    """
    parts = [p.strip() for p in (raw or "").split(":")]
    try:
        if len(parts) == 1:
            return np.array([float(parts[0])])
        if len(parts) != 3:
            raise ValueError
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise ConfigError(f"expected 'a:b:n', got '{raw}'", key=name) from None

    if count < 1:
        raise ConfigError("point count must be at least 1", key=name)
    if count == 1:
        return np.array([start])
    return np.linspace(start, stop, count)
