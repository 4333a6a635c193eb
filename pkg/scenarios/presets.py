# scenarios/presets.py
"""Named scenario sets reproduced by the `sweep` command."""
from __future__ import annotations

from dataclasses import dataclass
from typing import List

from common.utils import ConfigError

from .initial import ScenarioSpec
from .models import ScenarioKind

MIXED_LOOKAHEAD = 100.0
LONG_RUN = 1200.0
SHORT_RUN = 600.0


@dataclass(frozen=True)
class SweepMember:
    name: str
    spec: ScenarioSpec


def _lookahead_sweep() -> List[SweepMember]:
    durations = {0.0: SHORT_RUN, 15.0: LONG_RUN, 100.0: SHORT_RUN, 1000.0: LONG_RUN}
    return [
        SweepMember(
            name=f"ld_{int(ld)}",
            spec=ScenarioSpec(kind=ScenarioKind.SINGLE_CLASS, lookahead=ld, duration=duration),
        )
        for ld, duration in durations.items()
    ]


def _mixed_sweep(kind: str) -> List[SweepMember]:
    durations = {0.1: LONG_RUN, 0.2: LONG_RUN, 0.4: SHORT_RUN}
    prefix = "even" if kind == ScenarioKind.MIXED_EVEN else "segregated"
    return [
        SweepMember(
            name=f"{prefix}_r{int(round(r * 100))}",
            spec=ScenarioSpec(kind=kind, penetration=r, lookahead=MIXED_LOOKAHEAD, duration=duration),
        )
        for r, duration in durations.items()
    ]


def _lookahead_scan() -> List[SweepMember]:
    distances = (0, 5, 10, 15, 25, 50, 75, 100, 150, 200, 300, 500, 1000)
    return [
        SweepMember(
            name=f"scan_ld_{ld}",
            spec=ScenarioSpec(kind=ScenarioKind.SINGLE_CLASS, lookahead=float(ld), duration=SHORT_RUN),
        )
        for ld in distances
    ]


PRESETS = {
    "lookahead_sweep": _lookahead_sweep,
    "mixed_even_sweep": lambda: _mixed_sweep(ScenarioKind.MIXED_EVEN),
    "mixed_segregated_sweep": lambda: _mixed_sweep(ScenarioKind.MIXED_SEGREGATED),
    "lookahead_scan": _lookahead_scan,
}


def preset_members(name: str) -> List[SweepMember]:
    try:
        build = PRESETS[name]
    except KeyError:
        raise ConfigError(
            f"unknown preset '{name}', valid presets: {', '.join(sorted(PRESETS))}",
            key="preset",
        ) from None
    return build()
