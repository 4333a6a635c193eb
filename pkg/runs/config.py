# runs/config.py
"""
Plain-text run configuration: one `key = value` pair per line, `#` starts a
comment. Omitted keys take the ring-road defaults below.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace
from typing import Dict

from common.utils import ConfigError
from dynamics.grid import RingGrid
from dynamics.laws import FundamentalDiagram, ModelParams, PressureLaw
from dynamics.models import WeightProfile
from dynamics.stepper import StepConfig
from scenarios.initial import ScenarioSpec
from scenarios.models import ScenarioKind

from .forms import RunConfigForm


@dataclass(frozen=True)
class RunConfig:
    length: float = 1000.0
    dx: float = 5.0
    dt: float = 0.05
    cfl_limit: float = 0.9
    tau: float = 3.0
    v_f: float = 20.0
    rho_f: float = 10.0
    rho_j: float = 140.0
    pressure_scale: float = 8.0
    lookahead: float = 0.0
    lookahead_weights: str = WeightProfile.UNIFORM.value
    scenario: str = ScenarioKind.SINGLE_CLASS.value
    penetration: float = 0.0
    wave_amplitude: float = 0.1
    duration: float = 600.0
    sample_every: float = 1.0
    threshold: float = 0.1
    output_dir: str = ""

    # ---- derived solver objects ----

    def grid(self) -> RingGrid:
        return RingGrid(length=self.length, dx=self.dx)

    def model_params(self) -> ModelParams:
        return ModelParams(
            fd=FundamentalDiagram(v_f=self.v_f, rho_f=self.rho_f, rho_j=self.rho_j),
            pl=PressureLaw(scale=self.pressure_scale, rho_f=self.rho_f, rho_j=self.rho_j),
            tau=self.tau,
            lookahead=self.lookahead,
            weighting=self.lookahead_weights,
        )

    def step_config(self) -> StepConfig:
        return StepConfig(dt=self.dt, params=self.model_params(), cfl_limit=self.cfl_limit)

    def scenario_spec(self) -> ScenarioSpec:
        return ScenarioSpec(
            kind=self.scenario,
            penetration=self.penetration,
            lookahead=self.lookahead,
            duration=self.duration,
            wave_fraction=self.wave_amplitude,
        )

    @property
    def is_mixed(self) -> bool:
        return self.scenario != ScenarioKind.SINGLE_CLASS

    def with_changes(self, **changes) -> "RunConfig":
        return replace(self, **changes)

    # ---- serialisation ----

    def to_text(self) -> str:
        lines = []
        for key, value in asdict(self).items():
            if key == "output_dir" and not value:
                continue
            lines.append(f"{key} = {_render(value)}")
        return "\n".join(lines) + "\n"


CONFIG_KEYS = tuple(f.name for f in fields(RunConfig))


def _render(value) -> str:
    return repr(float(value)) if isinstance(value, float) else str(value)


def _defaults() -> Dict[str, str]:
    return {key: _render(value) for key, value in asdict(RunConfig()).items()}


def parse_config(text: str) -> RunConfig:
    """Parse and validate config text; errors name the offending key and line."""
    values: Dict[str, str] = {}
    line_of: Dict[str, int] = {}

    for lineno, raw in enumerate((text or "").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", line=lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ConfigError("unknown key", key=key, line=lineno)
        if key in values:
            raise ConfigError(f"duplicate key (first set on line {line_of[key]})", key=key, line=lineno)
        if not value:
            raise ConfigError("missing value", key=key, line=lineno)
        values[key] = value
        line_of[key] = lineno

    form = RunConfigForm(data={**_defaults(), **values})
    if not form.is_valid():
        for key, errors in form.errors.items():
            raise ConfigError(str(errors[0]), key=key, line=line_of.get(key))
    return RunConfig(**form.cleaned_data)


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
