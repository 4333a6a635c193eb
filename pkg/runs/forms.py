# runs/forms.py

from django import forms
from django.core.exceptions import ValidationError

from common.utils import DomainError
from dynamics.grid import RingGrid
from dynamics.models import WeightProfile
from scenarios.initial import BASE_FRACTION
from scenarios.models import ScenarioKind


def positive(value):
    if value is not None and value <= 0:
        raise ValidationError("Must be greater than zero.", code="not_positive")


def _is_multiple(span: float, step: float) -> bool:
    count = round(span / step)
    return count >= 1 and abs(count * step - span) <= 1e-9 * max(1.0, span)


class RunConfigForm(forms.Form):
    """
    Validates a parsed run config. Field names are the config keys; every
    value arrives as text (or as the default) and leaves as a typed value.
    """

    # ---- ring & discretisation ----
    length = forms.FloatField(validators=[positive], help_text="Ring length L (m).")
    dx = forms.FloatField(validators=[positive], help_text="Cell width (m).")
    dt = forms.FloatField(validators=[positive], help_text="Time step (s).")
    cfl_limit = forms.FloatField(validators=[positive], max_value=1.0)

    # ---- model ----
    tau = forms.FloatField(validators=[positive], help_text="Relaxation time (s).")
    v_f = forms.FloatField(validators=[positive], help_text="Free-flow speed (m/s).")
    rho_f = forms.FloatField(validators=[positive], help_text="Free-flow density (veh/km).")
    rho_j = forms.FloatField(validators=[positive], help_text="Jam density (veh/km).")
    pressure_scale = forms.FloatField(validators=[positive], help_text="Pressure speed scale (m/s).")
    lookahead = forms.FloatField(min_value=0.0, help_text="Look-ahead distance L_D (m).")
    lookahead_weights = forms.ChoiceField(choices=WeightProfile.choices)

    # ---- scenario ----
    scenario = forms.ChoiceField(choices=ScenarioKind.choices)
    penetration = forms.FloatField(min_value=0.0, max_value=1.0)
    wave_amplitude = forms.FloatField(
        min_value=0.0, help_text="Initial wave amplitude as a fraction of rho_j; 0 starts at equilibrium."
    )
    duration = forms.FloatField(validators=[positive], help_text="Simulated time T (s).")
    sample_every = forms.FloatField(validators=[positive], help_text="Sampling interval (s).")
    threshold = forms.FloatField(help_text="Convergence threshold as a fraction of the initial amplitude.")

    # ---- output ----
    output_dir = forms.CharField(required=False, strip=True)

    def clean_threshold(self):
        value = self.cleaned_data["threshold"]
        if not 0 < value < 1:
            raise ValidationError("Must lie strictly between 0 and 1.", code="out_of_range")
        return value

    def clean_wave_amplitude(self):
        value = self.cleaned_data["wave_amplitude"]
        if value >= BASE_FRACTION:
            raise ValidationError(
                f"Must stay below {BASE_FRACTION} so the density remains positive.", code="out_of_range"
            )
        return value

    def clean(self):
        cleaned = super().clean()
        get = cleaned.get

        if get("rho_f") is not None and get("rho_j") is not None and get("rho_f") >= get("rho_j"):
            self.add_error("rho_f", "Free-flow density must be below the jam density.")

        grid = None
        if get("length") and get("dx"):
            try:
                grid = RingGrid(length=get("length"), dx=get("dx"))
            except DomainError as exc:
                self.add_error("dx", str(exc))

        dt = get("dt")
        if dt:
            for key in ("duration", "sample_every"):
                if get(key) and not _is_multiple(get(key), dt):
                    self.add_error(key, f"Must be a whole number of time steps (dt={dt}).")

        if get("scenario") == ScenarioKind.MIXED_SEGREGATED and get("penetration") is not None:
            if not 0 < get("penetration") < 1:
                self.add_error("penetration", "A segregated mix needs a penetration strictly between 0 and 1.")

        if grid is not None and get("lookahead"):
            if round(get("lookahead") / grid.dx) > grid.n_cells:
                self.add_error("lookahead", "Look-ahead window is longer than the ring.")

        return cleaned
