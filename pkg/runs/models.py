# runs/models.py

from django.db import models

from common.models import TimeStamped
from scenarios.models import ScenarioKind


class RunCommand(models.TextChoices):
    SIMULATE = "simulate", "Simulate"
    STABILITY = "stability", "Stability map"
    SWEEP = "sweep", "Sweep member"


class RunStatus(models.TextChoices):
    RUNNING = "running", "Running"
    COMPLETED = "completed", "Completed"
    FAILED = "failed", "Failed"


class SimulationRun(TimeStamped):
    """
    One invocation of a command (or one member of a sweep), with the
    headline results copied from its output files.
    """

    command = models.CharField(max_length=16, choices=RunCommand.choices)
    label = models.CharField(max_length=100, blank=True)
    status = models.CharField(max_length=16, choices=RunStatus.choices, default=RunStatus.RUNNING)

    scenario = models.CharField(max_length=32, choices=ScenarioKind.choices, blank=True)
    lookahead = models.FloatField(null=True, blank=True, help_text="Look-ahead distance (m).")
    penetration = models.FloatField(null=True, blank=True)
    duration = models.FloatField(null=True, blank=True, help_text="Simulated time (s).")

    output_dir = models.CharField(max_length=500)
    config_text = models.TextField(blank=True)

    final_amplitude = models.FloatField(null=True, blank=True)
    peak_amplitude = models.FloatField(null=True, blank=True)
    convergence_time = models.FloatField(null=True, blank=True)
    mass_drift = models.FloatField(null=True, blank=True)
    error = models.TextField(blank=True)

    class Meta:
        ordering = ("-created_at",)

    def __str__(self):
        name = self.label or self.get_command_display()
        return f"{name} ({self.get_status_display()})"

    def mark_completed(self, *, metrics=None, mass_drift=None, save=True):
        self.status = RunStatus.COMPLETED
        if metrics is not None:
            self.final_amplitude = metrics.final_amplitude
            self.peak_amplitude = metrics.peak_amplitude
            self.convergence_time = metrics.convergence_time
        self.mass_drift = mass_drift
        if save:
            self.save()

    def mark_failed(self, error, *, save=True):
        self.status = RunStatus.FAILED
        self.error = str(error)
        if save:
            self.save()
