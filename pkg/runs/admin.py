# runs/admin.py

from django.contrib import admin

from .models import SimulationRun


@admin.register(SimulationRun)
class SimulationRunAdmin(admin.ModelAdmin):
    list_display = (
        "created_at",
        "command",
        "label",
        "scenario",
        "lookahead",
        "penetration",
        "status",
        "final_amplitude",
        "convergence_time",
    )
    list_filter = ("command", "status", "scenario")
    search_fields = ("label", "output_dir", "error")
    readonly_fields = ("created_at", "updated_at", "config_text")
    ordering = ("-created_at",)
