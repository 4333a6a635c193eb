"""
URL configuration for the ringflow project.

Only the Django admin is exposed; it is used to browse recorded solver runs.
"""
from django.contrib import admin
from django.urls import path

urlpatterns = [
    # Run registry (SimulationRun rows written by the management commands)
    path("admin/", admin.site.urls),
]
