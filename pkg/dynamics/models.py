# dynamics/models.py
from django.db import models
from django.utils.translation import gettext_lazy as _


class WeightProfile(models.TextChoices):
    """How a CAV weighs the cells inside its look-ahead window."""

    UNIFORM = "uniform", _("Uniform")
    LINEAR = "linear", _("Linear decay with distance")
    EXPONENTIAL = "exponential", _("Exponential decay with distance")
