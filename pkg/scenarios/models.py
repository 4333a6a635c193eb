# scenarios/models.py
from django.db import models
from django.utils.translation import gettext_lazy as _


class ScenarioKind(models.TextChoices):
    SINGLE_CLASS = "single_class", _("Single class (look-ahead ARZ)")
    MIXED_EVEN = "mixed_even", _("Mixed, CAVs evenly distributed")
    MIXED_SEGREGATED = "mixed_segregated", _("Mixed, CAVs in one block")
