"""
WSGI entry point for serving the ringflow admin (run registry browser).

Solver work never goes through here; it runs from the management commands.
"""

import os

from django.core.wsgi import get_wsgi_application

os.environ.setdefault("DJANGO_SETTINGS_MODULE", "core.settings")

application = get_wsgi_application()
