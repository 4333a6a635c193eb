#!/usr/bin/env python
"""Command-line entry point: `simulate`, `stability`, `sweep` and the usual Django tasks."""
import os
import sys


def main():
    """Run a ringflow management command."""
    os.environ.setdefault("DJANGO_SETTINGS_MODULE", "core.settings")
    try:
        from django.core.management import execute_from_command_line
    except ImportError as exc:
        raise ImportError(
            "Couldn't import Django. Install the packages from requirements.txt "
            "into the active environment first."
        ) from exc
    execute_from_command_line(sys.argv)


if __name__ == "__main__":
    main()
