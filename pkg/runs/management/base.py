# runs/management/base.py

from contextlib import contextmanager

from django.core.management.base import BaseCommand, CommandError

from common.utils import (
    EXIT_CONFIG_ERROR,
    EXIT_IO_ERROR,
    EXIT_SOLVER_ERROR,
    ConfigError,
    DomainError,
    SolverError,
)
from runs.config import RunConfig, load_config


class RunCommandBase(BaseCommand):
    """Shared plumbing: config loading and error -> exit code mapping."""

    def add_config_argument(self, parser, *, required=True):
        parser.add_argument(
            "--config",
            required=required,
            help="Path to a plain-text `key = value` run config.",
        )

    def load(self, path) -> RunConfig:
        if not path:
            return RunConfig()
        with self.exit_codes():
            return load_config(path)

    @contextmanager
    def exit_codes(self):
        try:
            yield
        except (ConfigError, DomainError) as exc:
            raise CommandError(f"config error: {exc}", returncode=EXIT_CONFIG_ERROR) from exc
        except SolverError as exc:
            raise CommandError(f"solver error: {exc}", returncode=EXIT_SOLVER_ERROR) from exc
        except OSError as exc:
            raise CommandError(f"I/O error: {exc}", returncode=EXIT_IO_ERROR) from exc
