# runs/management/commands/sweep.py

from django.core.management.base import CommandError

from common.utils import EXIT_SOLVER_ERROR
from runs.management.base import RunCommandBase
from runs.services import format_sweep, run_sweep
from scenarios.presets import PRESETS


class Command(RunCommandBase):
    help = "Run a named scenario preset and write a comparison table (sweep.csv)."

    def add_arguments(self, parser):
        parser.add_argument("--preset", required=True, help=f"One of: {', '.join(sorted(PRESETS))}.")
        parser.add_argument("--out", required=True, help="Base output directory; one subdirectory per run.")
        self.add_config_argument(parser, required=False)

    def handle(self, *args, **options):
        base = self.load(options.get("config"))
        with self.exit_codes():
            outcome = run_sweep(options["preset"], options["out"], base=base)

        for line in format_sweep(outcome):
            self.stdout.write(line)

        if not outcome.ok:
            raise CommandError(
                f"{len(outcome.failures)} sweep member(s) failed: {', '.join(outcome.failures)}",
                returncode=EXIT_SOLVER_ERROR,
            )
        self.stdout.write(self.style.SUCCESS(f"Wrote {outcome.output_dir / 'sweep.csv'}"))
