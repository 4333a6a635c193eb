# runs/management/commands/simulate.py

from runs.management.base import RunCommandBase
from runs.services import run_simulate


class Command(RunCommandBase):
    help = "Run one ring-road scenario and write fields.csv, metrics.csv, profile.csv and manifest.txt."

    def add_arguments(self, parser):
        self.add_config_argument(parser)
        parser.add_argument("--out", help="Output directory (overrides output_dir in the config).")

    def handle(self, *args, **options):
        config = self.load(options["config"])
        with self.exit_codes():
            outcome = run_simulate(config, output_dir=options.get("out"))

        self.stdout.write(outcome.summary_line())
        self.stdout.write(self.style.SUCCESS(f"Wrote {outcome.output_dir}"))
