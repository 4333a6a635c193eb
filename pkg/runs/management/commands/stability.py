# runs/management/commands/stability.py

from common.utils import parse_range
from runs.management.base import RunCommandBase
from runs.services import run_stability


class Command(RunCommandBase):
    help = (
        "Tabulate the stability criterion and dispersion growth over (rho0, k, L_D) into "
        "stability.csv, and the critical look-ahead distance per (rho0, k) into critical.csv."
    )

    def add_arguments(self, parser):
        self.add_config_argument(parser)
        parser.add_argument("--rho", required=True, help="Equilibrium densities a:b:n (veh/km).")
        parser.add_argument("--k", required=True, help="Wavenumbers a:b:n (rad/m).")
        parser.add_argument("--ld", required=True, help="Look-ahead distances a:b:n (m).")
        parser.add_argument("--out", help="Output directory (overrides output_dir in the config).")

    def handle(self, *args, **options):
        config = self.load(options["config"])
        with self.exit_codes():
            rho = parse_range(options["rho"], name="rho")
            k = parse_range(options["k"], name="k")
            ld = parse_range(options["ld"], name="ld")
            outcome = run_stability(config, rho, k, ld, output_dir=options.get("out"))

        self.stdout.write(
            f"points={len(outcome.points)} disagreements={outcome.disagreements}"
        )
        self.stdout.write(self.style.SUCCESS(
            f"Wrote {outcome.output_dir / 'stability.csv'} and {outcome.output_dir / 'critical.csv'}"
        ))
