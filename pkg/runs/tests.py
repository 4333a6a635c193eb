import csv
import io
import math
import tempfile
from pathlib import Path

from django.conf import settings
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import TestCase, override_settings, tag

from common.utils import EXIT_CONFIG_ERROR, EXIT_IO_ERROR, EXIT_SOLVER_ERROR, ConfigError
from runs.config import RunConfig, parse_config
from runs.forms import RunConfigForm
from runs.models import RunCommand, RunStatus, SimulationRun
from runs.services import run_simulate, run_stability, run_sweep
from runs.writers import FAILED_SENTINEL, read_manifest

# A coarse ring that keeps full-length runs fast.
COARSE = "dx = 20\ndt = 0.2\n"


def read_rows(path):
    with open(path, encoding="utf-8", newline="") as fh:
        lines = [line for line in fh if not line.startswith("#")]
    return list(csv.reader(lines))


class ConfigParsingTests(TestCase):
    def test_empty_text_gives_defaults(self):
        config = parse_config("")
        self.assertEqual(config, RunConfig())
        self.assertEqual(
            (config.length, config.dx, config.dt, config.tau), (1000.0, 5.0, 0.05, 3.0)
        )
        self.assertEqual((config.v_f, config.rho_f, config.rho_j, config.pressure_scale), (20.0, 10.0, 140.0, 8.0))
        self.assertEqual(config.lookahead, 0.0)
        self.assertEqual(config.scenario, "single_class")

    def test_lookahead_scenario(self):
        config = parse_config("lookahead = 100\nduration = 600")
        self.assertEqual(config.lookahead, 100.0)
        self.assertEqual(config.duration, 600.0)
        self.assertEqual(config.step_config().lookahead_for(config.grid()).m_cells, 20)

    def test_comments_and_blank_lines(self):
        config = parse_config("# ring road\n\nlookahead = 15   # metres\n")
        self.assertEqual(config.lookahead, 15.0)

    def test_invalid_value_names_key_and_line(self):
        with self.assertRaises(ConfigError) as ctx:
            parse_config("tau = 3\ndt = -1\n")
        self.assertEqual(ctx.exception.key, "dt")
        self.assertEqual(ctx.exception.line, 2)
        self.assertIn("dt", str(ctx.exception))

    def test_unknown_key(self):
        with self.assertRaises(ConfigError) as ctx:
            parse_config("lanes = 2")
        self.assertEqual((ctx.exception.key, ctx.exception.line), ("lanes", 1))

    def test_duplicate_key(self):
        with self.assertRaises(ConfigError) as ctx:
            parse_config("dx = 5\ndx = 10")
        self.assertEqual((ctx.exception.key, ctx.exception.line), ("dx", 2))

    def test_line_without_equals(self):
        with self.assertRaises(ConfigError) as ctx:
            parse_config("dx 5")
        self.assertEqual(ctx.exception.line, 1)

    def test_malformed_number(self):
        with self.assertRaises(ConfigError) as ctx:
            parse_config("dx = five")
        self.assertEqual(ctx.exception.key, "dx")

    def test_cross_field_rules(self):
        cases = {
            "rho_f = 150": "rho_f",
            "dx = 3": "dx",
            "sample_every = 0.07": "sample_every",
            "duration = 600.01": "duration",
            "scenario = mixed_segregated\npenetration = 0": "penetration",
            "lookahead = 2000": "lookahead",
            "lookahead_weights = triangular": "lookahead_weights",
            "threshold = 1.5": "threshold",
            "wave_amplitude = 0.5": "wave_amplitude",
            "cfl_limit = 1.2": "cfl_limit",
        }
        for text, key in cases.items():
            with self.subTest(text=text):
                with self.assertRaises(ConfigError) as ctx:
                    parse_config(text)
                self.assertEqual(ctx.exception.key, key)

    def test_round_trip(self):
        config = parse_config(
            "lookahead = 100\n"
            "dt = 0.025\n"
            "scenario = mixed_even\n"
            "penetration = 0.4\n"
            "lookahead_weights = exponential\n"
            "threshold = 0.05\n"
            "output_dir = /tmp/ring\n"
        )
        self.assertEqual(parse_config(config.to_text()), config)
        self.assertEqual(parse_config(RunConfig().to_text()), RunConfig())

    def test_form_reports_every_problem(self):
        data = {**{k: str(v) for k, v in RunConfig().__dict__.items()}, "dt": "0", "rho_f": "200"}
        form = RunConfigForm(data=data)
        self.assertFalse(form.is_valid())
        self.assertIn("dt", form.errors)
        self.assertIn("rho_f", form.errors)


@override_settings(RINGFLOW_RECORD_RUNS=True)
class SimulateServiceTests(TestCase):
    def setUp(self):
        tmp = tempfile.TemporaryDirectory()
        self.addCleanup(tmp.cleanup)
        self.out = Path(tmp.name)

    def test_equilibrium_run_has_zero_amplitude(self):
        config = parse_config("wave_amplitude = 0\nduration = 5")
        outcome = run_simulate(config, output_dir=self.out)
        rows = read_rows(self.out / "metrics.csv")
        self.assertEqual(rows[0][:2], ["t", "amplitude"])
        self.assertEqual(len(rows), 7)
        self.assertTrue(all(row[1] == "0" for row in rows[1:]))
        self.assertEqual(outcome.metrics.convergence_time, 0.0)

    def test_outputs_and_manifest(self):
        config = parse_config("duration = 2")
        outcome = run_simulate(config, output_dir=self.out)

        fields = read_rows(self.out / "fields.csv")
        self.assertEqual(fields[0], ["t", "x", "rho", "v"])
        self.assertEqual(len(fields), 1 + 3 * 200)
        self.assertEqual(fields[1][:2], ["0", "2.5"])

        profile = read_rows(self.out / "profile.csv")
        self.assertEqual(profile[0], ["x", "rho", "v"])
        self.assertEqual(len(profile), 201)

        manifest = read_manifest(self.out / "manifest.txt")
        self.assertEqual(manifest["status"], "completed")
        self.assertEqual(manifest["solver_version"], settings.RINGFLOW_VERSION)
        self.assertEqual(manifest["config.dt"], "0.05")
        self.assertEqual(manifest["samples"], "3")
        self.assertLess(float(manifest["mass_drift.all"]), 1e-12)
        self.assertLess(outcome.mass_drift, 1e-12)

        with open(self.out / "metrics.csv", encoding="utf-8") as fh:
            summary = [line for line in fh if line.startswith("# ")]
        self.assertTrue(any(line.startswith("# final_amplitude=") for line in summary))
        self.assertIn("final_amplitude=", outcome.summary_line())
        self.assertIn("convergence_time=none", outcome.summary_line())

    def test_mixed_run_has_class_columns(self):
        config = parse_config("scenario = mixed_even\npenetration = 0.4\nlookahead = 100\nduration = 1")
        run_simulate(config, output_dir=self.out)
        header = read_rows(self.out / "fields.csv")[0]
        self.assertEqual(header, ["t", "x", "rho", "v", "rho_h", "rho_c", "v_h", "v_c"])
        manifest = read_manifest(self.out / "manifest.txt")
        self.assertIn("mass_drift.hdv", manifest)
        self.assertIn("mass_drift.cav", manifest)

    def test_absent_class_reports_no_mass_drift(self):
        for penetration in ("0", "1"):
            out = self.out / penetration
            config = parse_config(f"scenario = mixed_even\npenetration = {penetration}\nlookahead = 100\nduration = 60")
            outcome = run_simulate(config, output_dir=out)
            manifest = read_manifest(out / "manifest.txt")
            self.assertLess(outcome.mass_drift, 1e-10, penetration)
            self.assertLess(float(manifest["mass_drift.hdv"]), 1e-10)
            self.assertLess(float(manifest["mass_drift.cav"]), 1e-10)

    def test_output_is_byte_identical(self):
        config = parse_config("lookahead = 100\nduration = 3")
        first, second = self.out / "a", self.out / "b"
        run_simulate(config, output_dir=first)
        run_simulate(config, output_dir=second)
        for name in ("fields.csv", "metrics.csv", "profile.csv", "manifest.txt"):
            self.assertEqual((first / name).read_bytes(), (second / name).read_bytes(), name)
        self.assertNotIn(b"\r\n", (first / "fields.csv").read_bytes())

    def test_solver_failure_leaves_sentinel(self):
        config = parse_config("dt = 0.5\nduration = 10")
        with self.assertRaises(Exception):
            run_simulate(config, output_dir=self.out)
        for name in ("fields.csv", "metrics.csv"):
            last = (self.out / name).read_text(encoding="utf-8").splitlines()[-1]
            self.assertTrue(last.startswith(FAILED_SENTINEL))
        self.assertEqual(read_manifest(self.out / "manifest.txt")["status"], "failed")
        run = SimulationRun.objects.get()
        self.assertEqual(run.status, RunStatus.FAILED)
        self.assertIn("Courant", run.error)

    def test_run_is_recorded(self):
        run_simulate(parse_config("duration = 1\nlookahead = 15"), output_dir=self.out)
        run = SimulationRun.objects.get()
        self.assertEqual(run.command, RunCommand.SIMULATE)
        self.assertEqual(run.status, RunStatus.COMPLETED)
        self.assertEqual(run.lookahead, 15.0)
        self.assertIsNotNone(run.final_amplitude)
        self.assertIn("lookahead = 15.0", run.config_text)

    @override_settings(RINGFLOW_RECORD_RUNS=False)
    def test_recording_can_be_switched_off(self):
        run_simulate(parse_config("duration = 1"), output_dir=self.out)
        self.assertFalse(SimulationRun.objects.exists())


class StabilityServiceTests(TestCase):
    def setUp(self):
        tmp = tempfile.TemporaryDirectory()
        self.addCleanup(tmp.cleanup)
        self.out = Path(tmp.name)

    def test_single_point(self):
        k = 2 * math.pi / 1000
        run_stability(RunConfig(), [56.0], [k], [0.0], output_dir=self.out)
        rows = read_rows(self.out / "stability.csv")
        self.assertEqual(rows[0], ["rho0", "k", "lookahead", "margin", "re_sigma_max", "agree_flag"])
        self.assertEqual(len(rows), 2)
        self.assertAlmostEqual(float(rows[1][3]), -0.0542, delta=1e-4)
        self.assertGreater(float(rows[1][4]), 0)
        self.assertEqual(rows[1][5], "1")

    def test_half_period_row(self):
        k = 2 * math.pi / 1000
        outcome = run_stability(RunConfig(), [56.0], [k], [500.0], output_dir=self.out)
        self.assertAlmostEqual(outcome.points[0].margin, 0.09958765, places=6)

    def test_critical_distances(self):
        k = 2 * math.pi / 1000
        outcome = run_stability(RunConfig(), [56.0, 120.0], [k], [0.0], output_dir=self.out)
        rows = read_rows(self.out / "critical.csv")
        self.assertEqual(rows[0], ["rho0", "k", "critical_lookahead"])
        self.assertEqual(len(rows), 3)
        distance = float(rows[1][2])
        self.assertGreater(distance, 100)
        self.assertLess(distance, 500)
        self.assertEqual(rows[2][2], "0")
        self.assertEqual(len(outcome.critical), 2)
        self.assertEqual(read_manifest(self.out / "manifest.txt")["critical_pairs"], "2")

    def test_grid_cardinality(self):
        rho = [20 + 5 * i for i in range(20)]
        ks = [0.001 * (i + 1) for i in range(20)]
        run_stability(RunConfig(), rho, ks, [100.0], output_dir=self.out)
        self.assertEqual(len(read_rows(self.out / "stability.csv")), 401)


class CommandTests(TestCase):
    def setUp(self):
        tmp = tempfile.TemporaryDirectory()
        self.addCleanup(tmp.cleanup)
        self.tmp = Path(tmp.name)

    def write_config(self, text, name="run.cfg"):
        path = self.tmp / name
        path.write_text(text, encoding="utf-8")
        return str(path)

    def test_simulate(self):
        out = io.StringIO()
        call_command(
            "simulate", config=self.write_config("duration = 2"), out=str(self.tmp / "sim"), stdout=out
        )
        self.assertIn("final_amplitude=", out.getvalue())
        self.assertIn("mass_drift=", out.getvalue())
        self.assertTrue((self.tmp / "sim" / "fields.csv").exists())
        self.assertEqual(SimulationRun.objects.filter(command=RunCommand.SIMULATE).count(), 1)

    def test_config_error_exit_code(self):
        with self.assertRaises(CommandError) as ctx:
            call_command("simulate", config=self.write_config("dt = -1"), stdout=io.StringIO())
        self.assertEqual(ctx.exception.returncode, EXIT_CONFIG_ERROR)
        self.assertIn("dt", str(ctx.exception))

    def test_missing_config_file_exit_code(self):
        with self.assertRaises(CommandError) as ctx:
            call_command("simulate", config=str(self.tmp / "nope.cfg"), stdout=io.StringIO())
        self.assertEqual(ctx.exception.returncode, EXIT_IO_ERROR)

    def test_solver_error_exit_code(self):
        with self.assertRaises(CommandError) as ctx:
            call_command(
                "simulate",
                config=self.write_config("dt = 0.5\nduration = 10"),
                out=str(self.tmp / "bad"),
                stdout=io.StringIO(),
            )
        self.assertEqual(ctx.exception.returncode, EXIT_SOLVER_ERROR)

    def test_stability(self):
        out = io.StringIO()
        call_command(
            "stability",
            config=self.write_config(""),
            rho="20:130:5",
            k="0.001:0.01:4",
            ld="0:100:3",
            out=str(self.tmp / "map"),
            stdout=out,
        )
        self.assertIn("points=60", out.getvalue())
        self.assertEqual(len(read_rows(self.tmp / "map" / "stability.csv")), 61)
        self.assertEqual(len(read_rows(self.tmp / "map" / "critical.csv")), 21)

    def test_stability_bad_range(self):
        with self.assertRaises(CommandError) as ctx:
            call_command(
                "stability", config=self.write_config(""), rho="20:130", k="0.01", ld="0",
                out=str(self.tmp / "map"), stdout=io.StringIO(),
            )
        self.assertEqual(ctx.exception.returncode, EXIT_CONFIG_ERROR)

    def test_unknown_preset(self):
        with self.assertRaises(CommandError) as ctx:
            call_command("sweep", preset="rush_hour", out=str(self.tmp), stdout=io.StringIO())
        self.assertEqual(ctx.exception.returncode, EXIT_CONFIG_ERROR)
        self.assertIn("lookahead_sweep", str(ctx.exception))

    def test_sweep_on_coarse_ring(self):
        out = io.StringIO()
        call_command(
            "sweep",
            preset="mixed_even_sweep",
            out=str(self.tmp / "sweep"),
            config=self.write_config(COARSE),
            stdout=out,
        )
        table = read_rows(self.tmp / "sweep" / "sweep.csv")
        self.assertEqual(table[0][0], "name")
        self.assertEqual([row[0] for row in table[1:]], ["even_r10", "even_r20", "even_r40"])
        self.assertEqual([row[4] for row in table[1:]], ["1200", "1200", "600"])
        self.assertTrue(all(row[-1] == "completed" for row in table[1:]))
        for name in ("even_r10", "even_r20", "even_r40"):
            self.assertTrue((self.tmp / "sweep" / name / "metrics.csv").exists())
        self.assertEqual(SimulationRun.objects.filter(command=RunCommand.SWEEP).count(), 3)

    def test_sweep_member_failures(self):
        base = parse_config("dx = 20\ndt = 2\nsample_every = 2\n")
        outcome = run_sweep("lookahead_sweep", self.tmp / "sweep", base=base)
        self.assertFalse(outcome.ok)
        self.assertEqual(len(outcome.failures), 4)
        table = read_rows(self.tmp / "sweep" / "sweep.csv")
        self.assertTrue(all(row[-1] == "failed" for row in table[1:]))

        with self.assertRaises(CommandError) as ctx:
            call_command(
                "sweep", preset="lookahead_sweep", out=str(self.tmp / "again"),
                config=self.write_config("dx = 20\ndt = 2\nsample_every = 2\n"), stdout=io.StringIO(),
            )
        self.assertEqual(ctx.exception.returncode, EXIT_SOLVER_ERROR)


@tag("slow")
class PresetSweepTests(TestCase):
    def test_lookahead_sweep(self):
        with tempfile.TemporaryDirectory() as tmp:
            outcome = run_sweep("lookahead_sweep", tmp)
            self.assertTrue(outcome.ok)
            self.assertEqual(set(outcome.results), {"ld_0", "ld_15", "ld_100", "ld_1000"})
            for result in outcome.results.values():
                self.assertLess(result.mass_drift, 1e-10)
            self.assertFalse(outcome.results["ld_0"].metrics.converged)
