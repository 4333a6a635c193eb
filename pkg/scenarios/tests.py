import math
import time

import numpy as np
from django.test import SimpleTestCase, tag

from common.utils import ConfigError, DomainError
from dynamics.grid import ClassField, MixedField, RingGrid, class_masses
from dynamics.laws import FundamentalDiagram, ModelParams, PressureLaw, equilibrium_speed
from dynamics.stepper import StepConfig, Trajectory, simulate
from scenarios.initial import (
    ScenarioSpec,
    build_initial,
    even_mix_ic,
    perturbation_ic,
    segregated_mix_ic,
    sinusoidal_density,
    sinusoidal_ic,
)
from scenarios.metrics import compute_metrics, convergence_time, fit_growth_rate
from scenarios.models import ScenarioKind
from scenarios.presets import PRESETS, preset_members

FD = FundamentalDiagram()
PL = PressureLaw()
GRID = RingGrid()


def run(spec, sample_every=1.0):
    params = ModelParams(lookahead=spec.lookahead)
    initial = build_initial(spec, GRID, params)
    return simulate(initial, GRID, StepConfig(params=params), spec.duration, sample_every)


class InitialConditionTests(SimpleTestCase):
    def test_sinusoid_values(self):
        self.assertAlmostEqual(sinusoidal_density(250, FD, 1000), 70.0, places=12)
        self.assertAlmostEqual(sinusoidal_density(0, FD, 1000), 56.0, places=12)

    def test_sinusoid_mean_and_speed(self):
        rho, v = sinusoidal_ic(GRID, FD)
        self.assertAlmostEqual(rho.mean(), 56.0, delta=1e-12)
        np.testing.assert_array_equal(v, equilibrium_speed(FD, rho))

    def test_zero_wave_is_uniform(self):
        rho, _ = sinusoidal_ic(GRID, FD, wave_fraction=0.0)
        np.testing.assert_allclose(rho, 56.0, rtol=1e-15)
        self.assertEqual(np.ptp(rho), 0.0)

    def test_even_mix(self):
        mixed = even_mix_ic(GRID, FD, 0.4)
        x = GRID.centers
        i = int(np.argmin(np.abs(x - 250)))
        total = sinusoidal_density(x[i], FD, 1000)
        self.assertAlmostEqual(mixed.cav.rho[i], 0.4 * total, places=12)
        self.assertAlmostEqual(mixed.hdv.rho[i], 0.6 * total, places=12)
        np.testing.assert_allclose(mixed.total, sinusoidal_ic(GRID, FD)[0], rtol=1e-15)

    def test_even_mix_without_cavs(self):
        mixed = even_mix_ic(GRID, FD, 0.0)
        np.testing.assert_array_equal(mixed.cav.rho, 1e-6)

    def test_segregated_band(self):
        mixed = segregated_mix_ic(GRID, FD, 0.2)
        x = GRID.centers
        inside = int(np.argmin(np.abs(x - 502.5)))
        outside = int(np.argmin(np.abs(x - 102.5)))
        total = mixed.total
        self.assertAlmostEqual(mixed.cav.rho[inside] / total[inside], 0.999, places=12)
        self.assertAlmostEqual(mixed.cav.rho[outside] / total[outside], 0.001, places=12)
        in_band = (x > 400) & (x < 600)
        self.assertEqual(np.count_nonzero(mixed.cav.rho > 0.5 * total), np.count_nonzero(in_band))

    def test_segregated_share_of_mass(self):
        masses = class_masses(segregated_mix_ic(GRID, FD, 0.4), GRID)
        share = masses["cav"] / (masses["cav"] + masses["hdv"])
        self.assertLess(abs(share - 0.4) / 0.4, 0.02)

    def test_segregated_needs_interior_penetration(self):
        for r in (0.0, 1.0):
            with self.assertRaises(DomainError):
                segregated_mix_ic(GRID, FD, r)

    def test_perturbation(self):
        rho, v = perturbation_ic(GRID, FD, 56.0, relative_amplitude=1e-3, mode=2)
        self.assertAlmostEqual(np.ptp(rho), 2 * 56e-3, delta=1e-3)
        self.assertAlmostEqual(rho.mean(), 56.0, places=12)
        with self.assertRaises(DomainError):
            perturbation_ic(GRID, FD, 56.0, mode=0)

    def test_build_initial_dispatch(self):
        params = ModelParams()
        self.assertIsInstance(build_initial(ScenarioSpec(), GRID, params), ClassField)
        mixed = build_initial(ScenarioSpec(kind=ScenarioKind.MIXED_EVEN, penetration=0.2), GRID, params)
        self.assertIsInstance(mixed, MixedField)

    def test_spec_validation(self):
        with self.assertRaises(DomainError):
            ScenarioSpec(kind="platoon")
        with self.assertRaises(DomainError):
            ScenarioSpec(penetration=1.5)
        with self.assertRaises(DomainError):
            ScenarioSpec(wave_fraction=0.4)


class MetricsTests(SimpleTestCase):
    def test_exponential_decay(self):
        times = np.arange(0.0, 600.0, 1.0)
        amps = 28.0 * np.exp(-times / 100.0)
        self.assertAlmostEqual(fit_growth_rate(times, amps), -0.01, places=10)
        self.assertEqual(convergence_time(times, amps, 2.8), math.ceil(100 * math.log(10)))

    def test_growing_amplitude_never_converges(self):
        times = np.arange(0.0, 10.0)
        self.assertIsNone(convergence_time(times, 1.0 + times, 0.1))

    def test_fit_needs_two_points(self):
        self.assertEqual(fit_growth_rate([0.0, 1.0], [1.0, 2.0], start=0.5), 0.0)

    def test_equilibrium_run(self):
        spec = ScenarioSpec(duration=10.0, wave_fraction=0.0)
        metrics = compute_metrics(run(spec))
        self.assertEqual(metrics.peak_amplitude, 0.0)
        self.assertEqual(metrics.convergence_time, 0.0)
        self.assertTrue(metrics.converged)

    def test_velocity_series_follows_samples(self):
        metrics = compute_metrics(run(ScenarioSpec(duration=5.0)))
        self.assertEqual(len(metrics.velocity_amplitude_series), 6)
        self.assertGreater(metrics.final_velocity_amplitude, 0)

    def test_metrics_ignore_cyclic_relabeling(self):
        trajectory = run(ScenarioSpec(lookahead=100.0, duration=20.0))
        shifted = Trajectory()
        for time, snapshot, diag in zip(trajectory.times, trajectory.snapshots, trajectory.diagnostics):
            rolled = ClassField(rho=np.roll(snapshot.rho, 37), y=np.roll(snapshot.y, 37))
            shifted.append(time, rolled, diag)
        self.assertEqual(compute_metrics(shifted), compute_metrics(trajectory))

    def test_convergence_time_is_monotone_in_threshold(self):
        times = np.arange(0.0, 300.0, 1.0)
        amps = 28.0 * np.exp(-times / 60.0) * (1 + 0.2 * np.sin(times / 7.0))
        found = [convergence_time(times, amps, t) for t in np.linspace(0.5, 30.0, 40)]
        self.assertNotIn(None, found)
        self.assertTrue(all(a >= b for a, b in zip(found, found[1:])))

    def test_absent_class_keeps_its_mass(self):
        for r in (0.0, 1.0):
            trajectory = run(ScenarioSpec(kind=ScenarioKind.MIXED_EVEN, penetration=r, lookahead=100.0, duration=120.0))
            for name, drift in trajectory.mass_drift().items():
                self.assertLess(drift, 1e-10, (r, name))

    def test_empty_trajectory(self):
        with self.assertRaises(DomainError):
            compute_metrics(Trajectory())


class PresetTests(SimpleTestCase):
    def test_lookahead_sweep(self):
        members = preset_members("lookahead_sweep")
        self.assertEqual([m.spec.lookahead for m in members], [0.0, 15.0, 100.0, 1000.0])
        self.assertEqual([m.spec.duration for m in members], [600.0, 1200.0, 600.0, 1200.0])

    def test_mixed_sweeps_share_durations(self):
        even = preset_members("mixed_even_sweep")
        segregated = preset_members("mixed_segregated_sweep")
        self.assertEqual([m.spec.penetration for m in even], [0.1, 0.2, 0.4])
        self.assertEqual([m.spec.duration for m in even], [1200.0, 1200.0, 600.0])
        self.assertEqual([m.spec.duration for m in segregated], [m.spec.duration for m in even])
        self.assertTrue(all(m.spec.lookahead == 100.0 for m in even + segregated))
        self.assertTrue(all(m.spec.kind == ScenarioKind.MIXED_SEGREGATED for m in segregated))

    def test_scan(self):
        members = preset_members("lookahead_scan")
        self.assertEqual(len(members), 13)
        self.assertEqual(len({m.name for m in members}), 13)

    def test_unknown_preset_lists_names(self):
        with self.assertRaises(ConfigError) as ctx:
            preset_members("rush_hour")
        for name in PRESETS:
            self.assertIn(name, str(ctx.exception))


@tag("slow")
class RingRoadReproductionTests(SimpleTestCase):
    """Full-length scenario runs; qualitative orderings of the study."""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.single = {
            ld: run(ScenarioSpec(lookahead=ld, duration=600.0))
            for ld in (0.0, 15.0, 100.0, 1000.0)
        }

    def final(self, trajectory):
        return trajectory.amplitudes()[-1]

    def test_local_model_does_not_settle(self):
        trajectory = self.single[0.0]
        metrics = compute_metrics(trajectory)
        self.assertGreaterEqual(metrics.final_amplitude, metrics.amplitude_series[0][1] - 0.5)
        self.assertFalse(metrics.converged)

    def test_moderate_lookahead_converges_fastest(self):
        amp = {ld: self.final(t) for ld, t in self.single.items()}
        self.assertLess(amp[100.0], amp[15.0])
        self.assertLess(amp[100.0], amp[1000.0])
        for ld in (15.0, 100.0, 1000.0):
            self.assertLess(amp[ld], amp[0.0])

    def test_mass_is_conserved(self):
        for trajectory in self.single.values():
            for drift in trajectory.mass_drift().values():
                self.assertLess(drift, 1e-10)

    def test_penetration_ordering(self):
        def even(r, duration):
            return run(ScenarioSpec(kind=ScenarioKind.MIXED_EVEN, penetration=r, lookahead=100.0, duration=duration))

        r20, r40 = even(0.2, 600.0), even(0.4, 600.0)
        self.assertLess(self.final(r40), self.final(r20))
        self.assertFalse(compute_metrics(even(0.1, 1200.0)).converged)
        for trajectory in (r20, r40):
            for drift in trajectory.mass_drift().values():
                self.assertLess(drift, 1e-10)

    def test_segregated_start_has_larger_transient(self):
        for r in (0.2, 0.4):
            runs = {
                kind: run(ScenarioSpec(kind=kind, penetration=r, lookahead=100.0, duration=600.0))
                for kind in (ScenarioKind.MIXED_EVEN, ScenarioKind.MIXED_SEGREGATED)
            }
            even = compute_metrics(runs[ScenarioKind.MIXED_EVEN])
            segregated = compute_metrics(runs[ScenarioKind.MIXED_SEGREGATED])
            self.assertGreater(segregated.peak_amplitude, even.peak_amplitude)
            ratio = segregated.final_amplitude / even.final_amplitude
            self.assertLess(ratio, 2.0)
            self.assertGreater(ratio, 0.5)

    def test_full_ring_observation_is_fast(self):
        started = time.perf_counter()
        trajectory = run(ScenarioSpec(lookahead=1000.0, duration=1200.0))
        self.assertLess(time.perf_counter() - started, 30.0)
        self.assertEqual(len(trajectory), 1201)
