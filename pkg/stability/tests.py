import math

import numpy as np
from django.test import SimpleTestCase, tag

from common.utils import DomainError
from dynamics.grid import ClassField, RingGrid
from dynamics.laws import (
    FundamentalDiagram,
    ModelParams,
    PressureLaw,
    equilibrium_speed_derivative,
    pressure_derivative,
)
from dynamics.stepper import StepConfig, simulate
from scenarios.initial import perturbation_ic
from scenarios.metrics import fit_growth_rate
from stability.dispersion import (
    PerturbationQuery,
    critical_lookahead,
    determinant,
    dispersion_roots,
    sinc_factor,
    solve_monic_quadratic,
    stability_criterion_margin,
    stability_map,
    zeta,
)

FD = FundamentalDiagram()
PL = PressureLaw()
K_RING = 2 * math.pi / 1000
V_PRIME = -20 / 130


class ZetaTests(SimpleTestCase):
    def test_local_limit(self):
        z = zeta(PerturbationQuery(rho0=56, k=K_RING, lookahead=0))
        self.assertAlmostEqual(z.real, V_PRIME, places=12)
        self.assertEqual(z.imag, 0.0)

    def test_full_period_window_vanishes(self):
        z = zeta(PerturbationQuery(rho0=56, k=K_RING, lookahead=1000))
        self.assertLess(abs(z), 1e-12)

    def test_modulus_ratio(self):
        z = zeta(PerturbationQuery(rho0=56, k=K_RING, lookahead=100))
        x = K_RING * 100
        self.assertAlmostEqual(abs(z) / abs(V_PRIME), 2 * abs(math.sin(x / 2)) / x, places=12)
        self.assertAlmostEqual(abs(z) / abs(V_PRIME), 0.98363, places=5)

    def test_modulus_never_exceeds_the_local_slope(self):
        rng = np.random.default_rng(31)
        for rho0, k, lookahead in zip(
            rng.uniform(11, 135, 500), rng.uniform(1e-4, 0.2, 500), rng.uniform(0, 1000, 500)
        ):
            z = zeta(PerturbationQuery(rho0=rho0, k=k, lookahead=lookahead))
            slope = equilibrium_speed_derivative(FD, rho0)
            self.assertLessEqual(abs(z), abs(slope) * (1 + 1e-12))


class DispersionTests(SimpleTestCase):
    def test_roots_solve_the_determinant(self):
        for rho0 in (20, 56, 90, 120):
            for lookahead in (0, 15, 100, 400, 1000):
                for k in (K_RING, 3 * K_RING, 0.05):
                    query = PerturbationQuery(rho0=rho0, k=k, lookahead=lookahead)
                    for root in dispersion_roots(query).roots:
                        self.assertLess(abs(determinant(query, root)), 1e-10)

    def test_matches_companion_matrix_roots(self):
        b, c = 0.3 - 0.02j, 1e-4 + 3e-5j
        ours = sorted(solve_monic_quadratic(b, c), key=lambda r: (r.real, r.imag))
        ref = sorted(np.roots([1, b, c]), key=lambda r: (r.real, r.imag))
        np.testing.assert_allclose(ours, ref, rtol=1e-10)

    def test_long_wave_limit(self):
        result = dispersion_roots(PerturbationQuery(rho0=56, k=1e-9, lookahead=0))
        reals = sorted(r.real for r in result.roots)
        self.assertAlmostEqual(reals[0], -1 / 3, places=6)
        self.assertAlmostEqual(reals[1], 0.0, places=9)

    def test_local_model_is_unstable_at_56(self):
        result = dispersion_roots(PerturbationQuery(rho0=56, k=K_RING, lookahead=0))
        self.assertGreater(result.max_growth, 0)
        self.assertAlmostEqual(result.phi, pressure_derivative(PL, 56), places=14)

    def test_vanishing_window_factor_is_neutral(self):
        result = dispersion_roots(PerturbationQuery(rho0=56, k=K_RING, lookahead=1000))
        self.assertLessEqual(result.max_growth, 1e-12)
        self.assertGreaterEqual(stability_criterion_margin(56, K_RING, 1000), 0)

    def test_query_validation(self):
        with self.assertRaises(DomainError):
            PerturbationQuery(rho0=5, k=K_RING, lookahead=0)
        with self.assertRaises(DomainError):
            PerturbationQuery(rho0=56, k=0, lookahead=0)
        with self.assertRaises(DomainError):
            PerturbationQuery(rho0=56, k=K_RING, lookahead=-1)


class CriterionTests(SimpleTestCase):
    def test_margin_at_56(self):
        margin = stability_criterion_margin(56, K_RING, 0)
        self.assertAlmostEqual(margin, -0.0542, delta=1e-4)
        self.assertAlmostEqual(margin, -0.0542585, places=6)

    def test_half_period_window_leaves_pressure(self):
        k = K_RING
        margin = stability_criterion_margin(56, k, math.pi / k)
        self.assertAlmostEqual(margin, pressure_derivative(PL, 56), places=12)
        self.assertGreater(margin, 0)

    def test_dense_traffic_is_stable(self):
        margin = stability_criterion_margin(120, K_RING, 0)
        self.assertAlmostEqual(margin, 0.554321 - 20 / 130, places=5)
        self.assertGreater(margin, 0)

    def test_observation_window_of_100m(self):
        self.assertAlmostEqual(stability_criterion_margin(56, K_RING, 100), -0.04433, places=4)

    def test_factor_is_non_increasing(self):
        distances = np.linspace(1, 500, 50)
        factors = [sinc_factor(K_RING, d) for d in distances]
        self.assertTrue(np.all(np.diff(factors) <= 0))
        self.assertEqual(sinc_factor(K_RING, 0), 1.0)

    def test_critical_lookahead(self):
        ld = critical_lookahead(56, K_RING)
        self.assertAlmostEqual(stability_criterion_margin(56, K_RING, ld), 0.0, places=9)
        self.assertLess(stability_criterion_margin(56, K_RING, 0.99 * ld), 0)
        self.assertGreater(ld, 100)
        self.assertLess(ld, 500)

    def test_critical_lookahead_when_already_stable(self):
        self.assertEqual(critical_lookahead(120, K_RING), 0.0)


class StabilityMapTests(SimpleTestCase):
    def test_single_point_matches_scalar_operations(self):
        (point,) = stability_map([56], [K_RING], [0])
        self.assertEqual(point.margin, stability_criterion_margin(56, K_RING, 0))
        self.assertEqual(
            point.max_growth,
            dispersion_roots(PerturbationQuery(rho0=56, k=K_RING, lookahead=0)).max_growth,
        )
        self.assertIs(point.agrees, True)

    def test_grid_cardinality_and_order(self):
        rho = np.linspace(20, 130, 20)
        ks = np.linspace(K_RING, 10 * K_RING, 20)
        points = stability_map(rho, ks, [100])
        self.assertEqual(len(points), 400)
        self.assertEqual(points[0].rho0, 20)
        self.assertEqual(points[19].rho0, 20)
        self.assertEqual(points[20].rho0, rho[1])

    def test_stable_dense_point_agrees(self):
        (point,) = stability_map([120], [K_RING], [0])
        self.assertLessEqual(point.max_growth, 1e-12)
        self.assertIs(point.agrees, True)

    def test_deadband_points_are_not_audited(self):
        ld = critical_lookahead(56, K_RING)
        (point,) = stability_map([56], [K_RING], [ld])
        self.assertIsNone(point.agrees)

    def test_errors_carry_coordinates(self):
        with self.assertRaises(DomainError) as ctx:
            stability_map([56, 5], [K_RING], [0])
        self.assertIn("rho0=5", str(ctx.exception))

    def test_empty_range(self):
        with self.assertRaises(DomainError):
            stability_map([], [K_RING], [0])


@tag("slow")
class GrowthRateCrossCheckTests(SimpleTestCase):
    def test_simulated_growth_matches_dispersion(self):
        # Refined grid keeps numerical diffusion well below the tolerance.
        grid = RingGrid(length=1000, dx=1.25)
        params = ModelParams()
        cfg = StepConfig(dt=0.0125, params=params)
        rho, v = perturbation_ic(grid, FD, 56.0, relative_amplitude=1e-3)
        trajectory = simulate(
            ClassField.from_primitive(rho, v, PL), grid, cfg, duration=150.0, sample_every=1.0
        )
        fitted = fit_growth_rate(trajectory.times, trajectory.amplitudes(), 50.0, 150.0)
        expected = dispersion_roots(PerturbationQuery(rho0=56, k=K_RING, lookahead=0)).max_growth
        self.assertGreater(expected, 0)
        self.assertLess(abs(fitted / expected - 1), 0.15)
