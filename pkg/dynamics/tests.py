import math

import numpy as np
from django.test import SimpleTestCase, tag

from common.utils import DENSITY_FLOOR, CflViolationError, DomainError, JamOverflowError, SolverError
from dynamics.grid import (
    ClampCounter,
    ClassField,
    MixedField,
    RingGrid,
    class_masses,
    to_conserved,
    to_primitive,
    total_mass,
)
from dynamics.laws import (
    FundamentalDiagram,
    ModelParams,
    PressureLaw,
    clamped_pressure_derivative,
    equilibrium_speed,
    equilibrium_speed_derivative,
    pressure,
    pressure_derivative,
)
from dynamics.lookahead import (
    LookaheadSpec,
    lookahead_average,
    observed_density,
    weight_profile,
    weighted_lookahead_average,
)
from dynamics.models import WeightProfile
from dynamics.riemann import (
    ConservedState,
    characteristic_speeds,
    hll_combine,
    hll_flux,
    physical_flux,
    wave_speed_estimates,
)
from dynamics.stepper import (
    StepConfig,
    Trajectory,
    apply_density_floor,
    cfl_number,
    iter_samples,
    simulate,
    step_mixed,
    step_single,
)

FD = FundamentalDiagram()
PL = PressureLaw()

# Values of the default laws at rho = 56 veh/km.
V_56 = 20.0 * 84.0 / 130.0
H_56 = 8.0 * math.sqrt(46.0 / 84.0)
H_PRIME_56 = 0.09958765


def sinusoid(grid):
    x = grid.centers
    return 56.0 + 14.0 * np.sin(2 * np.pi * x / grid.length)


def single_field(rho, params=None):
    params = params or ModelParams()
    return ClassField.from_primitive(rho, equilibrium_speed(params.fd, rho), params.pl)


def uniform_mixed(grid, rho_h, rho_c):
    total = np.full(grid.n_cells, rho_h + rho_c)
    v = equilibrium_speed(FD, total)
    return MixedField(
        hdv=ClassField.from_primitive(np.full(grid.n_cells, rho_h), v, PL, total=total),
        cav=ClassField.from_primitive(np.full(grid.n_cells, rho_c), v, PL, total=total),
    )


# -------------------------------------------------------------------
# Laws
# -------------------------------------------------------------------

class LawTests(SimpleTestCase):
    def test_equilibrium_speed_branches(self):
        self.assertEqual(equilibrium_speed(FD, 10), 20.0)
        self.assertEqual(equilibrium_speed(FD, 140), 0.0)
        self.assertAlmostEqual(equilibrium_speed(FD, 75), 10.0, places=12)
        self.assertEqual(equilibrium_speed(FD, 5), 20.0)
        self.assertEqual(equilibrium_speed(FD, 150), 0.0)

    def test_equilibrium_speed_derivative(self):
        self.assertAlmostEqual(equilibrium_speed_derivative(FD, 56), -20 / 130, places=12)
        self.assertEqual(equilibrium_speed_derivative(FD, 5), 0.0)
        self.assertEqual(equilibrium_speed_derivative(FD, 150), 0.0)
        step = 1e-4
        central = (equilibrium_speed(FD, 56 + step) - equilibrium_speed(FD, 56 - step)) / (2 * step)
        self.assertAlmostEqual(central, equilibrium_speed_derivative(FD, 56), places=8)

    def test_pressure_values(self):
        self.assertEqual(pressure(PL, 10), 0.0)
        self.assertAlmostEqual(pressure(PL, 75), 8.0, places=12)
        self.assertAlmostEqual(pressure(PL, 56), H_56, places=12)
        self.assertAlmostEqual(pressure(PL, 56), 5.920103, places=6)

    def test_laws_are_monotone(self):
        rho = np.linspace(0.0, 160.0, 3201)
        self.assertTrue(np.all(np.diff(equilibrium_speed(FD, rho)) <= 0))
        self.assertTrue(np.all(np.diff(pressure(PL, rho)) >= 0))

    def test_pressure_derivative_matches_finite_differences(self):
        rng = np.random.default_rng(5)
        step = 1e-5
        for rho in rng.uniform(11.0, 135.0, 100):
            central = (pressure(PL, rho + step) - pressure(PL, rho - step)) / (2 * step)
            self.assertLess(abs(central / pressure_derivative(PL, rho) - 1), 1e-6)

    def test_pressure_is_held_above_the_cap(self):
        self.assertEqual(pressure(PL, 139.9), pressure(PL, PL.rho_cap))

    def test_pressure_derivative(self):
        self.assertAlmostEqual(pressure_derivative(PL, 75), 520 / 4225, places=12)
        self.assertAlmostEqual(pressure_derivative(PL, 56), H_PRIME_56, places=6)
        step = 1e-4
        central = (pressure(PL, 56 + step) - pressure(PL, 56 - step)) / (2 * step)
        self.assertLess(abs(central / pressure_derivative(PL, 56) - 1), 1e-6)
        rho = np.linspace(10.5, 139, 200)
        self.assertTrue(np.all(pressure_derivative(PL, rho) > 0))

    def test_pressure_derivative_domain(self):
        for rho in (10, 5, 139.5, 140):
            with self.assertRaises(DomainError):
                pressure_derivative(PL, rho)

    def test_clamped_derivative_is_total(self):
        self.assertEqual(clamped_pressure_derivative(PL, 10), 0.0)
        self.assertEqual(clamped_pressure_derivative(PL, 3), 0.0)
        self.assertAlmostEqual(
            clamped_pressure_derivative(PL, 139.9), pressure_derivative(PL, PL.rho_cap - 1e-9), places=3
        )

    def test_negative_density_rejected(self):
        with self.assertRaises(DomainError):
            equilibrium_speed(FD, -1)
        with self.assertRaises(DomainError):
            pressure(PL, np.array([10.0, -0.1]))

    def test_parameter_invariants(self):
        with self.assertRaises(DomainError):
            FundamentalDiagram(rho_f=150)
        with self.assertRaises(DomainError):
            ModelParams(tau=0)
        with self.assertRaises(DomainError):
            ModelParams(lookahead=-1)


# -------------------------------------------------------------------
# Grid and state conversion
# -------------------------------------------------------------------

class GridTests(SimpleTestCase):
    def test_cell_count(self):
        grid = RingGrid(length=1000, dx=5)
        self.assertEqual(grid.n_cells, 200)
        self.assertEqual(grid.centers[0], 2.5)
        self.assertEqual(grid.refined(2).n_cells, 400)

    def test_non_integral_cells_rejected(self):
        with self.assertRaises(DomainError):
            RingGrid(length=1000, dx=3)

    def test_to_conserved(self):
        self.assertAlmostEqual(to_conserved(56, V_56, PL), 56 * (V_56 + H_56), places=9)
        self.assertAlmostEqual(to_conserved(56, V_56, PL), 1055.218, places=3)
        self.assertEqual(to_conserved(10, 20, PL), 200.0)

    def test_to_primitive(self):
        self.assertEqual(to_primitive(10, 200, PL), 20.0)
        self.assertAlmostEqual(to_primitive(75, 750, PL), 2.0, places=12)

    def test_negative_velocity_is_clamped_and_counted(self):
        counter = ClampCounter()
        self.assertEqual(to_primitive(75, 300, PL, counter=counter), 0.0)
        self.assertEqual(counter.count, 1)

    def test_round_trip(self):
        rng = np.random.default_rng(7)
        rho = rng.uniform(11, 139, 100)
        v = rng.uniform(0, 20, 100)
        np.testing.assert_allclose(to_primitive(rho, to_conserved(rho, v, PL), PL), v, atol=1e-10)

    def test_density_floor_enforced(self):
        with self.assertRaises(DomainError):
            ClassField(rho=np.array([1.0, 0.0, 1.0, 1.0]), y=np.zeros(4))
        with self.assertRaises(DomainError):
            to_primitive(np.array([0.0]), np.array([0.0]), PL)

    def test_fields_are_read_only(self):
        field = single_field(np.full(4, 56.0))
        with self.assertRaises(ValueError):
            field.rho[0] = 1.0

    def test_total_mass(self):
        grid = RingGrid()
        self.assertAlmostEqual(total_mass(single_field(np.full(200, 56.0)), grid), 56.0, places=10)
        self.assertAlmostEqual(total_mass(single_field(sinusoid(grid)), grid), 56.0, places=10)
        mixed = uniform_mixed(grid, 40.0, 16.0)
        masses = class_masses(mixed, grid)
        self.assertAlmostEqual(masses["hdv"] + masses["cav"], total_mass(mixed, grid), places=10)

    def test_mixed_fields_share_a_grid(self):
        with self.assertRaises(DomainError):
            MixedField(
                hdv=single_field(np.full(4, 20.0)),
                cav=single_field(np.full(5, 20.0)),
            )


# -------------------------------------------------------------------
# Look-ahead density
# -------------------------------------------------------------------

def direct_average(rho, m):
    n = len(rho)
    return np.array([sum(rho[(i + j) % n] for j in range(1, m + 1)) / m for i in range(n)])


class LookaheadTests(SimpleTestCase):
    def setUp(self):
        self.small = RingGrid(length=20, dx=5)

    def test_window_size(self):
        grid = RingGrid()
        self.assertEqual(LookaheadSpec.for_grid(100, grid).m_cells, 20)
        self.assertEqual(LookaheadSpec.for_grid(1, grid).m_cells, 1)
        self.assertTrue(LookaheadSpec.for_grid(0, grid).is_local)

    def test_small_ring_example(self):
        spec = LookaheadSpec.for_grid(10, self.small)
        out = lookahead_average(np.array([40.0, 50, 60, 70]), self.small, spec)
        self.assertAlmostEqual(out[0], 55.0, places=12)
        self.assertAlmostEqual(out[3], 45.0, places=12)

    def test_local_returns_copy(self):
        rho = np.array([40.0, 50, 60, 70])
        out = lookahead_average(rho, self.small, LookaheadSpec.for_grid(0, self.small))
        np.testing.assert_array_equal(out, rho)
        self.assertIsNot(out, rho)

    def test_constant_field(self):
        grid = RingGrid()
        spec = LookaheadSpec.for_grid(300, grid)
        np.testing.assert_array_equal(lookahead_average(np.full(200, 56.0), grid, spec), 56.0)

    def test_sliding_window_equals_direct_sum(self):
        grid = RingGrid()
        rng = np.random.default_rng(11)
        for m in (1, 3, 20, 137, 200):
            rho = rng.uniform(10, 130, grid.n_cells)
            spec = LookaheadSpec(distance=m * grid.dx, m_cells=m)
            np.testing.assert_allclose(
                lookahead_average(rho, grid, spec), direct_average(rho, m), rtol=0, atol=1e-12 * 130
            )

    def test_full_ring_observation_is_the_mean(self):
        grid = RingGrid()
        spec = LookaheadSpec.for_grid(grid.length, grid)
        out = lookahead_average(sinusoid(grid), grid, spec)
        np.testing.assert_allclose(out, 56.0, rtol=0, atol=1e-12)

    def test_average_preserves_the_mean(self):
        grid = RingGrid()
        rng = np.random.default_rng(17)
        rho = rng.uniform(10, 130, grid.n_cells)
        for distance in (5, 100, 335, 1000):
            spec = LookaheadSpec.for_grid(distance, grid)
            self.assertAlmostEqual(lookahead_average(rho, grid, spec).mean(), rho.mean(), delta=1e-12)

    def test_average_commutes_with_shifts(self):
        grid = RingGrid()
        rng = np.random.default_rng(19)
        rho = rng.uniform(10, 130, grid.n_cells)
        spec = LookaheadSpec.for_grid(100, grid)
        for shift in (1, 7, 120):
            np.testing.assert_allclose(
                lookahead_average(np.roll(rho, shift), grid, spec),
                np.roll(lookahead_average(rho, grid, spec), shift),
                rtol=0, atol=1e-11,
            )

    def test_average_is_monotone(self):
        grid = RingGrid()
        rng = np.random.default_rng(23)
        spec = LookaheadSpec.for_grid(100, grid)
        for _ in range(20):
            low = rng.uniform(10, 100, grid.n_cells)
            high = low + rng.uniform(0, 30, grid.n_cells)
            diff = lookahead_average(high, grid, spec) - lookahead_average(low, grid, spec)
            self.assertTrue(np.all(diff >= -1e-12))

    def test_window_longer_than_ring(self):
        with self.assertRaises(DomainError):
            lookahead_average(np.ones(4) * 50, self.small, LookaheadSpec(distance=25, m_cells=5))

    def test_weighted_examples(self):
        rho = np.array([40.0, 50, 60, 70])
        spec = LookaheadSpec(distance=10, m_cells=2, weights=[0.75, 0.25])
        self.assertAlmostEqual(weighted_lookahead_average(rho, self.small, spec)[0], 52.5, places=12)
        one = LookaheadSpec(distance=10, m_cells=2, weights=[1.0, 0.0])
        np.testing.assert_array_equal(weighted_lookahead_average(rho, self.small, one), np.roll(rho, -1))

    def test_uniform_weights_match_plain_average(self):
        grid = RingGrid()
        rho = sinusoid(grid)
        spec = LookaheadSpec(distance=50, m_cells=10, weights=np.full(10, 0.1))
        plain = LookaheadSpec(distance=50, m_cells=10)
        np.testing.assert_array_equal(
            weighted_lookahead_average(rho, grid, spec), lookahead_average(rho, grid, plain)
        )

    def test_weights_must_sum_to_one(self):
        with self.assertRaises(DomainError):
            LookaheadSpec(distance=10, m_cells=2, weights=[0.5, 0.4])
        with self.assertRaises(DomainError):
            LookaheadSpec(distance=10, m_cells=2, weights=[1.5, -0.5])

    def test_weight_profiles(self):
        for name in WeightProfile.values:
            w = weight_profile(name, 20)
            self.assertAlmostEqual(w.sum(), 1.0, places=14)
            self.assertTrue(np.all(np.diff(w) <= 0))
        np.testing.assert_allclose(weight_profile(WeightProfile.LINEAR, 3), [0.5, 1 / 3, 1 / 6])
        with self.assertRaises(DomainError):
            weight_profile("triangular", 4)

    def test_named_profile_goes_through_weighted_path(self):
        grid = RingGrid()
        rho = sinusoid(grid)
        spec = LookaheadSpec.for_grid(50, grid, profile=WeightProfile.LINEAR)
        self.assertIsNotNone(spec.weights)
        w = spec.weights
        expected = sum(wj * np.roll(rho, -j) for j, wj in enumerate(w, start=1))
        np.testing.assert_allclose(observed_density(rho, grid, spec), expected, rtol=1e-13)


# -------------------------------------------------------------------
# Eigenstructure and HLL
# -------------------------------------------------------------------

def state(rho, v):
    return ConservedState(rho=rho, y=to_conserved(rho, v, PL))


def scalar_hll(ul, ur, fl, fr, sl, sr):
    if sl >= 0:
        return fl
    if sr <= 0:
        return fr
    return tuple(
        (sr * fl[c] - sl * fr[c] + sl * sr * (ur[c] - ul[c])) / (sr - sl) for c in range(2)
    )


class RiemannTests(SimpleTestCase):
    def test_characteristic_speeds(self):
        lam1, lam2 = characteristic_speeds(state(56, V_56), PL)
        self.assertAlmostEqual(lam2, V_56, places=12)
        self.assertAlmostEqual(lam1, V_56 - 56 * H_PRIME_56, places=4)
        self.assertAlmostEqual(lam1, 7.34617, places=4)
        _, lam2 = characteristic_speeds(state(10, 20), PL)
        self.assertEqual(lam2, 20.0)

    def test_speeds_are_ordered(self):
        rng = np.random.default_rng(3)
        rho = rng.uniform(10.01, 139, 1000)
        lam1, lam2 = characteristic_speeds(state(rho, rng.uniform(0, 20, 1000)), PL)
        self.assertTrue(np.all(lam1 <= lam2))

    def test_physical_flux(self):
        flux = physical_flux(ConservedState(rho=10, y=200), PL)
        self.assertEqual((flux.f_rho, flux.f_y), (200.0, 4000.0))
        still = physical_flux(state(75, 0.0), PL)
        self.assertEqual((still.f_rho, still.f_y), (0.0, 0.0))
        self.assertAlmostEqual(physical_flux(state(56, V_56), PL).f_rho, 723.6923, places=3)

    def test_wave_speed_estimates(self):
        u = state(56, V_56)
        self.assertEqual(wave_speed_estimates(u, u, PL), characteristic_speeds(u, PL))
        _, s_right = wave_speed_estimates(state(10, 20), state(30, 10), PL)
        self.assertEqual(s_right, 20.0)

    def test_consistency(self):
        u = state(56, V_56)
        flux, exact = hll_flux(u, u, PL), physical_flux(u, PL)
        self.assertEqual((flux.f_rho, flux.f_y), (exact.f_rho, exact.f_y))

    def test_consistency_on_random_states(self):
        rng = np.random.default_rng(29)
        u = state(rng.uniform(10.01, 139, 1000), rng.uniform(0, 20, 1000))
        flux, exact = hll_flux(u, u, PL), physical_flux(u, PL)
        np.testing.assert_array_equal(flux.f_rho, exact.f_rho)
        np.testing.assert_array_equal(flux.f_y, exact.f_y)

    def test_supersonic_pair_takes_left_flux(self):
        left, right = state(10, 20), state(12, 19)
        flux, exact = hll_flux(left, right, PL), physical_flux(left, PL)
        self.assertEqual((flux.f_rho, flux.f_y), (exact.f_rho, exact.f_y))

    def test_middle_branch_matches_scalar_formula(self):
        # A fan needs S_L < 0: put a slow dense state on the left.
        left, right = state(120, 1.0), state(70, equilibrium_speed(FD, 70))
        sl, sr = wave_speed_estimates(left, right, PL)
        self.assertLess(sl, 0)
        self.assertGreater(sr, 0)
        fl, fr = physical_flux(left, PL), physical_flux(right, PL)
        expected = scalar_hll(
            (left.rho, left.y), (right.rho, right.y), (fl.f_rho, fl.f_y), (fr.f_rho, fr.f_y), sl, sr
        )
        flux = hll_flux(left, right, PL)
        self.assertAlmostEqual(flux.f_rho, expected[0], places=9)
        self.assertAlmostEqual(flux.f_y, expected[1], places=6)

    def test_degenerate_fan_falls_back_to_left(self):
        f_rho, f_y = hll_combine((1.0, 2.0), (1.5, 2.5), (3.0, 4.0), (5.0, 6.0), -1e-14, 1e-14)
        self.assertEqual((f_rho, f_y), (3.0, 4.0))


# -------------------------------------------------------------------
# Stepper
# -------------------------------------------------------------------

def oracle_step(rho, y, dx, dt, params):
    """Cell-by-cell transliteration of one single-class step."""
    fd, pl = params.fd, params.pl
    n = len(rho)
    ratio = dt / dx
    v = [max(y[i] / rho[i] - pressure(pl, rho[i]), 0.0) for i in range(n)]
    lam1 = [v[i] - rho[i] * clamped_pressure_derivative(pl, rho[i]) for i in range(n)]

    flux = []
    for i in range(n):
        j = (i + 1) % n
        flux.append(scalar_hll(
            (rho[i], y[i]),
            (rho[j], y[j]),
            (rho[i] * v[i], y[i] * v[i]),
            (rho[j] * v[j], y[j] * v[j]),
            min(lam1[i], lam1[j]),
            max(v[i], v[j]),
        ))

    rho_new = [rho[i] - ratio * (flux[i][0] - flux[i - 1][0]) for i in range(n)]
    y_tr = [y[i] - ratio * (flux[i][1] - flux[i - 1][1]) for i in range(n)]

    m = 0 if params.lookahead == 0 else max(1, round(params.lookahead / dx))
    a = dt / params.tau
    w = a / (1 + a)
    y_new = []
    for i in range(n):
        if m:
            star = sum(rho_new[(i + j) % n] for j in range(1, m + 1)) / m
        else:
            star = rho_new[i]
        target = rho_new[i] * (equilibrium_speed(fd, star) + pressure(pl, rho_new[i]))
        y_new.append(y_tr[i] + w * (target - y_tr[i]))
    return np.array(rho_new), np.array(y_new)


class StepperTests(SimpleTestCase):
    def setUp(self):
        self.grid = RingGrid()
        self.cfg = StepConfig()

    def test_cfl_number(self):
        free = ClassField.from_primitive(np.full(200, 10.0), np.full(200, 20.0), PL)
        self.assertAlmostEqual(cfl_number(free, self.grid, self.cfg), 0.2, places=12)
        doubled = StepConfig(dt=0.1)
        self.assertAlmostEqual(cfl_number(free, self.grid, doubled), 0.4, places=12)
        still = ClassField.from_primitive(np.full(200, 10.0), np.zeros(200), PL)
        self.assertEqual(cfl_number(still, self.grid, self.cfg), 0.0)

    def test_cfl_violation_raises(self):
        field = single_field(sinusoid(self.grid))
        with self.assertRaises(CflViolationError):
            step_single(field, self.grid, StepConfig(dt=0.5), step=1)

    def test_equilibrium_is_a_fixed_point(self):
        for lookahead in (0.0, 100.0, 1000.0):
            cfg = StepConfig(params=ModelParams(lookahead=lookahead))
            start = single_field(np.full(200, 56.0))
            field = start
            for step in range(1000):
                field = step_single(field, self.grid, cfg, step=step)
            np.testing.assert_array_equal(field.rho, start.rho)
            np.testing.assert_array_equal(field.y, start.y)

    def test_mass_is_conserved(self):
        field = single_field(sinusoid(self.grid))
        after = step_single(field, self.grid, StepConfig(params=ModelParams(lookahead=100)))
        before_mass, after_mass = total_mass(field, self.grid), total_mass(after, self.grid)
        self.assertLess(abs(after_mass - before_mass) / before_mass, 1e-12)

    def test_one_step_moves_off_the_initial_state(self):
        field = single_field(sinusoid(self.grid))
        after = step_single(field, self.grid, self.cfg)
        before_amp, after_amp = np.ptp(field.rho), np.ptp(after.rho)
        self.assertLess(abs(after_amp - before_amp) / before_amp, 0.01)
        self.assertFalse(np.array_equal(after.rho, field.rho))

    def _oracle_run(self, lookahead, rtol):
        grid = RingGrid(length=100, dx=5)
        params = ModelParams(lookahead=lookahead)
        cfg = StepConfig(params=params)
        field = single_field(sinusoid(grid), params)
        rho, y = field.rho.tolist(), field.y.tolist()
        for step in range(100):
            field = step_single(field, grid, cfg, step=step)
            rho, y = oracle_step(rho, y, grid.dx, cfg.dt, params)
            rho, y = rho.tolist(), y.tolist()
        np.testing.assert_allclose(field.rho, rho, rtol=rtol, atol=0)
        np.testing.assert_allclose(field.y, y, rtol=rtol, atol=0)

    def test_matches_cell_by_cell_oracle(self):
        self._oracle_run(0.0, 1e-12)

    def test_matches_cell_by_cell_oracle_with_lookahead(self):
        self._oracle_run(10.0, 1e-11)

    def test_simulate_one_step_is_step_single(self):
        field = single_field(sinusoid(self.grid))
        trajectory = simulate(field, self.grid, self.cfg, duration=0.05, sample_every=0.05)
        stepped = step_single(field, self.grid, self.cfg)
        self.assertEqual(trajectory.times, [0.0, 0.05])
        np.testing.assert_array_equal(trajectory.final.rho, stepped.rho)
        np.testing.assert_array_equal(trajectory.final.y, stepped.y)

    def test_sampling_instants(self):
        field = single_field(sinusoid(self.grid))
        samples = list(iter_samples(field, self.grid, self.cfg, duration=1.0, sample_every=0.3))
        times = [round(t, 9) for t, _, _ in samples]
        self.assertEqual(times, [0.0, 0.3, 0.6, 0.9, 1.0])
        self.assertEqual([d.step for _, _, d in samples], [0, 6, 12, 18, 20])

    def test_duration_must_be_whole_steps(self):
        field = single_field(sinusoid(self.grid))
        with self.assertRaises(DomainError):
            list(iter_samples(field, self.grid, self.cfg, duration=0.07, sample_every=0.05))

    def test_solver_error_carries_location(self):
        field = single_field(sinusoid(self.grid))
        with self.assertRaises(CflViolationError) as ctx:
            list(iter_samples(field, self.grid, StepConfig(dt=0.5), duration=1.0, sample_every=0.5))
        self.assertEqual(ctx.exception.step, 1)
        self.assertEqual(ctx.exception.time, 0.5)

    def test_free_flow_translates_the_profile(self):
        # rho <= rho_f: both waves move at v_f = 20 m/s, so 5 s shifts by 20 cells.
        rho = 6.0 + 3.0 * np.sin(2 * np.pi * self.grid.centers / self.grid.length)
        field = single_field(rho)
        trajectory = simulate(field, self.grid, self.cfg, duration=5.0, sample_every=5.0)
        final = trajectory.final.rho
        self.assertLess(
            abs(total_mass(trajectory.final, self.grid) / total_mass(field, self.grid) - 1), 1e-12
        )
        np.testing.assert_allclose(final, np.roll(rho, 20), rtol=0, atol=0.05)
        self.assertLessEqual(np.ptp(final), np.ptp(rho))
        self.assertGreater(np.ptp(final), 0.99 * np.ptp(rho))

    def test_non_finite_state_is_a_solver_error(self):
        y = single_field(sinusoid(self.grid)).y.copy()
        y[10] = np.nan
        field = ClassField(rho=sinusoid(self.grid), y=y)
        with self.assertRaises(SolverError):
            step_single(field, self.grid, self.cfg, step=4)

    def test_trajectory_times_increase(self):
        trajectory = Trajectory()
        field = single_field(np.full(4, 56.0))
        trajectory.append(0.0, field, None)
        with self.assertRaises(DomainError):
            trajectory.append(0.0, field, None)


class MixedStepperTests(SimpleTestCase):
    def setUp(self):
        self.grid = RingGrid()
        self.cfg = StepConfig(params=ModelParams(lookahead=100))

    def _split(self, share_cav):
        total = sinusoid(self.grid)
        v = equilibrium_speed(FD, total)
        rho_c = np.maximum(share_cav * total, 1e-6)
        rho_h = np.maximum(total - rho_c, 1e-6)
        total = rho_h + rho_c
        return MixedField(
            hdv=ClassField.from_primitive(rho_h, v, PL, total=total),
            cav=ClassField.from_primitive(rho_c, v, PL, total=total),
        )

    def test_uniform_mixture_is_a_fixed_point(self):
        start = uniform_mixed(self.grid, 33.6, 22.4)
        field = start
        for step in range(1000):
            field = step_mixed(field, self.grid, self.cfg, step=step)
        np.testing.assert_array_equal(field.hdv.rho, start.hdv.rho)
        np.testing.assert_array_equal(field.cav.y, start.cav.y)

    def test_class_masses_are_conserved(self):
        field = self._split(0.4)
        after = step_mixed(field, self.grid, self.cfg)
        before, now = class_masses(field, self.grid), class_masses(after, self.grid)
        for name in ("hdv", "cav"):
            self.assertLess(abs(now[name] - before[name]) / before[name], 1e-12)

    def test_all_cav_limit_tracks_single_class(self):
        mixed = self._split(1.0)
        single = ClassField(rho=mixed.total, y=to_conserved(mixed.total, equilibrium_speed(FD, mixed.total), PL))
        for step in range(50):
            mixed = step_mixed(mixed, self.grid, self.cfg, step=step)
            single = step_single(single, self.grid, self.cfg, step=step)
        # The HDV class sits at the density floor, which perturbs the total at ~1e-8.
        np.testing.assert_allclose(mixed.total, single.rho, rtol=1e-6)

    def test_no_cav_limit_is_local_arz(self):
        mixed = self._split(0.0)
        local = StepConfig()
        single = ClassField(rho=mixed.total, y=to_conserved(mixed.total, equilibrium_speed(FD, mixed.total), PL))
        for step in range(50):
            mixed = step_mixed(mixed, self.grid, self.cfg, step=step)
            single = step_single(single, self.grid, local, step=step)
        np.testing.assert_allclose(mixed.total, single.rho, rtol=1e-6)

    def test_floor_is_mass_neutral(self):
        rho = np.array([0.5e-6, 3e-6, 1e-6, 1.5e-6])
        rho_new, y_new = apply_density_floor(rho, 2.0 * rho)
        np.testing.assert_allclose(rho_new, [1e-6, 2.6e-6, 1e-6, 1.4e-6], rtol=1e-12)
        self.assertAlmostEqual(rho_new.sum() / rho.sum(), 1.0, places=14)
        np.testing.assert_allclose(y_new[1:] / rho_new[1:], 2.0, rtol=1e-14)
        self.assertTrue(np.all(rho_new >= DENSITY_FLOOR))

    def test_floor_untouched_fields_pass_through(self):
        rho = np.array([20.0, 30.0])
        rho_new, y_new = apply_density_floor(rho, rho * 5)
        self.assertIs(rho_new, rho)

    def test_absent_class_keeps_its_mass(self):
        for share in (0.0, 1.0):
            field = self._split(share)
            before = class_masses(field, self.grid)
            for step in range(400):
                field = step_mixed(field, self.grid, self.cfg, step=step)
            after = class_masses(field, self.grid)
            for name in ("hdv", "cav"):
                self.assertLess(abs(after[name] - before[name]) / before[name], 1e-10, (share, name))

    def test_non_finite_class_is_a_solver_error(self):
        field = self._split(0.4)
        y = field.hdv.y.copy()
        y[3] = np.nan
        broken = MixedField(hdv=ClassField(rho=field.hdv.rho, y=y), cav=field.cav)
        with self.assertRaises(SolverError):
            step_mixed(broken, self.grid, self.cfg, step=2)

    def test_jam_overflow(self):
        field = uniform_mixed(self.grid, 80.0, 60.0)
        with self.assertRaises(JamOverflowError):
            step_mixed(field, self.grid, self.cfg, step=3)


@tag("slow")
class SelfConvergenceTests(SimpleTestCase):
    def test_first_order_under_refinement(self):
        base = RingGrid()
        solutions = []
        for factor in (1, 2, 4):
            grid = RingGrid(length=base.length, dx=base.dx / factor)
            cfg = StepConfig(dt=0.05 / factor)
            trajectory = simulate(single_field(sinusoid(grid)), grid, cfg, duration=5.0, sample_every=5.0)
            solutions.append(trajectory.final.rho)

        def restrict(fine):
            return fine.reshape(-1, 2).mean(axis=1)

        coarse_err = np.abs(solutions[0] - restrict(solutions[1])).mean()
        fine_err = np.abs(solutions[1] - restrict(solutions[2])).mean()
        order = math.log2(coarse_err / fine_err)
        self.assertGreaterEqual(order, 0.7)
        self.assertLessEqual(order, 1.3)
