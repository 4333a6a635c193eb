import numpy as np
from django.test import SimpleTestCase

from common.utils import (
    CflViolationError,
    ConfigError,
    DomainError,
    SolverError,
    fmt_number,
    parse_range,
)


class FmtNumberTests(SimpleTestCase):
    def test_twelve_significant_digits(self):
        self.assertEqual(fmt_number(1 / 3), "0.333333333333")
        self.assertEqual(fmt_number(56.0), "56")
        self.assertEqual(fmt_number(1e-15), "1e-15")

    def test_none_is_blank(self):
        self.assertEqual(fmt_number(None), "")


class ParseRangeTests(SimpleTestCase):
    def test_inclusive_range(self):
        np.testing.assert_allclose(parse_range("10:130:5"), [10, 40, 70, 100, 130])

    def test_bare_number_is_one_point(self):
        np.testing.assert_array_equal(parse_range("56"), [56.0])

    def test_malformed_names_the_key(self):
        with self.assertRaises(ConfigError) as ctx:
            parse_range("1:2", name="rho")
        self.assertEqual(ctx.exception.key, "rho")
        self.assertIn("rho", str(ctx.exception))

    def test_zero_points(self):
        with self.assertRaises(ConfigError):
            parse_range("0:1:0", name="k")


class ErrorTests(SimpleTestCase):
    def test_config_error_mentions_key_and_line(self):
        exc = ConfigError("must be positive", key="dt", line=3)
        self.assertEqual(str(exc), "key 'dt', line 3: must be positive")

    def test_solver_error_location_is_attached(self):
        exc = CflViolationError("too fast", step=7)
        exc.at(time=0.35)
        self.assertIsInstance(exc, SolverError)
        self.assertEqual((exc.step, exc.time), (7, 0.35))
        self.assertIn("step 7", str(exc))
        self.assertIn("t=0.35s", str(exc))

    def test_domain_error_is_a_value_error(self):
        self.assertTrue(issubclass(DomainError, ValueError))
