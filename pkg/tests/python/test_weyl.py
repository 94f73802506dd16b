import math
import shutil
import unittest
from pathlib import Path
from uuid import uuid4

import numpy as np

from weyllab.errors import InvalidInputError, RangeError
from weyllab.geometry import DIRICHLET, NEUMANN, BoundaryCondition, BoundaryKind, build_grid, make_domain
from weyllab.operators import assemble_laplacian, assemble_schrodinger
from weyllab.potentials import PotentialSpec, constant
from weyllab.spectrum import eigendecompose, exact_rectangle_spectrum
from weyllab.weyl import (
    CAVEAT_ROBIN,
    count_difference,
    fit_block_exponent,
    fit_remainder_exponent,
    make_lambda_grid,
    remainder_curve,
    robin_sandwich,
    short_interval_count,
    short_interval_sweep,
    weyl_coefficients,
)


def unit_square():
    return make_domain("rectangle", a=1.0, b=1.0)


class CoefficientTests(unittest.TestCase):
    def test_unit_square_dirichlet(self):
        coefficients = weyl_coefficients(unit_square(), DIRICHLET)
        self.assertAlmostEqual(coefficients.c0, 1.0 / (4.0 * math.pi))
        self.assertAlmostEqual(coefficients.c1, -1.0 / math.pi)

    def test_unit_disk_dirichlet(self):
        coefficients = weyl_coefficients(make_domain("disk", radius=1.0), DIRICHLET)
        self.assertAlmostEqual(coefficients.c0, 0.25)
        self.assertAlmostEqual(coefficients.c1, -0.5)

    def test_neumann_flips_the_boundary_term(self):
        coefficients = weyl_coefficients(unit_square(), NEUMANN)
        self.assertAlmostEqual(coefficients.c1, 1.0 / math.pi)

    def test_robin_reports_neumann_value_with_caveat(self):
        coefficients = weyl_coefficients(unit_square(), BoundaryCondition(BoundaryKind.ROBIN, 1.0))
        self.assertAlmostEqual(coefficients.c1, 1.0 / math.pi)
        self.assertIn(CAVEAT_ROBIN, coefficients.caveats)

    def test_three_dimensional_ball_volume(self):
        coefficients = weyl_coefficients(make_domain("rectangle", dimension=3, a=1.0, b=1.0), DIRICHLET)
        self.assertAlmostEqual(coefficients.omega_n, 4.0 * math.pi / 3.0)
        self.assertAlmostEqual(coefficients.omega_n_minus_1, math.pi)


class RemainderTests(unittest.TestCase):
    def setUp(self):
        self.coefficients = weyl_coefficients(unit_square(), DIRICHLET)

    def test_remainders_at_twenty(self):
        oracle = exact_rectangle_spectrum(1.0, 1.0, DIRICHLET, 20.0)
        curve = remainder_curve(oracle, self.coefficients, [20.0])
        self.assertEqual(int(curve.counts[0]), 26)
        self.assertAlmostEqual(curve.r1[0], 26.0 - 400.0 / (4.0 * math.pi))
        self.assertAlmostEqual(curve.r2[0], curve.r1[0] + 20.0 / math.pi)
        self.assertAlmostEqual(curve.r1[0], -5.83, delta=0.01)
        self.assertAlmostEqual(curve.r2[0], 0.53, delta=0.01)

    def test_empty_spectrum(self):
        lambdas = [1.0, 2.0, 3.0]
        curve = remainder_curve([], self.coefficients, lambdas)
        np.testing.assert_allclose(curve.r1, -self.coefficients.c0 * np.square(lambdas))

    def test_oracle_cutoff_is_enforced(self):
        oracle = exact_rectangle_spectrum(1.0, 1.0, DIRICHLET, 20.0)
        with self.assertRaises(RangeError):
            remainder_curve(oracle, self.coefficients, [10.0, 25.0])

    def test_grid_ceiling_is_enforced(self):
        grid = build_grid(unit_square(), 1.0 / 16.0)
        data = eigendecompose(assemble_laplacian(grid, DIRICHLET))
        remainder_curve(data, self.coefficients, [5.0, 10.0])
        with self.assertRaises(RangeError):
            remainder_curve(data, self.coefficients, [5.0, 13.0])

    def test_lambda_grid_must_increase(self):
        with self.assertRaises(InvalidInputError):
            remainder_curve([], self.coefficients, [2.0, 1.0])

    def test_csv_header(self):
        base_dir = Path(__file__).resolve().parents[2] / "target" / f"weyl_csv_{uuid4().hex}"
        try:
            oracle = exact_rectangle_spectrum(1.0, 1.0, DIRICHLET, 20.0)
            curve = remainder_curve(oracle, self.coefficients, make_lambda_grid(10.0, 20.0, 1.0))
            path = curve.write_csv(base_dir / "weyl.csv")
            lines = path.read_text(encoding="utf-8").splitlines()
            self.assertEqual(lines[0], "lambda,N,R1,R2,R1_norm,R2_norm")
            self.assertEqual(len(lines), 12)
            self.assertTrue(lines[-1].startswith("20,26,"))
        finally:
            shutil.rmtree(base_dir, ignore_errors=True)


class ExponentTests(unittest.TestCase):
    def test_linear_growth(self):
        lambdas = np.linspace(10.0, 160.0, 3001)
        fit = fit_block_exponent(lambdas, lambdas, (10.0, 160.0))
        self.assertAlmostEqual(fit.exponent, 1.0, delta=0.01)

    def test_degenerate_window(self):
        lambdas = np.linspace(10.0, 160.0, 301)
        with self.assertRaises(InvalidInputError):
            fit_block_exponent(lambdas, lambdas, (20.0, 20.0))
        with self.assertRaises(InvalidInputError):
            fit_block_exponent(lambdas, lambdas, (20.0, 21.0))

    def test_unit_square_remainder_exponents(self):
        oracle = exact_rectangle_spectrum(1.0, 1.0, DIRICHLET, 400.0)
        coefficients = weyl_coefficients(unit_square(), DIRICHLET)
        curve = remainder_curve(oracle, coefficients, make_lambda_grid(50.0, 400.0, 0.25))
        r1 = fit_remainder_exponent(curve, (50.0, 400.0), "R1")
        r2 = fit_remainder_exponent(curve, (50.0, 400.0), "R2")
        self.assertGreaterEqual(r1.exponent, 0.9)
        self.assertLessEqual(r1.exponent, 1.1)
        self.assertLess(r2.exponent, 0.9)

    def test_unknown_remainder_name(self):
        curve = remainder_curve([], weyl_coefficients(unit_square(), DIRICHLET), [1.0, 2.0])
        with self.assertRaises(InvalidInputError):
            fit_remainder_exponent(curve, (1.0, 2.0), "R3")


class ShortIntervalTests(unittest.TestCase):
    def test_isolates_the_ground_mode(self):
        oracle = exact_rectangle_spectrum(1.0, 1.0, DIRICHLET, 10.0)
        self.assertEqual(short_interval_count(oracle, math.pi * math.sqrt(2.0) - 0.01, 0.02), 1)

    def test_zero_width_counts_multiplicity(self):
        frequencies = exact_rectangle_spectrum(1.0, 1.0, DIRICHLET, 10.0).frequencies
        self.assertEqual(short_interval_count(frequencies, frequencies[1], 0.0), 2)

    def test_negative_width_is_rejected(self):
        with self.assertRaises(InvalidInputError):
            short_interval_count([1.0], 1.0, -0.5)

    def test_sweep_ratio_is_bounded(self):
        oracle = exact_rectangle_spectrum(1.0, 1.0, DIRICHLET, 202.0)
        sweep = short_interval_sweep(oracle, np.arange(20.0, 200.5, 0.5), 1.0)
        self.assertLessEqual(sweep.max_ratio, 3.0)
        self.assertGreater(sweep.max_ratio, 0.0)


class CountDifferenceTests(unittest.TestCase):
    def test_constant_potential_lowers_the_count(self):
        grid = build_grid(unit_square(), 1.0 / 16.0)
        free = eigendecompose(assemble_laplacian(grid, DIRICHLET))
        perturbed = eigendecompose(assemble_schrodinger(grid, DIRICHLET, PotentialSpec((constant(30.0),))))
        difference = count_difference(free, perturbed, make_lambda_grid(5.0, 11.0, 0.5))
        self.assertTrue(np.all(difference.difference <= 0))
        self.assertEqual(int(difference.difference[0]), -1)
        self.assertGreaterEqual(difference.constant, 0.0)

    def test_robin_counts_sit_between_dirichlet_and_neumann(self):
        grid = build_grid(unit_square(), 1.0 / 12.0)
        sandwich = robin_sandwich(grid, 2.0, make_lambda_grid(1.0, 8.0, 0.25))
        self.assertTrue(sandwich.holds)


if __name__ == "__main__":
    unittest.main()
