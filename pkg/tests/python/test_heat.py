import math
import unittest

import numpy as np

from weyllab.errors import InvalidInputError
from weyllab.geometry import DIRICHLET, NEUMANN, build_grid, make_domain
from weyllab.heat import (
    check_long_time,
    direct_inverse_kernel,
    fit_gaussian_bound,
    heat_kernel,
    heat_kernel_matrix,
    heat_trace,
    heat_trace_exact,
    heat_trace_report,
    riesz_kernel,
)
from weyllab.operators import assemble_laplacian, assemble_schrodinger, normalize_shift
from weyllab.potentials import PotentialSpec, inverse_power
from weyllab.spectrum import SpectralData, eigendecompose


def square_grid(h):
    return build_grid(make_domain("rectangle", a=1.0, b=1.0), h)


def singular_potential():
    return PotentialSpec((inverse_power(0.5, 0.5, 1.0),))


class HeatKernelTests(unittest.TestCase):
    def setUp(self):
        self.grid = square_grid(0.125)
        self.data = eigendecompose(assemble_laplacian(self.grid, DIRICHLET))

    def test_time_must_be_positive(self):
        for t in (0.0, -1.0, math.inf):
            with self.assertRaises(InvalidInputError):
                heat_kernel(self.data, t, 0, 0)

    def test_node_must_exist(self):
        with self.assertRaises(InvalidInputError):
            heat_kernel(self.data, 0.1, 0, self.data.node_count)

    def test_kernel_is_symmetric_and_matches_matrix(self):
        matrix = heat_kernel_matrix(self.data, 0.05)
        self.assertAlmostEqual(heat_kernel(self.data, 0.05, 3, 17), heat_kernel(self.data, 0.05, 17, 3), places=12)
        self.assertAlmostEqual(matrix[3, 17], heat_kernel(self.data, 0.05, 3, 17), places=12)

    def test_semigroup_property(self):
        singular = eigendecompose(assemble_schrodinger(square_grid(1.0 / 17.0), DIRICHLET, singular_potential()))
        for data in (self.data, singular):
            for t, s in ((0.1, 0.1), (0.05, 0.2)):
                with self.subTest(nodes=data.node_count, t=t, s=s):
                    composed = data.weight * heat_kernel_matrix(data, t) @ heat_kernel_matrix(data, s)
                    direct = heat_kernel_matrix(data, t + s)
                    error = np.max(np.abs(composed - direct)) / np.max(np.abs(direct))
                    self.assertLessEqual(error, 1e-8)

    def test_trace_is_the_integral_of_the_diagonal(self):
        for t in (0.01, 0.1, 1.0):
            diagonal = self.data.weight * float(np.trace(heat_kernel_matrix(self.data, t)))
            self.assertAlmostEqual(heat_trace(self.data, t) / diagonal, 1.0, delta=1e-10)

    def test_ground_mode_dominates_at_long_times(self):
        center = self.grid.node_index(4, 4)
        ground = math.exp(-5.0 * self.data.eigenvalues[0]) * self.data.eigenvectors[center, 0] ** 2
        self.assertAlmostEqual(heat_kernel(self.data, 5.0, center, center) / ground, 1.0, delta=0.01)


class HeatTraceTests(unittest.TestCase):
    def test_single_frequency(self):
        self.assertAlmostEqual(heat_trace([2.0], 1.0), math.exp(-4.0))

    def test_unit_square_trace(self):
        self.assertAlmostEqual(heat_trace_exact(1.0, 1.0, DIRICHLET, 0.01), 5.3868, delta=1e-3)

    def test_theta_function_product(self):
        t = 0.02
        theta = math.fsum(math.exp(-t * math.pi**2 * m * m) for m in range(1, 200))
        self.assertAlmostEqual(heat_trace_exact(1.0, 1.0, DIRICHLET, t), theta**2, places=10)

    def test_three_term_expansion(self):
        report = heat_trace_report(1.0, 1.0, DIRICHLET, (0.01, 0.005, 0.0025))
        first = report.rows[0]
        self.assertAlmostEqual(first.two_term_prediction, 5.1368, delta=1e-3)
        for row in report.rows:
            self.assertAlmostEqual(row.trace, row.three_term_prediction, delta=1e-8)

    def test_leading_ratio_approaches_one_from_below(self):
        report = heat_trace_report(1.0, 1.0, DIRICHLET, (0.01, 0.005, 0.0025, 0.00125))
        ratios = [row.leading_ratio for row in report.rows]
        self.assertTrue(all(ratio < 1.0 for ratio in ratios))
        self.assertTrue(all(later > earlier for earlier, later in zip(ratios, ratios[1:])))
        # The boundary term keeps the ratio about |dM| sqrt(pi t) / (2 |M|) below one.
        self.assertAlmostEqual(1.0 - ratios[1], 2.0 * math.sqrt(math.pi * 0.005), delta=0.01)

    def test_neumann_boundary_term_has_plus_sign(self):
        report = heat_trace_report(1.0, 1.0, NEUMANN, (0.01,))
        row = report.rows[0]
        self.assertGreater(row.two_term_prediction, row.leading_term)
        self.assertAlmostEqual(row.trace, row.three_term_prediction, delta=1e-8)

    def test_report_serializes_every_row(self):
        payload = heat_trace_report(2.0, 1.0, DIRICHLET, (0.01, 0.005)).to_dict()
        self.assertEqual(len(payload["rows"]), 2)
        self.assertIn("observed_minus_two_term", payload["rows"][0])


class GaussianBoundTests(unittest.TestCase):
    def test_free_kernel_bound_is_certified(self):
        data = eigendecompose(assemble_laplacian(square_grid(1.0 / 16.0), DIRICHLET))
        fit = fit_gaussian_bound(data, (0.01, 0.05, 0.1, 0.5, 1.0), samples=1000, seed=3)
        self.assertGreater(fit.c1, 0.0)
        self.assertGreater(fit.C, 0.0)
        self.assertEqual(fit.violations, 0)
        self.assertGreaterEqual(fit.samples, 1000)
        self.assertEqual((fit.t_min, fit.t_max), (0.01, 1.0))

    def test_singular_kernel_bound_is_certified(self):
        grid = square_grid(1.0 / 16.0)
        data = eigendecompose(assemble_schrodinger(grid, DIRICHLET, singular_potential()))
        fit = fit_gaussian_bound(data, (0.01, 0.1, 1.0), samples=600)
        self.assertGreater(fit.c1, 0.0)
        self.assertEqual(fit.violations, 0)

    def test_times_must_be_short(self):
        data = eigendecompose(assemble_laplacian(square_grid(0.25), DIRICHLET))
        with self.assertRaises(InvalidInputError):
            fit_gaussian_bound(data, (0.5, 2.0), samples=50)

    def test_fit_is_deterministic(self):
        data = eigendecompose(assemble_laplacian(square_grid(0.125), DIRICHLET))
        first = fit_gaussian_bound(data, (0.01, 0.1), samples=200, seed=7)
        second = fit_gaussian_bound(data, (0.01, 0.1), samples=200, seed=7)
        self.assertEqual(first, second)


class LongTimeTests(unittest.TestCase):
    def test_shifted_bound_is_nonincreasing(self):
        data = eigendecompose(normalize_shift(assemble_laplacian(square_grid(0.125), NEUMANN)))
        report = check_long_time(data, np.linspace(2.0, 20.0, 19), samples=200)
        self.assertTrue(report.nonincreasing_after_two)
        self.assertTrue(report.crude_bound_holds)
        self.assertLessEqual(report.values[-1], report.values[0])

    def test_unshifted_neumann_is_refused(self):
        data = eigendecompose(assemble_laplacian(square_grid(0.125), NEUMANN))
        with self.assertRaises(InvalidInputError):
            check_long_time(data, (2.0, 20.0))

    def test_times_must_be_long(self):
        data = eigendecompose(assemble_laplacian(square_grid(0.125), DIRICHLET))
        with self.assertRaises(InvalidInputError):
            check_long_time(data, (0.5, 2.0))


class RieszTests(unittest.TestCase):
    def single_mode(self):
        return SpectralData.from_modes([4.0], np.array([[1.0]]), weight=1.0)

    def test_scalar_inverse(self):
        kernel = riesz_kernel(self.single_mode(), 0)
        self.assertAlmostEqual(float(kernel.spectral[0, 0]), 0.25)
        self.assertAlmostEqual(float(kernel.quadrature[0, 0]), 0.25, places=10)

    def test_scalar_inverse_square(self):
        kernel = riesz_kernel(self.single_mode(), 1)
        self.assertAlmostEqual(float(kernel.spectral[0, 0]), 1.0 / 16.0)
        self.assertAlmostEqual(float(kernel.quadrature[0, 0]), 1.0 / 16.0, places=10)

    def test_inverse_matches_direct_solve(self):
        op = normalize_shift(assemble_schrodinger(square_grid(0.125), DIRICHLET, singular_potential()))
        data = eigendecompose(op)
        kernel = riesz_kernel(data, 0)
        direct = direct_inverse_kernel(op.matrix, data.weight)
        self.assertLessEqual(float(np.max(np.abs(kernel.spectral - direct)) / np.max(np.abs(direct))), 1e-8)
        self.assertLessEqual(kernel.relative_difference, 1e-6)

    def test_higher_powers_agree(self):
        op = normalize_shift(assemble_laplacian(square_grid(0.125), NEUMANN))
        data = eigendecompose(op)
        for ell in (1, 2):
            self.assertLessEqual(riesz_kernel(data, ell).relative_difference, 1e-6)

    def test_negative_level_is_rejected(self):
        with self.assertRaises(InvalidInputError):
            riesz_kernel(self.single_mode(), -1)

    def test_unshifted_spectrum_is_refused(self):
        data = eigendecompose(assemble_laplacian(square_grid(0.125), NEUMANN))
        with self.assertRaises(InvalidInputError):
            riesz_kernel(data, 0)


if __name__ == "__main__":
    unittest.main()
