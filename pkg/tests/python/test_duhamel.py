import math
import unittest

import numpy as np

from weyllab.builder import parse_potential
from weyllab.duhamel import (
    OperatorPair,
    _partition,
    build_operator_pair,
    case_report,
    duhamel_coefficient,
    duhamel_identity_check,
    duhamel_identity_residual,
    fit_trace_envelope,
    trace_perturbation_sum,
    wave_kernel,
)
from weyllab.errors import AccuracyError, InvalidInputError, InvalidPairError, RangeError
from weyllab.geometry import DIRICHLET, NEUMANN, grid_for_points, make_domain
from weyllab.operators import assemble_laplacian
from weyllab.spectrum import eigendecompose

SINGULAR = "inverse_power(x0=0.5, y0=0.5, alpha=1)"


def square_grid(points):
    return grid_for_points(make_domain("rectangle", a=1.0, b=1.0), points)


class CoefficientTests(unittest.TestCase):
    def test_coincidence_limit(self):
        self.assertAlmostEqual(duhamel_coefficient(3.0, 3.0, 1.0), -math.sin(3.0) / 6.0, places=12)
        self.assertAlmostEqual(duhamel_coefficient(3.0, 3.0, 1.0), -0.0235200, places=7)

    def test_divided_difference(self):
        expected = (math.cos(2.0 * 0.7) - math.cos(3.0 * 0.7)) / (4.0 - 9.0)
        self.assertAlmostEqual(duhamel_coefficient(2.0, 3.0, 0.7), expected, places=12)

    def test_time_zero_vanishes(self):
        self.assertEqual(duhamel_coefficient(2.0, 3.0, 0.0), 0.0)

    def test_limit_is_continuous(self):
        near = duhamel_coefficient(3.0, 3.0 + 1e-5, 1.0)
        self.assertAlmostEqual(near, duhamel_coefficient(3.0, 3.0, 1.0), places=5)

    def test_frequencies_below_one_are_rejected(self):
        with self.assertRaises(InvalidInputError):
            duhamel_coefficient(0.5, 3.0, 1.0)


class OperatorPairTests(unittest.TestCase):
    def test_overlaps_are_consistent(self):
        pair = build_operator_pair(square_grid(8), DIRICHLET, parse_potential(SINGULAR))
        self.assertLess(pair.orthogonality_error(), 1e-10)
        scale = float(np.max(pair.perturbed.eigenvalues))
        self.assertLess(pair.intertwining_error(), 1e-10 * scale)
        self.assertEqual(pair.free.shift, pair.perturbed.shift)

    def test_neumann_pair_is_shifted(self):
        pair = build_operator_pair(square_grid(6), NEUMANN, parse_potential("constant(-2)"))
        self.assertGreater(pair.free.shift, 0.0)
        self.assertGreaterEqual(min(pair.free.frequencies[0], pair.perturbed.frequencies[0]), 1.0 - 1e-9)

    def test_spectra_from_different_grids(self):
        coarse = eigendecompose(assemble_laplacian(square_grid(4), DIRICHLET))
        fine = eigendecompose(assemble_laplacian(square_grid(5), DIRICHLET))
        with self.assertRaises(InvalidPairError):
            OperatorPair.from_spectra(coarse, fine, np.zeros(fine.node_count))


class WaveKernelTests(unittest.TestCase):
    def test_time_zero_is_the_identity(self):
        data = eigendecompose(assemble_laplacian(square_grid(5), DIRICHLET))
        kernel = wave_kernel(data, 0.0)
        np.testing.assert_allclose(kernel * data.weight, np.eye(data.node_count), atol=1e-10)


class DuhamelIdentityTests(unittest.TestCase):
    def test_zero_potential_has_no_residual(self):
        pair = build_operator_pair(square_grid(6), DIRICHLET, parse_potential("zero()"))
        for t in (0.1, 1.0, 2.0):
            self.assertEqual(duhamel_identity_residual(pair, t), 0.0)

    def test_singular_potential(self):
        # 16 and 20 points put the center on a cell corner.
        for points in (12, 16, 20):
            pair = build_operator_pair(square_grid(points), DIRICHLET, parse_potential(SINGULAR))
            for t in (0.1, 0.5, 1.0, 2.0):
                with self.subTest(points=points, t=t):
                    check = duhamel_identity_check(pair, t)
                    self.assertLessEqual(check.relative, 1e-8)
                    self.assertGreater(check.scale, 0.0)


class TraceSumTests(unittest.TestCase):
    def setUp(self):
        self.pair = build_operator_pair(square_grid(8), DIRICHLET, parse_potential(SINGULAR))

    def test_constant_multiplier_gives_zero(self):
        result = trace_perturbation_sum(self.pair, lambda mu: np.ones_like(mu))
        self.assertEqual(result.value, 0.0)
        self.assertEqual(result.direct, 0.0)

    def test_square_multiplier_recovers_potential_trace(self):
        result = trace_perturbation_sum(self.pair, np.square, lambda mu: 2.0 * mu)
        expected = math.fsum(self.pair.potential_diagonal)
        self.assertAlmostEqual(result.value / expected, 1.0, delta=1e-8)
        self.assertLessEqual(result.residual, 1e-8 * expected)

    def test_heat_multiplier(self):
        result = trace_perturbation_sum(self.pair, lambda mu: np.exp(-0.01 * mu**2))
        self.assertLess(result.direct, 0.0)
        self.assertLessEqual(result.residual, 1e-8)


class CaseReportTests(unittest.TestCase):
    def test_zero_potential_blocks_vanish(self):
        pair = build_operator_pair(square_grid(8), DIRICHLET, parse_potential("zero()"))
        report = case_report(pair, 4.0, 0.5)
        for family in (report.short_interval, report.long_interval):
            self.assertTrue(family.reconciled)
            self.assertTrue(all(block.partial_sum == 0.0 for block in family.blocks))

    def test_blocks_reconcile_with_the_full_sum(self):
        pair = build_operator_pair(square_grid(8), DIRICHLET, parse_potential(SINGULAR))
        report = case_report(pair, 5.0, 0.5)
        self.assertEqual(
            [block.name for block in report.short_interval.blocks],
            ["case1", "case2", "case3", "case4", "case5", "rest"],
        )
        self.assertEqual(
            [block.name for block in report.long_interval.blocks],
            ["Low+Low", "MedLow+Med", "Med+Low", "All+High", "High+MedLow"],
        )
        self.assertTrue(report.short_interval.reconciled)
        self.assertTrue(report.long_interval.reconciled)
        count = pair.free.size * pair.perturbed.size
        self.assertEqual(sum(block.index_count for block in report.long_interval.blocks), count)
        self.assertEqual(report.short_interval.block("case1").bound_form, "eps*lambda^(n-1)")

    def test_window_mass_stays_in_named_cases(self):
        # 0.3 is not a power of two, so the first dyadic ring is (0.3, 0.5].
        pair = build_operator_pair(square_grid(12), DIRICHLET, parse_potential(SINGULAR))
        report = case_report(pair, 4.6, 0.3)
        family = report.short_interval
        self.assertEqual(family.block("rest").partial_sum, 0.0)
        self.assertNotEqual(family.full_sum, 0.0)
        self.assertTrue(family.reconciled)

    def test_uncovered_pairs_are_an_accuracy_error(self):
        summand = np.ones((2, 2))
        first_row = np.array([[True, True], [False, False]])
        with self.assertRaises(AccuracyError):
            _partition(summand, [("case1", first_row, "lambda^(-sigma)")], {"lambda^(-sigma)": 1.0}, "window")

    def test_lambda_range(self):
        pair = build_operator_pair(square_grid(6), DIRICHLET, parse_potential("zero()"))
        with self.assertRaises(InvalidInputError):
            case_report(pair, 1.0, 0.5)
        with self.assertRaises(RangeError):
            case_report(pair, pair.free.counting_ceiling + 1.0, 0.5)


class EnvelopeTests(unittest.TestCase):
    def test_envelope_dominates_samples(self):
        pair = build_operator_pair(square_grid(8), DIRICHLET, parse_potential(SINGULAR))
        top = 0.9 * pair.free.counting_ceiling
        report = fit_trace_envelope(pair, np.linspace(0.5 * top, top, 4), (1.0, 0.5))
        self.assertEqual(len(report.fits), 2)
        for fit in report.fits:
            self.assertTrue(fit.holds)
            self.assertGreaterEqual(fit.linear, 0.0)
            self.assertGreaterEqual(fit.sqrt, 0.0)

    def test_envelope_needs_two_lambdas(self):
        pair = build_operator_pair(square_grid(6), DIRICHLET, parse_potential("zero()"))
        with self.assertRaises(InvalidInputError):
            fit_trace_envelope(pair, [2.0], (0.5,))


if __name__ == "__main__":
    unittest.main()
