import math
import unittest

import numpy as np

from weyllab.builder import PotentialBuilder, parse_potential
from weyllab.errors import InvalidInputError, SingularPointError, UnsupportedDomainError
from weyllab.geometry import build_grid, grid_for_points, make_domain
from weyllab.potentials import (
    PotentialSpec,
    cell_average,
    constant,
    evaluate_potential,
    inverse_power,
    kato_kernel,
    kato_norm,
    l1_norm,
    split_potential,
    zero,
)

# Integral of 1/|x| over a unit square centered at the origin.
SQUARE_INVERSE_DISTANCE = 4.0 * math.log(1.0 + math.sqrt(2.0))


def unit_square():
    return make_domain("rectangle", a=1.0, b=1.0)


class EvaluateTests(unittest.TestCase):
    def test_inverse_power_value(self):
        spec = PotentialSpec((inverse_power(0.0, 0.0, 1.0),))
        self.assertAlmostEqual(evaluate_potential(spec, (3.0, 4.0)), 0.2)

    def test_center_is_singular(self):
        spec = PotentialSpec((inverse_power(0.0, 0.0, 1.0),))
        with self.assertRaises(SingularPointError):
            evaluate_potential(spec, (0.0, 0.0))

    def test_terms_add_up(self):
        spec = PotentialSpec((constant(2.0), inverse_power(0.0, 0.0, 1.0, strength=3.0)))
        self.assertAlmostEqual(evaluate_potential(spec, (0.0, 2.0)), 3.5)

    def test_alpha_must_be_kato_admissible(self):
        for alpha in (0.0, 2.0, 2.5):
            with self.assertRaises(InvalidInputError):
                inverse_power(0.5, 0.5, alpha)

    def test_zero_detection(self):
        self.assertTrue(PotentialSpec((zero(), constant(0.0))).is_zero)
        self.assertFalse(PotentialSpec((constant(1e-3),)).is_zero)

    def test_shared_centers_keep_the_largest_exponent(self):
        spec = PotentialSpec((inverse_power(0.5, 0.5, 0.5), inverse_power(0.5, 0.5, 1.5)))
        singular = spec.singularities()
        self.assertEqual(len(singular), 1)
        self.assertEqual(singular[0].alpha, 1.5)


class KatoKernelTests(unittest.TestCase):
    def test_planar_kernel(self):
        self.assertAlmostEqual(kato_kernel(1.0, 2), math.log(3.0))

    def test_higher_dimensional_kernel(self):
        self.assertEqual(kato_kernel(1.0, 3), 1.0)
        self.assertEqual(kato_kernel(0.5, 4), 4.0)

    def test_kernel_needs_positive_radius(self):
        with self.assertRaises(InvalidInputError):
            kato_kernel(0.0, 2)

    def test_kernel_is_vectorized(self):
        values = kato_kernel(np.array([1.0, 0.5]), 3)
        np.testing.assert_allclose(values, [1.0, 2.0])


class KatoNormTests(unittest.TestCase):
    def test_constant_potential(self):
        norm = kato_norm(PotentialSpec((constant(1.0),)), unit_square(), 0.1)
        self.assertAlmostEqual(norm, 0.0920, delta=0.002)

    def test_zero_potential(self):
        self.assertEqual(kato_norm(PotentialSpec((zero(),)), unit_square(), 0.1), 0.0)

    def test_singular_norm_shrinks_with_radius(self):
        spec = PotentialSpec((inverse_power(0.5, 0.5, 1.0),))
        norms = [kato_norm(spec, unit_square(), delta) for delta in (0.2, 0.1, 0.05)]
        self.assertGreater(norms[0], norms[1])
        self.assertGreater(norms[1], norms[2])
        self.assertGreater(norms[2], 0.0)

    def test_disk_is_unsupported(self):
        with self.assertRaises(UnsupportedDomainError):
            kato_norm(PotentialSpec((constant(1.0),)), make_domain("disk", radius=1.0), 0.1)


class IntegralTests(unittest.TestCase):
    def test_l1_norm_of_centered_singularity(self):
        spec = PotentialSpec((inverse_power(0.5, 0.5, 1.0),))
        self.assertAlmostEqual(l1_norm(spec, unit_square()), SQUARE_INVERSE_DISTANCE, places=6)

    def test_l1_norm_of_constant(self):
        spec = PotentialSpec((constant(-3.0),))
        self.assertAlmostEqual(l1_norm(spec, make_domain("rectangle", a=2.0, b=1.0)), 6.0)

    def test_singular_cell_average(self):
        grid = build_grid(unit_square(), 0.25)
        spec = PotentialSpec((inverse_power(0.5, 0.5, 1.0),))
        averages = cell_average(spec, grid)
        center = grid.node_index(2, 2)
        self.assertAlmostEqual(averages[center] * grid.h, SQUARE_INVERSE_DISTANCE, places=6)
        self.assertTrue(np.all(np.isfinite(averages)))
        self.assertTrue(np.all(averages <= averages[center]))

    def test_center_on_a_cell_corner(self):
        # An even node count puts (0.5, 0.5) on the shared corner of four cells.
        spec = PotentialSpec((inverse_power(0.5, 0.5, 1.0),))
        for points in (16, 20, 32):
            with self.subTest(points=points):
                grid = grid_for_points(unit_square(), points)
                averages = cell_average(spec, grid)
                self.assertTrue(np.all(np.isfinite(averages)))
                mid = points // 2
                for i, j in ((mid, mid), (mid + 1, mid), (mid, mid + 1), (mid + 1, mid + 1)):
                    self.assertAlmostEqual(
                        averages[grid.node_index(i, j)] * grid.h, 0.5 * SQUARE_INVERSE_DISTANCE, places=6
                    )

    def test_constant_cell_average_is_exact(self):
        grid = build_grid(unit_square(), 0.25)
        averages = cell_average(PotentialSpec((constant(5.0),)), grid)
        np.testing.assert_array_equal(averages, np.full(9, 5.0))


class SplitTests(unittest.TestCase):
    def test_singular_split(self):
        spec = PotentialSpec((inverse_power(0.5, 0.5, 1.0),))
        split = split_potential(spec, unit_square(), 0.5)
        # Excess mass of 1/r above K is pi/K once the disk r < 1/K fits inside.
        self.assertEqual(split.level, 16.0)
        self.assertLess(split.l1_norm_v1, 0.25)
        self.assertAlmostEqual(split.l1_norm_v1, math.pi / 16.0, delta=0.01)

    def test_bounded_potential_is_its_own_truncation(self):
        spec = PotentialSpec((constant(3.0),))
        split = split_potential(spec, unit_square(), 0.5)
        self.assertEqual(split.level, 4.0)
        self.assertEqual(split.l1_norm_v1, 0.0)
        xs = np.array([0.2, 0.7])
        np.testing.assert_array_equal(split.v0(xs, xs), [3.0, 3.0])
        np.testing.assert_array_equal(split.v1(xs, xs), [0.0, 0.0])

    def test_epsilon_above_one_is_rejected(self):
        with self.assertRaises(InvalidInputError):
            split_potential(PotentialSpec((constant(1.0),)), unit_square(), 1.5)


class BuilderTests(unittest.TestCase):
    def test_builder_keeps_term_order(self):
        builder = PotentialBuilder()
        builder.constant(2.0)
        builder.inverse_power(0.5, 0.5, 1.0)
        self.assertEqual(
            builder.to_expression(),
            "constant(2.0) + inverse_power(x0=0.5, y0=0.5, alpha=1.0, strength=1.0)",
        )

    def test_parse_positional_and_keyword_arguments(self):
        spec = parse_potential("V = inverse_power(0.5, y0=0.25, alpha=1) + constant(3)")
        self.assertEqual(len(spec.terms), 2)
        self.assertEqual(spec.terms[0].center, (0.5, 0.25))
        self.assertEqual(spec.terms[1].value, 3.0)

    def test_expression_roundtrip(self):
        text = "inverse_power(x0=0.5, y0=0.5, alpha=1.5, strength=2.0) + constant(-1.0)"
        self.assertEqual(parse_potential(text).to_expression(), text)

    def test_empty_expression_is_zero(self):
        self.assertTrue(parse_potential("").is_zero)

    def test_parse_errors(self):
        for text in ("constant(", "wobble(1)", "constant(1) +", "inverse_power(0.5, 0.5)", "bounded(1)"):
            with self.assertRaises(InvalidInputError, msg=text):
                parse_potential(text)

    def test_bounded_terms_have_no_text_form(self):
        builder = PotentialBuilder()
        builder.bounded(lambda x, y: np.sin(x) * np.cos(y), sup=1.0, name="wave")
        spec = builder.build()
        self.assertEqual(spec.bounded_sup, 1.0)
        with self.assertRaises(InvalidInputError):
            spec.to_expression()


if __name__ == "__main__":
    unittest.main()
