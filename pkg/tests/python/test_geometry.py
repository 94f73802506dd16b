import math
import unittest

import numpy as np

from weyllab.errors import InvalidInputError, UnsupportedDomainError
from weyllab.geometry import (
    DIRICHLET,
    BoundaryCondition,
    BoundaryKind,
    DomainSpec,
    build_grid,
    distance,
    grid_for_points,
    make_domain,
    pairwise_distances,
)


class DomainTests(unittest.TestCase):
    def test_unit_square_area_and_perimeter(self):
        square = make_domain("rectangle", a=1.0, b=1.0)
        self.assertEqual(square.area, 1.0)
        self.assertEqual(square.perimeter, 4.0)

    def test_unit_disk_area_and_perimeter(self):
        disk = make_domain("disk", radius=1.0)
        self.assertAlmostEqual(disk.area, math.pi)
        self.assertAlmostEqual(disk.perimeter, 2.0 * math.pi)

    def test_negative_side_is_rejected(self):
        with self.assertRaises(InvalidInputError):
            make_domain("rectangle", a=-1.0, b=1.0)

    def test_unknown_shape_is_rejected(self):
        with self.assertRaises(InvalidInputError):
            make_domain("triangle", a=1.0, b=1.0)

    def test_dimension_below_two_is_rejected(self):
        with self.assertRaises(InvalidInputError):
            make_domain("rectangle", dimension=1, a=1.0, b=1.0)

    def test_domain_dict_roundtrip(self):
        rectangle = make_domain("rectangle", a=2.0, b=0.5)
        self.assertEqual(DomainSpec.from_dict(rectangle.to_dict()), rectangle)

    def test_contains(self):
        disk = make_domain("disk", radius=1.0)
        self.assertTrue(disk.contains((0.6, 0.6)))
        self.assertFalse(disk.contains((0.8, 0.8)))


class BoundaryConditionTests(unittest.TestCase):
    def test_parse_accepts_all_kinds(self):
        self.assertEqual(BoundaryCondition.parse("Dirichlet"), DIRICHLET)
        self.assertIs(BoundaryCondition.parse("neumann").kind, BoundaryKind.NEUMANN)
        robin = BoundaryCondition.parse("robin:2.5")
        self.assertIs(robin.kind, BoundaryKind.ROBIN)
        self.assertEqual(robin.sigma, 2.5)
        self.assertEqual(robin.label(), "robin:2.5")

    def test_negative_robin_sigma_is_rejected(self):
        with self.assertRaises(InvalidInputError):
            BoundaryCondition.parse("robin:-1")

    def test_sigma_requires_robin(self):
        with self.assertRaises(InvalidInputError):
            BoundaryCondition(BoundaryKind.NEUMANN, 1.0)

    def test_codes_roundtrip(self):
        for text in ("dirichlet", "neumann", "robin:0.25"):
            bc = BoundaryCondition.parse(text)
            self.assertEqual(BoundaryCondition.from_code(bc.code, bc.sigma), bc)


class GridTests(unittest.TestCase):
    def test_quarter_spacing_gives_nine_nodes(self):
        grid = build_grid(make_domain("rectangle", a=1.0, b=1.0), 0.25)
        self.assertEqual((grid.nx, grid.ny, grid.size), (3, 3, 9))
        self.assertEqual(grid.nodes.shape, (9, 2))
        self.assertEqual(tuple(grid.nodes[0]), (0.25, 0.25))
        self.assertEqual(tuple(grid.nodes[1]), (0.5, 0.25))

    def test_half_spacing_gives_the_center_node(self):
        grid = build_grid(make_domain("rectangle", a=1.0, b=1.0), 0.5)
        self.assertEqual(grid.size, 1)
        self.assertEqual(tuple(grid.nodes[0]), (0.5, 0.5))

    def test_disk_grid_is_unsupported(self):
        with self.assertRaises(UnsupportedDomainError):
            build_grid(make_domain("disk", radius=1.0), 0.25)

    def test_incommensurate_spacing_is_rejected(self):
        with self.assertRaises(InvalidInputError):
            build_grid(make_domain("rectangle", a=1.0, b=1.0), 0.3)

    def test_nodes_are_read_only(self):
        grid = build_grid(make_domain("rectangle", a=1.0, b=1.0), 0.25)
        with self.assertRaises(ValueError):
            grid.nodes[0, 0] = 1.0

    def test_grid_for_points_and_ceilings(self):
        grid = grid_for_points(make_domain("rectangle", a=1.0, b=1.0), 15)
        self.assertEqual(grid.size, 225)
        self.assertAlmostEqual(grid.h, 1.0 / 16.0)
        self.assertAlmostEqual(grid.spectral_ceiling, 32.0 * math.sqrt(2.0))
        self.assertAlmostEqual(grid.counting_ceiling, 8.0 * math.sqrt(2.0))

    def test_node_index_and_nearest_node(self):
        grid = build_grid(make_domain("rectangle", a=1.0, b=1.0), 0.25)
        self.assertEqual(grid.node_index(2, 2), 4)
        self.assertEqual(grid.nearest_node((0.49, 0.52)), 4)
        with self.assertRaises(InvalidInputError):
            grid.node_index(0, 1)


class DistanceTests(unittest.TestCase):
    def test_three_four_five(self):
        self.assertEqual(distance((0.0, 0.0), (3.0, 4.0)), 5.0)

    def test_distance_is_symmetric(self):
        self.assertEqual(distance((0.1, 0.7), (0.4, 0.2)), distance((0.4, 0.2), (0.1, 0.7)))

    def test_metric_axioms_on_random_triples(self):
        rng = np.random.default_rng(7)
        points = rng.uniform(0.0, 1.0, size=(10_000, 3, 2))
        for x, y, z in points:
            d_xy = distance(x, y)
            self.assertGreater(d_xy, 0.0)
            self.assertEqual(distance(x, x), 0.0)
            self.assertEqual(d_xy, distance(y, x))
            self.assertLessEqual(d_xy, distance(x, z) + distance(z, y) + 1e-15)

    def test_pairwise_distances_match_scalar_distance(self):
        grid = build_grid(make_domain("rectangle", a=1.0, b=1.0), 0.125)
        first = np.array([0, 5, 48, 24])
        second = np.array([48, 5, 0, 31])
        expected = [distance(grid.nodes[i], grid.nodes[j]) for i, j in zip(first, second)]
        np.testing.assert_allclose(pairwise_distances(grid.nodes, first, second), expected, rtol=0, atol=1e-15)


if __name__ == "__main__":
    unittest.main()
