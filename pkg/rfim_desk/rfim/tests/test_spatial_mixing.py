import math
from unittest import mock

import numpy as np
from django.test import SimpleTestCase

from rfim.exceptions import FerromagnetismRequired, InputError, ValidationFailure
from rfim.graphs import build_graph, complete_graph, cycle_graph, path_graph
from rfim.models import make_model, two_point
from rfim.spatial_mixing import (build_separation_plan, decay_confidence, decay_satisfied, estimate_wsm,
                                 factorized_bound, fit_decay_constant, fkg_correlation_check, wsm_delta)


class WsmDeltaTests(SimpleTestCase):
    def test_no_coupling_no_influence(self):
        model = make_model(path_graph(5), 0.0, [0.3, -0.1, 0.2, 0.0, 0.4])
        self.assertEqual(wsm_delta(model, 2, 1), 0.0)

    def test_radius_past_the_eccentricity(self):
        model = make_model(path_graph(5), 0.5, [0.0] * 5)
        self.assertEqual(wsm_delta(model, 0, 5), 0.0)

    def test_centre_of_a_three_path(self):
        model = make_model(path_graph(3), 0.5, [0.0] * 3)
        self.assertAlmostEqual(wsm_delta(model, 1, 1), math.tanh(1.0), places=12)

    def test_influence_shrinks_with_radius(self):
        model = make_model(path_graph(9), 0.4, [0.1, -0.2, 0.0, 0.3, 0.0, -0.1, 0.2, 0.0, 0.1])
        deltas = [wsm_delta(model, 4, ell) for ell in (1, 2, 3, 4)]
        self.assertTrue(all(a >= b for a, b in zip(deltas, deltas[1:])))

    def test_radius_zero_rejected(self):
        with self.assertRaises(InputError):
            wsm_delta(make_model(path_graph(3), 0.5), 1, 0)


class EstimateWsmTests(SimpleTestCase):
    def test_strong_fields_decay(self):
        report = estimate_wsm(path_graph(8), 0.3, two_point(5.0), [1, 2, 3], 10, seed=0, workers=1)
        self.assertEqual(report.radii, (1, 2, 3))
        self.assertEqual(len(report.rows), 8 * 3)
        self.assertGreaterEqual(report.sup_mean[0], report.sup_mean[2])
        self.assertEqual(report.sources, {'field_trials': 10, 'sl_draws': 0, 't': 0.0})
        self.assertGreater(decay_confidence(report, 1, 3), 0)

    def test_boosted_measures(self):
        report = estimate_wsm(path_graph(5), 0.3, two_point(1.0), [1, 2], 2, seed=1, vertices=[2], t=1.0,
                              sl_draws=2, workers=1)
        self.assertEqual(report.sources['sl_draws'], 2)
        self.assertEqual(len(report.rows), 2)

    def test_decay_confidence_needs_two_trials(self):
        report = estimate_wsm(path_graph(4), 0.3, two_point(1.0), [1, 2], 1, seed=0, workers=1)
        with self.assertRaises(InputError):
            decay_confidence(report, 1, 2)

    def test_fit_recovers_an_exact_decay(self):
        radii = [1, 2, 3, 4]
        c = 2.0
        fitted = fit_decay_constant(radii, [c * math.exp(-r / c) for r in radii])
        self.assertAlmostEqual(fitted, c, places=3)
        self.assertTrue(decay_satisfied(radii, [c * math.exp(-r / c) for r in radii], c))
        self.assertEqual(fit_decay_constant(radii, [0.0] * 4), 0.0)


class SeparationPlanTests(SimpleTestCase):
    def test_two_points_on_a_path(self):
        plan = build_separation_plan(path_graph(12), [0, 8])
        self.assertEqual(plan.r[1], 2.0)
        self.assertEqual(plan.nearest[1], 0)
        self.assertEqual(plan.buckets, {1: (1,)})
        self.assertEqual(plan.k_star, 1)
        self.assertEqual(plan.selected, (1,))
        self.assertEqual(plan.ell, {1: 2})

    def test_repeated_points_give_an_empty_plan(self):
        plan = build_separation_plan(path_graph(5), [3, 3])
        self.assertEqual(plan.buckets, {})
        self.assertIsNone(plan.k_star)
        self.assertEqual(plan.selected, ())

    def test_random_points_on_a_cycle_are_separated(self):
        g = cycle_graph(20)
        rng = np.random.default_rng(5)
        for _ in range(200):
            plan = build_separation_plan(g, rng.integers(20, size=5).tolist())
            for i in plan.selected:
                self.assertGreaterEqual(plan.ell_real[i], plan.r[i] / 2)
                self.assertGreaterEqual(plan.ell[i], 1)

    def test_heaviest_bucket_wins(self):
        # r = (-, 1, 2): buckets 0 and 1 weigh 1 and 2
        plan = build_separation_plan(path_graph(20), [0, 4, 12])
        self.assertEqual(plan.buckets, {0: (1,), 1: (2,)})
        self.assertEqual(plan.k_star, 1)

    def test_points_in_different_components(self):
        with self.assertRaises(InputError):
            build_separation_plan(build_graph(4, [(0, 1), (2, 3)]), [0, 3])

    def test_unseparated_radii_fail_validation(self):
        # point 1 sits 8 from point 0 but only 1 from point 2 in this inconsistent table
        distances = [[0, 8, 8], [8, 0, 1], [8, 8, 0]]
        with mock.patch('rfim.spatial_mixing._point_distances', return_value=distances):
            with self.assertRaisesMessage(ValidationFailure, "point 1"):
                build_separation_plan(path_graph(3), [0, 1, 2])

    def test_factorized_bound(self):
        model = make_model(path_graph(12), 0.3, [0.0] * 12)
        plan = build_separation_plan(model.graph, [0, 8])
        bound = factorized_bound(model, plan)
        self.assertGreater(bound, 0)
        self.assertEqual(factorized_bound(model, build_separation_plan(model.graph, [3, 3])), 1.0)


class FkgCheckTests(SimpleTestCase):
    def test_correlations_sit_below_the_ball_influence(self):
        for graph in (path_graph(4), complete_graph(4), cycle_graph(5)):
            model = make_model(graph, 0.4, np.linspace(-0.5, 0.5, graph.num_vertices))
            report = fkg_correlation_check(model)
            self.assertGreater(report.checks, 0)
            self.assertTrue(report.passed, report.violations)

    def test_needs_ferromagnetic_couplings(self):
        graph = path_graph(3)
        model = make_model(graph, edge_couplings=[0.3, -0.3])
        with self.assertRaises(FerromagnetismRequired):
            fkg_correlation_check(model)
