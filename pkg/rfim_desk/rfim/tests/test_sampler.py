import math

from django.test import SimpleTestCase

from rfim.exceptions import DisconnectedGraph, InputError
from rfim.graphs import build_graph, complete_graph, is_prefix_connected, path_graph
from rfim.models import make_model
from rfim.sampler import (SamplerConfig, calibrate_c_star, incremental_sample, incremental_sample_batch, k_star,
                          sampling_order, warm_start_constant, warm_start_preconditions, warm_start_tv_bound)


class KStarTests(SimpleTestCase):
    def test_integer_powers_are_exact(self):
        self.assertEqual(k_star(2, 2), 4)
        self.assertEqual(k_star(10, 3), 1000)
        self.assertEqual(k_star(4, 0.5), 2)

    def test_rounds_up(self):
        self.assertEqual(k_star(10, 0.5), 4)
        self.assertEqual(k_star(1, 3.7), 1)


class SamplerConfigTests(SimpleTestCase):
    def test_validation(self):
        with self.assertRaises(InputError):
            SamplerConfig(c_star=0)
        with self.assertRaises(InputError):
            SamplerConfig(c_star=1, eps=1.5)
        with self.assertRaises(InputError):
            SamplerConfig(c_star=1, replicas=0)

    def test_ordering_seed_defaults_to_the_seed(self):
        self.assertEqual(SamplerConfig(c_star=1, seed=9).order_seed, 9)
        self.assertEqual(SamplerConfig(c_star=1, seed=9, ordering_seed=2).order_seed, 2)


class IncrementalSampleTests(SimpleTestCase):
    def test_single_vertex_is_exact(self):
        model = make_model(build_graph(1, []), 0.0, [0.7])
        config = SamplerConfig(c_star=1, seed=3, validate=True, replicas=20_000)
        final, report = incremental_sample(model, config)
        self.assertEqual(report.stage_steps, (0,))
        self.assertEqual(report.total_updates, 0)
        self.assertLess(report.tv, 0.05)
        self.assertTrue(report.passed)
        self.assertEqual(len(final), 1)

    def test_free_spins_need_no_dynamics_to_be_right(self):
        model = make_model(path_graph(4), 0.0, [0.5, -0.3, 0.0, 1.0])
        _, report = incremental_sample(model, SamplerConfig(c_star=1, seed=1, validate=True, replicas=20_000))
        self.assertLess(report.tv, 0.05)

    def test_two_vertices_with_coupling(self):
        model = make_model(path_graph(2), 0.3, [0.2, -0.4])
        _, report = incremental_sample(model, SamplerConfig(c_star=4, seed=2, validate=True, replicas=20_000))
        self.assertEqual(report.stage_steps, (0, 16))
        self.assertLess(report.tv, 0.05)

    def test_stage_steps_follow_n_or_the_prefix(self):
        model = make_model(path_graph(4), 0.2)
        _, report = incremental_sample(model, SamplerConfig(c_star=1, seed=0))
        self.assertEqual(report.stage_steps, (0, 4, 4, 4))
        _, report = incremental_sample(model, SamplerConfig(c_star=1, seed=0, prefix_k=True))
        self.assertEqual(report.stage_steps, (0, 2, 3, 4))
        self.assertIsNone(report.tv)
        self.assertTrue(report.passed)

    def test_order_is_prefix_connected(self):
        model = make_model(complete_graph(5), 0.2)
        _, report = incremental_sample(model, SamplerConfig(c_star=1, seed=4))
        self.assertEqual(sorted(report.order), list(range(5)))
        self.assertTrue(is_prefix_connected(model.graph, report.order))

    def test_same_seed_same_sample(self):
        model = make_model(path_graph(6), 0.3, [0.1] * 6)
        config = SamplerConfig(c_star=1.5, seed=8)
        first, _ = incremental_sample(model, config)
        second, _ = incremental_sample(model, config)
        self.assertEqual(first, second)

    def test_pinned_vertices_stay_pinned(self):
        model = make_model(path_graph(4), 0.3, pinning={2: -1})
        spins, _, _ = incremental_sample_batch(model, SamplerConfig(c_star=1.5, seed=0), replicas=50)
        self.assertTrue((spins[:, 2] == -1).all())

    def test_disconnected_graphs_need_per_component(self):
        graph = build_graph(5, [(0, 1), (1, 2), (3, 4)])
        model = make_model(graph, 0.2)
        with self.assertRaises(DisconnectedGraph):
            incremental_sample(model, SamplerConfig(c_star=1, seed=0))
        _, report = incremental_sample(model, SamplerConfig(c_star=1, seed=0, per_component=True))
        self.assertEqual(sorted(report.order), list(range(5)))
        blocks = sampling_order(graph, SamplerConfig(c_star=1, seed=0, per_component=True))
        self.assertEqual([sorted(b) for b in blocks], [[0, 1, 2], [3, 4]])
        self.assertEqual(report.stage_steps[0], 0)
        self.assertEqual(report.stage_steps[3], 0)


class CalibrationTests(SimpleTestCase):
    def test_smallest_passing_c_star(self):
        model = make_model(path_graph(3), 0.0, [0.2, 0.0, -0.2])
        calibration = calibrate_c_star(model, [2.0, 0.5, 1.0], SamplerConfig(c_star=2, seed=0, replicas=20_000))
        self.assertEqual([row.c_star for row in calibration.rows], [0.5, 1.0, 2.0])
        self.assertEqual(calibration.chosen, 0.5)
        self.assertEqual(calibration.notes, ())


class WarmStartTests(SimpleTestCase):
    def test_bound_value(self):
        self.assertAlmostEqual(warm_start_tv_bound(1, 1, 1, 8), math.log(8) / 8)

    def test_p_one_is_linear_in_log_k_over_k(self):
        self.assertAlmostEqual(warm_start_tv_bound(2.0, 3.0, 1, 100), 2.0 * 9.0 * math.log(100) / 100)

    def test_bound_vanishes_in_k(self):
        bounds = [warm_start_tv_bound(2.0, 2.0, 1.5, k) for k in (10, 10 ** 3, 10 ** 6)]
        self.assertTrue(bounds[0] > bounds[1] > bounds[2])
        self.assertLess(bounds[2], 0.05)

    def test_preconditions(self):
        self.assertEqual(warm_start_preconditions(2.0, 1, 8), [])
        self.assertEqual(len(warm_start_preconditions(1.0, 0.8, 1)), 3)
        with self.assertRaises(InputError):
            warm_start_tv_bound(1, 1, 0.5, 8)

    def test_constant(self):
        self.assertEqual(warm_start_constant(0.0, 1.0), 1.0)
        self.assertAlmostEqual(warm_start_constant(0.25, 0.0), math.e)
