import math
from unittest import mock

import numpy as np
from django.test import SimpleTestCase, override_settings
from scipy.special import expit

from rfim import streams
from rfim.exceptions import CapacityError, InputError, ValidationFailure
from rfim.graphs import build_graph, complete_graph, cycle_graph, path_graph
from rfim.models import make_model, sample_field, to_zero_one, uniform_symmetric
from rfim.oracle import (at_variance_constant, cor2_matrix, cor2_norms, fkg_monotonicity_check, free_bits,
                         gibbs_table, glauber_gap, high_temperature_tensorization_bound, mean_and_covariance,
                         mlsi_lower_estimate, phi_entropy, sample_from_table, spectral_report,
                         sup_cor2_over_pinnings, tv_distance)


def random_model(seed, n=6, beta=0.4):
    graph = cycle_graph(n)
    field = sample_field(uniform_symmetric(1.0), n, seed).values
    return make_model(graph, beta, field)


class GibbsTableTests(SimpleTestCase):
    def test_enumeration_order(self):
        bits = free_bits(2)
        self.assertEqual(bits.tolist(), [[False, False], [False, True], [True, False], [True, True]])

    def test_single_vertex(self):
        table = gibbs_table(make_model(build_graph(1, []), 0.0, [0.7]))
        self.assertAlmostEqual(table.probs[1], expit(1.4))
        self.assertAlmostEqual(table.log_partition, math.log(2 * math.cosh(0.7)))

    def test_two_vertex_path(self):
        beta = 0.5
        table = gibbs_table(make_model(path_graph(2), beta))
        z = 2 * math.exp(beta) + 2 * math.exp(-beta)
        np.testing.assert_allclose(table.probs, [math.exp(beta) / z, math.exp(-beta) / z,
                                                 math.exp(-beta) / z, math.exp(beta) / z])

    def test_pinned_vertices_are_not_enumerated(self):
        table = gibbs_table(make_model(path_graph(3), 0.5, pinning={1: 1}))
        self.assertEqual(table.free, (0, 2))
        self.assertEqual(len(table), 4)
        self.assertTrue((table.full_states()[:, 1] == 1).all())
        self.assertAlmostEqual(table.probs.sum(), 1.0)

    def test_index_of_inverts_full_states(self):
        table = gibbs_table(make_model(path_graph(3), 0.5, pinning={0: -1}))
        states = table.full_states()
        self.assertEqual([table.index_of(s) for s in states], list(range(len(table))))

    @override_settings(RFIM={'ORACLE_MAX_FREE': 3})
    def test_capacity(self):
        with self.assertRaises(CapacityError):
            gibbs_table(make_model(path_graph(4), 0.1))

    def test_mean_and_covariance_of_a_product_measure(self):
        table = gibbs_table(make_model(path_graph(3), 0.0, [0.5, 0.0, -0.5]))
        mean, cov = mean_and_covariance(table)
        np.testing.assert_allclose(mean, np.tanh([0.5, 0.0, -0.5]), atol=1e-12)
        np.testing.assert_allclose(cov, np.diag(1 - np.tanh([0.5, 0.0, -0.5]) ** 2), atol=1e-12)

    def test_exact_sampling_frequencies(self):
        table = gibbs_table(make_model(path_graph(2), 0.5, [0.3, -0.2]))
        rows = sample_from_table(table, 200_000, streams.substream(1, streams.ORACLE_SAMPLE))
        freq = np.bincount(rows, minlength=4) / len(rows)
        np.testing.assert_allclose(freq, table.probs, atol=0.01)

    def test_tv_distance(self):
        a = gibbs_table(make_model(path_graph(2), 0.0))
        b = gibbs_table(make_model(path_graph(2), 0.0, [10.0, 10.0]))
        self.assertAlmostEqual(tv_distance(a, a), 0.0)
        self.assertGreater(tv_distance(a, b), 0.7)
        with self.assertRaises(InputError):
            tv_distance(a, gibbs_table(make_model(path_graph(3), 0.0)))


class SpectralTests(SimpleTestCase):
    def test_single_free_vertex_has_unit_gap(self):
        report = glauber_gap(make_model(path_graph(2), 0.5, pinning={0: 1}))
        self.assertAlmostEqual(report.gap, 1.0)

    def test_product_measure_gap(self):
        report = glauber_gap(make_model(path_graph(4), 0.0, [0.3, -1.0, 0.0, 2.0]))
        self.assertAlmostEqual(report.gap, 0.25)
        self.assertAlmostEqual(report.gap_rayleigh, 0.25)

    def test_eigenvalue_and_rayleigh_paths_agree(self):
        for seed in range(10):
            report = glauber_gap(random_model(seed))
            self.assertAlmostEqual(report.gap, report.gap_rayleigh, delta=1e-9)

    def test_disagreeing_gap_paths_fail_validation(self):
        model = random_model(0)
        exact = glauber_gap(model).gap
        with mock.patch('rfim.oracle.dirichlet_gap', return_value=exact + 1e-6):
            with self.assertRaisesMessage(ValidationFailure, "disagree"):
                glauber_gap(model)

    def test_tensorization_constant_times_gap(self):
        for seed in range(10):
            model = random_model(seed, n=5, beta=0.6)
            report = spectral_report(model)
            self.assertAlmostEqual(report.at_variance_constant * report.free_count * report.gap, 1.0, delta=1e-9)

    def test_gap_needs_a_free_vertex(self):
        with self.assertRaises(InputError):
            glauber_gap(make_model(path_graph(1), 0.0, pinning={0: 1}))

    def test_mlsi_probe_is_a_ratio(self):
        rho = mlsi_lower_estimate(random_model(2, n=4), restarts=3, seed=0)
        self.assertGreater(rho, 0.0)
        self.assertLessEqual(rho, 1.0)

    def test_high_temperature_bound(self):
        self.assertEqual(high_temperature_tensorization_bound(to_zero_one(make_model(path_graph(3), 0.0))), 1.0)
        strong = to_zero_one(make_model(complete_graph(4), 2.0))
        self.assertEqual(high_temperature_tensorization_bound(strong), math.inf)
        self.assertAlmostEqual(at_variance_constant(make_model(path_graph(3), 0.0)), 1.0)

    def test_phi_entropy(self):
        table = gibbs_table(make_model(path_graph(1), 0.0))
        self.assertAlmostEqual(phi_entropy(table, [-1.0, 1.0]), 1.0)
        self.assertAlmostEqual(phi_entropy(table, [1.0, 1.0], kind='kl'), 0.0)
        with self.assertRaises(InputError):
            phi_entropy(table, [1.0])


class Cor2Tests(SimpleTestCase):
    def test_methods_agree(self):
        model01 = to_zero_one(random_model(5, n=5))
        table = gibbs_table(model01)
        np.testing.assert_allclose(cor2_matrix(table, 'joint'), cor2_matrix(table, 'condition'), atol=1e-10)

    def test_product_measure_has_zero_off_edge_correlation(self):
        # disjoint edges of a zero-coupling model are independent
        model01 = to_zero_one(make_model(build_graph(4, [(0, 1), (2, 3)]), 0.0))
        matrix = cor2_matrix(gibbs_table(model01))
        self.assertAlmostEqual(matrix[0, 1], 0.0)
        self.assertAlmostEqual(matrix[0, 0], 1.0 - 0.25)

    def test_needs_zero_one(self):
        with self.assertRaises(InputError):
            cor2_matrix(gibbs_table(make_model(path_graph(2), 0.1)))

    def test_interpolation_holds_across_the_sweep(self):
        model01 = to_zero_one(make_model(path_graph(4), 0.5, [0.2, -0.1, 0.4, 0.0]))
        sweep = sup_cor2_over_pinnings(model01, [0.0, 0.3, 0.6], workers=1)
        self.assertTrue(sweep.interpolation_ok)
        self.assertEqual(sweep.cells, 81 * 3)
        self.assertGreaterEqual(sweep.max_row_sum, 0.0)

    def test_norms_of_the_all_ones_matrix(self):
        row, col, op = cor2_norms(np.ones((2, 2)))
        self.assertEqual((row, col), (2.0, 2.0))
        self.assertAlmostEqual(op, 2.0)


class FkgTests(SimpleTestCase):
    def test_ferromagnetic_model_is_monotone(self):
        report = fkg_monotonicity_check(make_model(path_graph(3), 0.7, [0.3, -0.2, 0.1]))
        self.assertEqual(report.violations, 0)
        self.assertGreater(report.comparisons, 0)

    def test_capacity(self):
        with self.assertRaises(CapacityError):
            fkg_monotonicity_check(make_model(path_graph(7), 0.1))
