import math

import numpy as np
from django.test import SimpleTestCase

from rfim.exceptions import CapacityError, InputError
from rfim.graphs import complete_graph, path_graph
from rfim.localization import (default_t_grid, entropy_conservation_for_mlsi, entropy_conservation_R,
                               marginal_constant, posterior_identity, posterior_model, product_deviation,
                               sample_noising_trace, tilted_enumeration, variance_conservation_at_terminal,
                               variance_conservation_R, verify_posterior_by_simulation, vertex_posterior_by_bayes,
                               vertex_posterior_table, vertex_spectral_stability)
from rfim.models import make_model, sample_field, theta_star, to_zero_one, uniform_symmetric
from rfim.oracle import gibbs_table


def bounded_model(graph, beta, seed):
    field = sample_field(uniform_symmetric(1.0), graph.num_vertices, seed).values
    return to_zero_one(make_model(graph, beta, field))


class PosteriorTests(SimpleTestCase):
    def test_bayes_posterior_matches_the_tilted_model(self):
        for graph in (complete_graph(3), complete_graph(4), path_graph(5)):
            for beta in (0.2, 0.5):
                model01 = bounded_model(graph, beta, seed=graph.num_vertices)
                for t in default_t_grid(beta)[:4]:
                    report = posterior_identity(model01, t)
                    self.assertLessEqual(report.max_abs_difference, 1e-12)
                    self.assertGreater(report.sets, 0)

    def test_terminal_posteriors_are_product_measures(self):
        beta = 0.5
        model01 = bounded_model(complete_graph(4), beta, seed=2)
        top = theta_star(beta)
        for revealed in ([], [(0, 1)], [(0, 1), (2, 3)], [(1, 2)]):
            table = gibbs_table(posterior_model(model01, top, revealed))
            self.assertLessEqual(product_deviation(table), 1e-12)

    def test_empty_revelation_is_the_plain_tilt(self):
        model01 = bounded_model(path_graph(4), 0.4, seed=1)
        np.testing.assert_allclose(gibbs_table(posterior_model(model01, 0.3, [])).probs,
                                   tilted_enumeration(model01, 0.3), atol=1e-12)

    def test_revealed_endpoints_are_pinned_up(self):
        model01 = bounded_model(path_graph(3), 0.4, seed=1)
        self.assertEqual(posterior_model(model01, 0.2, [(1, 2)]).pinning, {1: 1, 2: 1})
        with self.assertRaises(InputError):
            posterior_model(model01, 0.2, [(0, 2)])
        with self.assertRaises(InputError):
            posterior_model(model01, 1.0, [])

    def test_posterior_by_simulation(self):
        model01 = bounded_model(path_graph(3), 0.5, seed=6)
        report = verify_posterior_by_simulation(model01, 0.5, 60_000, seed=3, min_hits=1000)
        self.assertGreater(len(report.buckets), 0)
        self.assertLess(report.max_tv, 0.05)

    def test_too_many_edges_for_revealed_sets(self):
        # K12 has 66 edges; one free vertex keeps the table tiny
        model = make_model(complete_graph(12), 0.1, pinning={v: 1 for v in range(1, 12)})
        with self.assertRaisesMessage(CapacityError, "at most 62 edges, got 66"):
            posterior_identity(to_zero_one(model), 0.3)
        long_path = make_model(path_graph(63), 0.1, pinning={v: 1 for v in range(1, 63)})
        with self.assertRaisesMessage(CapacityError, "at most 62 vertices, got 63"):
            vertex_posterior_by_bayes(to_zero_one(long_path), 0.3)


class NoisingTraceTests(SimpleTestCase):
    def test_revealed_edges_are_satisfied(self):
        model01 = bounded_model(complete_graph(4), 0.5, seed=0)
        for seed in range(20):
            trace = sample_noising_trace(model01, seed=seed)
            self.assertEqual(trace.revealed(0.0), frozenset())
            self.assertLessEqual(trace.revealed(0.7), frozenset(trace.satisfied()))
            self.assertEqual(trace.revealed(1.0), frozenset(trace.satisfied()))

    def test_glauber_sampler_needs_burn_in(self):
        model01 = bounded_model(path_graph(3), 0.5, seed=0)
        with self.assertRaises(InputError):
            sample_noising_trace(model01, sampler='glauber')
        trace = sample_noising_trace(model01, sampler='glauber', seed=1, burn_in=200)
        self.assertEqual(len(trace.x_sample), 3)

    def test_needs_zero_one(self):
        with self.assertRaises(InputError):
            sample_noising_trace(make_model(path_graph(2), 0.5))


class VertexProcessTests(SimpleTestCase):
    def test_bayes_matches_the_vertex_posterior(self):
        model01 = bounded_model(path_graph(4), 0.5, seed=4)
        bayes = vertex_posterior_by_bayes(model01, 0.4)
        for mask, law in bayes.conditional_law.items():
            revealed = [v for v in range(model01.n) if mask >> v & 1]
            table = vertex_posterior_table(model01, 0.4, revealed)
            np.testing.assert_allclose(table.lift(bayes.base_free), law, atol=1e-12)

    def test_spectral_stability_of_a_product_measure(self):
        model01 = to_zero_one(make_model(path_graph(3), 0.0))
        self.assertAlmostEqual(vertex_spectral_stability(gibbs_table(model01)), 0.5)


class ConservationTests(SimpleTestCase):
    def test_variance_constant(self):
        cert = variance_conservation_R(2.0, 0.5)
        self.assertAlmostEqual(cert.R, 4.0)
        self.assertAlmostEqual(cert.log_R, 2 * math.log(2))
        with self.assertRaises(InputError):
            variance_conservation_R(-1.0, 0.5)

    def test_terminal_constant_for_one_vertex(self):
        self.assertAlmostEqual(variance_conservation_at_terminal(1, 0.5, 3, 0.8).R, 1.0)

    def test_entropy_constant(self):
        cert = entropy_conservation_R(1.0, 1.0, 0.5)
        self.assertAlmostEqual(cert.extras['L'], 1.0)
        self.assertAlmostEqual(cert.R, 5.0)
        with self.assertRaises(InputError):
            entropy_conservation_R(0.5, 1.0, 0.5)

    def test_marginal_constant(self):
        self.assertAlmostEqual(marginal_constant(3, 0.0, 0.0), 4.0)

    def test_mlsi_constant_reports_rho(self):
        cert = entropy_conservation_for_mlsi(10, 0.5, 3, 0.8304, 1.0)
        self.assertAlmostEqual(cert.extras['log_rho_bound'], -cert.log_R - math.log(10))
        self.assertGreater(cert.R, 1.0)
