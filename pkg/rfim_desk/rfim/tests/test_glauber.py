import numpy as np
from django.test import SimpleTestCase

from rfim.exceptions import FerromagnetismRequired, InputError
from rfim.glauber import (GrandCoupling, ReplicaBatch, detailed_balance_check, empirical_distribution,
                          empirical_tv_curve, grand_coupled_update, monotone_coupled_run, run_chain, tv_with_error)
from rfim.graphs import complete_graph, path_graph
from rfim.models import make_model, to_zero_one
from rfim.oracle import gibbs_table


class RunChainTests(SimpleTestCase):
    def setUp(self):
        self.model = make_model(path_graph(4), 0.5, [0.2, -0.3, 0.0, 0.4], pinning={3: 1})

    def test_seeded_runs_repeat(self):
        a, _ = run_chain(self.model, [-1, -1, -1, 1], 500, seed=9)
        b, _ = run_chain(self.model, [-1, -1, -1, 1], 500, seed=9)
        np.testing.assert_array_equal(a.spins, b.spins)
        self.assertEqual(a.step, 500)

    def test_pinned_vertex_never_moves(self):
        state, trajectory = run_chain(self.model, [-1, -1, -1, 1], 300, seed=1, record_every=10)
        self.assertEqual(state.spins[3], 1)
        self.assertEqual(len(trajectory.steps), 31)

    def test_recorded_energy_tracks_the_hamiltonian(self):
        state, trajectory = run_chain(self.model, [-1, -1, -1, 1], 250, seed=4, record_every=50)
        self.assertAlmostEqual(trajectory.energy[-1], self.model.hamiltonian(state.spins))
        self.assertEqual(trajectory.magnetization[-1], float(state.spins.sum()))

    def test_initial_state_must_respect_pinning(self):
        with self.assertRaises(InputError):
            run_chain(self.model, [-1, -1, -1, -1], 10, seed=0)

    def test_initial_state_convention(self):
        with self.assertRaises(InputError):
            run_chain(self.model, [0, 0, 0, 1], 10, seed=0)


class ReplicaTests(SimpleTestCase):
    def test_replicas_converge_to_the_exact_law(self):
        model = make_model(path_graph(3), 0.5, [0.3, 0.0, -0.2])
        curve = empirical_tv_curve(model, [-1, -1, -1], [0, 200], replicas=20_000, seed=3)
        self.assertGreater(curve[0].tv, 0.5)
        self.assertLess(curve[-1].tv, 0.03)

    def test_batch_reaches_stationarity_on_a_triangle(self):
        model = make_model(complete_graph(3), 0.4, [0.1, 0.2, -0.1])
        table = gibbs_table(model)
        batch = ReplicaBatch(model, [-1, -1, -1], 20_000, seed=5).advance(300)
        tv, stderr = tv_with_error(table, batch.spins)
        self.assertLess(tv, 0.03)
        self.assertGreater(stderr, 0.0)
        self.assertAlmostEqual(empirical_distribution(table, batch.spins).sum(), 1.0)

    def test_detailed_balance(self):
        model = make_model(path_graph(3), 0.6, [0.2, -0.4, 0.1])
        report = detailed_balance_check(model, 100_000, seed=2)
        self.assertGreater(report.pairs, 0)
        self.assertLess(report.max_z, 5.0)


class MonotoneCouplingTests(SimpleTestCase):
    def test_extremes_coalesce(self):
        model = make_model(path_graph(4), 0.3, [0.1, -0.2, 0.3, 0.0])
        for seed in range(20):
            trace = monotone_coupled_run(model, [-1] * 4, [1] * 4, 2000, seed)
            self.assertIsNotNone(trace.coalescence_step)
            self.assertEqual(trace.disagreement_set, frozenset())
            self.assertTrue((trace.states[0].spins <= trace.states[1].spins).all())

    def test_zero_one_convention(self):
        model01 = to_zero_one(make_model(path_graph(3), 0.5))
        trace = monotone_coupled_run(model01, [0, 0, 0], [1, 1, 1], 50, seed=0, log_uniforms=True)
        self.assertEqual(len(trace.shared_uniform_log), 50)
        self.assertTrue((trace.states[0].spins <= trace.states[1].spins).all())

    def test_needs_ordered_starts(self):
        model = make_model(path_graph(2), 0.3)
        with self.assertRaises(InputError):
            monotone_coupled_run(model, [1, 1], [-1, 1], 10, seed=0)

    def test_needs_ferromagnetic_couplings(self):
        model = make_model(path_graph(2), -0.3)
        with self.assertRaises(FerromagnetismRequired):
            monotone_coupled_run(model, [-1, -1], [1, 1], 10, seed=0)


class GrandCouplingTests(SimpleTestCase):
    def test_identical_models_never_disagree(self):
        model = make_model(path_graph(3), 0.5, [0.1, 0.2, 0.3])
        result = grand_coupled_update([model, model], seed=4)
        self.assertEqual(result.disagreement_set, frozenset())
        np.testing.assert_array_equal(result.states[0], result.states[1])

    def test_pinning_is_respected(self):
        model = make_model(path_graph(3), 0.5)
        result = grand_coupled_update([model, model.pin({0: 1})], seed=1, order=(2, 1, 0))
        self.assertEqual(result.states[1][0], 1)
        self.assertEqual(result.order, (2, 1, 0))

    def test_each_chain_has_its_exact_law(self):
        model = make_model(path_graph(2), 0.6, [0.2, -0.1])
        table = gibbs_table(model)
        states = np.array([grand_coupled_update([model], seed=s).states[0] for s in range(4000)])
        tv, _ = tv_with_error(table, states)
        self.assertLess(tv, 0.05)

    def test_models_must_share_the_index_space(self):
        with self.assertRaises(InputError):
            GrandCoupling([make_model(path_graph(2), 0.1), make_model(path_graph(3), 0.1)])

    def test_order_must_be_distinct(self):
        model = make_model(path_graph(2), 0.1)
        with self.assertRaises(InputError):
            grand_coupled_update([model], order=(0, 0))
