import math

import numpy as np
from django.test import SimpleTestCase

from rfim.exceptions import InputError
from rfim.graphs import path_graph
from rfim.models import ZERO_ONE, FieldDistribution, make_model, two_point
from rfim.sampler import SamplerConfig
from rfim.serializers import (ExperimentSerializer, FieldDistributionSerializer, GraphSerializer,
                              IsingModelSerializer, MlsiVsProbeSerializer, SamplerConfigSerializer, flatten_errors,
                              jsonable, load)


class FlattenErrorsTests(SimpleTestCase):
    def test_nested_paths(self):
        errors = {"graph": {"edges": [[], {"0": ["Bad vertex."]}]}, "beta": ["Required."]}
        self.assertEqual(flatten_errors(errors), ["graph.edges.1.0: Bad vertex.", "beta: Required."])

    def test_top_level_list(self):
        self.assertEqual(flatten_errors(["Broken."]), ["document: Broken."])


class GraphSerializerTests(SimpleTestCase):
    def test_explicit_edges(self):
        graph = load(GraphSerializer, {"n": 3, "edges": [[0, 1], [1, 2]]}, "graph")
        self.assertEqual(graph.edges, ((0, 1), (1, 2)))

    def test_generator(self):
        graph = load(GraphSerializer, {"generator": "torus", "params": {"rows": 3, "cols": 3}}, "graph")
        self.assertEqual(graph.num_vertices, 9)
        self.assertEqual(len(graph.edges), 18)

    def test_missing_generator_parameter(self):
        with self.assertRaisesMessage(InputError, "params"):
            load(GraphSerializer, {"generator": "cycle", "params": {}}, "graph")

    def test_edge_out_of_range(self):
        with self.assertRaisesMessage(InputError, "edges"):
            load(GraphSerializer, {"n": 2, "edges": [[0, 5]]}, "graph")

    def test_needs_n_or_generator(self):
        with self.assertRaises(InputError):
            load(GraphSerializer, {"edges": [[0, 1]]}, "graph")

    def test_representation(self):
        self.assertEqual(GraphSerializer(path_graph(3)).data, {"n": 3, "edges": [[0, 1], [1, 2]]})


class FieldDistributionSerializerTests(SimpleTestCase):
    def test_two_point(self):
        dist = load(FieldDistributionSerializer, {"kind": "two_point", "a": 5}, "field")
        self.assertEqual(dist, two_point(5.0))

    def test_shifted_round_trip(self):
        data = {"kind": "shifted", "base": {"kind": "gaussian", "sigma": 1.0}, "offsets": [0.5, -0.5]}
        dist = load(FieldDistributionSerializer, data, "field")
        self.assertIsInstance(dist.base, FieldDistribution)
        self.assertEqual(FieldDistributionSerializer(dist).data, data)

    def test_missing_parameter(self):
        with self.assertRaises(InputError):
            load(FieldDistributionSerializer, {"kind": "gaussian"}, "field")


class IsingModelSerializerTests(SimpleTestCase):
    def test_uniform_beta(self):
        data = {"graph": {"n": 2, "edges": [[0, 1]]}, "beta": 0.5, "field": [0.1, -0.1], "pinning": {"1": -1}}
        model = load(IsingModelSerializer, data, "model")
        self.assertEqual(model.pinning, {1: -1})
        self.assertEqual(model.uniform_coupling, 0.5)
        self.assertEqual(IsingModelSerializer(model).data["pinning"], {"1": -1})

    def test_field_distribution_is_sampled(self):
        data = {"graph": {"generator": "path", "params": {"n": 5}}, "beta": 0.2,
                "field_distribution": {"kind": "two_point", "a": 2}, "field_seed": 4}
        model = load(IsingModelSerializer, data, "model")
        self.assertTrue(np.all(np.abs(model.field) == 2.0))

    def test_edge_couplings_serialize_per_edge(self):
        model = make_model(path_graph(3), edge_couplings=[0.1, 0.2], convention=ZERO_ONE)
        data = IsingModelSerializer(model).data
        self.assertEqual(data["edge_couplings"], [0.1, 0.2])
        self.assertNotIn("beta", data)
        self.assertEqual(data["convention"], ZERO_ONE)

    def test_conflicting_inputs(self):
        with self.assertRaisesMessage(InputError, "beta"):
            load(IsingModelSerializer, {"graph": {"n": 1}}, "model")
        with self.assertRaisesMessage(InputError, "field"):
            load(IsingModelSerializer, {"graph": {"n": 1}, "beta": 0.1, "field": [0.0],
                                        "field_distribution": {"kind": "gaussian", "sigma": 1}}, "model")

    def test_bad_pin_value(self):
        with self.assertRaises(InputError):
            load(IsingModelSerializer, {"graph": {"n": 2, "edges": [[0, 1]]}, "beta": 0.1, "pinning": {"0": 1, "1": 0}},
                 "model")


class SamplerConfigSerializerTests(SimpleTestCase):
    def test_validate_output_key(self):
        config = load(SamplerConfigSerializer, {"c_star": 2, "validate_output": True, "seed": 3}, "config")
        self.assertIsInstance(config, SamplerConfig)
        self.assertTrue(config.validate)
        self.assertEqual(config.order_seed, 3)
        self.assertTrue(SamplerConfigSerializer(config).data["validate_output"])

    def test_domain_errors_surface(self):
        with self.assertRaisesMessage(InputError, "c_star"):
            load(SamplerConfigSerializer, {"c_star": -1}, "config")


class ExperimentSerializerTests(SimpleTestCase):
    def test_step_names(self):
        data = load(ExperimentSerializer, {"steps": [{"kind": "wsm"}, {"kind": "certificate"}]}, "experiment")
        self.assertEqual([s["name"] for s in data["steps"]], ["00_wsm", "01_certificate"])

    def test_duplicate_names(self):
        with self.assertRaises(InputError):
            load(ExperimentSerializer, {"steps": [{"kind": "wsm", "name": "a"}, {"kind": "certificate", "name": "a"}]},
                 "experiment")

    def test_unknown_kind(self):
        with self.assertRaises(InputError):
            load(ExperimentSerializer, {"steps": [{"kind": "teleport"}]}, "experiment")

    def test_mlsi_step_needs_positive_field_bound(self):
        params = {"beta": 0.05, "p0": 0.1, "K": 3.0}
        with self.assertRaisesMessage(InputError, "M: M must be positive."):
            load(MlsiVsProbeSerializer, {**params, "M": 0}, "step params")
        self.assertEqual(load(MlsiVsProbeSerializer, {**params, "M": 1.0}, "step params")["M"], 1.0)


class JsonableTests(SimpleTestCase):
    def test_numpy_sets_and_infinities(self):
        data = jsonable({"a": np.array([1.5, 2.0]), "b": frozenset({3, 1}), 2: np.int64(4), "c": math.inf})
        self.assertEqual(data, {"a": [1.5, 2.0], "b": [1, 3], "2": 4, "c": "inf"})
