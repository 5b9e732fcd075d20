import json
import tempfile
from pathlib import Path
from unittest import mock

import pandas as pd
from django.test import SimpleTestCase

from rfim.exceptions import InputError, ValidationFailure
from rfim.experiments import package_versions, run_experiment
from rfim.oracle import SpectralReport

GAP_STEP = {"kind": "certificate", "name": "gap",
            "params": {"kind": "gap", "n": 1, "beta": 0.5, "delta": 3, "alpha_star": 1.0}}
POSTERIOR_STEP = {"kind": "posterior_identity",
                  "params": {"graph": {"generator": "path", "params": {"n": 3}}, "beta": 0.3,
                             "field": {"kind": "uniform_symmetric", "M": 1.0}, "t_fractions": [0.0, 0.5, 1.0]}}
SMALL_MODELS = {"models": 2, "n": 6, "beta": 0.05, "p0": 0.1, "K": 3.0}
GAP_VS_EXACT_STEP = {"kind": "gap_vs_exact", "name": "gap",
                     "params": {**SMALL_MODELS, "field": {"kind": "uniform_symmetric", "M": 1.0}}}
MLSI_VS_PROBE_STEP = {"kind": "mlsi_vs_probe", "name": "mlsi", "params": {**SMALL_MODELS, "M": 1.0, "restarts": 2}}


class RunExperimentTests(SimpleTestCase):
    def test_empty_pipeline(self):
        bundle = run_experiment({"name": "empty"})
        self.assertEqual(bundle.manifest["steps"], [])
        self.assertEqual(bundle.results, {})
        self.assertIn("numpy", bundle.manifest["versions"])

    def test_certificate_step(self):
        bundle = run_experiment({"seed": 3, "steps": [GAP_STEP]})
        result = bundle.results["gap"]
        self.assertEqual(result.summary["gap_lower"], 1.0)
        self.assertEqual(result.rows, (("gap", 1.0, 0.0),))

    def test_posterior_identity_step(self):
        bundle = run_experiment({"steps": [POSTERIOR_STEP]})
        result = bundle.results["00_posterior_identity"]
        self.assertEqual(len(result.rows), 3)
        self.assertLessEqual(result.summary["max_abs_difference"], 1e-12)

    def test_gap_certificate_below_exact_gaps(self):
        result = run_experiment({"seed": 4, "steps": [GAP_VS_EXACT_STEP]}).results["gap"]
        self.assertEqual(len(result.rows), 2)
        self.assertEqual(result.summary["fraction_holding"], 1.0)
        for _, certificate, exact, holds in result.rows:
            self.assertTrue(holds)
            self.assertLess(certificate, exact)

    def test_gap_certificate_coverage_is_enforced(self):
        with mock.patch('rfim.experiments.glauber_gap', return_value=SpectralReport(6, 0.0, 0.0)):
            with self.assertRaisesMessage(ValidationFailure, "holds on only 0.0%"):
                run_experiment({"steps": [GAP_VS_EXACT_STEP]})

    def test_mlsi_certificate_below_estimates(self):
        result = run_experiment({"seed": 4, "steps": [MLSI_VS_PROBE_STEP]}).results["mlsi"]
        self.assertEqual(result.summary["violations"], 0)
        self.assertTrue(all(row[4] for row in result.rows))

    def test_mlsi_violation_fails_the_step(self):
        with mock.patch('rfim.experiments.mlsi_lower_estimate', return_value=0.0):
            with self.assertRaisesMessage(ValidationFailure, "models [0, 1]"):
                run_experiment({"steps": [MLSI_VS_PROBE_STEP]})

    def test_writes_reports_and_manifest(self):
        with tempfile.TemporaryDirectory() as tmp:
            out = Path(tmp) / "run"
            run_experiment({"name": "cert", "steps": [GAP_STEP]}, out)
            manifest = json.loads((out / "manifest.json").read_text(encoding='utf-8'))
            self.assertEqual(manifest["name"], "cert")
            self.assertEqual(manifest["steps"][0]["files"], ["gap.json", "gap.csv"])
            summary = json.loads((out / "gap.json").read_text(encoding='utf-8'))["summary"]
            self.assertEqual(summary["n"], 1)
            self.assertEqual(list(pd.read_csv(out / "gap.csv").columns), ['kind', 'value', 'log_value'])

    def test_same_config_same_manifest(self):
        config = {"seed": 5, "steps": [GAP_STEP, POSTERIOR_STEP]}
        first = run_experiment(config).manifest
        second = run_experiment(config).manifest
        first.pop("created_at")
        second.pop("created_at")
        self.assertEqual(first, second)

    def test_step_params_are_validated(self):
        step = {"kind": "certificate", "params": {"kind": "gap", "n": 5, "beta": 0.5, "delta": 3}}
        with self.assertRaisesMessage(InputError, "alpha_star"):
            run_experiment({"steps": [step]})

    def test_versions_include_python(self):
        self.assertIn("python", package_versions())
