import tempfile
from pathlib import Path

import numpy as np
import pandas as pd
from django.test import SimpleTestCase

from rfim.exceptions import InputError
from rfim.files import (WSM_COLUMNS, format_edge_list, parse_edge_list, read_graph, read_json, read_model,
                        read_table, write_csv, write_graph, write_model, write_table)
from rfim.graphs import cycle_graph, path_graph
from rfim.models import SpinConfiguration, make_model
from rfim.oracle import gibbs_table


class EdgeListTests(SimpleTestCase):
    def test_parse(self):
        graph = parse_edge_list("# triangle\n3 3\n0 1\n1 2\n2 0\n")
        self.assertEqual(graph.edges, ((0, 1), (0, 2), (1, 2)))

    def test_header_mismatch(self):
        with self.assertRaisesMessage(InputError, "declares 2 edges"):
            parse_edge_list("3 2\n0 1\n")

    def test_bad_lines(self):
        for text in ("", "3\n", "3 1\n0 1 2\n", "3 1\n0 x\n"):
            with self.assertRaises(InputError):
                parse_edge_list(text)

    def test_format_parses_back(self):
        graph = cycle_graph(5)
        self.assertEqual(parse_edge_list(format_edge_list(graph)), graph)


class FileTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.dir = Path(self.tmp.name)

    def test_graph_files(self):
        graph = path_graph(4)
        for name in ("g.txt", "g.json"):
            write_graph(graph, self.dir / name)
            self.assertEqual(read_graph(self.dir / name), graph)

    def test_missing_and_broken_json(self):
        with self.assertRaises(InputError):
            read_json(self.dir / "missing.json")
        (self.dir / "broken.json").write_text("{", encoding='utf-8')
        with self.assertRaises(InputError):
            read_json(self.dir / "broken.json")

    def test_model_with_configuration(self):
        model = make_model(path_graph(3), 0.4, [0.1, 0.0, -0.2], pinning={0: 1})
        config = SpinConfiguration.from_values([1, -1, -1], model.convention)
        path = write_model(model, self.dir / "out" / "model.json", configuration=config)
        self.assertEqual(read_json(path)["configuration"], {"convention": "pm", "spins": [1, -1, -1]})
        loaded = read_model(path)
        self.assertEqual(loaded.pinning, {0: 1})
        np.testing.assert_allclose(loaded.field, model.field)

    def test_binary_table(self):
        model = make_model(path_graph(3), 0.3, [0.2, 0.0, 0.1], pinning={1: -1})
        table = gibbs_table(model)
        path = write_table(table, self.dir / "table.bin")
        self.assertEqual(path.stat().st_size, 8 + 4 * 2 + 8 * 4)
        n, free, probs = read_table(path)
        self.assertEqual((n, free), (3, (0, 2)))
        np.testing.assert_array_equal(probs, table.probs)

    def test_truncated_table(self):
        path = self.dir / "short.bin"
        path.write_bytes(b"\x03\x00\x00\x00\x02\x00\x00\x00\x00")
        with self.assertRaises(InputError):
            read_table(path)

    def test_csv(self):
        path = write_csv([(0, 1, 0.25, 0.01), (0, 2, np.float64(0.125), 0.0)], WSM_COLUMNS, self.dir / "wsm.csv")
        frame = pd.read_csv(path)
        self.assertEqual(list(frame.columns), list(WSM_COLUMNS))
        self.assertEqual(frame["mean_delta"].tolist(), [0.25, 0.125])
