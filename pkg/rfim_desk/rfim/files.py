"""Reading and writing graphs, models, tables and reports."""
import json
import logging
import struct
from pathlib import Path

import numpy as np
import pandas as pd

from .exceptions import InputError
from .graphs import build_graph
from .serializers import GraphSerializer, IsingModelSerializer, jsonable, load

logger = logging.getLogger(__name__)


def read_json(path):
    try:
        return json.loads(Path(path).read_text(encoding='utf-8'))
    except FileNotFoundError:
        raise InputError(f"No such file: {path}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from None


def dumps(data):
    return json.dumps(jsonable(data), indent=2, sort_keys=True) + "\n"


def write_json(data, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(data), encoding='utf-8')
    logger.debug("Wrote %s", path)
    return path


def parse_edge_list(text):
    """'n m' on the first line, then m lines 'u v' (0-based)."""
    lines = [line.split() for line in text.splitlines() if line.strip() and not line.lstrip().startswith('#')]
    if not lines or len(lines[0]) != 2:
        raise InputError("Edge list must start with a line 'n m'.")
    try:
        n, m = (int(x) for x in lines[0])
        edges = [(int(u), int(v)) for u, v in lines[1:]]
    except ValueError:
        raise InputError("Edge list lines must hold exactly two integers.") from None
    if len(edges) != m:
        raise InputError(f"Edge list header declares {m} edges but {len(edges)} follow.")
    return build_graph(n, edges)


def format_edge_list(graph):
    rows = [f"{graph.num_vertices} {len(graph.edges)}"] + [f"{u} {v}" for u, v in graph.edges]
    return "\n".join(rows) + "\n"


def read_graph(path):
    path = Path(path)
    if path.suffix == '.json':
        return load(GraphSerializer, read_json(path), f"graph {path}")
    try:
        return parse_edge_list(path.read_text(encoding='utf-8'))
    except FileNotFoundError:
        raise InputError(f"No such file: {path}") from None


def write_graph(graph, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if path.suffix == '.json':
        return write_json(GraphSerializer(graph).data, path)
    path.write_text(format_edge_list(graph), encoding='utf-8')
    return path


def read_model(path):
    return load(IsingModelSerializer, read_json(path), f"model {path}")


def write_model(model, path, configuration=None):
    data = dict(IsingModelSerializer(model).data)
    if configuration is not None:
        data['configuration'] = jsonable(configuration)
    return write_json(data, path)


# Binary tables: little-endian uint32 n, f, free[f], then float64 probs[2^f].

def table_bytes(table):
    header = np.array([table.model.n, table.f, *table.free], dtype='<u4').tobytes()
    return header + np.asarray(table.probs, dtype='<f8').tobytes()


def write_table(table, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(table_bytes(table))
    return path


def read_table(path):
    """(n, free vertices, probabilities) from a binary table file."""
    raw = Path(path).read_bytes()
    if len(raw) < 8:
        raise InputError(f"{path} is too short for a table header.")
    n, f = struct.unpack_from('<II', raw, 0)
    offset = 8 + 4 * f
    expected = offset + 8 * (1 << f)
    if len(raw) != expected:
        raise InputError(f"{path} has {len(raw)} bytes, expected {expected} for f={f}.")
    free = tuple(int(v) for v in np.frombuffer(raw, dtype='<u4', count=f, offset=8))
    probs = np.frombuffer(raw, dtype='<f8', offset=offset).copy()
    return n, free, probs


# Tabular reports

def frame(rows, columns):
    return pd.DataFrame([tuple(jsonable(x) for x in row) for row in rows], columns=list(columns))


def write_csv(rows, columns, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame(rows, columns).to_csv(path, index=False)
    return path


TRAJECTORY_COLUMNS = ('step', 'magnetization', 'energy')
WSM_COLUMNS = ('vertex', 'radius', 'mean_delta', 'stderr')


def write_trajectory(trajectory, path):
    return write_csv(trajectory.rows(), TRAJECTORY_COLUMNS, path)


def write_wsm(report, path):
    return write_csv(report.csv_rows(), WSM_COLUMNS, path)
