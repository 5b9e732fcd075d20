"""
Finite graphs: construction, BFS balls, boundaries, volume growth and
prefix-connected orderings.

Vertices are dense 0-based integers. A Graph is immutable once built and can be
shared freely between workers.
"""
import logging
import math
from collections import deque
from dataclasses import dataclass, field

import networkx as nx
import numpy as np

from . import streams
from .exceptions import DisconnectedGraph, InputError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Graph:
    num_vertices: int
    edges: tuple
    adjacency: tuple = field(repr=False, compare=False)

    def degree(self, v):
        return len(self.adjacency[v])

    def degrees(self):
        return tuple(len(nbrs) for nbrs in self.adjacency)

    def max_degree(self):
        return max((len(nbrs) for nbrs in self.adjacency), default=0)

    def edge_index(self, e):
        """Position of edge e (either orientation) in ``edges``."""
        u, v = e
        key = (min(u, v), max(u, v))
        try:
            return self._edge_positions()[key]
        except KeyError:
            raise InputError(f"({u}, {v}) is not an edge of the graph.") from None

    def has_edge(self, u, v):
        return (min(u, v), max(u, v)) in self._edge_positions()

    def _edge_positions(self):
        cached = self.__dict__.get('_positions')
        if cached is None:
            cached = {e: i for i, e in enumerate(self.edges)}
            object.__setattr__(self, '_positions', cached)
        return cached

    def check_vertex(self, v):
        if not 0 <= v < self.num_vertices:
            raise InputError(f"Vertex {v} is out of range for a graph on {self.num_vertices} vertices.")

    def padded_neighbors(self):
        """(n, Δ) neighbor array padded with the sentinel index n, plus the matching edge ids (-1 pad)."""
        width = max(self.max_degree(), 1)
        nbrs = np.full((self.num_vertices, width), self.num_vertices, dtype=np.int64)
        eids = np.full((self.num_vertices, width), -1, dtype=np.int64)
        for i, (u, v) in enumerate(self.edges):
            for a, b in ((u, v), (v, u)):
                slot = int(np.argmax(nbrs[a] == self.num_vertices))
                nbrs[a, slot] = b
                eids[a, slot] = i
        return nbrs, eids

    def to_networkx(self):
        g = nx.Graph()
        g.add_nodes_from(range(self.num_vertices))
        g.add_edges_from(self.edges)
        return g


def build_graph(num_vertices, edges):
    if num_vertices < 0:
        raise InputError("num_vertices must be non-negative.")
    seen = set()
    for u, v in edges:
        u, v = int(u), int(v)
        for w in (u, v):
            if not 0 <= w < num_vertices:
                raise InputError(f"Edge endpoint {w} is out of range for {num_vertices} vertices.")
        if u == v:
            raise InputError(f"Self-loop at vertex {u} is not allowed.")
        seen.add((min(u, v), max(u, v)))
    ordered = tuple(sorted(seen))
    adjacency = [[] for _ in range(num_vertices)]
    for u, v in ordered:
        adjacency[u].append(v)
        adjacency[v].append(u)
    return Graph(num_vertices, ordered, tuple(tuple(sorted(nbrs)) for nbrs in adjacency))


def from_networkx(g):
    try:
        nodes = sorted(g.nodes())
    except TypeError:
        nodes = sorted(g.nodes(), key=str)
    mapping = {node: i for i, node in enumerate(nodes)}
    return build_graph(len(mapping), [(mapping[a], mapping[b]) for a, b in g.edges()])


def bfs_distances(g, source, radius=None):
    """Distances from ``source`` (dict), optionally truncated at ``radius``."""
    g.check_vertex(source)
    dist = {source: 0}
    queue = deque([source])
    while queue:
        x = queue.popleft()
        if radius is not None and dist[x] >= radius:
            continue
        for y in g.adjacency[x]:
            if y not in dist:
                dist[y] = dist[x] + 1
                queue.append(y)
    return dist


def distance(g, u, v):
    return bfs_distances(g, u).get(v, math.inf)


def ball(g, v, r):
    if r < 0:
        raise InputError("Ball radius must be non-negative.")
    return frozenset(bfs_distances(g, v, r))


def boundary(g, a):
    a = frozenset(a)
    for v in a:
        g.check_vertex(v)
    return frozenset(w for v in a for w in g.adjacency[v] if w not in a)


def edge_ball(g, e, l):
    u, v = e
    if not g.has_edge(u, v):
        raise InputError(f"({u}, {v}) is not an edge of the graph.")
    return ball(g, u, l) | ball(g, v, l)


def eccentricity(g, v):
    return max(bfs_distances(g, v).values())


@dataclass(frozen=True)
class GrowthProfile:
    alpha: float
    c_alpha: float
    per_radius_max_ball: tuple
    satisfied: bool


def growth_profile(g, alpha, c_alpha):
    if not 0 < alpha < 1:
        raise InputError("alpha must lie in (0, 1).")
    if c_alpha <= 0:
        raise InputError("c_alpha must be positive.")
    # Ball sizes per radius from one BFS per vertex; a ball stops growing past its eccentricity.
    cumulative = []
    for v in range(g.num_vertices):
        dist = bfs_distances(g, v)
        cumulative.append(np.cumsum(np.bincount(np.fromiter(dist.values(), dtype=np.int64))))
    max_radius = max((len(c) - 1 for c in cumulative), default=0)
    rows = tuple(
        (r, max(int(c[min(r, len(c) - 1)]) for c in cumulative))
        for r in range(1, max_radius + 1)
    )
    satisfied = all(size <= math.exp(c_alpha * r ** alpha) for r, size in rows)
    return GrowthProfile(alpha, c_alpha, rows, satisfied)


def connected_components(g):
    return [sorted(c) for c in nx.connected_components(g.to_networkx())]


def connected_ordering(g, seed, start=None):
    """
    Seeded frontier ordering: every prefix induces a connected subgraph.

    The next vertex is drawn uniformly from the current frontier (neighbors of
    the prefix that are not yet taken).
    """
    n = g.num_vertices
    if n == 0:
        return ()
    rng = streams.substream(seed, streams.ORDERING)
    first = int(rng.integers(n)) if start is None else start
    g.check_vertex(first)
    order = [first]
    seen = {first}
    frontier = list(g.adjacency[first])
    seen.update(frontier)
    while frontier:
        # swap-remove a uniformly chosen frontier vertex
        i = int(rng.integers(len(frontier)))
        frontier[i], frontier[-1] = frontier[-1], frontier[i]
        nxt = frontier.pop()
        order.append(nxt)
        for w in g.adjacency[nxt]:
            if w not in seen:
                seen.add(w)
                frontier.append(w)
    taken = set(order)
    if len(order) < n:
        missing = min(set(range(n)) - taken)
        raise DisconnectedGraph(
            f"Graph is disconnected: vertex {missing} is unreachable from vertex {first}.", vertex=missing)
    return tuple(order)


def is_prefix_connected(g, order):
    """Union-find check that each prefix of ``order`` is connected."""
    parent = {}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    components = 0
    for v in order:
        parent[v] = v
        components += 1
        for w in g.adjacency[v]:
            if w in parent:
                a, b = find(v), find(w)
                if a != b:
                    parent[a] = b
                    components -= 1
        if components != 1:
            return False
    return True


# Generators exposed through `manage.py graph gen`.

def path_graph(n):
    return build_graph(n, [(i, i + 1) for i in range(n - 1)])


def cycle_graph(n):
    if n < 3:
        raise InputError("A cycle needs at least 3 vertices.")
    return build_graph(n, [(i, (i + 1) % n) for i in range(n)])


def complete_graph(n):
    return build_graph(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def torus_graph(rows, cols):
    if rows < 3 or cols < 3:
        raise InputError("A torus needs at least 3 rows and 3 columns.")
    return from_networkx(nx.convert_node_labels_to_integers(
        nx.grid_2d_graph(rows, cols, periodic=True), ordering='sorted'))


def grid_graph(rows, cols):
    return from_networkx(nx.convert_node_labels_to_integers(
        nx.grid_2d_graph(rows, cols), ordering='sorted'))


def random_regular_graph(degree, n, seed):
    if (degree * n) % 2:
        raise InputError("degree * n must be even for a regular graph.")
    return from_networkx(nx.random_regular_graph(degree, n, seed=streams.child_seed(seed, streams.ORDERING)))


def regular_tree(degree, depth):
    """Tree in which every internal vertex has ``degree`` neighbors."""
    if degree < 2:
        raise InputError("Tree degree must be at least 2.")
    edges = []
    frontier = [0]
    count = 1
    for level in range(depth):
        nxt = []
        for v in frontier:
            children = degree if level == 0 else degree - 1
            for _ in range(children):
                edges.append((v, count))
                nxt.append(count)
                count += 1
        frontier = nxt
    return build_graph(count, edges)


def remove_vertices(g, vertices):
    keep = [v for v in range(g.num_vertices) if v not in set(vertices)]
    index = {v: i for i, v in enumerate(keep)}
    return build_graph(len(keep), [(index[u], index[v]) for u, v in g.edges if u in index and v in index])


GENERATORS = {
    'path': lambda a: path_graph(a['n']),
    'cycle': lambda a: cycle_graph(a['n']),
    'complete': lambda a: complete_graph(a['n']),
    'torus': lambda a: torus_graph(a['rows'], a['cols']),
    'grid': lambda a: grid_graph(a['rows'], a['cols']),
    'regular': lambda a: random_regular_graph(a['degree'], a['n'], a['seed']),
    'tree': lambda a: regular_tree(a['degree'], a['depth']),
}
