"""
Field-driven site percolation, Galton-Watson cluster tails and the coupled
disagreement experiment.

A site x is open when |h_x| <= K or min(U_x, 1 - U_x) <= p0 / 4. The same U_x
drives the grand coupling at x, so closed sites are decided identically in
every coupled chain.
"""
import logging
import math
from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy.stats import binom

from . import streams
from .conf import rfim_setting
from .exceptions import InputError
from .glauber import GrandCoupling
from .models import QuenchedField, assumption_params, edge_tilt, make_model, sample_field, to_zero_one, xi_star
from .oracle import cor2_norms, sweep_cell, sup_cor2_over_pinnings
from .workers import parallel_map

logger = logging.getLogger(__name__)

FIELD_OPEN = 'field'
UNIFORM_OPEN = 'uniform'
CLOSED = 'closed'


def check_p0(p0):
    if not 0 < p0 < 1:
        raise InputError(f"p0 must lie in (0, 1), got {p0}.")


@dataclass(frozen=True, eq=False)
class PercolationRealization:
    graph: object
    open_set: frozenset
    provenance: tuple
    seed: int
    uniforms: np.ndarray

    def is_open(self, v):
        return v in self.open_set

    @property
    def open_fraction(self):
        return len(self.open_set) / max(self.graph.num_vertices, 1)


def percolate(g, field, K, p0, seed, uniforms=None):
    check_p0(p0)
    values = np.asarray(field.values if isinstance(field, QuenchedField) else field, dtype=float)
    if len(values) != g.num_vertices:
        raise InputError(f"Field has {len(values)} values for {g.num_vertices} vertices.")
    if uniforms is None:
        uniforms = streams.shared_uniforms(seed, streams.PERCOLATION, g.num_vertices)
    field_open = np.abs(values) <= K
    uniform_open = np.minimum(uniforms, 1.0 - uniforms) <= p0 / 4.0
    provenance = tuple(
        FIELD_OPEN if a else UNIFORM_OPEN if b else CLOSED for a, b in zip(field_open, uniform_open)
    )
    open_set = frozenset(np.flatnonzero(field_open | uniform_open).tolist())
    return PercolationRealization(g, open_set, provenance, seed, np.asarray(uniforms))


def cluster_of_edge(realization, e):
    """Open cluster of the edge with both endpoints forced open."""
    g = realization.graph
    u, v = e
    if not g.has_edge(u, v):
        raise InputError(f"({u}, {v}) is not an edge of the graph.")
    cluster = {u, v}
    queue = deque([u, v])
    while queue:
        x = queue.popleft()
        for y in g.adjacency[x]:
            if y not in cluster and realization.is_open(y):
                cluster.add(y)
                queue.append(y)
    return frozenset(cluster)


# Galton-Watson total progeny

def _check_tree_params(delta, p0):
    if delta < 3:
        raise InputError("The branching bounds need delta >= 3.")
    check_p0(p0)


def otter_dwass_pmf(delta, p0, x):
    """P(T = x) = (2/x) P(Bin((delta-1) x, p0) = x - 2) for a two-root forest."""
    _check_tree_params(delta, p0)
    x = np.asarray(x)
    if (x < 2).any():
        raise InputError("Total progeny of a two-root forest is at least 2.")
    pmf = 2.0 / x * binom.pmf(x - 2, (delta - 1) * x, p0)
    return float(pmf) if pmf.ndim == 0 else pmf


def exact_tail(delta, p0, m):
    """P(T >= m), summed upward from m until the terms are negligible."""
    if m <= 2:
        return 1.0
    xi = xi_star(p0, delta)
    upper = int(m) + int(math.ceil(60.0 / max(xi, 1e-3))) + 100
    return float(np.sum(otter_dwass_pmf(delta, p0, np.arange(int(math.ceil(m)), upper))))


@dataclass(frozen=True)
class TailBound:
    m: float
    bound: float
    xi_star: float
    alpha_star: float
    exponential_moment_bound: float


def tail_prefactor(delta, p0):
    xi = xi_star(p0, delta)
    return 2.0 / -math.expm1(-xi) * ((1 - p0) / (p0 * (delta - 2))) ** 2


def cluster_tail_bound(delta, p0, m):
    _check_tree_params(delta, p0)
    if p0 * (delta - 1) >= 1:
        raise InputError("The tail bound needs a subcritical tree: p0 (delta - 1) < 1.")
    xi = xi_star(p0, delta)
    alpha = xi / 2.0
    c = tail_prefactor(delta, p0)
    # P(T = x) <= c e^{-xi x} summed against e^{alpha x} from x = 2
    moment = c * math.exp(-2.0 * alpha) / -math.expm1(-alpha)
    return TailBound(m, c * math.exp(-xi * m), xi, alpha, moment)


def simulate_total_progeny(delta, p0, forests, seed, cap=100_000):
    """Forward simulation: two roots, Bin(delta - 1, p0) children per individual. Totals above ``cap`` are clipped."""
    _check_tree_params(delta, p0)
    rng = streams.substream(seed, streams.GALTON_WATSON)
    alive = np.full(forests, 2, dtype=np.int64)
    total = alive.copy()
    while alive.any():
        births = rng.binomial((delta - 1) * alive, p0)
        total += births
        alive = np.where(total > cap, 0, births)
    return np.minimum(total, cap + 1)


@dataclass(frozen=True)
class ProgenyComparison:
    buckets: int
    max_z: float
    exceed_3sigma: int


def compare_progeny(totals, delta, p0, max_x=30):
    """Per-bucket z-scores of simulated progeny frequencies against the exact pmf (x = 2..max_x)."""
    totals = np.asarray(totals)
    xs = np.arange(2, max_x + 1)
    pmf = otter_dwass_pmf(delta, p0, xs)
    counts = np.bincount(totals, minlength=max_x + 1)[2:max_x + 1]
    n = len(totals)
    sd = np.sqrt(n * pmf * (1 - pmf))
    keep = sd > 0
    z = np.abs(counts[keep] - n * pmf[keep]) / sd[keep]
    return ProgenyComparison(int(keep.sum()), float(z.max(initial=0.0)), int((z > 3).sum()))


# Coupled disagreement

EXPLORE = 'explore'
BFS = 'bfs'


def _bfs_from(g, sources):
    order = list(sources)
    seen = set(sources)
    queue = deque(sources)
    while queue:
        x = queue.popleft()
        for y in g.adjacency[x]:
            if y not in seen:
                seen.add(y)
                order.append(y)
                queue.append(y)
    order.extend(v for v in range(g.num_vertices) if v not in seen)
    return order


def exploration_order(g, e, is_open):
    """
    Reveal u, v, then every neighbor of a revealed open vertex (closed ones stop
    the search), then everything else in BFS order. Each choice depends only on
    the openness of vertices already revealed.
    """
    u, v = e
    order = [u, v]
    seen = {u, v}
    queue = deque([u, v])
    while queue:
        x = queue.popleft()
        if x not in (u, v) and not is_open(x):
            continue
        for y in g.adjacency[x]:
            if y not in seen:
                seen.add(y)
                order.append(y)
                queue.append(y)
    order.extend(y for y in _bfs_from(g, [u, v]) if y not in seen)
    return order


@dataclass(frozen=True)
class DisagreementResult:
    edge: tuple
    theta: float
    disagreement_set: frozenset
    cluster: frozenset
    contained: bool
    order: tuple


def disagreement_experiment(model01, e, theta, extra_pinning, field, K, p0, seed, order=EXPLORE):
    """
    Grand-couple nu = (1 - theta) (x) mu^tau with nu(. | sigma_u = sigma_v = 1) using the
    percolation uniforms, and test whether they disagree only inside the cluster of e.
    """
    model01.require_ferromagnetic("disagreement_experiment")
    g = model01.graph
    u, v = e
    if not g.has_edge(u, v):
        raise InputError(f"({u}, {v}) is not an edge of the graph.")
    nu = edge_tilt(model01, theta, extra_pinning)
    if (nu.couplings < -1e-12).any():
        raise InputError("theta beyond theta* makes a tilted coupling negative; the coupling needs theta <= theta*.")
    conditioned = nu.pin({u: 1, v: 1})
    realization = percolate(g, field, K, p0, seed)
    if order == EXPLORE:
        reveal = exploration_order(g, (u, v), realization.is_open)
    elif order == BFS:
        reveal = _bfs_from(g, [u, v])
    else:
        raise InputError(f"Unknown revelation order {order!r}; use 'explore' or 'bfs'.")
    coupling = GrandCoupling([nu, conditioned])
    for x in reveal:
        coupling.reveal(x, realization.uniforms[x])
    cluster = cluster_of_edge(realization, (u, v))
    disagreement = coupling.disagreements
    return DisagreementResult((u, v), theta, disagreement, cluster, disagreement <= cluster, tuple(reveal))


# Row/column sums of the second-order correlation matrix over quenched fields

def prop_tail_bound(alpha_star, gamma, m):
    """(2 / ((1 - e^{-a})(1 - e^{-2a}))) e^{2 gamma} e^{-a m}."""
    c = 2.0 / (-math.expm1(-alpha_star) * -math.expm1(-2.0 * alpha_star))
    return c * math.exp(2.0 * gamma - alpha_star * m)


def _sampled_sup(model01, theta_grid, count, seed):
    rng = streams.substream(seed, streams.PINNING)
    free = model01.free_vertices
    best_row = best_col = 0.0
    for _ in range(count):
        codes = rng.integers(3, size=len(free))
        pinning = {w: int(c == 2) for w, c in zip(free, codes) if c}
        for _, row, col, _ in sweep_cell((model01, tuple(theta_grid), pinning)):
            best_row, best_col = max(best_row, row), max(best_col, col)
    return best_row, best_col


def _tail_trial(args):
    graph, beta, dist, theta_grid, mode, count, seed, trial = args
    field = sample_field(dist, graph.num_vertices, streams.child_seed(seed, streams.FIELD, trial))
    model01 = to_zero_one(make_model(graph, beta, field.values))
    if mode == 'exact':
        sweep = sup_cor2_over_pinnings(model01, theta_grid, workers=1)
        return sweep.max_row_sum, sweep.max_col_sum
    return _sampled_sup(model01, theta_grid, count, streams.child_seed(seed, streams.PINNING, trial))


@dataclass(frozen=True)
class TailRow:
    m: float
    row_frequency: float
    column_frequency: float
    bound: float
    row_ok: bool
    column_ok: bool


@dataclass(frozen=True)
class RowSumTailReport:
    mode: str
    trials: int
    delta: int
    alpha_star: float
    gamma_star: float
    rows: tuple
    row_sums: tuple
    column_sums: tuple


def row_sum_tail_report(graph, beta, dist, K, p0, trials, seed, m_grid, theta_grid=None, mode='auto', workers=None):
    """
    Over quenched fields, how often the sup over pinnings and tilts of the Cor2 row
    sums exceeds delta * m (columns: 2 delta * m), next to the closed-form bound.
    Frequencies are compared against the bound at 99% one-sided confidence.
    """
    from .localization import default_t_grid
    # the cluster constants need a degree bound of at least 3
    delta = max(graph.max_degree(), 3)
    params = assumption_params(p0, K, beta, delta)
    if not params.valid:
        logger.warning("Parameters (p0=%s, K=%s, beta=%s, delta=%s) fail the large-disorder assumption", p0, K, beta,
                       delta)
    theta_grid = default_t_grid(beta) if theta_grid is None else list(theta_grid)
    if mode == 'auto':
        mode = 'exact' if graph.num_vertices <= rfim_setting('SWEEP_MAX_FREE') else 'sampled'
    if mode not in ('exact', 'sampled'):
        raise InputError(f"Unknown sweep mode {mode!r}.")
    count = rfim_setting('SAMPLED_PINNINGS')
    logger.info("Row-sum tails: %d fields, %s mode", trials, mode)
    sums = parallel_map(_tail_trial, [(graph, beta, dist, tuple(theta_grid), mode, count, seed, i)
                                      for i in range(trials)], workers=workers, desc="row-sum tails")
    row_sums = np.array([s[0] for s in sums])
    col_sums = np.array([s[1] for s in sums])
    rows = []
    for m in m_grid:
        bound = prop_tail_bound(params.alpha_star, params.gamma_star, m)
        capped = min(bound, 1.0)
        slack = 2.326 * math.sqrt(capped * (1 - capped) / trials) + 1.0 / trials
        row_freq = float((row_sums > delta * m).mean())
        col_freq = float((col_sums > 2 * delta * m).mean())
        rows.append(TailRow(m, row_freq, col_freq, bound, row_freq <= bound + slack, col_freq <= bound + slack))
    return RowSumTailReport(mode, trials, delta, params.alpha_star, params.gamma_star, tuple(rows),
                            tuple(row_sums.tolist()), tuple(col_sums.tolist()))


@dataclass(frozen=True)
class NormCheck:
    opnorm: float
    rowsum_max: float
    colsum_max: float
    bound: float
    ok: bool


def norm_interpolation_check(matrix):
    """||A||_2 <= sqrt(max row sum * max column sum)."""
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise InputError("norm_interpolation_check needs a square matrix.")
    row, col, op = cor2_norms(matrix)
    bound = math.sqrt(row * col)
    return NormCheck(op, row, col, bound, op <= bound * (1 + 1e-12) + 1e-12)
