"""
Weak spatial mixing: ball influences, field-averaged decay estimates and the
separation plans used to factorize trace moments.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from . import streams
from .exceptions import InputError, ValidationFailure
from .graphs import ball, bfs_distances, boundary
from .models import make_model, sample_field, spin_values
from .oracle import gibbs_table, mean_and_covariance
from .workers import parallel_map

logger = logging.getLogger(__name__)

DEFAULT_C_GRID = (0.5, 1.0, 2.0, 4.0, 8.0, 16.0)


def open_ball(g, u, ell):
    return ball(g, u, ell - 1)


def wsm_delta(model, u, ell):
    """
    TV distance between the marginals at u under all-top and all-bottom
    boundary conditions around the ball of radius ell, i.e. the vertices at
    distance less than ell from u. The boundary is the sphere at distance ell.
    """
    g = model.graph
    g.check_vertex(u)
    if ell < 1:
        raise InputError("WSM radius must be at least 1.")
    inner = open_ball(g, u, ell)
    outer = boundary(g, inner)
    if not outer:
        return 0.0
    vertices = sorted(inner | outer)
    index = {v: i for i, v in enumerate(vertices)}
    sub = model.induced(vertices)
    # boundary condition replaces any pinning already on the outer shell
    base = sub.replace(pinning={v: s for v, s in sub.pinning.items() if vertices[v] not in outer})
    bottom, top = spin_values(model.convention)
    marginals = []
    for value in (top, bottom):
        pinned = base.pin({index[w]: value for w in outer})
        if index[u] in pinned.pinning:
            return 0.0
        table = gibbs_table(pinned)
        marginals.append(table.marginal_top()[table.free.index(index[u])])
    return float(abs(marginals[0] - marginals[1]))


@dataclass(frozen=True)
class WsmRow:
    vertex: int
    radius: int
    mean: float
    stderr: float


@dataclass(frozen=True)
class WsmReport:
    rows: tuple
    radii: tuple
    sup_mean: tuple
    trial_means: tuple
    fitted_C: float
    satisfied: dict
    sources: dict = field(default_factory=dict)

    def csv_rows(self):
        for row in self.rows:
            yield row.vertex, row.radius, row.mean, row.stderr


def _wsm_trial(args):
    graph, beta, dist, vertices, radii, t, sl_draws, seed, trial = args
    field_values = sample_field(dist, graph.num_vertices, streams.child_seed(seed, streams.FIELD, trial)).values
    model = make_model(graph, beta, field_values)
    models = [model]
    if t > 0:
        from .boosting import sl_boost
        models = [sl_boost(model, t, seed=streams.child_seed(seed, streams.SL_NOISE, trial, k)).boosted_model
                  for k in range(sl_draws)]
    out = np.zeros((len(vertices), len(radii)))
    for m in models:
        for i, v in enumerate(vertices):
            for j, r in enumerate(radii):
                out[i, j] += wsm_delta(m, v, r)
    return out / len(models)


def fit_decay_constant(radii, sup_mean):
    """Least-squares fit of log delta(r) ~ log C - r / C over radii with positive delta."""
    points = [(r, d) for r, d in zip(radii, sup_mean) if d > 0]
    if not points:
        return 0.0
    r = np.array([p[0] for p in points], dtype=float)
    logd = np.log([p[1] for p in points])

    def loss(log_c):
        c = math.exp(log_c)
        return float(((logd - math.log(c) + r / c) ** 2).sum())

    best = optimize.minimize_scalar(loss, bounds=(-10.0, 10.0), method='bounded')
    return math.exp(best.x)


def decay_satisfied(radii, sup_mean, c):
    return all(d <= c * math.exp(-r / c) + 1e-12 for r, d in zip(radii, sup_mean))


def estimate_wsm(graph, beta, dist, radii, field_trials, seed, vertices=None, t=0.0, sl_draws=1,
                 c_grid=DEFAULT_C_GRID, workers=None):
    """
    Field-averaged delta(v, r) per vertex and radius. With t > 0 the boosted
    measures are used, averaging over sl_draws SL realizations per field.
    """
    if field_trials < 1:
        raise InputError("Need at least one field trial.")
    vertices = tuple(range(graph.num_vertices)) if vertices is None else tuple(vertices)
    radii = tuple(int(r) for r in radii)
    tasks = [(graph, beta, dist, vertices, radii, t, sl_draws, seed, i) for i in range(field_trials)]
    stack = np.array(parallel_map(_wsm_trial, tasks, workers=workers, desc="wsm"))
    mean = stack.mean(axis=0)
    stderr = stack.std(axis=0, ddof=1) / math.sqrt(field_trials) if field_trials > 1 else np.zeros_like(mean)
    rows = tuple(WsmRow(v, r, float(mean[i, j]), float(stderr[i, j]))
                 for i, v in enumerate(vertices) for j, r in enumerate(radii))
    sup_mean = tuple(float(x) for x in mean.max(axis=0)) if len(vertices) else tuple(0.0 for _ in radii)
    fitted = fit_decay_constant(radii, sup_mean)
    satisfied = {float(c): decay_satisfied(radii, sup_mean, c) for c in c_grid}
    logger.info("WSM over %d fields: sup means %s, fitted C=%.4g", field_trials, sup_mean, fitted)
    return WsmReport(rows, radii, sup_mean, tuple(tuple(float(x) for x in row) for row in stack.mean(axis=1)),
                     fitted, satisfied, {'field_trials': field_trials, 'sl_draws': sl_draws if t > 0 else 0,
                                         't': float(t)})


def decay_confidence(report, r_small, r_large):
    """z-score of the paired per-field difference of vertex-averaged deltas between two radii."""
    i, j = report.radii.index(r_small), report.radii.index(r_large)
    diff = np.array([row[i] - row[j] for row in report.trial_means])
    if len(diff) < 2:
        raise InputError("Need at least two field trials.")
    sd = diff.std(ddof=1)
    if sd == 0:
        return math.inf if diff.mean() > 0 else 0.0
    return float(diff.mean() / (sd / math.sqrt(len(diff))))


# Separation plans

@dataclass(frozen=True)
class SeparationPlan:
    points: tuple
    r: tuple
    nearest: tuple
    buckets: dict
    k_star: int
    selected: tuple
    ell: dict
    ell_real: dict

    def separated(self, distances):
        for i in self.selected:
            if distances[i][i - 1] < self.ell[i]:
                return False
            for j in self.selected:
                if i < j and distances[i][j] < 2 * (self.ell[i] + self.ell[j]):
                    return False
        return True


def _point_distances(g, points):
    out = []
    for u in points:
        dist = bfs_distances(g, u)
        row = []
        for v in points:
            if v not in dist:
                raise InputError(f"Points {u} and {v} lie in different components.")
            row.append(dist[v])
        out.append(row)
    return out


def build_separation_plan(g, points):
    """
    For the sequence u_0..u_{p-1}: r_i is a quarter of the distance to the
    nearest earlier point, indices are bucketed by floor(r_i) in [2^k, 2^{k+1}),
    and the bucket maximizing |Q_k| 2^k (smallest k on ties) gets radii
    ell_i = floor(d(u_i, {u_{i-1}} u A - {u_i}) / 4).
    """
    points = tuple(int(p) for p in points)
    for p in points:
        g.check_vertex(p)
    d = _point_distances(g, points)
    r, nearest = [None], [None]
    buckets = {}
    for i in range(1, len(points)):
        j = min(range(i), key=lambda k: (d[i][k], k))
        r.append(d[i][j] / 4.0)
        nearest.append(j)
        whole = math.floor(r[i])
        if whole >= 1:
            buckets.setdefault(whole.bit_length() - 1, []).append(i)
    buckets = {k: tuple(v) for k, v in sorted(buckets.items())}
    if not buckets:
        return SeparationPlan(points, tuple(r), tuple(nearest), buckets, None, (), {}, {})
    k_star = max(buckets, key=lambda k: (len(buckets[k]) << k, -k))
    selected = buckets[k_star]
    ell_real = {}
    for i in selected:
        others = [i - 1] + [j for j in selected if j != i]
        ell_real[i] = min(d[i][j] for j in others) / 4.0
        if ell_real[i] < r[i] / 2.0:
            raise ValidationFailure(
                f"Separation radius {ell_real[i]:.4g} of point {i} is below half its nearest-point radius {r[i]:.4g}."
            )
    plan = SeparationPlan(points, tuple(r), tuple(nearest), buckets, k_star, selected,
                          {i: math.floor(v) for i, v in ell_real.items()}, ell_real)
    if not plan.separated(d):
        raise ValidationFailure("Separation plan radii violate the separation condition.")
    return plan


def factorized_bound(model, plan):
    """prod over selected i of sum_{v in B(u_i, ell_i)} (1 + [v = u_i]) delta(v, ell_i)."""
    total = 1.0
    for i in plan.selected:
        u, ell = plan.points[i], plan.ell[i]
        total *= sum((2.0 if v == u else 1.0) * wsm_delta(model, v, ell) for v in open_ball(model.graph, u, ell))
    return total


@dataclass(frozen=True)
class FkgCorrelationReport:
    checks: int
    violations: tuple
    worst_excess: float

    @property
    def passed(self):
        return not self.violations


def fkg_correlation_check(model, max_vertices=8):
    """
    Cov(sigma_u, sigma_v) <= delta(u, ell) for every 1 <= ell <= d(u, v).
    """
    model.require_ferromagnetic("fkg_correlation_check")
    if model.n > max_vertices:
        raise InputError(f"fkg_correlation_check is limited to {max_vertices} vertices.")
    table = gibbs_table(model)
    _, cov = mean_and_covariance(table)
    deltas = {}
    checks, violations, worst = 0, [], -math.inf
    for a, u in enumerate(table.free):
        dist = bfs_distances(model.graph, u)
        for b, v in enumerate(table.free):
            if u == v or v not in dist:
                continue
            for ell in range(1, dist[v] + 1):
                if (u, ell) not in deltas:
                    deltas[u, ell] = wsm_delta(model, u, ell)
                excess = cov[a, b] - deltas[u, ell]
                worst = max(worst, excess)
                checks += 1
                if excess > 1e-10:
                    violations.append((u, v, ell, float(excess)))
    return FkgCorrelationReport(checks, tuple(violations), float(worst) if checks else 0.0)
