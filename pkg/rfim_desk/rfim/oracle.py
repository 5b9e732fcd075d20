"""
Brute-force ground truth for small models.

A GibbsTable enumerates the 2^f configurations of the free vertices, taken in
ascending vertex order with the first free vertex as the most significant bit:
on two free vertices the rows are (bottom, bottom), (bottom, top), (top, bottom),
(top, top).
"""
import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, optimize, sparse
from scipy.special import expit, logsumexp, xlogy

from . import streams
from .conf import rfim_setting
from .exceptions import CapacityError, InfeasiblePinning, InputError, ValidationFailure, check_capacity
from .models import ZERO_ONE, edge_tilt, spin_values
from .workers import parallel_map, progress

logger = logging.getLogger(__name__)

CHUNK = 1 << 16
GAP_AGREEMENT = 1e-9


def free_bits(f, start=0, stop=None):
    """Top-indicators (rows start..stop-1, f columns) of the enumeration order."""
    stop = (1 << f) if stop is None else stop
    idx = np.arange(start, stop, dtype=np.int64)
    shifts = np.arange(f - 1, -1, -1, dtype=np.int64)
    return ((idx[:, None] >> shifts) & 1).astype(bool)


def _chunks(f):
    total = 1 << f
    for start in range(0, total, CHUNK):
        yield start, min(start + CHUNK, total)


@dataclass(frozen=True, eq=False)
class GibbsTable:
    model: object
    free: tuple
    probs: np.ndarray
    log_partition: float
    log_probs: np.ndarray = field(repr=False, default=None)

    @property
    def f(self):
        return len(self.free)

    def __len__(self):
        return len(self.probs)

    def free_values(self, start=0, stop=None):
        bottom, top = spin_values(self.model.convention)
        return np.where(free_bits(self.f, start, stop), top, bottom).astype(np.int8)

    def full_states(self, start=0, stop=None):
        """Full-length configurations (pinned values included) for rows start..stop-1."""
        base = self.model.pinned_state()
        values = self.free_values(start, stop)
        states = np.repeat(base[None, :], len(values), axis=0)
        if self.f:
            states[:, list(self.free)] = values
        return states

    def index_of(self, state):
        """Row of a full configuration; pinned coordinates must agree with the pinning."""
        _, top = spin_values(self.model.convention)
        for v, s in self.model.pinning.items():
            if state[v] != s:
                raise InputError(f"Configuration disagrees with the pinning at vertex {v}.")
        idx = 0
        for v in self.free:
            idx = (idx << 1) | int(state[v] == top)
        return idx

    def marginal_top(self):
        """P(sigma_v = top) for each free vertex."""
        out = np.zeros(self.f)
        for start, stop in _chunks(self.f):
            out += self.probs[start:stop] @ free_bits(self.f, start, stop)
        return out

    def lift(self, free):
        """This table's probabilities in the index space of a larger free set (zeros off the pinned slice)."""
        free = tuple(free)
        if not set(self.free) <= set(free):
            raise InputError("lift needs a superset of the table's free vertices.")
        _, top = spin_values(self.model.convention)
        pos = {v: i for i, v in enumerate(free)}
        out = np.zeros(1 << len(free))
        bits = free_bits(self.f)
        idx = np.zeros(len(self.probs), dtype=np.int64)
        for v in free:
            if v in self.model.pinning:
                col = np.full(len(idx), self.model.pinning[v] == top)
            elif v in self.free:
                col = bits[:, self.free.index(v)]
            else:
                raise InputError(f"Vertex {v} is neither free nor pinned in the table's model.")
            idx |= col.astype(np.int64) << (len(free) - 1 - pos[v])
        out[idx] = self.probs
        return out


def _reduced(model):
    """Free-vertex energy pieces: effective field, free-free edges, constant from the pinning."""
    free = model.free_vertices
    pos = {v: i for i, v in enumerate(free)}
    h_eff = np.array([model.field[v] for v in free], dtype=float)
    const = sum(model.field[v] * s for v, s in model.pinning.items())
    ea, eb, jj = [], [], []
    for (u, v), j in zip(model.graph.edges, model.couplings):
        if u in pos and v in pos:
            ea.append(pos[u])
            eb.append(pos[v])
            jj.append(j)
        elif u in pos:
            h_eff[pos[u]] += j * model.pinning[v]
        elif v in pos:
            h_eff[pos[v]] += j * model.pinning[u]
        else:
            const += j * model.pinning[u] * model.pinning[v]
    return free, h_eff, np.array(ea, dtype=np.int64), np.array(eb, dtype=np.int64), np.array(jj), float(const)


def log_weights(model):
    """H over the enumeration order of the free vertices."""
    free, h_eff, ea, eb, jj, const = _reduced(model)
    f = len(free)
    bottom, top = spin_values(model.convention)
    out = np.empty(1 << f)
    for start, stop in _chunks(f):
        values = np.where(free_bits(f, start, stop), top, bottom).astype(float)
        energy = values @ h_eff + const
        if len(jj):
            energy += (values[:, ea] * values[:, eb]) @ jj
        out[start:stop] = energy
    return free, out


def gibbs_table(model):
    check_capacity(len(model.free_vertices), rfim_setting('ORACLE_MAX_FREE'), "gibbs_table")
    free, logw = log_weights(model)
    log_z = float(logsumexp(logw))
    log_probs = logw - log_z
    probs = np.exp(log_probs)
    return GibbsTable(model, free, probs, log_z, log_probs)


def conditional_table(model, extra_pinning):
    return gibbs_table(model.pin(extra_pinning))


def mean_and_covariance(table):
    f = table.f
    mean = np.zeros(f)
    second = np.zeros((f, f))
    for start, stop in _chunks(f):
        values = table.free_values(start, stop).astype(float)
        p = table.probs[start:stop]
        mean += p @ values
        second += values.T @ (values * p[:, None])
    return mean, second - np.outer(mean, mean)


def _edge_indicators(table, start, stop):
    states = table.full_states(start, stop)
    edges = np.asarray(table.model.graph.edges, dtype=np.int64).reshape(-1, 2)
    return ((states[:, edges[:, 0]] == 1) & (states[:, edges[:, 1]] == 1)).astype(float)


def edge_event_probabilities(table):
    """(mu(uv) per edge, joint mu(uv and wz) matrix)."""
    m = len(table.model.graph.edges)
    single = np.zeros(m)
    joint = np.zeros((m, m))
    for start, stop in _chunks(table.f):
        ind = _edge_indicators(table, start, stop)
        p = table.probs[start:stop]
        single += p @ ind
        joint += ind.T @ (ind * p[:, None])
    return single, joint


def cor2_matrix(table, method='joint'):
    """
    Second-order correlation matrix over edges: entry (uv, wz) = mu(wz | uv) - mu(wz),
    with a zero row whenever mu(uv) = 0.

    ``method='joint'`` takes joint-probability ratios from one enumeration;
    ``method='condition'`` pins u = v = 1 and renormalizes a fresh table per row.
    """
    table.model.require_convention(ZERO_ONE, "cor2_matrix")
    single, joint = edge_event_probabilities(table)
    m = len(single)
    out = np.zeros((m, m))
    if method == 'joint':
        for i in range(m):
            if single[i] > 0:
                out[i] = joint[i] / single[i] - single
    elif method == 'condition':
        for i, (u, v) in enumerate(table.model.graph.edges):
            try:
                cond = conditional_table(table.model, {u: 1, v: 1})
            except InfeasiblePinning:
                continue
            cond_single, _ = edge_event_probabilities(cond)
            out[i] = cond_single - single
    else:
        raise InputError(f"Unknown cor2 method {method!r}.")
    return out


def tv_distance(t1, t2):
    p1 = t1.probs if isinstance(t1, GibbsTable) else np.asarray(t1)
    p2 = t2.probs if isinstance(t2, GibbsTable) else np.asarray(t2)
    if isinstance(t1, GibbsTable) and isinstance(t2, GibbsTable):
        if t1.free != t2.free or t1.model.n != t2.model.n:
            raise InputError("Tables index different configuration spaces; lift one first.")
    if p1.shape != p2.shape:
        raise InputError(f"Cannot compare distributions of sizes {len(p1)} and {len(p2)}.")
    return float(0.5 * np.abs(p1 - p2).sum())


def sample_from_table(table, size, rng):
    """Exact i.i.d. row indices."""
    cdf = np.cumsum(table.probs)
    cdf[-1] = 1.0
    return np.searchsorted(cdf, rng.random(size), side='right')


# Spectral quantities of heat-bath Glauber dynamics

@dataclass(frozen=True)
class SpectralReport:
    free_count: int
    gap: float
    gap_rayleigh: float
    at_variance_constant: float = None
    mlsi_lower_estimate: float = None
    notes: tuple = ()


def _flip_pairs(f):
    """(x, y, site) for every unordered pair of configurations differing at one site."""
    idx = np.arange(1 << f, dtype=np.int64)
    xs, ys, sites = [], [], []
    for j in range(f):
        bit = 1 << (f - 1 - j)
        low = idx[(idx & bit) == 0]
        xs.append(low)
        ys.append(low | bit)
        sites.append(np.full(len(low), j))
    if not xs:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty, empty
    return np.concatenate(xs), np.concatenate(ys), np.concatenate(sites)


def _spectral_table(model, cap_key, what):
    free = model.free_vertices
    check_capacity(len(free), rfim_setting(cap_key), what)
    if not free:
        raise InputError(f"{what} needs at least one free vertex.")
    return gibbs_table(model)


def _transition_gap(table):
    """1 - second largest eigenvalue of the symmetrized heat-bath matrix D^1/2 P D^-1/2."""
    f, lp = table.f, table.log_probs
    xs, ys, _ = _flip_pairs(f)
    d = lp[xs] - lp[ys]
    off = 1.0 / (f * 2.0 * np.cosh(d / 2.0))
    stay = np.ones(1 << f)
    np.subtract.at(stay, xs, expit(-d) / f)
    np.subtract.at(stay, ys, expit(d) / f)
    sym = np.diag(stay)
    sym[xs, ys] = off
    sym[ys, xs] = off
    eigenvalues = linalg.eigvalsh(sym)
    return float(1.0 - eigenvalues[-2])


def _restricted_min_eigenvalue(form, table):
    """
    min phi' A phi / Var(phi) over non-constant phi, where ``form`` is A written in
    the coordinates psi = D^1/2 phi. Var becomes |psi|^2 on the complement of sqrt(mu).
    """
    basis = linalg.null_space(np.sqrt(table.probs)[None, :])
    reduced = basis.T @ form @ basis
    return float(linalg.eigvalsh(reduced, subset_by_index=[0, 0])[0])


def _pair_quadratic_form(table, scale):
    """sum over flip pairs of scale * mu_x mu_y / (mu_x + mu_y) (phi_x - phi_y)^2, as a psi-form."""
    xs, ys, _ = _flip_pairs(table.f)
    d = table.log_probs[xs] - table.log_probs[ys]
    form = np.zeros((len(table), len(table)))
    np.add.at(form, (xs, xs), scale * expit(-d))
    np.add.at(form, (ys, ys), scale * expit(d))
    off = -scale / (2.0 * np.cosh(d / 2.0))
    form[xs, ys] += off
    form[ys, xs] += off
    return form


def dirichlet_gap(table):
    """inf E(phi, phi) / Var(phi), E taken over ordered pairs with the 1/2 prefactor and the 1/f vertex rate."""
    return _restricted_min_eigenvalue(_pair_quadratic_form(table, 1.0 / table.f), table)


def glauber_gap(model):
    table = _spectral_table(model, 'GAP_MAX_FREE', "glauber_gap")
    gap = _transition_gap(table)
    gap_rayleigh = dirichlet_gap(table)
    if abs(gap - gap_rayleigh) > GAP_AGREEMENT:
        raise ValidationFailure(
            f"Spectral gap paths disagree: eigenvalue {gap:.12g} vs Rayleigh quotient {gap_rayleigh:.12g}."
        )
    return SpectralReport(table.f, gap, gap_rayleigh,
                          notes=("uniform free-vertex heat-bath; gap = 1 - lambda_2",))


def at_variance_constant(model):
    """sup Var(phi) / sum_i E[Var(phi | rest_i)], from the summed single-site conditional variance forms."""
    table = _spectral_table(model, 'GAP_MAX_FREE', "at_variance_constant")
    # E[Var_i(phi)] for one site sums mu_x mu_y / (mu_x + mu_y) (phi_x - phi_y)^2 over that site's pairs.
    form = _pair_quadratic_form(table, 1.0)
    return 1.0 / _restricted_min_eigenvalue(form, table)


def spectral_report(model, restarts=0, seed=0):
    report = glauber_gap(model)
    constant = at_variance_constant(model)
    mlsi = mlsi_lower_estimate(model, restarts, seed) if restarts else None
    return SpectralReport(report.free_count, report.gap, report.gap_rayleigh, constant, mlsi, report.notes)


def heat_bath_matrix(table):
    f = table.f
    xs, ys, _ = _flip_pairs(f)
    d = table.log_probs[xs] - table.log_probs[ys]
    rows = np.concatenate([xs, ys])
    cols = np.concatenate([ys, xs])
    vals = np.concatenate([expit(-d), expit(d)]) / f
    moves = sparse.csr_matrix((vals, (rows, cols)), shape=(len(table), len(table)))
    stay = 1.0 - np.asarray(moves.sum(axis=1)).ravel()
    return (moves + sparse.diags(stay)).tocsr()


def entropy(probs, values):
    """Ent_mu(f) = E f log f - E f log E f, with 0 log 0 = 0."""
    mass = float(probs @ values)
    return float(probs @ xlogy(values, values)) - float(xlogy(mass, mass))


def _mlsi_objective(g, probs, P, PT):
    fvals = np.exp(g - g.max())
    pf = P @ fvals
    a = entropy(probs, fvals)
    b = entropy(probs, pf)
    if a <= 1e-300:
        return 1.0, np.zeros_like(g)
    da = probs * (np.log(np.maximum(fvals, 1e-300)) - math.log(probs @ fvals))
    db = PT @ (probs * (np.log(np.maximum(pf, 1e-300)) - math.log(probs @ pf)))
    ratio = 1.0 - b / a
    grad = -(db * a - b * da) / (a * a) * fvals
    return ratio, grad


def mlsi_lower_estimate(model, restarts=20, seed=0):
    """
    Heuristic probe of rho_LS = inf (Ent f - Ent Pf) / Ent f over positive f.

    Multi-restart L-BFGS over log f. Returns the smallest ratio found, which is
    an upper estimate of the true constant; certificates must never exceed it.
    """
    table = _spectral_table(model, 'MLSI_MAX_FREE', "mlsi_lower_estimate")
    P = heat_bath_matrix(table)
    PT = P.T.tocsr()
    best = 1.0
    for r in range(max(restarts, 1)):
        rng = streams.substream(seed, streams.MLSI, r)
        scale = 10.0 ** rng.uniform(-1, 1.5)
        g0 = rng.normal(0.0, scale, len(table))
        result = optimize.minimize(_mlsi_objective, g0, args=(table.probs, P, PT), jac=True, method='L-BFGS-B')
        ratio = float(_mlsi_objective(result.x, table.probs, P, PT)[0])
        best = min(best, ratio)
    logger.debug("MLSI probe over %d restarts: %.6g", restarts, best)
    return best


def phi_entropy(table, values, kind='variance'):
    values = np.asarray(values, dtype=float)
    if values.shape != table.probs.shape:
        raise InputError("Test function must have one value per table row.")
    if kind == 'variance':
        mean = table.probs @ values
        return float(table.probs @ (values - mean) ** 2)
    if kind == 'kl':
        if (values < 0).any():
            raise InputError("Entropy needs a non-negative function.")
        return entropy(table.probs, values)
    raise InputError(f"Unknown phi-entropy kind {kind!r}.")


def high_temperature_tensorization_bound(model01):
    """
    1 / (1 - (lambda_max(Q) - lambda_min(Q)) / 4) for the free-free 0/1 couplings Q,
    i.e. the spectral-width bound on the equivalent +-1 interaction Q/4; inf when the width reaches 1.
    """
    model01.require_convention(ZERO_ONE, "high_temperature_tensorization_bound")
    free = model01.free_vertices
    Q = model01.coupling_matrix()[np.ix_(free, free)]
    if len(free) < 2:
        return 1.0
    eig = linalg.eigvalsh(Q)
    width = (eig[-1] - eig[0]) / 4.0
    return math.inf if width >= 1 else 1.0 / (1.0 - width)


# Sweeps over pinnings

def ternary_pinnings(vertices, bottom, top):
    """Every pinning of ``vertices`` (free / bottom / top per vertex), lexicographic in the ternary code."""
    for code in itertools.product((0, 1, 2), repeat=len(vertices)):
        yield {v: (bottom if c == 1 else top) for v, c in zip(vertices, code) if c}


@dataclass(frozen=True)
class Cor2Sweep:
    max_row_sum: float
    max_col_sum: float
    max_operator_norm: float
    argmax_pinning: dict
    argmax_theta: float
    cells: int
    interpolation_ok: bool


def cor2_norms(matrix):
    if matrix.size == 0:
        return 0.0, 0.0, 0.0
    absolute = np.abs(matrix)
    return float(absolute.sum(axis=1).max()), float(absolute.sum(axis=0).max()), float(np.linalg.norm(matrix, 2))


def sweep_cell(args):
    model01, theta_grid, pinning = args
    rows = []
    for theta in theta_grid:
        table = gibbs_table(edge_tilt(model01, theta, pinning))
        rows.append((theta, *cor2_norms(cor2_matrix(table))))
    return rows


def sup_cor2_over_pinnings(model01, theta_grid, workers=None):
    model01.require_convention(ZERO_ONE, "sup_cor2_over_pinnings")
    free = model01.free_vertices
    check_capacity(len(free), rfim_setting('SWEEP_MAX_FREE'), "sup_cor2_over_pinnings")
    for theta in theta_grid:
        if not 0 <= theta < 1:
            raise InputError(f"theta must lie in [0, 1), got {theta}.")
    pinnings = list(ternary_pinnings(free, 0, 1))
    logger.info("Cor2 sweep: %d pinnings x %d thetas", len(pinnings), len(theta_grid))
    results = parallel_map(sweep_cell, [(model01, tuple(theta_grid), p) for p in pinnings],
                           workers=workers, desc="cor2 sweep")
    best_row = best_col = best_op = -1.0
    arg_pin, arg_theta, ok = {}, None, True
    for pinning, rows in zip(pinnings, results):
        for theta, row, col, op in rows:
            ok = ok and op <= math.sqrt(row * col) + 1e-10
            best_row = max(best_row, row)
            best_col = max(best_col, col)
            if op > best_op:
                best_op, arg_pin, arg_theta = op, pinning, theta
    return Cor2Sweep(best_row, best_col, best_op, arg_pin, arg_theta,
                     len(pinnings) * len(theta_grid), ok)


@dataclass(frozen=True)
class FkgReport:
    comparisons: int
    violations: int
    worst_excess: float


def fkg_monotonicity_check(model, max_free=6):
    """
    For every pinning and every single-site raise of it, the probability of each
    event {sigma_S = top} over unpinned S must not decrease.
    """
    model.require_ferromagnetic("fkg_monotonicity_check")
    free = model.free_vertices
    if len(free) > max_free:
        raise CapacityError(f"fkg_monotonicity_check needs at most {max_free} free vertices, got {len(free)}.")
    bottom, top = spin_values(model.convention)
    cache = {}

    def up_events(pinning):
        key = tuple(sorted(pinning.items()))
        if key not in cache:
            table = conditional_table(model, pinning)
            bits = free_bits(table.f)
            # P(all of S up) for every subset S of the table's free vertices, S as a bitmask
            probs = np.array([
                table.probs[(bits | ~mask_bits).all(axis=1)].sum()
                for mask_bits in (free_bits(table.f, s, s + 1)[0] for s in range(1 << table.f))
            ])
            cache[key] = (table.free, probs)
        return cache[key]

    comparisons = violations = 0
    worst = 0.0
    for pinning in progress(list(ternary_pinnings(free, bottom, top)), desc="fkg"):
        for v, s in pinning.items():
            if s != bottom:
                continue
            raised = dict(pinning)
            raised[v] = top
            low_free, low = up_events(pinning)
            high_free, high = up_events(raised)
            assert low_free == high_free
            excess = low - high
            comparisons += len(excess)
            violations += int((excess > 1e-12).sum())
            worst = max(worst, float(excess.max(initial=0.0)))
    return FkgReport(comparisons, violations, worst)
