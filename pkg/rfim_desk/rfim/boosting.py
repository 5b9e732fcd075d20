"""
Stochastic-localization field boosting through the Bayesian representation
y_t = t sigma* + B_t, with sigma* ~ mu and B_t ~ N(0, t) per vertex. The
boosted measure is the base model with field h + y_t.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from . import streams
from .exceptions import InputError
from .models import PLUS_MINUS, SpinConfiguration, make_model, sample_field
from .oracle import free_bits, gibbs_table, log_weights, sample_from_table
from .workers import parallel_map

logger = logging.getLogger(__name__)


def check_sl_time(t):
    if not t >= 0:
        raise InputError(f"SL time must be non-negative, got {t}.")


@dataclass(frozen=True, eq=False)
class SlRealization:
    t: float
    sigma_star: SpinConfiguration
    noise: np.ndarray
    y: np.ndarray
    boosted_model: object


def _draw_sigma_star(model, sampler, burn_in, seed):
    if sampler == 'oracle':
        table = gibbs_table(model)
        row = sample_from_table(table, 1, streams.substream(seed, streams.ORACLE_SAMPLE, 2))[0]
        return table.full_states(row, row + 1)[0]
    if sampler == 'glauber':
        from .glauber import run_chain
        if not burn_in:
            raise InputError("The glauber sampler needs a positive burn-in.")
        state, _ = run_chain(model, model.pinned_state(), burn_in, seed, chain=1)
        return state.spins
    raise InputError(f"Unknown sampler {sampler!r}; use 'oracle' or 'glauber'.")


def sl_boost(model, t, sampler='oracle', seed=0, burn_in=None):
    model.require_convention(PLUS_MINUS, "sl_boost")
    check_sl_time(t)
    sigma = _draw_sigma_star(model, sampler, burn_in, seed)
    noise = math.sqrt(t) * streams.substream(seed, streams.SL_NOISE, 0).standard_normal(model.n)
    y = t * sigma + noise
    return SlRealization(t, SpinConfiguration.from_values(sigma, PLUS_MINUS), noise, y,
                         model.with_field(np.asarray(model.field) + y))


class BoostedTables:
    """
    Batches of boosted Gibbs tables for one base model: each realization only
    adds y . sigma to the base log-weights.
    """

    def __init__(self, model):
        model.require_convention(PLUS_MINUS, "BoostedTables")
        self.model = model
        self.table = gibbs_table(model)
        self.free, logw = log_weights(model)
        self.logw = logw
        self.values = np.where(free_bits(len(self.free)), 1.0, -1.0)

    def draw(self, t, count, seed):
        """(probs (count, 2^f), y on the free vertices (count, f))."""
        check_sl_time(t)
        rows = sample_from_table(self.table, count, streams.substream(seed, streams.ORACLE_SAMPLE, 3))
        sigma = self.values[rows]
        y = t * sigma + math.sqrt(t) * streams.substream(seed, streams.SL_NOISE, 1).standard_normal(sigma.shape)
        logits = self.logw[None, :] + y @ self.values.T
        return np.exp(logits - logsumexp(logits, axis=1, keepdims=True)), y

    def moments(self, probs):
        mean = probs @ self.values
        second = np.einsum('rn,ni,nj->rij', probs, self.values, self.values)
        return mean, second - mean[:, :, None] * mean[:, None, :]


@dataclass(frozen=True)
class MartingaleReport:
    t: float
    realizations: int
    max_abs_difference: float
    max_z: float


def martingale_check(model, t, realizations, seed):
    """E over realizations of the boosted table against mu, entrywise z-scores."""
    boosted = BoostedTables(model)
    probs, _ = boosted.draw(t, realizations, seed)
    mean = probs.mean(axis=0)
    sd = probs.std(axis=0, ddof=1) if realizations > 1 else np.zeros_like(mean)
    diff = np.abs(mean - boosted.table.probs)
    se = sd / math.sqrt(realizations)
    z = np.where(se > 0, diff / np.where(se > 0, se, 1.0), np.where(diff > 1e-12, np.inf, 0.0))
    return MartingaleReport(t, realizations, float(diff.max()), float(z.max()))


# Trace moments of the boosted covariance

@dataclass(frozen=True)
class TraceMomentRow:
    t: float
    mean: float
    stderr: float


@dataclass(frozen=True)
class TraceMomentReport:
    p: int
    rows: tuple
    sup: float
    fitted_C0: float
    n: int
    label: str = 'fitted'


def trace_moments(boosted, t, p, realizations, seed):
    probs, _ = boosted.draw(t, realizations, seed)
    _, cov = boosted.moments(probs)
    eig = np.linalg.eigvalsh(cov)
    return (np.clip(eig, 0.0, None) ** p).sum(axis=1)


def trace_moment_probe(model, p, t_grid, realizations, seed):
    """E Tr(Cov(nu_t)^p) per t, with C0 fitted from sup_t = (C0 p)^p n."""
    if p < 1:
        raise InputError("Trace moments need p >= 1.")
    boosted = BoostedTables(model)
    rows = []
    for i, t in enumerate(t_grid):
        values = trace_moments(boosted, t, p, realizations, streams.child_seed(seed, streams.SL_NOISE, i))
        stderr = float(values.std(ddof=1) / math.sqrt(len(values))) if len(values) > 1 else 0.0
        rows.append(TraceMomentRow(float(t), float(values.mean()), stderr))
    sup = max(r.mean for r in rows)
    n = max(len(boosted.free), 1)
    fitted = (sup / n) ** (1.0 / p) / p
    return TraceMomentReport(p, tuple(rows), sup, fitted, n)


# Weak Poincare consistency probe

def probe_function(name, table):
    """Values over the table's rows of 'constant', 'magnetization' or 'spin:<v>'."""
    values = np.where(free_bits(table.f), 1.0, -1.0)
    if name == 'constant':
        return np.ones(len(table))
    if name == 'magnetization':
        return values.sum(axis=1) + sum(table.model.pinning.values())
    if name.startswith('spin:'):
        try:
            v = int(name.split(':', 1)[1])
        except ValueError:
            raise InputError(f"Bad test function {name!r}.") from None
        table.model.graph.check_vertex(v)
        if v in table.model.pinning:
            return np.full(len(table), float(table.model.pinning[v]))
        return values[:, table.free.index(v)]
    raise InputError(f"Unknown test function {name!r}; use constant, magnetization or spin:<v>.")


@dataclass(frozen=True)
class PoincareVerdict:
    function: str
    lhs: float
    rhs: float
    satisfied: bool


@dataclass(frozen=True)
class PoincareReport:
    T: float
    delta: float
    holder_p: float
    c0: float
    fitted_C0: float
    verdicts: tuple
    label: str = 'fitted'


def weak_poincare_probe(model, T, delta, test_functions, realizations, seed, moment_order=2):
    """
    Var_mu(phi) <= (e^{-c0} n / delta)^{1/q} E[Var_{nu_T}(phi)]^{1/p} osc(phi)^{2/q}
    with p = e^{2T/c0}, 1/p + 1/q = 1 and c0 = 1 / (e C0) for the fitted trace-moment C0.
    """
    check_sl_time(T)
    if not 0 < delta < 1:
        raise InputError("delta must lie in (0, 1).")
    boosted = BoostedTables(model)
    moments = trace_moment_probe(model, moment_order, [0.0, T], realizations, seed)
    c0 = 1.0 / (math.e * moments.fitted_C0) if moments.fitted_C0 > 0 else math.inf
    holder_p = math.exp(2.0 * T / c0) if math.isfinite(c0) else 1.0
    inv_q = 1.0 - 1.0 / holder_p
    probs, _ = boosted.draw(T, realizations, streams.child_seed(seed, streams.SL_NOISE, 99))
    n = model.n
    verdicts = []
    for name in test_functions:
        phi = probe_function(name, boosted.table)
        lhs = float(boosted.table.probs @ (phi - boosted.table.probs @ phi) ** 2)
        boosted_var = float(np.mean(probs @ phi ** 2 - (probs @ phi) ** 2))
        osc = float(phi.max() - phi.min())
        if inv_q == 0:
            rhs = max(boosted_var, 0.0)
        else:
            rhs = ((math.exp(-c0) * n / delta) ** inv_q * max(boosted_var, 0.0) ** (1.0 / holder_p)
                   * osc ** (2.0 * inv_q))
        verdicts.append(PoincareVerdict(name, lhs, rhs, lhs <= rhs * (1 + 1e-9) + 1e-12))
    return PoincareReport(T, delta, holder_p, c0, moments.fitted_C0, tuple(verdicts))


def _poincare_trial(args):
    graph, beta, dist, T, delta, names, realizations, seed, trial = args
    field_values = sample_field(dist, graph.num_vertices, streams.child_seed(seed, streams.FIELD, trial)).values
    report = weak_poincare_probe(make_model(graph, beta, field_values), T, delta, names, realizations,
                                 streams.child_seed(seed, streams.SL_NOISE, trial))
    return [v.satisfied for v in report.verdicts]


@dataclass(frozen=True)
class PoincareFrequency:
    T: float
    delta: float
    field_trials: int
    frequency: dict = field(default_factory=dict)


def weak_poincare_frequency(graph, beta, dist, T, delta, test_functions, field_trials, realizations, seed,
                            workers=None):
    names = list(test_functions)
    results = parallel_map(_poincare_trial, [(graph, beta, dist, T, delta, names, realizations, seed, i)
                                             for i in range(field_trials)], workers=workers, desc="poincare")
    hits = np.array(results, dtype=float).reshape(field_trials, len(names))
    frequency = {name: float(hits[:, i].mean()) for i, name in enumerate(names)}
    logger.info("Weak Poincare satisfaction over %d fields: %s", field_trials, frequency)
    return PoincareFrequency(T, delta, field_trials, frequency)
