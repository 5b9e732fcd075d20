"""
Edge-field noising and denoising, the tilted posterior, and the conservation
constants that turn stability along the localization path into tensorization.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from . import streams
from .conf import rfim_setting
from .exceptions import CapacityError, InputError
from .models import ZERO_ONE, SpinConfiguration, edge_tilt, theta_star
from .oracle import free_bits, gibbs_table, mean_and_covariance, sample_from_table, tv_distance
from .workers import progress

logger = logging.getLogger(__name__)

# revealed sets are int64 bitmasks, one bit per edge or vertex
MASK_BITS = 62


def check_time(t):
    if not 0 <= t < 1:
        raise InputError(f"Localization time must lie in [0, 1), got {t}.")


def default_t_grid(beta):
    top = theta_star(beta)
    return [0.0, 0.25 * top, 0.5 * top, 0.75 * top, top]


# Noising traces

@dataclass(frozen=True, eq=False)
class DenoisingTrace:
    base_model: object
    x_sample: SpinConfiguration
    edge_uniforms: np.ndarray

    def satisfied(self):
        x = self.x_sample.values()
        return tuple(e for e in self.base_model.graph.edges if x[e[0]] == 1 and x[e[1]] == 1)

    def revealed(self, t):
        """Edges e with x in A_e and U_e <= t. Uniforms live in (0, 1], so revealed(0) is empty."""
        x = self.x_sample.values()
        return frozenset(
            e for e, u in zip(self.base_model.graph.edges, self.edge_uniforms)
            if x[e[0]] == 1 and x[e[1]] == 1 and u <= t
        )


def _draw_configuration(model01, sampler, burn_in, seed):
    if sampler == 'oracle':
        table = gibbs_table(model01)
        rng = streams.substream(seed, streams.ORACLE_SAMPLE, 0)
        return table.full_states()[sample_from_table(table, 1, rng)[0]]
    if sampler == 'glauber':
        from .glauber import run_chain
        if not burn_in:
            raise InputError("The glauber sampler needs a positive burn-in.")
        state, _ = run_chain(model01, model01.pinned_state(), burn_in, seed)
        return state.spins
    raise InputError(f"Unknown sampler {sampler!r}; use 'oracle' or 'glauber'.")


def sample_noising_trace(model01, sampler='oracle', seed=0, burn_in=None):
    model01.require_convention(ZERO_ONE, "sample_noising_trace")
    x = _draw_configuration(model01, sampler, burn_in, seed)
    rng = streams.substream(seed, streams.NOISING, 0)
    uniforms = 1.0 - rng.random(len(model01.graph.edges))
    return DenoisingTrace(model01, SpinConfiguration.from_values(x, ZERO_ONE), uniforms)


# The posterior

def posterior_model(model01, t, revealed):
    """(1 - t) (x) mu^S: endpoints of every revealed edge pinned to 1, every coupling tilted by ln(1 - t)."""
    model01.require_convention(ZERO_ONE, "posterior_model")
    check_time(t)
    pinning = {}
    for u, v in revealed:
        model01.graph.edge_index((u, v))
        pinning[u] = pinning[v] = 1
    return edge_tilt(model01, t, pinning)


def _check_mask_width(count, what):
    if count > MASK_BITS:
        raise CapacityError(f"Revealed-set bitmasks hold at most {MASK_BITS} {what}, got {count}.")


def _edge_event_masks(table):
    _check_mask_width(len(table.model.graph.edges), "edges")
    states = table.full_states()
    mask = np.zeros(len(states), dtype=np.int64)
    for i, (u, v) in enumerate(table.model.graph.edges):
        mask |= ((states[:, u] == 1) & (states[:, v] == 1)).astype(np.int64) << i
    return mask


def _vertex_event_masks(table):
    _check_mask_width(table.model.n, "vertices")
    states = table.full_states()
    mask = np.zeros(len(states), dtype=np.int64)
    for v in range(table.model.n):
        mask |= (states[:, v] == 1).astype(np.int64) << v
    return mask


def _submasks(mask):
    sub = mask
    while True:
        yield sub
        if sub == 0:
            return
        sub = (sub - 1) & mask


@dataclass(frozen=True)
class BayesPosterior:
    """Exact joint law of (X, revealed set) at one time; keys are event bitmasks."""
    t: float
    base_free: tuple
    set_probability: dict
    conditional_law: dict = field(repr=False)


def _bayes(table, masks, t):
    joint = {}
    for row, (p, z) in enumerate(zip(table.probs, masks)):
        if p == 0:
            continue
        size_z = bin(int(z)).count('1')
        for s in _submasks(int(z)):
            k = bin(s).count('1')
            # P(revealed = S | x) = t^|S| (1 - t)^(|Z(x)| - |S|) for S within Z(x)
            weight = p * t ** k * (1.0 - t) ** (size_z - k)
            if weight == 0:
                continue
            joint.setdefault(s, np.zeros(len(table)))[row] += weight
    set_probability = {s: float(v.sum()) for s, v in joint.items()}
    law = {s: v / set_probability[s] for s, v in joint.items()}
    return BayesPosterior(t, table.free, set_probability, law)


def posterior_by_bayes(model01, t):
    model01.require_convention(ZERO_ONE, "posterior_by_bayes")
    check_time(t)
    table = gibbs_table(model01)
    return _bayes(table, _edge_event_masks(table), t)


def edges_of_mask(graph, mask):
    return tuple(e for i, e in enumerate(graph.edges) if mask >> i & 1)


@dataclass(frozen=True)
class PosteriorIdentityReport:
    t: float
    sets: int
    max_abs_difference: float


def posterior_identity(model01, t):
    """Largest |difference| between Bayes-enumerated Law(X | revealed = S) and posterior_model's table, over S."""
    bayes = posterior_by_bayes(model01, t)
    worst = 0.0
    for mask, law in bayes.conditional_law.items():
        table = gibbs_table(posterior_model(model01, t, edges_of_mask(model01.graph, mask)))
        worst = max(worst, float(np.abs(table.lift(bayes.base_free) - law).max()))
    return PosteriorIdentityReport(t, len(bayes.conditional_law), worst)


def tilted_enumeration(model01, t):
    """mu(sigma) (1 - t)^{m(sigma)}, normalized, by direct reweighting of the base table."""
    table = gibbs_table(model01)
    masks = _edge_event_masks(table)
    counts = np.array([bin(int(z)).count('1') for z in masks])
    weights = table.probs * (1.0 - t) ** counts
    return weights / weights.sum()


def product_deviation(table):
    """max |table - product of its single-site marginals|."""
    marg = table.marginal_top()
    bits = free_bits(table.f)
    product = np.prod(np.where(bits, marg, 1.0 - marg), axis=1) if table.f else np.ones(1)
    return float(np.abs(product - table.probs).max())


@dataclass(frozen=True)
class BucketReport:
    revealed: tuple
    hits: int
    tv: float
    stderr: float


@dataclass(frozen=True)
class PosteriorSimulationReport:
    t: float
    traces: int
    min_hits: int
    buckets: tuple
    max_tv: float


def verify_posterior_by_simulation(model01, t, traces, seed, min_hits=None):
    """Bucket many noising traces by revealed(t) and compare each bucket's law of X with the posterior table."""
    model01.require_convention(ZERO_ONE, "verify_posterior_by_simulation")
    check_time(t)
    min_hits = rfim_setting('POSTERIOR_MIN_HITS') if min_hits is None else min_hits
    table = gibbs_table(model01)
    rows = sample_from_table(table, traces, streams.substream(seed, streams.ORACLE_SAMPLE, 1))
    masks = _edge_event_masks(table)[rows]
    uniforms = 1.0 - streams.substream(seed, streams.NOISING, 1).random((traces, len(model01.graph.edges)))
    under = (uniforms <= t).astype(np.int64) << np.arange(len(model01.graph.edges), dtype=np.int64)
    revealed = masks & under.sum(axis=1) if len(model01.graph.edges) else np.zeros(traces, dtype=np.int64)
    buckets = []
    for mask in progress(np.unique(revealed), desc="posterior buckets"):
        hit = rows[revealed == mask]
        if len(hit) < min_hits:
            continue
        edges = edges_of_mask(model01.graph, int(mask))
        target = gibbs_table(posterior_model(model01, t, edges)).lift(table.free)
        emp = np.bincount(hit, minlength=len(table)) / len(hit)
        stderr = 0.5 * float(np.sqrt(target * (1 - target) / len(hit)).sum())
        buckets.append(BucketReport(edges, int(len(hit)), tv_distance(emp, target), stderr))
    max_tv = max((b.tv for b in buckets), default=0.0)
    logger.info("Posterior simulation at t=%.4f: %d buckets kept, max TV %.4f", t, len(buckets), max_tv)
    return PosteriorSimulationReport(t, traces, min_hits, tuple(buckets), max_tv)


# The vertex-field process

def vertex_tilt_table(model01, theta):
    """theta * mu: reweight by theta^{|sigma|}."""
    model01.require_convention(ZERO_ONE, "vertex_tilt_table")
    if not theta > 0:
        raise InputError("The vertex tilt needs theta > 0.")
    return gibbs_table(model01.with_field(np.asarray(model01.field) + math.log(theta)))


def vertex_posterior_table(model01, t, revealed_vertices):
    """(1 - t) * mu^{Y_t}: revealed vertices pinned to 1, the rest tilted by (1 - t)^{|sigma|}."""
    model01.require_convention(ZERO_ONE, "vertex_posterior_table")
    check_time(t)
    pinned = model01.pin({v: 1 for v in revealed_vertices})
    return gibbs_table(pinned.with_field(np.asarray(model01.field) + math.log1p(-t)))


def vertex_posterior_by_bayes(model01, t):
    model01.require_convention(ZERO_ONE, "vertex_posterior_by_bayes")
    check_time(t)
    table = gibbs_table(model01)
    return _bayes(table, _vertex_event_masks(table), t)


def vertex_spectral_stability(table):
    """Smallest C with Cov <= C diag(mean) in the 0/1 coordinates."""
    table.model.require_convention(ZERO_ONE, "vertex_spectral_stability")
    mean, cov = mean_and_covariance(table)
    if not len(mean):
        return 0.0
    scale = 1.0 / np.sqrt(np.maximum(mean, 1e-300))
    return float(linalg.eigvalsh(cov * np.outer(scale, scale))[-1])


# Conservation constants

@dataclass(frozen=True)
class ConservationCertificate:
    kind: str
    theta: float
    inputs: dict
    R: float
    log_R: float
    formula_id: str
    extras: dict = field(default_factory=dict)


def _finite_exp(x):
    return math.exp(x) if x < 709 else math.inf


def variance_conservation_R(C, theta):
    if C < 0:
        raise InputError("The rate C must be non-negative.")
    check_time(theta)
    log_r = -C * math.log1p(-theta)
    return ConservationCertificate('variance', theta, {'C': C}, _finite_exp(log_r), log_r,
                                   'variance conservation: R = (1 - theta)^(-C)')


def variance_conservation_at_terminal(n, beta, delta, alpha_star):
    """C = 4 delta ln n / alpha* at theta*: R = exp(16 beta delta ln n / alpha*)."""
    C = 4.0 * delta * math.log(n) / alpha_star
    return variance_conservation_R(C, theta_star(beta))


def entropy_conservation_R(eta_op, k_low, theta):
    if eta_op < 1 or k_low < 1:
        raise InputError("Need eta_op >= 1 and k_low >= 1.")
    if not 0 < theta < 1:
        raise InputError(f"theta must lie in (0, 1), got {theta}.")
    L = (k_low + 1.0) * (eta_op - 1.0) + 1.0
    log_keep = L * math.log1p(-theta)            # log (1 - theta)^L
    keep = math.exp(log_keep)
    es = L / -math.expm1(log_keep)
    # R = 1 + ES / (L (1 - theta)^L) = 1 + 1 / ((1 - (1 - theta)^L) (1 - theta)^L)
    log_excess = -log_keep - math.log(-math.expm1(log_keep))
    log_r = log_excess + math.log1p(math.exp(-log_excess)) if log_excess > 0 else math.log1p(math.exp(log_excess))
    return ConservationCertificate('entropy', theta, {'eta_op': eta_op, 'k_low': k_low},
                                   _finite_exp(log_r), log_r,
                                   'entropy conservation: L = (K+1)(eta-1)+1, ES = L/(1-(1-theta)^L), '
                                   'R = 1 + ES/(L (1-theta)^L)',
                                   {'L': L, 'ES': es, 'keep': keep})


def marginal_constant(delta, m_bound, beta):
    """C_{delta,M,beta} = (1 + e^{2(beta delta + M)})^2."""
    if m_bound < 0 or beta < 0:
        raise InputError("Need M >= 0 and beta >= 0.")
    return (1.0 + math.exp(2.0 * (beta * delta + m_bound))) ** 2


def marginal_lower_bound(delta, m_bound, beta):
    return 1.0 / marginal_constant(delta, m_bound, beta)


def entropy_conservation_for_mlsi(n, beta, delta, alpha_star, m_bound):
    """eta_op = 4 delta ln n / alpha*, K_low = C_{delta,M,beta}, theta = theta*; also reports 1/(R n)."""
    eta = max(4.0 * delta * math.log(n) / alpha_star, 1.0)
    cert = entropy_conservation_R(eta, marginal_constant(delta, m_bound, beta), theta_star(beta))
    log_rho = -cert.log_R - math.log(n)
    extras = dict(cert.extras, log_rho_bound=log_rho, rho_bound=math.exp(log_rho), n=n)
    return ConservationCertificate(cert.kind, cert.theta, cert.inputs, cert.R, cert.log_R, cert.formula_id, extras)
