"""
The incremental warm-start sampler.

Vertices are added one at a time along a prefix-connected ordering. The first
vertex is drawn exactly from its two-point law under the raw field; every later
vertex gets an independent raw-field draw, after which k* Glauber steps run on
the model induced by the current prefix (later vertices are absent, not pinned).
"""
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from . import streams
from .exceptions import InputError
from .glauber import ReplicaBatch, run_chain, tv_with_error
from .graphs import connected_components, connected_ordering, remove_vertices
from .models import PLUS_MINUS, SpinConfiguration, spin_values
from .oracle import gibbs_table
from .workers import progress

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SamplerConfig:
    c_star: float
    seed: int = 0
    ordering_seed: int = None
    per_component: bool = False
    prefix_k: bool = False
    validate: bool = False
    eps: float = 0.05
    replicas: int = 10_000

    def __post_init__(self):
        if not self.c_star > 0:
            raise InputError(f"c_star must be positive, got {self.c_star}.")
        if not 0 < self.eps < 1:
            raise InputError("eps must lie in (0, 1).")
        if self.replicas < 1:
            raise InputError("replicas must be at least 1.")

    @property
    def order_seed(self):
        return self.seed if self.ordering_seed is None else self.ordering_seed


def k_star(n, c_star):
    """ceil(n^{c*}); exact for integer powers."""
    value = n ** c_star
    rounded = round(value)
    return int(rounded) if abs(value - rounded) < 1e-9 * max(1.0, value) else math.ceil(value)


@dataclass(frozen=True, eq=False)
class RunReport:
    order: tuple
    stage_steps: tuple
    total_updates: int
    wall_time: float
    final: SpinConfiguration
    tv: float = None
    tv_stderr: float = None
    eps: float = None

    @property
    def passed(self):
        return self.tv is None or self.tv <= self.eps


def sampling_order(graph, config):
    """Prefix-connected blocks, one per component in per-component mode."""
    if not config.per_component:
        return [connected_ordering(graph, config.order_seed)]
    blocks = []
    for i, component in enumerate(connected_components(graph)):
        # remove_vertices keeps the survivors in ascending order, so local index j is component[j]
        keep = set(component)
        sub = remove_vertices(graph, [v for v in range(graph.num_vertices) if v not in keep])
        local = connected_ordering(sub, streams.child_seed(config.order_seed, streams.ORDERING, i))
        blocks.append(tuple(component[j] for j in local))
    return blocks


def _raw_draws(model, v, count, rng):
    """Independent raw-field two-point draws for vertex v."""
    bottom, top = spin_values(model.convention)
    if v in model.pinning:
        return np.full(count, model.pinning[v], dtype=np.int8)
    factor = 2.0 if model.convention == PLUS_MINUS else 1.0
    p = expit(factor * model.field[v])
    return np.where(rng.random(count) <= p, top, bottom).astype(np.int8)


def _stage_steps(model, prefix_len, config):
    return k_star(prefix_len if config.prefix_k else model.n, config.c_star)


def incremental_sample_batch(model, config, replicas=None):
    """
    ``replicas`` independent runs advanced together. Returns the (R, n) final
    spins, the ordering and the per-stage step counts.
    """
    replicas = config.replicas if replicas is None else replicas
    blocks = sampling_order(model.graph, config)
    spins = np.repeat(model.pinned_state()[None, :], replicas, axis=0)
    stage_steps = []
    stage = 0
    for block in blocks:
        for i, v in enumerate(progress(block, desc="stages")):
            rng = streams.substream(config.seed, streams.INCREMENTAL, stage)
            spins[:, v] = _raw_draws(model, v, replicas, rng)
            steps = 0
            if i > 0:
                prefix = list(block[:i + 1])
                sub = model.induced(prefix)
                if sub.free_vertices:
                    steps = _stage_steps(model, len(prefix), config)
                    if replicas == 1:
                        state, _ = run_chain(sub, spins[0, prefix], steps, config.seed, chain=stage)
                        spins[0, prefix] = state.spins
                    else:
                        batch = ReplicaBatch(sub, spins[:, prefix], replicas, config.seed, chain=stage)
                        spins[:, prefix] = batch.advance(steps).spins
            stage_steps.append(steps)
            stage += 1
    order = tuple(v for block in blocks for v in block)
    return spins, order, tuple(stage_steps)


def incremental_sample(model, config):
    """One run of the sampler; in validation mode also the TV of ``config.replicas`` runs to the exact law."""
    started = time.perf_counter()
    spins, order, stage_steps = incremental_sample_batch(model, config, replicas=1)
    wall = time.perf_counter() - started
    final = SpinConfiguration.from_values(spins[0], model.convention)
    total = sum(stage_steps)
    logger.info("Incremental sample on %d vertices: %d stages, %d updates in %.3fs",
                model.n, len(stage_steps), total, wall)
    if not config.validate:
        return final, RunReport(order, stage_steps, total, wall, final)
    tv, stderr = validate_sampler(model, config)
    return final, RunReport(order, stage_steps, total, wall, final, tv, stderr, config.eps)


def validate_sampler(model, config):
    """Empirical TV between ``config.replicas`` sampler outputs and the enumerated law."""
    table = gibbs_table(model)
    spins, _, _ = incremental_sample_batch(model, config)
    tv, stderr = tv_with_error(table, spins)
    logger.info("Sampler TV to the oracle: %.4f (+- %.4f) over %d replicas, eps=%s",
                tv, stderr, len(spins), config.eps)
    return tv, stderr


@dataclass(frozen=True)
class CalibrationRow:
    c_star: float
    k_star: int
    tv: float
    stderr: float
    passed: bool


@dataclass(frozen=True)
class Calibration:
    rows: tuple
    eps: float
    chosen: float = None
    notes: tuple = field(default=())


def calibrate_c_star(model, c_grid, config):
    """Smallest c* on the grid whose sampler TV to the oracle is within eps."""
    rows, chosen = [], None
    for c in sorted(c_grid):
        trial = SamplerConfig(c, config.seed, config.ordering_seed, config.per_component, config.prefix_k,
                              True, config.eps, config.replicas)
        tv, stderr = validate_sampler(model, trial)
        passed = tv <= config.eps
        rows.append(CalibrationRow(c, k_star(model.n, c), tv, stderr, passed))
        if passed and chosen is None:
            chosen = c
    notes = () if chosen is not None else ("no c* on the grid reached eps",)
    return Calibration(tuple(rows), config.eps, chosen, notes)


# Warm-start bounds

def warm_start_preconditions(a, p, k):
    problems = []
    if p < 1:
        problems.append(f"p={p} < 1")
    if a ** p < 2.0 / 4 ** (p - 1):
        problems.append(f"A^p={a ** p:.6g} < 2 / 4^(p-1)={2.0 / 4 ** (p - 1):.6g}")
    if k < 2:
        problems.append(f"k={k} < 2")
    return problems


def warm_start_tv_bound(m_warm, a, p, k):
    """M (A^{2p} log k / k)^{1/(2p - 1)}; precondition violations are logged, not raised."""
    if p <= 0.5:
        raise InputError("The warm-start bound needs p > 1/2.")
    if k < 1:
        raise InputError("k must be a positive integer.")
    problems = warm_start_preconditions(a, p, k)
    if problems:
        logger.warning("Warm-start bound outside its preconditions: %s", "; ".join(problems))
    return m_warm * (a ** (2 * p) * math.log(k) / k) ** (1.0 / (2 * p - 1))


def warm_start_constant(beta, c_alpha):
    """Density bound e^{4 beta e^{C_alpha}} of the warm start against the target."""
    exponent = 4.0 * beta * math.exp(c_alpha)
    return math.exp(exponent) if exponent < 709 else math.inf
