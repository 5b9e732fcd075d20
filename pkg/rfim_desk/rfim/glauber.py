"""
Heat-bath Glauber dynamics: single chains, vectorized replica batches, the
monotone coupling and the sequential grand coupling.

Every coupled update uses the quantile rule: the vertex goes to the top value
iff the shared uniform U satisfies U <= P(top | rest).
"""
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from . import streams
from .exceptions import InputError, ValidationFailure
from .models import PLUS_MINUS, SpinConfiguration, spin_values
from .oracle import conditional_table, gibbs_table, sample_from_table

logger = logging.getLogger(__name__)

BLOCK = 4096


class LocalFields:
    """Padded-neighbor view of a model for fast conditional probabilities."""

    def __init__(self, model):
        self.model = model
        self.n = model.n
        self.nbrs, eids = model.graph.padded_neighbors()
        self.jslot = np.where(eids >= 0, model.couplings[np.maximum(eids, 0)], 0.0) if len(model.couplings) \
            else np.zeros(eids.shape)
        self.field = np.asarray(model.field, dtype=float)
        self.free = np.array(model.free_vertices, dtype=np.int64)
        self.bottom, self.top = spin_values(model.convention)
        self.factor = 2.0 if model.convention == PLUS_MINUS else 1.0

    def padded(self, spins):
        """Spin array(s) with one trailing zero column for the neighbor sentinel."""
        spins = np.asarray(spins)
        pad = np.zeros(spins.shape[:-1] + (1,), dtype=spins.dtype)
        return np.concatenate([spins, pad], axis=-1)

    def local_sum(self, ext, v):
        return self.field[v] + float(self.jslot[v] @ ext[self.nbrs[v]])

    def top_probability(self, ext, v):
        return float(expit(self.factor * self.local_sum(ext, v)))

    def top_probabilities(self, ext_batch, vs):
        rows = np.arange(len(vs))[:, None]
        sums = self.field[vs] + (self.jslot[vs] * ext_batch[rows, self.nbrs[vs]]).sum(axis=1)
        return expit(self.factor * sums)


def as_spins(model, init):
    """Validated spin array for ``init`` (SpinConfiguration or sequence)."""
    if isinstance(init, SpinConfiguration):
        if init.convention != model.convention:
            raise InputError(f"Initial state is {init.convention!r} but the model is {model.convention!r}.")
        spins = init.values()
    else:
        spins = np.asarray(init, dtype=np.int8)
    if spins.shape[-1] != model.n:
        raise InputError(f"Initial state has {spins.shape[-1]} spins for {model.n} vertices.")
    if not np.isin(spins, spin_values(model.convention)).all():
        raise InputError(f"Initial state holds values outside the {model.convention!r} convention.")
    for v, s in model.pinning.items():
        if (spins[..., v] != s).any():
            raise InputError(f"Initial state disagrees with the pinning at vertex {v}.")
    return spins.astype(np.int8)


@dataclass
class ChainState:
    spins: np.ndarray
    convention: str
    step: int = 0
    rng: np.random.Generator = field(default=None, repr=False)

    @property
    def config(self):
        return SpinConfiguration.from_values(self.spins, self.convention)


def initial_state(model, init, seed, chain=0):
    return ChainState(as_spins(model, init).copy(), model.convention, 0,
                      streams.substream(seed, streams.GLAUBER, chain))


def glauber_step(model, state, fields=None):
    """One heat-bath update at a uniformly chosen free vertex. Advances ``state.rng``."""
    fields = fields or LocalFields(model)
    if not len(fields.free):
        raise InputError("Glauber dynamics needs at least one free vertex.")
    v = int(fields.free[state.rng.integers(len(fields.free))])
    u = state.rng.random()
    ext = fields.padded(state.spins)
    spins = state.spins.copy()
    spins[v] = fields.top if u <= fields.top_probability(ext, v) else fields.bottom
    return ChainState(spins, state.convention, state.step + 1, state.rng)


@dataclass(frozen=True)
class Trajectory:
    steps: tuple
    magnetization: tuple
    energy: tuple

    def rows(self):
        return zip(self.steps, self.magnetization, self.energy)


def run_chain(model, init, steps, seed, record_every=None, chain=0):
    """Run ``steps`` updates; with ``record_every`` also return a thinned (step, magnetization, energy) series."""
    state = initial_state(model, init, seed, chain)
    fields = LocalFields(model)
    if steps and not len(fields.free):
        raise InputError("Glauber dynamics needs at least one free vertex.")
    ext = fields.padded(state.spins).astype(float)
    energy = model.hamiltonian(state.spins) if record_every else 0.0
    series = [(0, float(ext[:-1].sum()), energy)] if record_every else None
    done = 0
    while done < steps:
        block = min(BLOCK, steps - done)
        picks = fields.free[state.rng.integers(len(fields.free), size=block)]
        uniforms = state.rng.random(block)
        for v, u in zip(picks, uniforms):
            s = fields.local_sum(ext, v)
            new = fields.top if u <= expit(fields.factor * s) else fields.bottom
            if record_every:
                energy += (new - ext[v]) * s
            ext[v] = new
            done += 1
            if record_every and done % record_every == 0:
                series.append((done, float(ext[:-1].sum()), float(energy)))
    state.spins = ext[:-1].astype(np.int8)
    state.step = steps
    trajectory = Trajectory(*map(tuple, zip(*series))) if record_every else None
    return state, trajectory


class ReplicaBatch:
    """R independent chains advanced in lockstep, one vectorized update per step."""

    def __init__(self, model, init, replicas, seed, chain=0):
        self.fields = LocalFields(model)
        spins = as_spins(model, init)
        if spins.ndim == 1:
            spins = np.repeat(spins[None, :], replicas, axis=0)
        if len(spins) != replicas:
            raise InputError(f"Got {len(spins)} initial states for {replicas} replicas.")
        self.ext = self.fields.padded(spins).astype(float)
        self.rng = streams.substream(seed, streams.GLAUBER, chain, 1)
        self.step = 0

    @property
    def spins(self):
        return self.ext[:, :-1].astype(np.int8)

    def advance(self, steps):
        fields, replicas = self.fields, len(self.ext)
        if steps and not len(fields.free):
            raise InputError("Glauber dynamics needs at least one free vertex.")
        rows = np.arange(replicas)
        for _ in range(steps):
            vs = fields.free[self.rng.integers(len(fields.free), size=replicas)]
            p = fields.top_probabilities(self.ext, vs)
            self.ext[rows, vs] = np.where(self.rng.random(replicas) <= p, fields.top, fields.bottom)
        self.step += steps
        return self


def run_replicas(model, init, steps, replicas, seed, chain=0):
    return ReplicaBatch(model, init, replicas, seed, chain).advance(steps).spins


# Monotone coupling

@dataclass(frozen=True)
class CouplingTrace:
    states: tuple
    disagreement_set: frozenset
    coalescence_step: int = None
    shared_uniform_log: tuple = None


def monotone_coupled_run(model, low, high, steps, seed, log_uniforms=False):
    """
    Two chains sharing vertex choices and uniforms. Pointwise order is asserted
    after every update; a violation raises ValidationFailure.
    """
    model.require_ferromagnetic("monotone_coupled_run")
    fields = LocalFields(model)
    lo = fields.padded(as_spins(model, low)).astype(float)
    hi = fields.padded(as_spins(model, high)).astype(float)
    if (lo > hi).any():
        raise InputError("monotone_coupled_run needs low <= high pointwise.")
    if steps and not len(fields.free):
        raise InputError("Glauber dynamics needs at least one free vertex.")
    rng = streams.substream(seed, streams.COUPLING, 0)
    differing = int((lo != hi).sum())
    coalesced = 0 if differing == 0 else None
    log = [] if log_uniforms else None
    done = 0
    while done < steps:
        block = min(BLOCK, steps - done)
        picks = fields.free[rng.integers(len(fields.free), size=block)]
        uniforms = rng.random(block)
        for v, u in zip(picks, uniforms):
            before = lo[v] != hi[v]
            lo[v] = fields.top if u <= fields.top_probability(lo, v) else fields.bottom
            hi[v] = fields.top if u <= fields.top_probability(hi, v) else fields.bottom
            if lo[v] > hi[v]:
                raise ValidationFailure(f"Monotone order broken at vertex {v}, step {done + 1}.")
            differing += int(lo[v] != hi[v]) - int(before)
            done += 1
            if coalesced is None and differing == 0:
                coalesced = done
            if log is not None:
                log.append((int(v), float(u)))
    states = (
        ChainState(lo[:-1].astype(np.int8), model.convention, steps, None),
        ChainState(hi[:-1].astype(np.int8), model.convention, steps, None),
    )
    disagreement = frozenset(np.flatnonzero(lo[:-1] != hi[:-1]).tolist())
    return CouplingTrace(states, disagreement, coalesced, tuple(log) if log is not None else None)


# Grand coupling

class GrandCoupling:
    """
    Sequential revelation for several models on one vertex set. At each revealed
    vertex a single uniform drives every chain through its exact conditional
    marginal given what that chain has revealed so far.
    """

    def __init__(self, models, states=None):
        models = list(models)
        if not models:
            raise InputError("A grand coupling needs at least one model.")
        n, convention = models[0].n, models[0].convention
        for m in models:
            if m.n != n or m.convention != convention:
                raise InputError("Grand-coupled models must share the vertex index space and convention.")
        self.models = models
        self.n = n
        self.bottom, self.top = spin_values(convention)
        self.revealed = [dict(s) for s in states] if states is not None else [{} for _ in models]
        if len(self.revealed) != len(models):
            raise InputError("Need one partial state per model.")
        self.order = []
        self.uniforms = []

    def top_probability(self, i, v):
        model = self.models[i]
        if v in model.pinning:
            return 1.0 if model.pinning[v] == self.top else 0.0
        extra = {w: s for w, s in self.revealed[i].items() if w not in model.pinning}
        table = conditional_table(model, extra)
        return float(table.marginal_top()[table.free.index(v)])

    def reveal(self, v, u):
        """Reveal vertex v in every chain with the shared uniform u; returns the emitted values."""
        values = []
        for i, model in enumerate(self.models):
            if v in self.revealed[i]:
                values.append(self.revealed[i][v])
                continue
            if v in model.pinning:
                value = model.pinning[v]
            else:
                value = self.top if u <= self.top_probability(i, v) else self.bottom
            self.revealed[i][v] = value
            values.append(value)
        self.order.append(v)
        self.uniforms.append(float(u))
        return tuple(values)

    @property
    def disagreements(self):
        out = set()
        for v in self.order:
            if len({r[v] for r in self.revealed}) > 1:
                out.add(v)
        return frozenset(out)

    def states(self):
        out = []
        for r in self.revealed:
            spins = np.full(self.n, self.bottom, dtype=np.int8)
            for v, s in r.items():
                spins[v] = s
            out.append(spins)
        return out


@dataclass(frozen=True)
class GrandCouplingResult:
    states: tuple
    disagreement_set: frozenset
    order: tuple
    uniforms: tuple


def grand_coupled_update(models, states=None, seed=0, order=None, uniforms=None):
    coupling = GrandCoupling(models, states)
    order = tuple(range(coupling.n)) if order is None else tuple(order)
    if sorted(set(order)) != sorted(order) or any(not 0 <= v < coupling.n for v in order):
        raise InputError("Revelation order must list distinct vertices of the shared index space.")
    if uniforms is None:
        uniforms = streams.shared_uniforms(seed, streams.COUPLING, coupling.n, 1)
        uniforms = [uniforms[v] for v in order]
    for v, u in zip(order, uniforms):
        coupling.reveal(v, u)
    return GrandCouplingResult(tuple(coupling.states()), coupling.disagreements, tuple(coupling.order),
                               tuple(coupling.uniforms))


# Empirical diagnostics against the oracle

@dataclass(frozen=True)
class TvPoint:
    step: int
    tv: float
    stderr: float


def empirical_distribution(table, spins):
    """Histogram of replica states over the table's rows."""
    return np.bincount(empirical_index(table, spins), minlength=len(table)) / len(spins)


def tv_with_error(table, spins):
    emp = empirical_distribution(table, spins)
    tv = 0.5 * float(np.abs(emp - table.probs).sum())
    stderr = 0.5 * float(np.sqrt(table.probs * (1 - table.probs) / len(spins)).sum())
    return tv, stderr


def empirical_tv_curve(model, init, step_grid, replicas, seed):
    table = gibbs_table(model)
    grid = sorted(int(s) for s in step_grid)
    batch = ReplicaBatch(model, init, replicas, seed)
    out = []
    for step in grid:
        batch.advance(step - batch.step)
        tv, stderr = tv_with_error(table, batch.spins)
        out.append(TvPoint(step, tv, stderr))
        logger.debug("TV at step %d: %.4f (+- %.4f)", step, tv, stderr)
    return out


@dataclass(frozen=True)
class DetailedBalanceReport:
    transitions: int
    max_z: float
    exceed_3sigma: int
    pairs: int


def detailed_balance_check(model, transitions, seed):
    """One update from each of ``transitions`` exact stationary starts; compares the flow matrix with its transpose."""
    table = gibbs_table(model)
    rng = streams.substream(seed, streams.ORACLE_SAMPLE, 0)
    starts = table.full_states()[sample_from_table(table, transitions, rng)]
    before = empirical_index(table, starts)
    after = empirical_index(table, ReplicaBatch(model, starts, transitions, seed).advance(1).spins)
    flow = np.zeros((len(table), len(table)))
    np.add.at(flow, (before, after), 1.0 / transitions)
    max_z, exceed, pairs = 0.0, 0, 0
    for x in range(len(table)):
        for y in range(x + 1, len(table)):
            total = flow[x, y] + flow[y, x]
            if total == 0:
                continue
            z = abs(flow[x, y] - flow[y, x]) / np.sqrt(total / transitions)
            max_z = max(max_z, float(z))
            exceed += int(z > 3)
            pairs += 1
    return DetailedBalanceReport(transitions, max_z, exceed, pairs)


def empirical_index(table, spins):
    _, top = spin_values(table.model.convention)
    idx = np.zeros(len(spins), dtype=np.int64)
    for v in table.free:
        idx = (idx << 1) | (spins[:, v] == top).astype(np.int64)
    return idx
