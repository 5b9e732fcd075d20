"""
The random-field Ising model layer.

Nothing here is a database table: these are immutable value objects that every
other module consumes. A model carries its graph, per-edge couplings, per-vertex
field, spin convention and pinning; conditional measures are just models with
larger pinnings.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf, expit

from . import streams
from .exceptions import FerromagnetismRequired, InfeasiblePinning, InputError
from .graphs import build_graph

logger = logging.getLogger(__name__)

PLUS_MINUS = 'pm'
ZERO_ONE = '01'
CONVENTIONS = (PLUS_MINUS, ZERO_ONE)


def spin_values(convention):
    """(bottom, top) spin values of a convention."""
    check_convention(convention)
    return (-1, 1) if convention == PLUS_MINUS else (0, 1)


def check_convention(convention):
    if convention not in CONVENTIONS:
        raise InputError(f"Unknown spin convention {convention!r}; use 'pm' or '01'.")


def frozen_array(values, dtype=float):
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SpinConfiguration:
    bits: bytes
    length: int
    convention: str

    @classmethod
    def from_values(cls, values, convention):
        bottom, top = spin_values(convention)
        values = np.asarray(values)
        if not np.isin(values, (bottom, top)).all():
            raise InputError(f"Spin values must be {bottom} or {top} in the {convention!r} convention.")
        return cls(np.packbits(values == top).tobytes(), int(values.size), convention)

    def tops(self):
        return np.unpackbits(np.frombuffer(self.bits, dtype=np.uint8), count=self.length).astype(bool)

    def values(self):
        bottom, top = spin_values(self.convention)
        return np.where(self.tops(), top, bottom).astype(np.int8)

    def to_convention(self, convention):
        # The bijection sigma' = (sigma + 1) / 2 only relabels the two values.
        check_convention(convention)
        return SpinConfiguration(self.bits, self.length, convention)

    def __len__(self):
        return self.length


# Field distributions

GAUSSIAN = 'gaussian'
UNIFORM = 'uniform_symmetric'
TWO_POINT = 'two_point'
SHIFTED = 'shifted'
FIELD_KINDS = (GAUSSIAN, UNIFORM, TWO_POINT, SHIFTED)


@dataclass(frozen=True)
class FieldDistribution:
    kind: str
    sigma: float = None
    M: float = None
    a: float = None
    base: 'FieldDistribution' = None
    offsets: tuple = None

    def __post_init__(self):
        if self.kind == GAUSSIAN:
            if self.sigma is None or not self.sigma > 0:
                raise InputError("gaussian field needs sigma > 0.")
        elif self.kind == UNIFORM:
            if self.M is None or not self.M > 0:
                raise InputError("uniform_symmetric field needs M > 0.")
        elif self.kind == TWO_POINT:
            if self.a is None or not self.a >= 0:
                raise InputError("two_point field needs a >= 0.")
        elif self.kind == SHIFTED:
            if self.base is None or self.offsets is None:
                raise InputError("shifted field needs a base distribution and per-vertex offsets.")
            if not all(math.isfinite(x) for x in self.offsets):
                raise InputError("shifted offsets must be finite.")
        else:
            raise InputError(f"Unknown field distribution kind {self.kind!r}.")

    def bound(self):
        """Almost-sure bound M on |h_u|, or None when unbounded."""
        if self.kind == UNIFORM:
            return self.M
        if self.kind == TWO_POINT:
            return self.a
        if self.kind == SHIFTED:
            inner = self.base.bound()
            return None if inner is None else inner + max(abs(x) for x in self.offsets)
        return None


def gaussian(sigma):
    return FieldDistribution(GAUSSIAN, sigma=sigma)


def uniform_symmetric(M):
    return FieldDistribution(UNIFORM, M=M)


def two_point(a):
    return FieldDistribution(TWO_POINT, a=a)


def shifted(base, offsets):
    return FieldDistribution(SHIFTED, base=base, offsets=tuple(float(x) for x in offsets))


@dataclass(frozen=True)
class QuenchedField:
    values: np.ndarray
    distribution: FieldDistribution
    seed: int

    def __len__(self):
        return len(self.values)

    def l1(self):
        return float(np.abs(self.values).sum())


def _draw(dist, n, rng):
    if dist.kind == GAUSSIAN:
        return rng.normal(0.0, dist.sigma, n)
    if dist.kind == UNIFORM:
        return rng.uniform(-dist.M, dist.M, n)
    if dist.kind == TWO_POINT:
        return dist.a * rng.choice(np.array([-1.0, 1.0]), n)
    if len(dist.offsets) != n:
        raise InputError(f"shifted field has {len(dist.offsets)} offsets for {n} vertices.")
    return _draw(dist.base, n, rng) + np.asarray(dist.offsets)


def sample_field(dist, n, seed):
    rng = streams.substream(seed, streams.FIELD, n)
    return QuenchedField(frozen_array(_draw(dist, n, rng)), dist, seed)


@dataclass(frozen=True)
class FieldAssumptionCheck:
    mass: float
    threshold: float
    satisfied: bool


def small_field_mass(dist, K):
    """P(|h| <= K) in closed form."""
    if dist.kind == GAUSSIAN:
        return float(erf(K / (dist.sigma * math.sqrt(2.0))))
    if dist.kind == UNIFORM:
        return min(K / dist.M, 1.0)
    if dist.kind == TWO_POINT:
        return 1.0 if dist.a <= K else 0.0
    raise InputError(f"No closed-form |h| <= K mass for the {dist.kind!r} kind (its |h_u| are not identically distributed).")


def check_field_assumption(dist, p0, K):
    if not 0 < p0 < 1 or K <= 0:
        raise InputError("Need p0 in (0, 1) and K > 0.")
    mass = small_field_mass(dist, K)
    return FieldAssumptionCheck(mass, p0 / 2, mass < p0 / 2)


# The model

@dataclass(frozen=True, eq=False)
class IsingModel:
    graph: object
    couplings: np.ndarray
    field: np.ndarray
    convention: str = PLUS_MINUS
    pinning: dict = field(default_factory=dict)
    beta_max: float = None

    def __post_init__(self):
        check_convention(self.convention)
        n, m = self.graph.num_vertices, len(self.graph.edges)
        if self.couplings.shape != (m,):
            raise InputError(f"Expected {m} edge couplings, got {self.couplings.shape[0]}.")
        if self.field.shape != (n,):
            raise InputError(f"Expected {n} field values, got {self.field.shape[0]}.")
        if not np.isfinite(self.field).all() or not np.isfinite(self.couplings).all():
            raise InputError("Couplings and fields must be finite; pin vertices instead of using infinite fields.")
        bottom, top = spin_values(self.convention)
        for v, s in self.pinning.items():
            self.graph.check_vertex(v)
            if s not in (bottom, top):
                raise InputError(f"Pinned value {s} at vertex {v} is not a {self.convention!r} spin.")
        if self.beta_max is not None and np.abs(self.couplings).max(initial=0.0) > self.beta_max + 1e-12:
            raise InputError(f"A coupling exceeds the declared beta_max={self.beta_max}.")

    @property
    def n(self):
        return self.graph.num_vertices

    @property
    def ferromagnetic(self):
        return bool((self.couplings >= 0).all())

    @property
    def free_vertices(self):
        return tuple(v for v in range(self.n) if v not in self.pinning)

    @property
    def uniform_coupling(self):
        if len(self.couplings) and np.allclose(self.couplings, self.couplings[0], rtol=0, atol=1e-15):
            return float(self.couplings[0])
        return None

    def coupling_bound(self):
        if self.beta_max is not None:
            return self.beta_max
        return float(np.abs(self.couplings).max(initial=0.0))

    def require_ferromagnetic(self, what):
        if not self.ferromagnetic:
            raise FerromagnetismRequired(f"{what} relies on FKG and needs non-negative couplings.")

    def require_convention(self, convention, what):
        if self.convention != convention:
            raise InputError(f"{what} needs the {convention!r} convention, model is {self.convention!r}.")

    def pin(self, extra):
        merged = dict(self.pinning)
        for v, s in dict(extra or {}).items():
            v, s = int(v), int(s)
            if merged.get(v, s) != s:
                raise InfeasiblePinning(f"Vertex {v} is already pinned to {merged[v]}, cannot pin to {s}.")
            merged[v] = s
        return self.replace(pinning=merged)

    def replace(self, **changes):
        values = dict(graph=self.graph, couplings=self.couplings, field=self.field,
                      convention=self.convention, pinning=self.pinning, beta_max=self.beta_max)
        values.update(changes)
        return IsingModel(**values)

    def with_field(self, field_values):
        return self.replace(field=frozen_array(field_values))

    def with_couplings(self, couplings, beta_max=None):
        return self.replace(couplings=frozen_array(couplings), beta_max=beta_max)

    def pinned_state(self):
        """Full-length spin vector with pinned values set and free entries at the bottom value."""
        bottom, _ = spin_values(self.convention)
        state = np.full(self.n, bottom, dtype=np.int8)
        for v, s in self.pinning.items():
            state[v] = s
        return state

    def incident_coupling_sums(self):
        sums = np.zeros(self.n)
        for (u, v), j in zip(self.graph.edges, self.couplings):
            sums[u] += j
            sums[v] += j
        return sums

    def energies(self, states):
        """H for a (k, n) array of configurations in this model's convention."""
        states = np.asarray(states, dtype=float)
        total = states @ self.field
        if len(self.graph.edges):
            edges = np.asarray(self.graph.edges)
            total = total + (states[:, edges[:, 0]] * states[:, edges[:, 1]]) @ self.couplings
        return total

    def hamiltonian(self, sigma):
        if isinstance(sigma, SpinConfiguration):
            if sigma.convention != self.convention:
                raise InputError(f"Configuration is {sigma.convention!r} but the model is {self.convention!r}.")
            values = sigma.values()
        else:
            values = np.asarray(sigma)
        if len(values) != self.n:
            raise InputError(f"Configuration has {len(values)} spins for {self.n} vertices.")
        for v, s in self.pinning.items():
            if values[v] != s:
                raise InputError(f"Configuration disagrees with the pinning at vertex {v}.")
        return float(self.energies(values[None, :])[0])

    def up_logit(self, v, spins):
        """log P(top)/P(bottom) for vertex v given all other spins."""
        s = self.field[v]
        for w, e in zip(self.graph.adjacency[v], self._incident_edges(v)):
            s += self.couplings[e] * spins[w]
        return 2.0 * s if self.convention == PLUS_MINUS else s

    def up_probability(self, v, spins):
        return float(expit(self.up_logit(v, spins)))

    def _incident_edges(self, v):
        cached = self.__dict__.get('_incident')
        if cached is None:
            cached = [[] for _ in range(self.n)]
            for i, (a, b) in enumerate(self.graph.edges):
                cached[a].append((b, i))
                cached[b].append((a, i))
            cached = [tuple(e for _, e in sorted(row)) for row in cached]
            object.__setattr__(self, '_incident', cached)
        return cached[v]

    def coupling_matrix(self):
        J = np.zeros((self.n, self.n))
        for (u, v), j in zip(self.graph.edges, self.couplings):
            J[u, v] = J[v, u] = j
        return J

    def induced(self, vertices):
        """Sub-model on ``vertices`` (relabelled 0..k-1 in the given order); absent vertices are dropped."""
        vertices = tuple(vertices)
        index = {v: i for i, v in enumerate(vertices)}
        edges, couplings = [], []
        for (u, v), j in zip(self.graph.edges, self.couplings):
            if u in index and v in index:
                edges.append((index[u], index[v]))
                couplings.append(j)
        sub = build_graph(len(vertices), edges)
        # build_graph sorts edges; keep couplings aligned with that order
        by_edge = {(min(a, b), max(a, b)): j for (a, b), j in zip(edges, couplings)}
        return IsingModel(
            sub,
            frozen_array([by_edge[e] for e in sub.edges]),
            frozen_array([self.field[v] for v in vertices]),
            self.convention,
            {index[v]: s for v, s in self.pinning.items() if v in index},
            self.beta_max,
        )


def make_model(graph, beta=None, field=None, convention=PLUS_MINUS, pinning=None,
               edge_couplings=None, beta_max=None):
    if edge_couplings is None:
        if beta is None:
            raise InputError("Give either a uniform beta or per-edge couplings.")
        couplings = np.full(len(graph.edges), float(beta))
    else:
        couplings = np.asarray(edge_couplings, dtype=float)
    field = np.zeros(graph.num_vertices) if field is None else np.asarray(field, dtype=float)
    pins = {int(v): int(s) for v, s in (pinning or {}).items()}
    return IsingModel(graph, frozen_array(couplings), frozen_array(field), convention, pins, beta_max)


def _map_pinning(pinning, mapping):
    return {v: mapping[s] for v, s in pinning.items()}


def to_zero_one(model):
    """Change of coordinates sigma' = (sigma + 1) / 2: couplings x4, h_u -> 2h_u - 2 sum_v beta_uv."""
    model.require_convention(PLUS_MINUS, "to_zero_one")
    return IsingModel(
        model.graph,
        frozen_array(4.0 * model.couplings),
        frozen_array(2.0 * model.field - 2.0 * model.incident_coupling_sums()),
        ZERO_ONE,
        _map_pinning(model.pinning, {-1: 0, 1: 1}),
        None if model.beta_max is None else 4.0 * model.beta_max,
    )


def to_plus_minus(model01):
    model01.require_convention(ZERO_ONE, "to_plus_minus")
    couplings = model01.couplings / 4.0
    field = model01.field / 2.0 + model01.incident_coupling_sums() / 4.0
    return IsingModel(
        model01.graph,
        frozen_array(couplings),
        frozen_array(field),
        PLUS_MINUS,
        _map_pinning(model01.pinning, {0: -1, 1: 1}),
        None if model01.beta_max is None else model01.beta_max / 4.0,
    )


def theta_star(beta):
    """Terminal tilt 1 - e^{-4 beta}, where every tilted pinned model is a product measure."""
    return 1.0 - math.exp(-4.0 * beta)


def edge_tilt(model01, theta, pinning=None):
    """
    The tilted model (1 - theta) (x) mu^tau.

    Reweighting by (1 - theta)^{m(sigma)} adds ln(1 - theta) to every edge
    coupling in the 0/1 coordinates. On free edges this is the coupling
    4 beta_uv + ln(1 - theta); on an edge with a pinned endpoint the same term
    acts as a field shift (endpoint pinned to 1) or vanishes (pinned to 0).
    """
    model01.require_convention(ZERO_ONE, "edge_tilt")
    if not 0 <= theta < 1:
        raise InputError(f"theta must lie in [0, 1), got {theta}.")
    pinned = model01.pin(pinning)
    if theta == 0:
        return pinned
    return pinned.replace(couplings=frozen_array(model01.couplings + math.log1p(-theta)), beta_max=None)


# Parameter algebra of the large-disorder assumption

@dataclass(frozen=True)
class AssumptionParams:
    p0: float
    K: float
    beta: float
    delta: int
    rho: float
    xi_star: float
    alpha_star: float
    gamma_star: float
    valid: bool


def rho(beta, delta, K):
    """e^{D b - K} / (e^{D b - K} + e^{-D b + K}): worst-case wrong-sign probability at a site with |h| > K."""
    return float(expit(2.0 * (delta * beta - K)))


def xi_star(p0, delta):
    return ((delta - 2) * math.log(delta - 2) if delta > 2 else 0.0) \
        - math.log(p0) - (delta - 1) * math.log(delta - 1) - (delta - 2) * math.log1p(-p0)


def gamma_star(p0, delta):
    return math.log((1 - p0) / (p0 * (delta - 2)))


def assumption_params(p0, K, beta, delta):
    if delta < 3:
        raise InputError("The cluster constants need a degree bound delta >= 3.")
    if not 0 < p0 < 1:
        raise InputError("p0 must lie in (0, 1).")
    if beta <= 0 or K <= 0:
        raise InputError("beta and K must be positive.")
    r = rho(beta, delta, K)
    xi = xi_star(p0, delta)
    return AssumptionParams(
        p0=p0, K=K, beta=beta, delta=delta, rho=r,
        xi_star=xi, alpha_star=xi / 2.0, gamma_star=gamma_star(p0, delta),
        valid=p0 * (delta - 1) < 1 and r < p0 / 4,
    )
