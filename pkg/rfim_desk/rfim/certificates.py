"""Closed-form spectral-gap and MLSI certificates, and the mixing times they imply."""
import logging
import math
from dataclasses import dataclass, field

from scipy import optimize

from .exceptions import InputError
from .localization import marginal_constant
from .models import gamma_star, xi_star

logger = logging.getLogger(__name__)


def _check_positive(**values):
    for name, value in values.items():
        if not value > 0:
            raise InputError(f"{name} must be positive, got {value}.")


def _exp(x):
    return math.exp(x) if x < 709 else math.inf


def log_inverse_min_probability(n, beta, delta, field_l1):
    """Upper bound on log(1/min mu): n ln 2 + beta delta n + 2 ||h||_1."""
    return n * math.log(2.0) + beta * delta * n + 2.0 * field_l1


def mixing_time_from_gap(gap, log_inv_mu_min, eps):
    """gap^{-1} (log(1/mu_min) + log(1/eps))."""
    _check_positive(gap=gap, eps=eps)
    return (log_inv_mu_min + math.log(1.0 / eps)) / gap


def mixing_time_from_mlsi(rho, log_inv_mu_min, eps):
    """rho^{-1} (log log(1/mu_min) + log(1/eps))."""
    _check_positive(rho=rho, eps=eps)
    return (math.log(max(log_inv_mu_min, 1.0)) + math.log(1.0 / eps)) / rho


@dataclass(frozen=True)
class GapCertificate:
    n: int
    beta: float
    delta: int
    alpha_star: float
    gap_lower: float
    log_gap_lower: float
    failure_probability_note: str
    formula_id: str = 'gap >= n^-1 exp(-16 beta delta ln n / alpha*)'

    def tmix_upper(self, eps, field_l1):
        """Mixing time bound with the certified gap; grows like n^{1 + 16 beta delta / alpha*}."""
        log_inv = log_inverse_min_probability(self.n, self.beta, self.delta, field_l1)
        _check_positive(eps=eps)
        return _exp(-self.log_gap_lower) * (log_inv + math.log(1.0 / eps))


def gap_certificate(n, beta, delta, alpha_star):
    _check_positive(n=n, beta=beta, delta=delta, alpha_star=alpha_star)
    log_gap = -math.log(n) - 16.0 * beta * delta * math.log(n) / alpha_star
    note = ("holds outside an event of probability at most 2 n delta c e^{2 gamma*} / n^2 over the field, "
            "c = 2 / ((1 - e^{-alpha*})(1 - e^{-2 alpha*}))")
    return GapCertificate(n, beta, delta, alpha_star, math.exp(log_gap), log_gap, note)


@dataclass(frozen=True)
class MlsiCertificate:
    n: int
    beta: float
    delta: int
    alpha_star: float
    m_bound: float
    rho_lower: float
    log_rho_lower: float
    formula_id: str = 'rho >= (3n)^-1 exp(-4 beta ((C+1) 4 delta ln n / alpha* + 1))'


def mlsi_certificate(n, beta, delta, alpha_star, m_bound):
    _check_positive(n=n, beta=beta, delta=delta, alpha_star=alpha_star)
    if m_bound < 0:
        raise InputError("The field bound M must be non-negative.")
    C = marginal_constant(delta, m_bound, beta)
    log_rho = -math.log(3.0 * n) - 4.0 * beta * ((C + 1.0) * 4.0 * delta * math.log(n) / alpha_star + 1.0)
    return MlsiCertificate(n, beta, delta, alpha_star, m_bound, math.exp(log_rho), log_rho)


def union_constant(alpha_star):
    return 2.0 / (-math.expm1(-alpha_star) * -math.expm1(-2.0 * alpha_star))


@dataclass(frozen=True)
class OperatorNormBound:
    value: float
    failure_probability: float


def operator_norm_bound(n, delta, alpha_star, p0):
    """||Cor2|| <= 4 delta ln n / alpha*, failing with probability at most 2 n delta c e^{2 gamma*} / n^2."""
    _check_positive(n=n, delta=delta, alpha_star=alpha_star)
    failure = 2.0 * n * delta * union_constant(alpha_star) * math.exp(2.0 * gamma_star(p0, delta)) / n ** 2
    return OperatorNormBound(4.0 * delta * math.log(n) / alpha_star, failure)


def p0_from_alpha(alpha_star, delta):
    """Invert p0 -> xi*(p0) / 2 on the subcritical range (0, 1/(delta - 1)), solving in log p0."""
    if delta < 3:
        raise InputError("Need delta >= 3.")
    hi = math.log(1.0 / (delta - 1) - 1e-12)
    lo = math.log(1e-300)

    def target(log_p):
        return xi_star(math.exp(log_p), delta) / 2.0 - alpha_star

    if target(lo) < 0:
        raise InputError(f"alpha*={alpha_star} is beyond reach of any p0.")
    return math.exp(optimize.brentq(target, lo, hi))


@dataclass(frozen=True)
class RefinedTail:
    L: float
    epsilon: float
    log_inverse_gap_bound: float
    inverse_gap_bound: float
    failure: float
    kappa0: float
    p0: float
    below_threshold: bool
    notes: tuple = field(default=())


def refined_gap_tail(n, beta, delta, alpha_star, L, p0=None):
    """
    gap^{-1} <= n exp(eps L) with eps = 16 beta delta / sqrt(alpha*), failing with
    probability e^{-2L}, valid for L >= kappa0 ln n where
    ln(n delta c e^{2 gamma*}) <= (sqrt(alpha*) - 2) L.
    """
    _check_positive(n=n, beta=beta, delta=delta, alpha_star=alpha_star, L=L)
    eps = 16.0 * beta * delta / math.sqrt(alpha_star)
    p0 = p0_from_alpha(alpha_star, delta) if p0 is None else p0
    slope = math.sqrt(alpha_star) - 2.0
    notes = ()
    if slope <= 0:
        kappa0 = math.inf
        notes = ("sqrt(alpha*) <= 2: no L satisfies the threshold",)
    else:
        need = math.log(n * delta * union_constant(alpha_star)) + 2.0 * gamma_star(p0, delta)
        kappa0 = max(need / slope, 0.0) / math.log(n) if n > 1 else 0.0
    below = L < kappa0 * math.log(n) if n > 1 else slope <= 0
    if below:
        logger.warning("L=%s is below the threshold kappa0 ln n = %s; bound reported anyway", L,
                       kappa0 * math.log(n) if n > 1 else kappa0)
    log_bound = math.log(n) + eps * L
    return RefinedTail(L, eps, log_bound, _exp(log_bound), math.exp(-2.0 * L), kappa0, p0, below, notes)
