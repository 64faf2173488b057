"""Closed-form capacity quantities for vanilla RNN classes.

Everything here is a pure function of a :class:`NormProfile`: the
recurrence constants ``a, b_t, c_t, g_t`` (and their spectral and
bounded-activation variants), matrix and class covering numbers, the
Dudley entropy bound, the exact-constant Rademacher bound, the four bound
families compared in the experiments, the generalization bound, the local
Rademacher bound and the estimation-error quantities under a Bernstein
condition.

Geometric and arithmetic-geometric sums are accumulated term by term, so
``rho_h * B_U == 1`` needs no special casing.  Logarithm arguments that
fall to 1 or below are clamped (log -> 0) and reported through ``flags``.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .losses import LossSpec, loss_constants

__all__ = [
    "FLAVORS",
    "RangeError",
    "BernsteinConditionError",
    "DegenerateDistributionError",
    "NormProfile",
    "RecurrenceConstants",
    "BoundReport",
    "EstimationError",
    "recurrence_constants",
    "lambda_sum",
    "g_star",
    "output_bound",
    "covering_number_matrix",
    "covering_terms",
    "covering_number_class",
    "dudley_bound",
    "rademacher_exact",
    "bound1",
    "bound2",
    "bound3",
    "bound4",
    "bound4_star",
    "stochastic_term",
    "generalization_bound",
    "eta",
    "local_rademacher",
    "phi_star",
    "nu",
    "confidence",
    "estimation_error",
    "bernstein_constant_ce",
    "improvement_percentage",
    "compute_bounds",
    "REPORT_COLUMNS",
]

FLAVORS = ("frobenius", "spectral", "star")
NORM_TOL = 1e-8


class RangeError(OverflowError):
    """A recurrence constant overflowed float64."""


class BernsteinConditionError(ValueError):
    """``rho * A_t * theta_t < 1`` does not hold."""


class DegenerateDistributionError(ValueError):
    """The restricted softmax Hessian is numerically singular."""


@dataclass(frozen=True)
class NormProfile:
    """Every norm symbol the bounds consume.

    ``B_*`` are Frobenius norms, ``M_*`` spectral norms and ``B_*1`` matrix
    1-norms.  ``B_x`` bounds each input vector, ``B_row`` is the largest
    row-vector norm of the input matrix, ``b`` the entrywise bound of a
    bounded activation (``None`` for ReLU).
    """

    d_x: int
    d_h: int
    d_y: int
    rho_h: float = 1.0
    B_x: float = 1.0
    B_row: float = 1.0
    B_U: float = 1.0
    B_V: float = 1.0
    B_W: float = 1.0
    M_U: float = 1.0
    M_V: float = 1.0
    M_W: float = 1.0
    B_x1: float = 1.0
    B_U1: float = 1.0
    B_V1: float = 1.0
    B_W1: float = 1.0
    b: Optional[float] = None

    def __post_init__(self):
        for k in ("d_x", "d_h", "d_y"):
            v = getattr(self, k)
            if int(v) != v or v < 1:
                raise ValueError(f"{k} must be a positive integer, got {v!r}")
            object.__setattr__(self, k, int(v))
        for k in self._real_fields():
            v = getattr(self, k)
            if v is None:
                continue
            v = float(v)
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"{k} must be finite and non-negative, got {v!r}")
            object.__setattr__(self, k, v)
        for s, f in (("M_U", "B_U"), ("M_V", "B_V"), ("M_W", "B_W")):
            if getattr(self, s) > getattr(self, f) + NORM_TOL:
                raise ValueError(f"{s}={getattr(self, s)!r} exceeds {f}={getattr(self, f)!r}")

    @staticmethod
    def _real_fields():
        return ("rho_h", "B_x", "B_row", "B_U", "B_V", "B_W", "M_U", "M_V", "M_W",
                "B_x1", "B_U1", "B_V1", "B_W1", "b")

    @property
    def d(self) -> int:
        return max(self.d_x, self.d_h, self.d_y)

    @property
    def d_prime(self) -> float:
        return math.sqrt(self.d_x * self.d_h + self.d_h**2 + self.d_h * self.d_y)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "NormProfile":
        names = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in d.items() if k in names})

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def replace(self, **kw) -> "NormProfile":
        d = self.to_dict()
        d.update(kw)
        return NormProfile(**d)


@dataclass(frozen=True)
class RecurrenceConstants:
    a: float
    b_t: float
    c_t: float
    g_t: float
    flavor: str


def _flavor(flavor: str) -> str:
    if flavor not in FLAVORS:
        raise ValueError(f"flavor must be one of {FLAVORS}, got {flavor!r}")
    return flavor


def _sums(x: float, t: int):
    """``c = sum_{j<t} x^j`` and ``b = sum_{j<=t-2} (j+1) x^j``."""
    c = 0.0
    b = 0.0
    power = 1.0
    for j in range(t):
        c += power
        if j <= t - 2:
            b += (j + 1) * power
        power *= x
    if not (math.isfinite(c) and math.isfinite(b)):
        raise RangeError(f"recurrence constants overflow for rate {x!r} and t={t}")
    return b, c


def _check_t(t):
    if int(t) != t or t < 1:
        raise ValueError(f"t must be a positive integer, got {t!r}")
    return int(t)


def _check_n(n):
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    return int(n)


def _min_bounded(p: NormProfile, c_prime: float, n: int) -> float:
    """``min{b sqrt(n d), rho_h B_x B_W c'_t}``."""
    if p.b is None:
        raise ValueError("profile has no activation bound b (bounded activation required)")
    return min(p.b * math.sqrt(n * p.d), p.rho_h * p.B_x * p.B_W * c_prime)


def recurrence_constants(p: NormProfile, t: int, flavor: str = "frobenius", n: Optional[int] = None
                         ) -> RecurrenceConstants:
    """Constants ``a, b_t, c_t, g_t`` for the chosen flavor.

    ``frobenius`` uses ``rho_h B_U`` as the growth rate, ``spectral`` uses
    ``rho_h M_U`` for ``b'_t, c'_t`` while ``g'_t`` keeps ``rho_h B_U b'_t``
    in its max.  ``star`` returns ``b'_t, c'_t`` with ``g*_t`` and needs ``n``.
    """
    t = _check_t(t)
    flavor = _flavor(flavor)
    a = p.rho_h * p.B_x
    rate = p.rho_h * (p.B_U if flavor == "frobenius" else p.M_U)
    b, c = _sums(rate, t)
    if flavor == "star":
        if n is None:
            raise ValueError("star flavor needs the sample size n")
        g = g_star(p, t, n)
    else:
        g = a * p.B_V * p.B_W * max(c, p.rho_h * p.B_U * b)
    if not math.isfinite(g):
        raise RangeError(f"g_t overflows for t={t}")
    return RecurrenceConstants(a=a, b_t=b, c_t=c, g_t=g, flavor=flavor)


def lambda_sum(x: float, t: int) -> float:
    """``sum_{k<t} (k+1) x^k``, the summation form of the Lambda factor of Bound 1."""
    t = _check_t(t)
    total = 0.0
    power = 1.0
    for k in range(t):
        total += (k + 1) * power
        power *= x
    if not math.isfinite(total):
        raise RangeError(f"Lambda overflows for rate {x!r} and t={t}")
    return total


def g_star(p: NormProfile, t: int, n: int) -> float:
    """Leading factor for bounded activations, never larger than ``g'_t``."""
    t, n = _check_t(t), _check_n(n)
    b_p, c_p = _sums(p.rho_h * p.M_U, t)
    m = _min_bounded(p, c_p, n)
    if m < p.b * math.sqrt(n * p.d):
        # unbounded term active: g*_t is g'_t, evaluated the same way
        return recurrence_constants(p, t, "spectral").g_t
    return p.B_V * m * max(1.0, p.rho_h * p.B_U * b_p / c_p)


def output_bound(p: NormProfile, t: int, flavor: str = "frobenius") -> float:
    """``rho_h B_x B_V B_W c_t``: a bound on ``||y_t||`` over the class."""
    rc = recurrence_constants(p, t, "spectral" if flavor == "star" else flavor)
    return rc.a * p.B_V * p.B_W * rc.c_t


def _ceil(x: float) -> int:
    r = round(x)
    if abs(x - r) <= 1e-12 * max(1.0, abs(x)):
        return int(r)
    return math.ceil(x)


def covering_number_matrix(lam: float, d1: int, d2: int, eps: float) -> float:
    """Log covering number of the Frobenius ball of radius ``lam`` in R^{d1 x d2}."""
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    if not eps > 0:
        raise ValueError("eps must be positive")
    m = d1 * d2
    return _ceil(lam * lam * m / (eps * eps)) * math.log(2 * m)


def covering_terms(p: NormProfile, t: int, eps: float, flavor: str = "frobenius"):
    """The U, V and W covering terms whose sum the class bound dominates."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    rc = recurrence_constants(p, t, "spectral" if flavor == "star" else flavor)
    a2 = rc.a**2
    e2 = eps * eps
    dh, dx, dy = p.d_h, p.d_x, p.d_y
    u = 9 * dh * dh * a2 * p.rho_h**2 * p.B_U**2 * p.B_V**2 * p.B_W**2 * rc.b_t**2 / e2 * math.log(2 * dh * dh)
    v = 9 * dh * dy * a2 * p.B_V**2 * p.B_W**2 * rc.c_t**2 / e2 * math.log(2 * dy * dh)
    w = 9 * dx * dh * a2 * p.B_V**2 * p.B_W**2 * rc.c_t**2 / e2 * math.log(2 * dh * dx)
    return u, v, w


def covering_number_class(p: NormProfile, t: int, eps: float, flavor: str = "frobenius") -> float:
    """``27 d^2 g_t^2 log(2 d^2) / eps^2``."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    if flavor == "star":
        raise ValueError("class covering is defined for the frobenius and spectral flavors")
    g = recurrence_constants(p, t, flavor).g_t
    d = p.d
    return 27 * d * d * g * g * math.log(2 * d * d) / (eps * eps)


def dudley_bound(C: float, r: float, n: int, alpha: float) -> float:
    """Entropy-integral bound for ``log N(eps) = C / eps^2``.

    ``4 alpha / sqrt(n) + (12 sqrt(C) / n) log(2 r sqrt(n) / alpha)``.
    """
    n = _check_n(n)
    if C < 0:
        raise ValueError("C must be non-negative")
    top = 2.0 * r * math.sqrt(n)
    if not (0.0 < alpha < top):
        raise ValueError(f"alpha must lie in (0, {top!r}), got {alpha!r}")
    return 4.0 * alpha / math.sqrt(n) + 12.0 * math.sqrt(C) / n * math.log(top / alpha)


def _log(arg: float, flags: Optional[list], name: str) -> float:
    if arg <= 1.0:
        if flags is not None and name not in flags:
            flags.append(name)
        return 0.0
    return math.log(arg)


def _radius(p: NormProfile, t: int, n: int, flavor: str) -> float:
    """Range ``r`` of the network output over the class."""
    if flavor == "star":
        _, c_p = _sums(p.rho_h * p.M_U, t)
        return p.B_V * _min_bounded(p, c_p, n)
    return output_bound(p, t, flavor)


def rademacher_exact(p: NormProfile, t: int, n: int, rho: float, flavor: str = "frobenius",
                     flags: Optional[list] = None) -> float:
    """Exact-constant bound on the loss class with ``alpha = 1/sqrt(n)``.

    ``8 rho / n + (72 rho d g_t / n) sqrt(3 log(2 d^2)) log(2 r n)``.
    """
    t, n = _check_t(t), _check_n(n)
    flavor = _flavor(flavor)
    g = recurrence_constants(p, t, flavor, n).g_t
    r = _radius(p, t, n, flavor)
    d = p.d
    lg = _log(2.0 * r * n, flags, f"rademacher_exact:log(2rn)<=1")
    return 8.0 * rho / n + 72.0 * rho * d * g / n * math.sqrt(3.0 * math.log(2 * d * d)) * lg


def _dlogd(d: int) -> float:
    return d * math.sqrt(math.log(d))


def bound1(p: NormProfile, t: int, n: int, flags: Optional[list] = None) -> float:
    """``B_x1 B_W1 B_V1 Lambda / n`` with Lambda built on the 1-norm of U."""
    t, n = _check_t(t), _check_n(n)
    lam = lambda_sum(p.rho_h * p.B_U1, t)
    return p.B_x1 * p.B_W1 * p.B_V1 * lam / n


def bound2(p: NormProfile, t: int, n: int, flags: Optional[list] = None) -> float:
    t, n = _check_t(t), _check_n(n)
    if p.M_V == 0.0 or p.M_W == 0.0:
        # zero V or W: the output map is identically zero
        return 0.0
    growth = max((p.rho_h * p.M_U) ** (t - 1), 1.0)
    root = math.sqrt(t * t * p.B_U**2 + (p.B_W / p.M_W) ** 2 + (p.B_V / p.M_V) ** 2)
    val = p.B_row * t * _dlogd(p.d) * growth * p.M_V * p.M_W * root / math.sqrt(n)
    if not math.isfinite(val):
        raise RangeError("bound2 overflows")
    return val


def bound3(p: NormProfile, t: int, n: int, flags: Optional[list] = None) -> float:
    t, n = _check_t(t), _check_n(n)
    if p.b is None:
        raise ValueError("bound3 needs a bounded activation (profile.b)")
    _, c_p = _sums(p.rho_h * p.M_U, t)
    dp = p.d_prime
    s_f = p.B_U + p.B_W + p.B_V
    m = min(p.b * math.sqrt(dp), p.B_row * p.M_W * c_p)
    return p.B_row * p.M_W * p.M_U * m * c_p * s_f * math.sqrt(dp * math.log(dp)) / math.sqrt(n)


def bound4(p: NormProfile, t: int, n: int, flags: Optional[list] = None) -> float:
    """``g'_t d sqrt(log d) log(rho_h n B_x B_V B_W c'_t) / n``."""
    t, n = _check_t(t), _check_n(n)
    return _bound4_value(p, t, n, flags, "bound4:log<=1")


def _bound4_value(p, t, n, flags, flag):
    rc = recurrence_constants(p, t, "spectral")
    lg = _log(p.rho_h * n * p.B_x * p.B_V * p.B_W * rc.c_t, flags, flag)
    return rc.g_t * _dlogd(p.d) * lg / n


def bound4_star(p: NormProfile, t: int, n: int, flags: Optional[list] = None) -> float:
    """``g*_t d sqrt(log d) log(n B_V min{b sqrt(n d), rho_h B_x B_W c'_t}) / n``."""
    t, n = _check_t(t), _check_n(n)
    _, c_p = _sums(p.rho_h * p.M_U, t)
    m = _min_bounded(p, c_p, n)
    if m < p.b * math.sqrt(n * p.d):
        # same closed form as Bound 4 once the b sqrt(nd) cap is inactive
        return _bound4_value(p, t, n, flags, "bound4_star:log<=1")
    lg = _log(n * p.B_V * m, flags, "bound4_star:log<=1")
    return g_star(p, t, n) * _dlogd(p.d) * lg / n


def stochastic_term(C_t: float, n: int, delta: float) -> float:
    """``3 C_t sqrt(log(2/delta) / (2n))``."""
    n = _check_n(n)
    if not (0.0 < delta < 1.0):
        raise ValueError("delta must lie in (0, 1)")
    return 3.0 * C_t * math.sqrt(math.log(2.0 / delta) / (2.0 * n))


def generalization_bound(empirical_risk: float, p: NormProfile, t: int, n: int, delta: float,
                         loss: LossSpec, omega_t: Optional[float] = None, flavor: str = "spectral",
                         flags: Optional[list] = None) -> float:
    """Empirical risk + twice the loss-class complexity + the stochastic term."""
    if omega_t is None and loss.natural_bound is None:
        omega_t = output_bound(p, t, flavor)
    if loss.natural_bound is None and not omega_t > 0:
        # degenerate class: outputs are identically zero, so the loss is constant
        omega_t = 0.0
        C_t = 0.0
        rho = loss.rho
    else:
        rho, C_t = loss_constants(loss, omega_t)
    rad = rademacher_exact(p, t, n, rho, flavor, flags)
    return empirical_risk + 2.0 * rad + stochastic_term(C_t, n, delta)


def eta(p: NormProfile, t: int, c1: float = 2.0, alpha: float = 1.0, flavor: str = "frobenius") -> float:
    """``(3 sqrt(3) c1 / alpha) d sqrt(log(2 d^2)) g_t``."""
    if not c1 > 1:
        raise ValueError("c1 must exceed 1")
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    if flavor == "star":
        raise ValueError("eta is defined for the frobenius and spectral flavors")
    g = recurrence_constants(p, t, flavor).g_t
    d = p.d
    return 3.0 * math.sqrt(3.0) * c1 / alpha * d * math.sqrt(math.log(2 * d * d)) * g


def local_rademacher(p: NormProfile, t: int, n: int, r: float, c1: float = 2.0,
                     alpha: Optional[float] = None, flavor: str = "frobenius") -> float:
    """Complexity of the radius-``r`` Frobenius ball around the best-in-class function.

    ``alpha`` defaults to ``1/sqrt(n)``.
    """
    n = _check_n(n)
    if r < 0:
        raise ValueError("r must be non-negative")
    if alpha is None:
        alpha = 1.0 / math.sqrt(n)
    return eta(p, t, c1, alpha, flavor) * r / math.sqrt(n)


def phi_star(eta_t: float, n: int, theta_t: float) -> float:
    """``48 eta_t / (sqrt(n) theta_t)``."""
    n = _check_n(n)
    if not theta_t > 0:
        raise ValueError("theta_t must be positive")
    return 48.0 * eta_t / (math.sqrt(n) * theta_t)


def nu(theta_t: float, omega_t: float) -> float:
    """``min{1/288, 1/(207 theta_t omega_t)}``."""
    if theta_t * omega_t <= 0:
        return 1.0 / 288.0
    return min(1.0 / 288.0, 1.0 / (207.0 * theta_t * omega_t))


def confidence(vartheta: float):
    """Probability ``1 - 2 exp(-v) / (1 - exp(-3 v))`` and its log failure term.

    Returns ``(probability, log_failure)``; the probability is clamped to
    [0, 1) while ``log_failure`` stays exact where the probability rounds
    to its cap.
    """
    if not vartheta > 0:
        return 0.0, math.inf
    log_fail = math.log(2.0) - vartheta - math.log(-math.expm1(-3.0 * vartheta))
    prob = -math.expm1(log_fail) if log_fail < 0 else 0.0
    prob = min(max(prob, 0.0), math.nextafter(1.0, 0.0))
    return prob, log_fail


@dataclass(frozen=True)
class EstimationError:
    phi_star: float
    excess_risk_bound: float
    probability: float
    log_failure: float
    eta: float
    theta: float
    nu: float
    vartheta: float


def estimation_error(p: NormProfile, t: int, n: int, theta_t: Optional[float] = None,
                     omega_t: Optional[float] = None, rho: float = math.sqrt(2.0), A_t: float = 1.0,
                     c1: float = 2.0, alpha: Optional[float] = None, flavor: str = "frobenius",
                     delta_t: float = 0.0) -> EstimationError:
    """Distance and excess-risk bounds for an ERM estimator and their probability.

    ``theta_t`` defaults to ``0.9 / (rho A_t)``, ``alpha`` to ``1/sqrt(n)``,
    ``omega_t`` to the analytic output bound and the optimisation gap
    ``delta_t`` to 0.
    """
    n = _check_n(n)
    if not (rho > 0 and A_t > 0):
        raise ValueError("rho and A_t must be positive")
    if theta_t is None:
        theta_t = 0.9 / (rho * A_t)
    if not theta_t > 0:
        raise ValueError("theta_t must be positive")
    if not rho * A_t * theta_t < 1.0:
        raise BernsteinConditionError(f"rho*A_t*theta_t = {rho * A_t * theta_t!r} must be < 1")
    if alpha is None:
        alpha = 1.0 / math.sqrt(n)
    if omega_t is None:
        omega_t = output_bound(p, t, flavor)
    e = eta(p, t, c1, alpha, flavor)
    phi = phi_star(e, n, theta_t)
    v = nu(theta_t, omega_t)
    vt = n * v * theta_t**2 * phi**2
    prob, log_fail = confidence(vt)
    return EstimationError(
        phi_star=phi,
        excess_risk_bound=rho * theta_t * phi**2 + delta_t,
        probability=prob,
        log_failure=log_fail,
        eta=e,
        theta=theta_t,
        nu=v,
        vartheta=vt,
    )


def bernstein_constant_ce(q):
    """``(A_t, lambda_min)`` for the cross-entropy softmax Hessian.

    ``H = diag(q) - q q^T`` always annihilates the all-ones vector, so the
    smallest eigenvalue is taken on its orthogonal complement.
    """
    q = np.asarray(q, dtype=np.float64)
    if q.ndim != 1 or q.size < 2:
        raise ValueError("q must be a probability vector with K >= 2")
    if np.any(q <= 0) or abs(q.sum() - 1.0) > 1e-9:
        raise ValueError("q must be strictly positive and sum to 1")
    K = q.size
    H = np.diag(q) - np.outer(q, q)
    basis = np.eye(K)
    basis[:, 0] = 1.0
    Q, _ = np.linalg.qr(basis)
    comp = Q[:, 1:]
    lam = float(np.linalg.eigvalsh(comp.T @ H @ comp).min())
    if lam < 1e-12:
        raise DegenerateDistributionError(f"restricted smallest eigenvalue {lam!r} is below 1e-12")
    return 2.0 / lam, lam


def improvement_percentage(bound_i: float, reference: float) -> float:
    """``100 (bound_i - reference) / reference``."""
    if reference == 0:
        return math.inf if bound_i > 0 else 0.0
    return 100.0 * (bound_i - reference) / reference


REPORT_COLUMNS = (
    "dataset", "t", "n", "d_x", "d_h", "d_y", "activation", "loss",
    "bound1", "bound2", "bound3", "bound4", "bound4_star",
    "rademacher_exact", "theorem2_total", "flags",
)
BOUND_NAMES = ("bound1", "bound2", "bound3", "bound4", "bound4_star")


@dataclass
class BoundReport:
    t: int
    n: int
    delta: float
    rho: float
    C_t: float
    profile_hash: str
    d_x: int
    d_h: int
    d_y: int
    activation: str
    loss: str
    bound1: Optional[float] = None
    bound2: Optional[float] = None
    bound3: Optional[float] = None
    bound4: Optional[float] = None
    bound4_star: Optional[float] = None
    rademacher_exact: Optional[float] = None
    theorem2_total: Optional[float] = None
    stochastic_term: Optional[float] = None
    empirical_risk: float = 0.0
    dataset: str = ""
    flags: list = field(default_factory=list)

    def row(self) -> dict:
        d = asdict(self)
        d["flags"] = ";".join(self.flags)
        return d

    def to_dict(self) -> dict:
        return asdict(self)


def compute_bounds(p: NormProfile, t: int, n: int, loss: LossSpec = LossSpec("ramp", 1.0),
                   delta: float = 0.01, empirical_risk: float = 0.0, omega_t: Optional[float] = None,
                   which=BOUND_NAMES, dataset: str = "", activation: Optional[str] = None) -> BoundReport:
    """Evaluate the selected bounds plus the exact-constant and total bounds.

    Bounds that need a bounded activation are left empty for profiles
    without ``b``.  The exact-constant complexity uses the spectral flavor.
    """
    t, n = _check_t(t), _check_n(n)
    which = BOUND_NAMES if which in ("all", None) else tuple(which)
    unknown = set(which) - set(BOUND_NAMES)
    if unknown:
        raise ValueError(f"unknown bounds {sorted(unknown)}")
    flags: list = []
    if omega_t is None and loss.natural_bound is None:
        omega_t = output_bound(p, t, "spectral")
    if loss.natural_bound is None and not omega_t > 0:
        rho, C_t = loss.rho, 0.0
    else:
        rho, C_t = loss_constants(loss, omega_t)
    rep = BoundReport(
        t=t, n=n, delta=delta, rho=rho, C_t=C_t, profile_hash=p.digest(),
        d_x=p.d_x, d_h=p.d_h, d_y=p.d_y,
        activation=activation or ("tanh" if p.b is not None else "relu"),
        loss=loss.kind, empirical_risk=float(empirical_risk), dataset=dataset, flags=flags,
    )
    funcs = {"bound1": bound1, "bound2": bound2, "bound3": bound3, "bound4": bound4, "bound4_star": bound4_star}
    for name in which:
        if name in ("bound3", "bound4_star") and p.b is None:
            continue
        setattr(rep, name, funcs[name](p, t, n, flags))
    rep.rademacher_exact = rademacher_exact(p, t, n, rho, "spectral", flags)
    rep.stochastic_term = stochastic_term(C_t, n, delta)
    rep.theorem2_total = empirical_risk + 2.0 * rep.rademacher_exact + rep.stochastic_term
    return rep
