"""Monte-Carlo Rademacher estimates and numeric checks of the norm inequalities.

The estimator searches the constrained RNN class by projected gradient
ascent, so it returns a lower estimate of the supremum-based complexity.
The ``verify_*`` functions draw random configurations and count
violations of the hidden-state, output-Lipschitz and loss-Lipschitz
inequalities; any violation indicates a bug.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from ._parallel import pmap
from .capacity import NormProfile
from .linalg import frobenius_norm, one_norm, spectral_norm, stream_rng
from .losses import LossSpec, loss_value_and_grad
from .rnn import (
    Activation,
    NonFiniteError,
    RnnParams,
    SequenceBatch,
    _activation,
    batch_outputs,
    empirical_risk,
    forward_batch,
    loss_and_gradient,
)

__all__ = [
    "ClassConstraints",
    "ErcEstimate",
    "estimate_erc_mc",
    "erc_finite_class",
    "constraints_profile",
    "hidden_norm_slack",
    "verify_hidden_norm",
    "verify_output_lipschitz",
    "verify_loss_lipschitz",
    "smooth_indices",
    "gradient_check",
    "extract_norm_profile",
    "measured_output_bound",
]

# relative slack allowed when comparing a computed quantity with its bound
CHECK_RTOL = 1e-9
MAX_EXHAUSTIVE_N = 16


@dataclass(frozen=True)
class ClassConstraints:
    """Frobenius radii (and an optional spectral radius for U) of the class.

    Radii of 0 are allowed and pin the matrix to zero.
    """

    B_U: float
    B_V: float
    B_W: float
    M_U: Optional[float] = None
    activation: Activation = Activation("relu")

    def __post_init__(self):
        for k in ("B_U", "B_V", "B_W"):
            v = float(getattr(self, k))
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"{k} must be finite and non-negative")
            object.__setattr__(self, k, v)
        if self.M_U is not None:
            m = float(self.M_U)
            if not (math.isfinite(m) and m >= 0):
                raise ValueError("M_U must be finite and non-negative")
            if m > self.B_U:
                raise ValueError(f"M_U={m!r} exceeds B_U={self.B_U!r}")
            object.__setattr__(self, "M_U", m)
        object.__setattr__(self, "activation", _activation(self.activation))


@dataclass(frozen=True)
class ErcEstimate:
    mean: float
    std_error: float
    draws: int
    restarts: int
    best_correlations: tuple
    discarded: int = 0
    exhaustive: bool = False

    def to_dict(self) -> dict:
        d = asdict(self)
        d["best_correlations"] = list(self.best_correlations)
        return d


def _summarise(best, restarts, discarded, exhaustive) -> ErcEstimate:
    arr = np.asarray(best, dtype=np.float64)
    if exhaustive or arr.size < 2:
        se = 0.0
    else:
        se = float(arr.std(ddof=1) / math.sqrt(arr.size))
    return ErcEstimate(
        mean=float(arr.mean()),
        std_error=se,
        draws=int(arr.size),
        restarts=int(restarts),
        best_correlations=tuple(float(v) for v in arr),
        discarded=int(discarded),
        exhaustive=bool(exhaustive),
    )


def _sign_patterns(n: int, draws: int, seed: int, exhaustive: bool):
    if exhaustive:
        if n > MAX_EXHAUSTIVE_N:
            raise ValueError(f"exhaustive enumeration limited to n <= {MAX_EXHAUSTIVE_N}")
        k = np.arange(2**n)[:, None]
        bits = (k >> np.arange(n)[None, :]) & 1
        return 1.0 - 2.0 * bits
    return np.stack([stream_rng(seed, 1, i).choice((-1.0, 1.0), size=n) for i in range(draws)])


def erc_finite_class(values, draws: int = 64, seed: int = 0, exhaustive: bool = False) -> ErcEstimate:
    """ERC of a finite class given as an (m, n) array of values on the sample."""
    F = np.asarray(values, dtype=np.float64)
    if F.ndim != 2 or F.shape[0] < 1 or F.shape[1] < 1:
        raise ValueError("values must have shape (m, n) with m, n >= 1")
    if draws < 1:
        raise ValueError("draws must be >= 1")
    n = F.shape[1]
    eps = _sign_patterns(n, draws, seed, exhaustive)
    best = (eps @ F.T / n).max(axis=1)
    return _summarise(best, 1, 0, exhaustive)


def _project(U, W, V, c: ClassConstraints):
    def ball(m, r):
        f = float(np.sqrt(np.sum(m * m)))
        return m * (r / f) if f > r else m

    U, W, V = ball(U, c.B_U), ball(W, c.B_W), ball(V, c.B_V)
    if c.M_U is not None and U.size:
        s = float(np.linalg.norm(U, 2))
        if s > c.M_U:
            U = U * (c.M_U / s)
    return U, W, V


def _random_feasible(rng, c: ClassConstraints, d_x, d_h, d_y):
    mats = []
    for shape, r in (((d_h, d_h), c.B_U), ((d_h, d_x), c.B_W), ((d_y, d_h), c.B_V)):
        m = rng.standard_normal(shape)
        m *= r * rng.uniform(0.3, 1.0) / max(float(np.sqrt(np.sum(m * m))), 1e-300)
        mats.append(m)
    return _project(*mats, c)


def _ascend(c, data, loss, eps, d_h, d_y, steps, lr, rng):
    """Best objective seen along one ascent path, or None if it diverged."""
    U, W, V = _random_feasible(rng, c, data.d_x, d_h, d_y)
    radii = (c.B_U, c.B_W, c.B_V)
    best = -math.inf
    for step in range(steps + 1):
        p = RnnParams(U, W, V, c.activation)
        try:
            vals, g = loss_and_gradient(p, data, loss, weights=eps)
        except NonFiniteError:
            return None
        obj = float(np.mean(eps * vals))
        if not math.isfinite(obj):
            return None
        best = max(best, obj)
        if step == steps:
            break
        gn = g.global_norm()
        if gn == 0.0:
            break
        U = U + lr * radii[0] * g.dU / gn
        W = W + lr * radii[1] * g.dW / gn
        V = V + lr * radii[2] * g.dV / gn
        U, W, V = _project(U, W, V, c)
    return best


def estimate_erc_mc(
    constraints: ClassConstraints,
    data: SequenceBatch,
    loss: LossSpec,
    draws: int = 64,
    restarts: int = 8,
    steps: int = 200,
    lr: float = 0.05,
    seed: int = 0,
    d_h: Optional[int] = None,
    d_y: Optional[int] = None,
    exhaustive: bool = False,
    workers: Optional[int] = None,
) -> ErcEstimate:
    """Monte-Carlo estimate of the loss-class ERC on ``data``.

    Each sign draw runs ``restarts`` projected-ascent paths of ``steps``
    normalised steps (step length ``lr`` times the matrix radius) and keeps
    the best objective.  ``exhaustive`` replaces random draws by all
    ``2^n`` sign patterns.  ``d_h`` defaults to ``d_x`` and ``d_y`` to the
    number of classes seen in the labels (at least 2).
    """
    if draws < 1 or restarts < 1:
        raise ValueError("draws and restarts must be >= 1")
    if steps < 0 or not lr > 0:
        raise ValueError("steps must be >= 0 and lr > 0")
    d_h = data.d_x if d_h is None else int(d_h)
    d_y = max(2, int(data.labels.max()) + 1) if d_y is None else int(d_y)
    eps_all = _sign_patterns(data.n, draws, seed, exhaustive)

    def one(i):
        best, lost = -math.inf, 0
        for r in range(restarts):
            v = _ascend(constraints, data, loss, eps_all[i], d_h, d_y, steps, lr, stream_rng(seed, 2, i, r))
            if v is None:
                lost += 1
            else:
                best = max(best, v)
        if best == -math.inf:
            # every path diverged: fall back to the zero function, which is feasible
            zero = RnnParams(np.zeros((d_h, d_h)), np.zeros((d_h, data.d_x)), np.zeros((d_y, d_h)),
                             constraints.activation)
            vals, _ = loss_and_gradient(zero, data, loss)
            best = float(np.mean(eps_all[i] * vals))
        return best, lost

    out = pmap(one, range(len(eps_all)), workers)
    return _summarise([b for b, _ in out], restarts, sum(l for _, l in out), exhaustive)


def constraints_profile(c: ClassConstraints, data: SequenceBatch, d_h: Optional[int] = None,
                        d_y: Optional[int] = None) -> NormProfile:
    """Norm profile whose bounds cover every member of the constrained class."""
    d_h = data.d_x if d_h is None else int(d_h)
    d_y = max(2, int(data.labels.max()) + 1) if d_y is None else int(d_y)
    X = data.inputs
    b_x = float(np.sqrt(np.sum(X * X, axis=2)).max())
    m_u = c.B_U if c.M_U is None else c.M_U
    return NormProfile(
        d_x=data.d_x, d_h=d_h, d_y=d_y, rho_h=c.activation.rho_h,
        B_x=b_x, B_row=b_x, B_U=c.B_U, B_V=c.B_V, B_W=c.B_W,
        M_U=m_u, M_V=c.B_V, M_W=c.B_W,
        B_x1=float(np.abs(X).sum(axis=2).max()),
        B_U1=c.B_U * math.sqrt(d_h), B_V1=c.B_V * math.sqrt(d_y), B_W1=c.B_W * math.sqrt(d_h),
        b=c.activation.entry_bound,
    )


def _report(op, trials, violations, ratio, seed) -> dict:
    return {"op": op, "trials": int(trials), "violations": int(violations),
            "max_slack_ratio": float(ratio), "seed": int(seed)}


def _ratio(lhs, rhs):
    if rhs > 0:
        return lhs / rhs
    return 0.0 if lhs == 0 else math.inf


def _geometric(x: float, t: int) -> np.ndarray:
    """``c_1..c_t`` with ``c_tau = sum_{j<tau} x^j``."""
    return np.cumsum(x ** np.arange(t, dtype=np.float64))


def hidden_norm_slack(p: RnnParams, X, B_x: float, spectral: bool = False) -> float:
    """Largest ``||h_tau|| / (rho_h B_W B_x c_tau)`` over sequences and steps.

    ``spectral`` switches the growth rate from ``rho_h ||U||_F`` to
    ``rho_h ||U||_2``.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 2:
        X = X[None]
    H = forward_batch(p, X)
    rho_h = p.activation.rho_h
    rate = rho_h * (float(np.linalg.norm(p.U, 2)) if spectral else frobenius_norm(p.U))
    c = _geometric(rate, X.shape[1])
    rhs = rho_h * frobenius_norm(p.W) * B_x * c
    lhs = np.sqrt(np.sum(H * H, axis=2)).max(axis=0)
    return max(_ratio(float(l), float(r)) for l, r in zip(lhs, rhs))


def _random_config(rng, max_d, max_t):
    d_x, d_h, d_y = (int(v) for v in rng.integers(1, max_d + 1, size=3))
    t = int(rng.integers(1, max_t + 1))
    act = Activation("relu" if rng.random() < 0.5 else "tanh")
    scale = math.exp(rng.uniform(math.log(0.05), math.log(2.0)))

    def mat(shape):
        return rng.standard_normal(shape) * scale / math.sqrt(shape[1])

    p = RnnParams(mat((d_h, d_h)), mat((d_h, d_x)), mat((d_y, d_h)), act)
    b_x = rng.uniform(0.1, 3.0)
    n = 3
    X = rng.standard_normal((n, t, d_x))
    if rng.random() < 0.5:
        X = np.abs(X)
    norms = np.sqrt(np.sum(X * X, axis=2, keepdims=True))
    X = X / np.maximum(norms, 1e-300) * b_x * rng.uniform(0.0, 1.0, size=(n, t, 1))
    return p, X, b_x


def verify_hidden_norm(trials: int = 1000, max_d: int = 8, max_t: int = 12, seed: int = 0,
                       workers: Optional[int] = None) -> dict:
    """Check the hidden-state bound with both the Frobenius and spectral rate."""
    if trials < 1:
        raise ValueError("trials must be >= 1")

    def one(i):
        p, X, b_x = _random_config(stream_rng(seed, i), max_d, max_t)
        return max(hidden_norm_slack(p, X, b_x, False), hidden_norm_slack(p, X, b_x, True))

    ratios = pmap(one, range(trials), workers)
    bad = sum(r > 1.0 + CHECK_RTOL for r in ratios)
    return _report("verify_hidden_norm", trials, bad, max(ratios), seed)


def output_lipschitz_slack(p: RnnParams, q: RnnParams, X, B_x: float) -> float:
    """``||y_t - y'_t|| / (L_V ||dV|| + L_U ||dU|| + L_W ||dW||)`` maximised over sequences.

    The B constants are the larger of the two parameter sets' norms.
    """
    X = np.asarray(X, dtype=np.float64)
    rho_h = p.activation.rho_h
    B_U = max(frobenius_norm(p.U), frobenius_norm(q.U))
    B_V = max(frobenius_norm(p.V), frobenius_norm(q.V))
    B_W = max(frobenius_norm(p.W), frobenius_norm(q.W))
    t = X.shape[1]
    x = rho_h * B_U
    powers = x ** np.arange(t, dtype=np.float64)
    c_t = float(powers.sum())
    b_t = float(np.sum(np.arange(1, t) * powers[: t - 1]))
    a = rho_h * B_x
    L_V, L_U, L_W = a * B_W * c_t, a * rho_h * B_W * B_V * b_t, a * B_V * c_t
    rhs = (L_V * frobenius_norm(p.V - q.V) + L_U * frobenius_norm(p.U - q.U)
           + L_W * frobenius_norm(p.W - q.W))
    y = forward_batch(p, X)[:, -1, :] @ p.V.T
    y2 = forward_batch(q, X)[:, -1, :] @ q.V.T
    lhs = float(np.sqrt(np.sum((y - y2) ** 2, axis=1)).max())
    if lhs <= 1e-14 * max(1.0, rhs) and rhs == 0:
        return 0.0
    return _ratio(lhs, rhs)


def verify_output_lipschitz(trials: int = 1000, seed: int = 0, perturb: str = "all", max_d: int = 8,
                            max_t: int = 12, workers: Optional[int] = None) -> dict:
    """Check the three-term Lipschitz bound of the terminal output.

    ``perturb`` is ``all`` or one of ``U``, ``V``, ``W`` (only that matrix
    differs between the pair) or ``none``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if perturb not in ("all", "U", "V", "W", "none"):
        raise ValueError("perturb must be all, U, V, W or none")

    def one(i):
        rng = stream_rng(seed, i)
        p, X, b_x = _random_config(rng, max_d, max_t)
        size = math.exp(rng.uniform(math.log(1e-4), math.log(1.0)))
        kw = {}
        for name in ("U", "V", "W"):
            if perturb in ("all", name):
                m = getattr(p, name)
                kw[name] = m + size * rng.standard_normal(m.shape) / math.sqrt(m.shape[1])
        return output_lipschitz_slack(p, p.replace(**kw), X, b_x)

    ratios = pmap(one, range(trials), workers)
    bad = sum(r > 1.0 + CHECK_RTOL for r in ratios)
    return _report("verify_output_lipschitz", trials, bad, max(ratios), seed)


def verify_loss_lipschitz(loss: LossSpec, trials: int = 10000, K: int = 10, seed: int = 0) -> dict:
    """Check ``|l(f) - l(f')| <= rho ||f - f'||`` on random score pairs with 2..K classes."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if K < 2:
        raise ValueError("K must be >= 2")
    rho = loss.rho
    ks = stream_rng(seed, 0).integers(2, K + 1, size=trials)
    bad, worst = 0, 0.0
    for k in range(2, K + 1):
        m = int(np.sum(ks == k))
        if m == 0:
            continue
        rng = stream_rng(seed, 1, k)
        scale = np.exp(rng.uniform(math.log(0.01), math.log(20.0), size=(m, 1)))
        f = rng.standard_normal((m, k)) * scale
        step = np.exp(rng.uniform(math.log(1e-6), math.log(10.0), size=(m, 1)))
        g = f + rng.standard_normal((m, k)) * step
        same = rng.random(m) < 0.01
        g[same] = f[same]
        z = rng.integers(0, k, size=m)
        lf, _ = loss_value_and_grad(loss, f, z)
        lg, _ = loss_value_and_grad(loss, g, z)
        lhs = np.abs(lf - lg)
        rhs = rho * np.sqrt(np.sum((f - g) ** 2, axis=1))
        bad += int(np.sum(lhs > rhs + 1e-12))
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(rhs > 0, lhs / np.where(rhs > 0, rhs, 1.0), np.where(lhs > 0, np.inf, 0.0))
        worst = max(worst, float(r.max()))
    return _report(f"verify_loss_lipschitz:{loss.kind}", trials, bad, worst, seed)


def smooth_indices(p: RnnParams, batch: SequenceBatch, loss: LossSpec, margin: float = 1e-3) -> np.ndarray:
    """Sequences whose loss is smooth within ``margin`` of the current parameters.

    Drops sequences with a ReLU pre-activation, a margin-loss knot or a tie
    between the two largest rival scores within ``margin``.
    """
    H, Y = batch_outputs(p, batch)
    n, t = batch.n, batch.t
    keep = np.ones(n, dtype=bool)
    if p.activation.kind == "relu":
        Hprev = np.concatenate([np.zeros_like(H[:, :1]), H[:, :-1]], axis=1)
        A = Hprev @ p.U.T + batch.inputs @ p.W.T
        keep &= np.abs(A).min(axis=(1, 2)) >= margin
    if loss.kind == "cross_entropy":
        return np.nonzero(keep)[0]
    if batch.per_step:
        F, Z = Y.reshape(n * t, -1), batch.labels.reshape(-1)
        owner = np.repeat(np.arange(n), t)
    else:
        F, Z, owner = Y[:, -1, :], batch.labels, np.arange(n)
    rows = np.arange(F.shape[0])
    rivals = F.copy()
    rivals[rows, Z] = -np.inf
    srt = np.sort(rivals, axis=1)
    psi = srt[:, -1] - F[rows, Z]
    ok = np.ones(F.shape[0], dtype=bool)
    if F.shape[1] > 2:
        ok &= (srt[:, -1] - srt[:, -2]) >= margin
    if loss.kind == "hinge":
        ok &= np.abs(1.0 + psi) >= margin
    else:
        ok &= (np.abs(psi) >= margin) & (np.abs(psi + loss.gamma) >= margin)
    bad_owner = np.unique(owner[~ok])
    keep[bad_owner] = False
    return np.nonzero(keep)[0]


def gradient_check(p: RnnParams, batch: SequenceBatch, loss: LossSpec, fd_step: float = 1e-5,
                   max_coords: int = 200, seed: int = 0, floor: float = 1e-6) -> float:
    """Largest per-coordinate relative error of BPTT against central differences.

    The error is ``|g - g_fd| / max(|g|, |g_fd|, floor)``.  Above
    ``max_coords`` coordinates a seeded random subset is checked.
    """
    if not fd_step > 0:
        raise ValueError("fd_step must be positive")
    _, g = loss_and_gradient(p, batch, loss)
    shapes = [p.U.shape, p.W.shape, p.V.shape]
    sizes = [int(np.prod(s)) for s in shapes]
    theta = np.concatenate([p.U.ravel(), p.W.ravel(), p.V.ravel()])
    analytic = np.concatenate([g.dU.ravel(), g.dW.ravel(), g.dV.ravel()])
    coords = np.arange(theta.size)
    if theta.size > max_coords:
        coords = np.sort(stream_rng(seed, 0).choice(theta.size, size=max_coords, replace=False))

    def risk(vec):
        U, W, V = np.split(vec, np.cumsum(sizes)[:-1])
        q = RnnParams(U.reshape(shapes[0]), W.reshape(shapes[1]), V.reshape(shapes[2]), p.activation)
        return empirical_risk(q, batch, loss)

    worst = 0.0
    for k in coords:
        up, dn = theta.copy(), theta.copy()
        up[k] += fd_step
        dn[k] -= fd_step
        num = (risk(up) - risk(dn)) / (2.0 * fd_step)
        den = max(abs(analytic[k]), abs(num), floor)
        worst = max(worst, abs(analytic[k] - num) / den)
    return worst


def extract_norm_profile(p: RnnParams, data: SequenceBatch) -> NormProfile:
    """Measured norm profile of trained parameters on ``data``."""
    if data.n < 1:
        raise ValueError("data must be nonempty")
    X = data.inputs
    b_x = float(np.sqrt(np.sum(X * X, axis=2)).max())
    return NormProfile(
        d_x=p.d_x, d_h=p.d_h, d_y=p.d_y, rho_h=p.activation.rho_h,
        B_x=b_x, B_row=b_x,
        B_U=frobenius_norm(p.U), B_V=frobenius_norm(p.V), B_W=frobenius_norm(p.W),
        M_U=min(spectral_norm(p.U), frobenius_norm(p.U)),
        M_V=min(spectral_norm(p.V), frobenius_norm(p.V)),
        M_W=min(spectral_norm(p.W), frobenius_norm(p.W)),
        B_x1=float(np.abs(X).sum(axis=2).max()),
        B_U1=one_norm(p.U), B_V1=one_norm(p.V), B_W1=one_norm(p.W),
        b=p.activation.entry_bound,
    )


def measured_output_bound(p: RnnParams, data: SequenceBatch) -> float:
    """Largest output norm ``||y_tau||`` observed on ``data``, a data-dependent omega_t."""
    _, Y = batch_outputs(p, data)
    return float(np.sqrt(np.sum(Y * Y, axis=2)).max())
