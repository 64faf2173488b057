"""Cross-entropy, multiclass hinge and ramp losses.

Class labels are 0-based.  Every loss works on a single score vector
``f`` of length K or on a batch of shape (n, K) with labels of shape (n,).
Hinge and ramp use the identity as the output activation, so the margin
operator reads scores directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

__all__ = [
    "LossSpec",
    "LOSS_KINDS",
    "softmax",
    "cross_entropy",
    "margin_operator",
    "hinge",
    "ramp",
    "loss_value_and_grad",
    "loss_constants",
]

LOSS_KINDS = ("cross_entropy", "hinge", "ramp")
SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class LossSpec:
    kind: str = "ramp"
    gamma: float = 1.0

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise ValueError(f"unknown loss kind {self.kind!r}; expected one of {LOSS_KINDS}")
        if self.kind == "ramp" and not self.gamma > 0:
            raise ValueError("ramp loss needs gamma > 0")

    @property
    def rho(self) -> float:
        """Lipschitz constant with respect to the score vector."""
        return 2.0 / self.gamma if self.kind == "ramp" else SQRT2

    @property
    def natural_bound(self) -> Optional[float]:
        return 1.0 if self.kind == "ramp" else None

    def to_dict(self):
        d = {"kind": self.kind}
        if self.kind == "ramp":
            d["gamma"] = self.gamma
        return d


def _batch(f, z):
    F = np.asarray(f, dtype=np.float64)
    single = F.ndim == 1
    F = np.atleast_2d(F)
    Z = np.atleast_1d(np.asarray(z, dtype=np.int64))
    if F.shape[1] < 2:
        raise ValueError("need at least two classes")
    if Z.shape[0] != F.shape[0]:
        raise ValueError("one label per score vector required")
    if np.any(Z < 0) or np.any(Z >= F.shape[1]):
        raise ValueError(f"labels must lie in 0..{F.shape[1] - 1}")
    return F, Z, single


def softmax(f) -> np.ndarray:
    F = np.asarray(f, dtype=np.float64)
    if F.shape[-1] < 2:
        raise ValueError("softmax needs K >= 2")
    e = np.exp(F - F.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def _out(value, grad, single):
    if single:
        return float(value[0]), grad[0]
    return value, grad


def cross_entropy(f, z):
    """Value ``-log q_z`` and gradient ``q - onehot(z)``."""
    F, Z, single = _batch(f, z)
    shifted = F - F.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1))
    rows = np.arange(F.shape[0])
    value = lse - shifted[rows, Z]
    grad = np.exp(shifted - lse[:, None])
    grad[rows, Z] -= 1.0
    return _out(value, grad, single)


def _margin(F, Z):
    rows = np.arange(F.shape[0])
    masked = F.copy()
    masked[rows, Z] = -np.inf
    rival = np.argmax(masked, axis=1)  # lowest index wins ties
    psi = F[rows, rival] - F[rows, Z]
    return psi, rival


def margin_operator(q, z):
    """``max_{k != z} q_k - q_z``."""
    F, Z, single = _batch(q, z)
    psi, _ = _margin(F, Z)
    return float(psi[0]) if single else psi


def _margin_grad(F, Z, rival, slope):
    rows = np.arange(F.shape[0])
    g = np.zeros_like(F)
    g[rows, rival] += slope
    g[rows, Z] -= slope
    return g


def hinge(f, z):
    """``max(0, 1 + psi)``; flat-side subgradient at the knot."""
    F, Z, single = _batch(f, z)
    psi, rival = _margin(F, Z)
    value = np.maximum(0.0, 1.0 + psi)
    slope = (1.0 + psi > 0.0).astype(np.float64)
    return _out(value, _margin_grad(F, Z, rival, slope), single)


def ramp(f, z, gamma: float = 1.0):
    """Hinge truncated to [0, 1] with slope 1/gamma on [-gamma, 0]."""
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    F, Z, single = _batch(f, z)
    psi, rival = _margin(F, Z)
    value = np.where(psi > 0.0, 1.0, np.where(psi >= -gamma, 1.0 + psi / gamma, 0.0))
    slope = np.where((psi > -gamma) & (psi < 0.0), 1.0 / gamma, 0.0)
    return _out(value, _margin_grad(F, Z, rival, slope), single)


def loss_value_and_grad(spec: LossSpec, f, z):
    if spec.kind == "cross_entropy":
        return cross_entropy(f, z)
    if spec.kind == "hinge":
        return hinge(f, z)
    return ramp(f, z, spec.gamma)


def loss_constants(spec: LossSpec, omega_t: Optional[float] = None):
    """Lipschitz constant and sup-norm bound ``(rho, C_t)``.

    Losses without a natural bound use ``C_t = 2 * rho * omega_t`` where
    ``omega_t`` bounds the network output.
    """
    rho = spec.rho
    if spec.natural_bound is not None:
        return rho, spec.natural_bound
    if omega_t is None or not omega_t > 0:
        raise ValueError(f"{spec.kind} loss has no natural bound; pass omega_t > 0")
    return rho, 2.0 * rho * float(omega_t)
