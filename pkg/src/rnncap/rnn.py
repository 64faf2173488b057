"""Vanilla RNN ``h_t = sigma(U h_{t-1} + W x_t)``, ``y_t = V h_t`` with h_0 = 0.

Holds the parameter and data containers, the forward recurrence, exact
gradients by backpropagation through time, the clipped SGD step and the
JSON checkpoint format.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .linalg import ShapeError, as_matrix, stream_rng
from .losses import LossSpec, loss_value_and_grad

__all__ = [
    "Activation",
    "RELU",
    "TANH",
    "RnnParams",
    "SequenceBatch",
    "Gradients",
    "NonFiniteError",
    "init_params",
    "forward",
    "forward_batch",
    "batch_outputs",
    "empirical_risk",
    "bptt_gradient",
    "loss_and_gradient",
    "dumps_checkpoint",
    "clip_and_step",
    "checkpoint_dict",
    "save_checkpoint",
    "load_checkpoint",
    "params_from_checkpoint",
]


class NonFiniteError(FloatingPointError):
    """A forward or backward pass produced NaN/Inf.

    ``index`` is the offending sequence when known.
    """

    def __init__(self, message: str, index: Optional[int] = None):
        super().__init__(message if index is None else f"{message} (sequence {index})")
        self.index = index


@dataclass(frozen=True)
class Activation:
    kind: str

    def __post_init__(self):
        if self.kind not in ("relu", "tanh"):
            raise ValueError(f"activation must be 'relu' or 'tanh', got {self.kind!r}")

    @property
    def rho_h(self) -> float:
        return 1.0

    @property
    def entry_bound(self) -> Optional[float]:
        return 1.0 if self.kind == "tanh" else None

    @property
    def code(self) -> int:
        return kernels.RELU if self.kind == "relu" else kernels.TANH

    def __call__(self, a):
        return np.maximum(a, 0.0) if self.kind == "relu" else np.tanh(a)


RELU = Activation("relu")
TANH = Activation("tanh")


def _activation(a) -> Activation:
    return a if isinstance(a, Activation) else Activation(str(a))


@dataclass(frozen=True)
class RnnParams:
    U: np.ndarray
    W: np.ndarray
    V: np.ndarray
    activation: Activation = RELU

    def __post_init__(self):
        U = as_matrix(self.U, "U")
        W = as_matrix(self.W, "W")
        V = as_matrix(self.V, "V")
        if U.shape[0] != U.shape[1]:
            raise ShapeError(f"U must be square, got {U.shape}")
        if W.shape[0] != U.shape[0]:
            raise ShapeError(f"W must have {U.shape[0]} rows, got {W.shape}")
        if V.shape[1] != U.shape[0]:
            raise ShapeError(f"V must have {U.shape[0]} columns, got {V.shape}")
        object.__setattr__(self, "U", U)
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "activation", _activation(self.activation))

    @property
    def d_x(self) -> int:
        return self.W.shape[1]

    @property
    def d_h(self) -> int:
        return self.U.shape[0]

    @property
    def d_y(self) -> int:
        return self.V.shape[0]

    def replace(self, **kw) -> "RnnParams":
        d = dict(U=self.U, W=self.W, V=self.V, activation=self.activation)
        d.update(kw)
        return RnnParams(**d)


@dataclass(frozen=True)
class SequenceBatch:
    """``inputs`` has shape (n, t, d_x).

    ``labels`` is (n,) in terminal mode (the label of the t-th output) or
    (n, t) in per-step mode.  Every input vector must have Euclidean norm
    at most ``b_x``; when ``b_x`` is omitted the observed maximum is used.
    """

    inputs: np.ndarray
    labels: np.ndarray
    b_x: Optional[float] = None
    per_step: bool = False
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        X = np.asarray(self.inputs, dtype=np.float64)
        if X.ndim != 3 or min(X.shape) < 1:
            raise ShapeError(f"inputs must have shape (n, t, d_x), got {X.shape}")
        if not np.all(np.isfinite(X)):
            raise ValueError("inputs contain non-finite values")
        Z = np.asarray(self.labels, dtype=np.int64)
        want = X.shape[:2] if self.per_step else X.shape[:1]
        if Z.shape != want:
            raise ShapeError(f"labels must have shape {want}, got {Z.shape}")
        if np.any(Z < 0):
            raise ValueError("labels must be non-negative class indices")
        norms = np.sqrt(np.sum(X * X, axis=2))
        observed = float(norms.max())
        b_x = observed if self.b_x is None else float(self.b_x)
        if observed > b_x * (1.0 + 1e-12):
            raise ValueError(f"input norm {observed:.6g} exceeds declared B_x={b_x:.6g}")
        object.__setattr__(self, "inputs", X)
        object.__setattr__(self, "labels", Z)
        object.__setattr__(self, "b_x", b_x)

    @property
    def n(self) -> int:
        return self.inputs.shape[0]

    @property
    def t(self) -> int:
        return self.inputs.shape[1]

    @property
    def d_x(self) -> int:
        return self.inputs.shape[2]

    def subset(self, idx) -> "SequenceBatch":
        return SequenceBatch(self.inputs[idx], self.labels[idx], self.b_x, self.per_step, self.meta)

    def truncate(self, t: int) -> "SequenceBatch":
        """First ``t`` steps of every sequence; terminal labels are kept."""
        labels = self.labels[:, :t] if self.per_step else self.labels
        return SequenceBatch(self.inputs[:, :t], labels, self.b_x, self.per_step, self.meta)


@dataclass(frozen=True)
class Gradients:
    dU: np.ndarray
    dW: np.ndarray
    dV: np.ndarray

    def global_norm(self) -> float:
        return math.sqrt(float(np.sum(self.dU**2) + np.sum(self.dW**2) + np.sum(self.dV**2)))

    def scaled(self, c: float) -> "Gradients":
        return Gradients(self.dU * c, self.dW * c, self.dV * c)


def init_params(d_x: int, d_h: int, d_y: int, activation="relu", seed: int = 0) -> RnnParams:
    """Uniform(-1/sqrt(d_h), 1/sqrt(d_h)) initialisation."""
    rng = stream_rng(seed, 0)
    k = 1.0 / math.sqrt(d_h)
    return RnnParams(
        U=rng.uniform(-k, k, (d_h, d_h)),
        W=rng.uniform(-k, k, (d_h, d_x)),
        V=rng.uniform(-k, k, (d_y, d_h)),
        activation=_activation(activation),
    )


def _check_inputs(p: RnnParams, X: np.ndarray):
    if X.shape[-1] != p.d_x:
        raise ShapeError(f"inputs have dimension {X.shape[-1]}, params expect d_x={p.d_x}")


def forward_batch(p: RnnParams, X, backend=None) -> np.ndarray:
    """Hidden states h_1..h_t for every sequence, shape (n, t, d_h)."""
    X = np.asarray(X, dtype=np.float64)
    _check_inputs(p, X)
    H = kernels.forward_batch(p.U, p.W, X, p.activation.code, backend)
    if not np.all(np.isfinite(H)):
        bad = int(np.nonzero(~np.all(np.isfinite(H), axis=(1, 2)))[0][0])
        raise NonFiniteError("non-finite hidden state (exploding activation)", bad)
    return H


def forward(p: RnnParams, seq, backend=None):
    """Hidden states and outputs for one sequence of shape (t, d_x)."""
    X = np.asarray(seq, dtype=np.float64)
    if X.ndim != 2:
        raise ShapeError(f"sequence must have shape (t, d_x), got {X.shape}")
    H = forward_batch(p, X[None], backend)[0]
    Y = H @ p.V.T
    return {"hidden": H, "outputs": Y}


def batch_outputs(p: RnnParams, batch: SequenceBatch, backend=None):
    H = forward_batch(p, batch.inputs, backend)
    return H, H @ p.V.T


def _loss_terms(p, batch, loss, backend):
    H, Y = batch_outputs(p, batch, backend)
    n, t = batch.n, batch.t
    if batch.per_step:
        vals, g = loss_value_and_grad(loss, Y.reshape(n * t, -1), batch.labels.reshape(-1))
        return H, vals.reshape(n, t).mean(axis=1), g.reshape(n, t, -1) / t
    vals, g = loss_value_and_grad(loss, Y[:, -1, :], batch.labels)
    dY = np.zeros_like(Y)
    dY[:, -1, :] = g
    return H, vals, dY


def empirical_risk(p: RnnParams, batch: SequenceBatch, loss: LossSpec, backend=None) -> float:
    _, vals, _ = _loss_terms(p, batch, loss, backend)
    return float(np.mean(vals))


def loss_and_gradient(
    p: RnnParams,
    batch: SequenceBatch,
    loss: LossSpec,
    weights=None,
    backend=None,
):
    """Per-sequence losses and the gradient of their weighted mean.

    Returns ``(values, Gradients)`` where the gradient is that of
    ``(1/n) sum_i w_i loss_i``; ``weights=None`` means all ones.
    """
    if batch.n < 1:
        raise ValueError("empty batch")
    H, vals, dY = _loss_terms(p, batch, loss, backend)
    w = np.ones(batch.n) if weights is None else np.asarray(weights, dtype=np.float64)
    if w.shape != (batch.n,):
        raise ShapeError(f"weights must have shape ({batch.n},), got {w.shape}")
    dY = dY * (w / batch.n)[:, None, None]
    dU, dW, dV = kernels.backward_batch(p.U, p.W, p.V, batch.inputs, H, dY, p.activation.code, backend)
    if not (np.all(np.isfinite(dU)) and np.all(np.isfinite(dW)) and np.all(np.isfinite(dV))):
        for i in range(batch.n):
            gi = kernels.backward_batch(
                p.U, p.W, p.V, batch.inputs[i : i + 1], H[i : i + 1], dY[i : i + 1], p.activation.code, backend
            )
            if not all(np.all(np.isfinite(a)) for a in gi):
                raise NonFiniteError("non-finite gradient", i)
        raise NonFiniteError("non-finite gradient")
    return vals, Gradients(dU, dW, dV)


def bptt_gradient(
    p: RnnParams,
    batch: SequenceBatch,
    loss: LossSpec,
    weights=None,
    backend=None,
) -> Gradients:
    """Exact gradient of the empirical risk, averaged over sequences.

    ``weights`` multiplies each sequence's loss before averaging (used for
    signed Rademacher objectives); ``None`` means all ones.
    """
    return loss_and_gradient(p, batch, loss, weights, backend)[1]


def clip_and_step(p: RnnParams, g: Gradients, lr: float, clip: float) -> RnnParams:
    """Rescale to global norm ``clip`` if larger, then ``p - lr * g``."""
    if not lr > 0:
        raise ValueError("lr must be positive")
    if not clip > 0:
        raise ValueError("clip must be positive")
    norm = g.global_norm()
    if norm > clip:
        g = g.scaled(clip / norm)
    return p.replace(U=p.U - lr * g.dU, W=p.W - lr * g.dW, V=p.V - lr * g.dV)


def checkpoint_dict(p: RnnParams, seed: int = 0, epoch: int = 0) -> dict:
    return {
        "d_x": p.d_x,
        "d_h": p.d_h,
        "d_y": p.d_y,
        "activation": p.activation.kind,
        "U": [float(v) for v in p.U.ravel()],
        "W": [float(v) for v in p.W.ravel()],
        "V": [float(v) for v in p.V.ravel()],
        "seed": int(seed),
        "epoch": int(epoch),
    }


def params_from_checkpoint(d: dict) -> RnnParams:
    try:
        dx, dh, dy = int(d["d_x"]), int(d["d_h"]), int(d["d_y"])
        return RnnParams(
            U=np.array(d["U"], dtype=np.float64).reshape(dh, dh),
            W=np.array(d["W"], dtype=np.float64).reshape(dh, dx),
            V=np.array(d["V"], dtype=np.float64).reshape(dy, dh),
            activation=Activation(d["activation"]),
        )
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed checkpoint: {exc}") from exc


def dumps_checkpoint(p: RnnParams, seed: int = 0, epoch: int = 0) -> str:
    # repr-based float formatting round-trips every float64 exactly
    return json.dumps(checkpoint_dict(p, seed, epoch), separators=(",", ":")) + "\n"


def save_checkpoint(path, p: RnnParams, seed: int = 0, epoch: int = 0) -> None:
    from .io import atomic_write_text

    atomic_write_text(path, dumps_checkpoint(p, seed, epoch))


def load_checkpoint(path):
    """Returns ``(params, seed, epoch)``."""
    with open(path, encoding="utf-8") as fh:
        d = json.load(fh)
    return params_from_checkpoint(d), int(d.get("seed", 0)), int(d.get("epoch", 0))
