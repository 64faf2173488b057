"""Toy datasets, the training loop and bound sweeps over trained models.

Inputs are unit-norm by construction (one-hot symbols or fixed random
unit embeddings), so ``B_x = 1`` throughout.  Embeddings are not
learned and no dropout is used, which keeps gradients exact and runs
deterministic.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import time
from collections import Counter
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Optional

import numpy as np

from ._parallel import pmap
from .capacity import BOUND_NAMES, REPORT_COLUMNS, NormProfile, compute_bounds, improvement_percentage
from .empirical import extract_norm_profile
from .io import atomic_write_text, rows_to_csv
from .linalg import spectral_norm, stream_rng, frobenius_norm
from .losses import LossSpec
from .rnn import (
    NonFiniteError,
    RnnParams,
    SequenceBatch,
    bptt_gradient,
    clip_and_step,
    dumps_checkpoint,
    empirical_risk,
    init_params,
)

__all__ = [
    "TASKS",
    "TrainConfig",
    "ExperimentConfig",
    "TrainResult",
    "TrainingError",
    "synth_dataset",
    "ingest_corpus",
    "batch_hash",
    "make_dataset",
    "train",
    "run_experiment",
    "compare",
    "IMP_COLUMNS",
    "report_csv",
]

TASKS = ("synthetic_parity", "synthetic_majority", "corpus")
IMP_COLUMNS = ("Imp_per1", "Imp_per2", "Imp_per3")


class TrainingError(RuntimeError):
    """Training hit a non-finite loss."""


def _from_dict(cls, d: dict):
    names = {f.name for f in fields(cls)}
    unknown = set(d) - names
    if unknown:
        raise ValueError(f"unknown {cls.__name__} fields: {sorted(unknown)}")
    return cls(**d)


@dataclass(frozen=True)
class TrainConfig:
    task: str = "synthetic_majority"
    d_x: int = 4
    d_h: int = 16
    K: int = 2
    t: int = 5
    n: int = 2000
    epochs: int = 20
    batch_size: int = 20
    lr: float = 0.1
    clip: float = 0.25
    loss: str = "cross_entropy"
    gamma: float = 1.0
    activation: str = "relu"
    seed: int = 0
    corpus_path: Optional[str] = None
    vocab_size: int = 1000

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"task must be one of {TASKS}")
        for k in ("d_x", "d_h", "K", "t", "n", "batch_size", "vocab_size"):
            v = getattr(self, k)
            if not isinstance(v, (int, np.integer)) or isinstance(v, bool) or v < 1:
                raise ValueError(f"{k} must be a positive integer, got {v!r}")
        if self.K < 2:
            raise ValueError("K must be >= 2")
        if not isinstance(self.epochs, int) or self.epochs < 0:
            raise ValueError("epochs must be a non-negative integer")
        if not (self.lr >= 0 and math.isfinite(self.lr)):
            raise ValueError("lr must be finite and non-negative")
        if not self.clip > 0:
            raise ValueError("clip must be positive")
        if self.activation not in ("relu", "tanh"):
            raise ValueError("activation must be relu or tanh")
        LossSpec(self.loss, self.gamma)
        if self.task == "corpus" and not self.corpus_path:
            raise ValueError("corpus task needs corpus_path")
        if self.task == "synthetic_parity" and self.K != 2:
            raise ValueError("parity task has K = 2")
        if self.task == "synthetic_majority" and self.d_x < self.K:
            raise ValueError("majority task needs d_x >= K")

    @property
    def loss_spec(self) -> LossSpec:
        return LossSpec(self.loss, self.gamma)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return _from_dict(cls, d)


@dataclass(frozen=True)
class ExperimentConfig:
    train: TrainConfig = field(default_factory=TrainConfig)
    t_values: tuple = (5,)
    n_values: tuple = (2000,)
    activations: tuple = ("relu",)
    bounds: tuple = BOUND_NAMES
    delta: float = 0.01
    dataset: str = ""
    imp_per: bool = True
    out_csv: Optional[str] = None
    out_dir: Optional[str] = None

    def __post_init__(self):
        if isinstance(self.train, dict):
            object.__setattr__(self, "train", TrainConfig.from_dict(self.train))
        for k in ("t_values", "n_values", "activations", "bounds"):
            v = tuple(getattr(self, k))
            if not v:
                raise ValueError(f"{k} must be nonempty")
            object.__setattr__(self, k, v)
        if set(self.bounds) - set(BOUND_NAMES):
            raise ValueError(f"bounds must be drawn from {BOUND_NAMES}")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        for a in self.activations:
            if a not in ("relu", "tanh"):
                raise ValueError("activations must be relu or tanh")

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("t_values", "n_values", "activations", "bounds"):
            d[k] = list(d[k])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        return _from_dict(cls, d)


def batch_hash(batch: SequenceBatch) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(batch.inputs).tobytes())
    h.update(np.ascontiguousarray(batch.labels).tobytes())
    return h.hexdigest()


def synth_dataset(task: str, n: int, t: int, d_x: int, K: int = 2, seed: int = 0) -> SequenceBatch:
    """Parity or majority sequences of unit-norm one-hot symbols.

    Parity: each step is ``+e_j`` or ``-e_j`` and the label is the parity of
    the number of negative steps (K = 2).  Majority: each step is ``e_k``
    for a class ``k < K`` and the label is the most frequent class, ties
    going to whichever tied class appeared last.
    """
    if min(n, t, d_x) < 1:
        raise ValueError("n, t and d_x must be positive")
    rng = stream_rng(seed, 10)
    X = np.zeros((n, t, d_x))
    rows = np.arange(n)[:, None]
    steps = np.arange(t)[None, :]
    if task in ("parity", "synthetic_parity"):
        if K != 2:
            raise ValueError("parity task has K = 2")
        j = rng.integers(0, d_x, size=(n, t))
        sign = rng.choice((-1.0, 1.0), size=(n, t))
        X[rows, steps, j] = sign
        labels = (np.sum(sign < 0, axis=1) % 2).astype(np.int64)
    elif task in ("majority", "synthetic_majority"):
        if K < 2 or d_x < K:
            raise ValueError("majority task needs K >= 2 and d_x >= K")
        sym = rng.integers(0, K, size=(n, t))
        X[rows, steps, sym] = 1.0
        counts = np.stack([np.sum(sym == k, axis=1) for k in range(K)], axis=1)
        tied = counts == counts.max(axis=1, keepdims=True)
        labels = np.empty(n, dtype=np.int64)
        for i in range(n):
            for s in sym[i, ::-1]:
                if tied[i, s]:
                    labels[i] = s
                    break
    else:
        raise ValueError(f"unknown synthetic task {task!r}")
    return SequenceBatch(X, labels, b_x=1.0, meta={"task": task, "seed": seed})


def ingest_corpus(path, vocab_size: int, d_x: int, t: int, n: int, seed: int = 0, K: int = 2) -> SequenceBatch:
    """Sliding windows of embedded tokens labelled by the next token's frequency bucket.

    The ``vocab_size`` most frequent tokens are kept and the rest map to an
    UNK entry.  Each entry gets a fixed random unit vector.  The label of a
    window is ``rank * K // (vocab + 1)`` for the following token's
    frequency rank (UNK ranks last).
    """
    if min(vocab_size, d_x, t, n, K) < 1:
        raise ValueError("vocab_size, d_x, t, n and K must be positive")
    try:
        with open(path, encoding="utf-8") as fh:
            tokens = fh.read().split()
    except (OSError, UnicodeDecodeError) as exc:
        raise ValueError(f"cannot read corpus {path!r}: {exc}") from exc
    if not tokens:
        raise ValueError(f"corpus {path!r} is empty")
    counts = Counter(tokens)
    ranked = sorted(counts, key=lambda w: (-counts[w], w))[:vocab_size]
    index = {w: i for i, w in enumerate(ranked)}
    unk = len(ranked)
    ids = np.array([index.get(w, unk) for w in tokens], dtype=np.int64)
    available = ids.size - t
    if available < n:
        raise ValueError(f"corpus yields {max(available, 0)} windows, fewer than n={n}")
    emb = stream_rng(seed, 20).standard_normal((unk + 1, d_x))
    emb /= np.sqrt(np.sum(emb * emb, axis=1, keepdims=True))
    starts = np.sort(stream_rng(seed, 21).choice(available, size=n, replace=False))
    win = ids[starts[:, None] + np.arange(t)[None, :]]
    labels = ids[starts + t] * K // (unk + 1)
    return SequenceBatch(emb[win], labels, b_x=1.0,
                         meta={"task": "corpus", "vocab": unk + 1, "seed": seed})


def make_dataset(cfg: TrainConfig) -> SequenceBatch:
    if cfg.task == "corpus":
        return ingest_corpus(cfg.corpus_path, cfg.vocab_size, cfg.d_x, cfg.t, cfg.n, cfg.seed, cfg.K)
    return synth_dataset(cfg.task, cfg.n, cfg.t, cfg.d_x, cfg.K, cfg.seed)


@dataclass
class TrainResult:
    params: RnnParams
    risks: list
    checkpoints: list
    log: list
    data: SequenceBatch


def _log_event(epoch, risk, p, t0):
    return {
        "epoch": epoch,
        "risk": risk,
        "B_U": frobenius_norm(p.U),
        "M_U": spectral_norm(p.U),
        "elapsed_ms": round((time.perf_counter() - t0) * 1000.0, 3),
    }


def train(cfg: TrainConfig, out_dir=None, log_path=None, data: Optional[SequenceBatch] = None) -> TrainResult:
    """Clipped minibatch SGD with a seeded shuffle per epoch.

    Records the empirical risk on the full training set before training
    (epoch 0) and after every epoch, keeps every epoch's checkpoint text and
    writes them to ``out_dir`` when given.  ``log_path`` receives one JSON
    line per epoch.
    """
    data = make_dataset(cfg) if data is None else data
    loss = cfg.loss_spec
    p = init_params(data.d_x, cfg.d_h, cfg.K, cfg.activation, cfg.seed)
    t0 = time.perf_counter()
    risks = [empirical_risk(p, data, loss)]
    checkpoints = [dumps_checkpoint(p, cfg.seed, 0)]
    log = [_log_event(0, risks[0], p, t0)]
    for epoch in range(1, cfg.epochs + 1):
        order = stream_rng(cfg.seed, 30, epoch).permutation(data.n)
        for k, start in enumerate(range(0, data.n, cfg.batch_size)):
            mb = data.subset(order[start : start + cfg.batch_size])
            try:
                g = bptt_gradient(p, mb, loss)
            except NonFiniteError as exc:
                raise TrainingError(
                    f"non-finite gradient at epoch {epoch}, minibatch {k}, sequence "
                    f"{order[start + exc.index] if exc.index is not None else '?'}"
                ) from exc
            if cfg.lr > 0:
                p = clip_and_step(p, g, cfg.lr, cfg.clip)
        try:
            risk = empirical_risk(p, data, loss)
        except NonFiniteError as exc:
            raise TrainingError(f"non-finite forward pass after epoch {epoch}") from exc
        if not math.isfinite(risk):
            raise TrainingError(f"non-finite empirical risk after epoch {epoch}")
        risks.append(risk)
        checkpoints.append(dumps_checkpoint(p, cfg.seed, epoch))
        log.append(_log_event(epoch, risk, p, t0))
    if out_dir is not None:
        for e, text in enumerate(checkpoints):
            atomic_write_text(os.path.join(out_dir, f"checkpoint_epoch{e:03d}.json"), text)
    if log_path is not None:
        atomic_write_text(log_path, "".join(json.dumps(ev) + "\n" for ev in log))
    return TrainResult(params=p, risks=risks, checkpoints=checkpoints, log=log, data=data)


def _imp_columns(row: dict) -> dict:
    ref = row.get("bound4_star")
    if ref is None:
        ref = row.get("bound4")
    out = {}
    for i, col in zip((1, 2, 3), IMP_COLUMNS):
        v = row.get(f"bound{i}")
        out[col] = None if (v is None or ref is None) else improvement_percentage(v, ref)
    return out


def compare(entries, loss: LossSpec = LossSpec("ramp", 1.0), delta: float = 0.01, which=BOUND_NAMES,
            imp_per: bool = True) -> list:
    """Bound rows for a list of measured profiles.

    Each entry is a dict with ``profile`` (NormProfile or dict), ``t``,
    ``n`` and optional ``dataset``, ``activation`` and ``empirical_risk``.
    ``Imp_perI`` is the percentage gap of Bound I over Bound 4* when present
    and Bound 4 otherwise.
    """
    rows = []
    for e in entries:
        prof = e["profile"]
        prof = prof if isinstance(prof, NormProfile) else NormProfile.from_dict(prof)
        rep = compute_bounds(prof, int(e["t"]), int(e["n"]), loss, delta,
                             empirical_risk=float(e.get("empirical_risk", 0.0)), which=which,
                             dataset=str(e.get("dataset", "")), activation=e.get("activation"))
        row = rep.row()
        if imp_per:
            row.update(_imp_columns(row))
        rows.append(row)
    return rows


def report_csv(rows, imp_per: bool = True) -> str:
    cols = REPORT_COLUMNS + (IMP_COLUMNS if imp_per else ())
    return rows_to_csv(rows, cols)


def run_experiment(cfg: ExperimentConfig, workers: Optional[int] = None) -> list:
    """Train at every (t, n, activation) sweep point and bound the trained model.

    Sweep points run in parallel; each trains serially from its own seed.
    Writes the CSV to ``cfg.out_csv`` when set and per-point checkpoints and
    logs under ``cfg.out_dir``.
    """
    points = [(t, n, a) for t in cfg.t_values for n in cfg.n_values for a in cfg.activations]

    def one(pt):
        t, n, act = pt
        tc = replace(cfg.train, t=int(t), n=int(n), activation=act)
        sub = None
        if cfg.out_dir is not None:
            sub = os.path.join(cfg.out_dir, f"t{t}_n{n}_{act}")
        res = train(tc, out_dir=sub, log_path=None if sub is None else os.path.join(sub, "run_log.jsonl"))
        prof = extract_norm_profile(res.params, res.data)
        return {"profile": prof, "t": t, "n": n, "activation": act,
                "dataset": cfg.dataset or tc.task, "empirical_risk": res.risks[-1]}

    entries = pmap(one, points, workers)
    rows = compare(entries, cfg.train.loss_spec, cfg.delta, cfg.bounds, cfg.imp_per)
    if cfg.out_csv is not None:
        atomic_write_text(cfg.out_csv, report_csv(rows, cfg.imp_per))
    return rows
