"""Acceptance criteria, one test each, with their stated tolerances and time limits.

Each test records a PASS/FAIL line; they are printed at the end of the
pytest run and immediately (``-s``) as the tests finish.
"""

import math
import time

import numpy as np
import pytest
from scipy import integrate

from conftest import ACCEPTANCE
from oracles import bernstein_probability, closed_b, closed_c
from profiles import random_profile
from rnncap import capacity as C
from rnncap import empirical as E
from rnncap import harness as H
from rnncap.linalg import stream_rng
from rnncap.losses import LossSpec
from rnncap.rnn import RnnParams, SequenceBatch, batch_outputs

SEED = 20240611


def record(name, ok, detail):
    ACCEPTANCE.append((name, bool(ok), detail))
    print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    assert ok, f"{name}: {detail}"


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.t0


def test_hidden_state_suite():
    with Timer() as tm:
        rep = E.verify_hidden_norm(trials=1000, max_d=8, max_t=12, seed=SEED)
    ok = rep["violations"] == 0 and tm.seconds < 10
    record("hidden-state norm bound (1000 configs, both growth rates)", ok,
           f"violations={rep['violations']} max_ratio={rep['max_slack_ratio']:.6f} time={tm.seconds:.2f}s")


def test_output_lipschitz_suite():
    with Timer() as tm:
        rep = E.verify_output_lipschitz(trials=1000, seed=SEED, perturb="all", max_d=8, max_t=12)
    ok = rep["violations"] == 0 and tm.seconds < 10
    record("output Lipschitz bound (1000 pairs)", ok,
           f"violations={rep['violations']} max_ratio={rep['max_slack_ratio']:.6f} time={tm.seconds:.2f}s")


def test_loss_lipschitz_suite():
    specs = [(LossSpec("cross_entropy"), math.sqrt(2)), (LossSpec("hinge"), math.sqrt(2)),
             (LossSpec("ramp", 1.0), 2.0)]
    with Timer() as tm:
        reps = [E.verify_loss_lipschitz(s, trials=10000, K=10, seed=SEED) for s, _ in specs]
    rho_ok = all(s.rho == rho for s, rho in specs)
    bad = sum(r["violations"] for r in reps)
    ok = rho_ok and bad == 0 and tm.seconds < 5
    record("loss Lipschitz (10000 draws per loss)", ok,
           f"violations={bad} rho={[s.rho for s, _ in specs]} time={tm.seconds:.2f}s")


def _grad_config(i):
    rng = stream_rng(SEED, 40, i)
    d_x, d_h, K = (int(v) for v in rng.integers(2, 7, size=3))
    t = int(rng.integers(1, 6))
    act = ("relu", "tanh")[i % 2]
    loss = (LossSpec("cross_entropy"), LossSpec("hinge"), LossSpec("ramp", 1.0), LossSpec("ramp", 0.5))[i % 4]
    p = RnnParams(rng.standard_normal((d_h, d_h)) * 0.6 / math.sqrt(d_h),
                  rng.standard_normal((d_h, d_x)) / math.sqrt(d_x),
                  rng.standard_normal((K, d_h)) * 0.5 / math.sqrt(d_h), act)
    X = rng.standard_normal((12, t, d_x))
    X /= np.maximum(np.linalg.norm(X, axis=2, keepdims=True), 1.0)
    z = rng.integers(0, K, size=12)
    if loss.kind == "ramp":
        # label by the current winner so the margin sits on the sloped part (-gamma, 0)
        _, Y = batch_outputs(p, SequenceBatch(X, z))
        z = Y[:, -1, :].argmax(axis=1)
    return p, SequenceBatch(X, z), loss


def _sloped(p, batch, loss):
    _, Y = batch_outputs(p, batch)
    F, Z = Y[:, -1, :], batch.labels
    rows = np.arange(len(Z))
    rivals = F.copy()
    rivals[rows, Z] = -np.inf
    psi = rivals.max(axis=1) - F[rows, Z]
    return int(np.sum((psi > -loss.gamma) & (psi < 0)))


def test_gradient_check():
    worst, shortfalls = 0.0, []
    with Timer() as tm:
        for i in range(20):
            p, b, loss = _grad_config(i)
            keep = E.smooth_indices(p, b, loss, margin=1e-3)
            sub = b.subset(keep)
            if loss.kind == "ramp" and _sloped(p, sub, loss) == 0:
                shortfalls.append(i)
            worst = max(worst, E.gradient_check(p, sub, loss, fd_step=1e-5))
    ok = worst <= 1e-4 and not shortfalls and tm.seconds < 30
    record("BPTT gradient vs central differences (20 configs)", ok,
           f"max_rel_err={worst:.3e} ramp configs without sloped points={shortfalls} time={tm.seconds:.2f}s")


def test_closed_form_consistency():
    worst_sum = 0.0
    for i in range(500):
        rng = stream_rng(SEED, 50, i)
        x = float(rng.uniform(0.0, 3.0))
        if abs(x - 1.0) < 1e-3:
            continue
        t = int(rng.integers(1, 40))
        p = C.NormProfile(d_x=1, d_h=1, d_y=1, B_U=x, M_U=x)
        rc = C.recurrence_constants(p, t)
        worst_sum = max(worst_sum, abs(rc.c_t - closed_c(x, t)) / closed_c(x, t))
        if t > 1:
            worst_sum = max(worst_sum, abs(rc.b_t - closed_b(x, t)) / closed_b(x, t))
    worst_dudley = 0.0
    for i in range(50):
        rng = stream_rng(SEED, 51, i)
        Cv, r = float(rng.uniform(0.0, 50.0)), float(rng.uniform(0.1, 10.0))
        n = int(rng.integers(1, 10**5))
        top = 2 * r * math.sqrt(n)
        alpha = float(rng.uniform(1e-3, 0.99)) * top
        integral, _ = integrate.quad(lambda e: math.sqrt(Cv) / e, alpha, top, limit=200)
        ref = 4 * alpha / math.sqrt(n) + 12 / n * integral
        worst_dudley = max(worst_dudley, abs(C.dudley_bound(Cv, r, n, alpha) - ref) / ref)
    ok = worst_sum <= 1e-10 and worst_dudley <= 1e-3
    record("summed constants vs closed forms; Dudley vs quadrature", ok,
           f"sum_rel_err={worst_sum:.2e} dudley_rel_err={worst_dudley:.2e}")


def test_dominance_properties():
    bad = 0
    for i in range(1000):
        rng = stream_rng(SEED, 60, i)
        p = random_profile(rng, bounded=True)
        t, n = int(rng.integers(1, 30)), int(rng.integers(1, 10**6))
        fro = C.recurrence_constants(p, t, "frobenius")
        spec = C.recurrence_constants(p, t, "spectral")
        bad += spec.c_t > fro.c_t or spec.b_t > fro.b_t or spec.g_t > fro.g_t
        bad += C.g_star(p, t, n) > spec.g_t
        bad += C.bound4_star(p, t, n) > C.bound4(p, t, n)
        bad += C.rademacher_exact(p, t, n, 1.0, "spectral") > C.rademacher_exact(p, t, n, 1.0, "frobenius")
    record("Bound4* <= Bound4 and spectral <= frobenius (1000 profiles)", bad == 0, f"violations={bad}")


def test_erc_calibration():
    fixture = E.erc_finite_class([[1.0, 1.0], [-1.0, -1.0]], exhaustive=True).mean
    misses = []
    for n in range(2, 11):
        rng = stream_rng(SEED, 70, n)
        values = rng.standard_normal((int(rng.integers(2, 6)), n))
        exact = E.erc_finite_class(values, exhaustive=True).mean
        mc = E.erc_finite_class(values, draws=400, seed=SEED + n)
        if abs(mc.mean - exact) > 2 * mc.std_error:
            misses.append(n)
    ok = fixture == 0.5 and not misses
    record("ERC calibration ({f,-f} exhaustive; MC vs enumeration n<=10)", ok,
           f"fixture={fixture!r} n beyond 2 std errors={misses}")


def test_erc_below_analytic_bound():
    ramp = LossSpec("ramp", 1.0)
    bad, closest = 0, math.inf
    with Timer() as tm:
        for i in range(20):
            rng = stream_rng(SEED, 80, i)
            n, t = int(rng.integers(4, 33)), int(rng.integers(1, 5))
            d_x, d_h = int(rng.integers(1, 5)), int(rng.integers(1, 5))
            task = "synthetic_parity" if i % 2 else "synthetic_majority"
            d_x = max(d_x, 2) if task == "synthetic_majority" else d_x
            data = H.synth_dataset(task, n, t, d_x, 2, seed=SEED + i)
            B = rng.uniform(0.2, 2.0, size=3)
            c = E.ClassConstraints(*B, M_U=float(B[0] * rng.uniform(0.3, 1.0)),
                                   activation=("relu", "tanh")[i % 2])
            est = E.estimate_erc_mc(c, data, ramp, draws=16, restarts=4, steps=60, seed=SEED + i, d_h=d_h, d_y=2)
            prof = E.constraints_profile(c, data, d_h, 2)
            bound = C.rademacher_exact(prof, t, n, ramp.rho, "spectral")
            bad += est.mean > bound + 2 * est.std_error
            closest = min(closest, bound - est.mean)
    ok = bad == 0 and tm.seconds < 300
    record("MC ERC <= analytic bound + 2 std errors (20 configs)", ok,
           f"violations={bad} smallest_gap={closest:.3f} time={tm.seconds:.1f}s")


def test_estimation_error_arithmetic_and_monotonicity():
    p = C.NormProfile(d_x=1, d_h=1, d_y=1, B_U=0.5, M_U=0.5, B_V=0.05, M_V=0.05, B_W=0.05, M_W=0.05)
    err = 0.0
    err = max(err, abs(C.phi_star(1.0, 2304, 1.0) - 1.0))
    err = max(err, abs(C.confidence(8.0)[0] - bernstein_probability(8.0)))
    for n in (100, 2304, 10**4):
        e = C.estimation_error(p, 2, n, omega_t=1.0)
        err = max(err, abs(e.phi_star - 48 * e.eta / (math.sqrt(n) * e.theta)) / e.phi_star)
        ref_v = n * min(1 / 288, 1 / (207 * e.theta * 1.0)) * e.theta**2 * e.phi_star**2
        err = max(err, abs(e.vartheta - ref_v) / ref_v)
        ref_p = max(bernstein_probability(e.vartheta), 0.0)
        err = max(err, abs(e.probability - min(ref_p, math.nextafter(1.0, 0.0))))
    grid = [10**k for k in range(2, 7)]
    probs = [C.estimation_error(p, 2, n, omega_t=1.0).probability for n in grid]
    increasing = all(a < b for a, b in zip(probs, probs[1:]))
    ok = err <= 1e-12 and increasing
    record("estimation-error arithmetic; probability strictly increasing in n", ok,
           f"max_err={err:.2e} probabilities={[repr(v) for v in probs]}")


def test_end_to_end_majority():
    with Timer() as tm:
        cfg = H.TrainConfig(task="synthetic_majority", d_x=4, d_h=16, K=2, t=5, n=2000, epochs=20)
        res = H.train(cfg)
        prof = E.extract_norm_profile(res.params, res.data)
        rows = H.compare([{"profile": prof, "t": 5, "n": 2000, "dataset": cfg.task, "activation": "relu",
                           "empirical_risk": res.risks[-1]}])
        text = H.report_csv(rows)
    import csv
    import io

    parsed = list(csv.DictReader(io.StringIO(text)))
    header_ok = list(parsed[0])[-3:] == list(H.IMP_COLUMNS)
    row = parsed[0]
    ref = float(row["bound4"])
    imp_ok = all(float(row[f"Imp_per{k}"]) == pytest.approx(100 * (float(row[f"bound{k}"]) - ref) / ref, rel=1e-12)
                 for k in (1, 2))
    spot = round(H._imp_columns({"bound2": 13.54, "bound4": 12.89})["Imp_per2"], 2)
    ok = res.risks[-1] < res.risks[0] and header_ok and imp_ok and spot == 5.04 and tm.seconds < 120
    record("end-to-end majority training and compare CSV", ok,
           f"risk {res.risks[0]:.4f} -> {res.risks[-1]:.4f}; Imp_per spot={spot}%; time={tm.seconds:.1f}s")


def _full_report(tmp):
    train = H.TrainConfig(d_x=3, d_h=6, t=4, n=200, epochs=3)
    cfg = H.ExperimentConfig(train=train, t_values=(3, 4), n_values=(200,), activations=("relu", "tanh"),
                             out_csv=str(tmp / "report.csv"), out_dir=str(tmp / "runs"))
    H.run_experiment(cfg)
    parts = [(tmp / "report.csv").read_bytes()]
    parts.append(repr(E.verify_hidden_norm(trials=100, seed=SEED)).encode())
    parts.append(repr(E.verify_output_lipschitz(trials=100, seed=SEED)).encode())
    parts.append(repr(E.verify_loss_lipschitz(LossSpec("ramp", 1.0), trials=1000, seed=SEED)).encode())
    c = E.ClassConstraints(1.0, 1.0, 1.0)
    data = H.synth_dataset("synthetic_parity", 8, 3, 2, seed=SEED)
    parts.append(repr(E.estimate_erc_mc(c, data, LossSpec("ramp", 1.0), draws=4, restarts=2, steps=10,
                                        seed=SEED).to_dict()).encode())
    return b"\n".join(parts)


def test_determinism(tmp_path):
    a = _full_report(tmp_path / "a")
    b = _full_report(tmp_path / "b")
    record("determinism: two full runs byte-identical", a == b, f"bytes={len(a)} identical={a == b}")
