"""``rnncap`` command line: train, norms, bounds, verify, erc, compare.

Exit codes: 0 success, 1 invalid input or arguments, 2 runtime failure
(non-convergence, overflow, divergent training or a failed verification).
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import capacity, empirical, harness
from .io import atomic_write_text, dumps_json, rows_to_csv
from .losses import LossSpec
from .rnn import Activation, SequenceBatch, load_checkpoint

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


class UsageError(ValueError):
    pass


class VerificationFailed(RuntimeError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _global_flags(p, suppress):
    default = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--seed", type=int, default=default(0), help="base random seed")
    p.add_argument("--out", default=default("-"), help="output path ('-' for stdout)")
    p.add_argument("--format", choices=("csv", "json"), default=default(None), help="output format")


def _loss_flags(p, default="ramp"):
    p.add_argument("--loss", choices=("cross_entropy", "hinge", "ramp"), default=default)
    p.add_argument("--gamma", type=float, default=1.0, help="ramp margin")


def build_parser() -> argparse.ArgumentParser:
    top = _Parser(prog="rnncap", description="Capacity bounds and experiments for vanilla RNNs")
    _global_flags(top, suppress=False)
    common = _Parser(add_help=False)
    _global_flags(common, suppress=True)
    sub = top.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", parents=[common], help="train a model and write its checkpoint")
    p.add_argument("--config", help="TrainConfig JSON")
    p.add_argument("--task", choices=harness.TASKS)
    for name in ("d_x", "d_h", "K", "t", "n", "epochs", "batch_size"):
        p.add_argument(f"--{name.replace('_', '-')}", dest=name, type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--clip", type=float)
    p.add_argument("--activation", choices=("relu", "tanh"))
    p.add_argument("--loss", choices=("cross_entropy", "hinge", "ramp"))
    p.add_argument("--gamma", type=float)
    p.add_argument("--corpus-path", dest="corpus_path")
    p.add_argument("--log", help="run-log JSONL path")
    p.add_argument("--checkpoints", help="directory for per-epoch checkpoints")

    p = sub.add_parser("norms", parents=[common], help="norm profile of a checkpoint")
    p.add_argument("model", help="checkpoint JSON")
    p.add_argument("--config", help="TrainConfig JSON used to rebuild the training data")

    p = sub.add_parser("bounds", parents=[common], help="evaluate bounds for a norm profile")
    p.add_argument("--norms", required=True, help="norm profile JSON")
    p.add_argument("--t", type=int)
    p.add_argument("--n", type=int)
    _loss_flags(p)
    p.add_argument("--which", default="all", help="'all' or comma-separated bound names")
    p.add_argument("--delta", type=float, default=0.01)
    p.add_argument("--empirical-risk", dest="empirical_risk", type=float, default=0.0)
    p.add_argument("--omega", help="output bound for unbounded losses: a number, 'analytic' "
                   "(default) or 'measured' (the profile's omega_measured)")

    p = sub.add_parser("verify", parents=[common], help="numeric checks of the norm inequalities")
    p.add_argument("--suite", choices=("lemmas", "hidden", "output", "loss"), default="lemmas")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--loss-trials", dest="loss_trials", type=int, default=10000)

    p = sub.add_parser("erc", parents=[common], help="Monte-Carlo Rademacher estimate")
    p.add_argument("--norms", help="profile JSON supplying B_U, B_V, B_W, M_U")
    for name in ("B_U", "B_V", "B_W", "M_U"):
        p.add_argument(f"--{name.replace('_', '-')}", dest=name, type=float)
    p.add_argument("--activation", choices=("relu", "tanh"), default="relu")
    p.add_argument("--task", choices=("synthetic_parity", "synthetic_majority"), default="synthetic_majority")
    p.add_argument("--n", type=int, default=16)
    p.add_argument("--t", type=int, default=3)
    p.add_argument("--d-x", dest="d_x", type=int, default=2)
    p.add_argument("--d-h", dest="d_h", type=int, default=2)
    p.add_argument("--K", type=int, default=2)
    _loss_flags(p)
    p.add_argument("--draws", type=int, default=64)
    p.add_argument("--restarts", type=int, default=8)
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--exhaustive", action="store_true", help="enumerate all sign patterns")

    p = sub.add_parser("compare", parents=[common], help="bound table with improvement columns")
    p.add_argument("profiles", nargs="+", help="norm profile JSON files")
    p.add_argument("--t", type=int)
    p.add_argument("--n", type=int)
    _loss_flags(p)
    p.add_argument("--which", default="all")
    p.add_argument("--delta", type=float, default=0.01)
    return top


def _read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path} is not valid JSON: {exc}") from exc


def _emit(args, text):
    if args.out == "-":
        sys.stdout.write(text)
    else:
        atomic_write_text(args.out, text)


def _which(s):
    if s == "all":
        return capacity.BOUND_NAMES
    names = tuple(x.strip() for x in s.split(",") if x.strip())
    bad = set(names) - set(capacity.BOUND_NAMES)
    if bad or not names:
        raise UsageError(f"--which must be 'all' or names from {capacity.BOUND_NAMES}")
    return names


def _train_config(args) -> harness.TrainConfig:
    base = _read_json(args.config) if args.config else {}
    if not isinstance(base, dict):
        raise UsageError("config must be a JSON object")
    base = harness.TrainConfig.from_dict(base).to_dict()
    for k in ("task", "d_x", "d_h", "K", "t", "n", "epochs", "batch_size", "lr", "clip",
              "activation", "loss", "gamma", "corpus_path"):
        v = getattr(args, k, None)
        if v is not None:
            base[k] = v
    if "seed" in vars(args) and args.seed_given:
        base["seed"] = args.seed
    return harness.TrainConfig.from_dict(base)


def _profile_entry(path, args):
    d = _read_json(path)
    if not isinstance(d, dict):
        raise UsageError(f"{path}: norm profile must be a JSON object")
    prof = capacity.NormProfile.from_dict(d)
    t = args.t if args.t is not None else d.get("t")
    n = args.n if args.n is not None else d.get("n")
    if t is None or n is None:
        raise UsageError(f"{path}: t and n are needed (pass --t/--n or store them in the profile)")
    return {"profile": prof, "t": int(t), "n": int(n), "dataset": d.get("dataset", ""),
            "activation": d.get("activation"), "empirical_risk": float(d.get("empirical_risk", 0.0))}


def _omega(spec, path):
    if spec is None or spec == "analytic":
        return None
    if spec == "measured":
        d = _read_json(path)
        if "omega_measured" not in d:
            raise UsageError(f"{path} has no omega_measured (run norms with --config)")
        return float(d["omega_measured"])
    try:
        v = float(spec)
    except ValueError:
        raise UsageError("--omega must be a number, 'analytic' or 'measured'") from None
    if not (v > 0 and math.isfinite(v)):
        raise UsageError("--omega must be positive")
    return v


def cmd_train(args):
    cfg = _train_config(args)
    _announce(args, {"train_config": cfg.to_dict()})
    res = harness.train(cfg, out_dir=args.checkpoints, log_path=args.log)
    _emit(args, res.checkpoints[-1])
    return EXIT_OK


def cmd_norms(args):
    try:
        params, seed, epoch = load_checkpoint(args.model)
    except OSError as exc:
        raise UsageError(f"cannot read {args.model}: {exc}") from exc
    if args.config:
        cfg = harness.TrainConfig.from_dict(_read_json(args.config))
        data = harness.make_dataset(cfg)
        if data.d_x != params.d_x:
            raise UsageError("config input dimension does not match the checkpoint")
        prof = empirical.extract_norm_profile(params, data)
        meta = {"t": cfg.t, "n": cfg.n, "dataset": cfg.task,
                "omega_measured": empirical.measured_output_bound(params, data)}
    else:
        # unit-norm inputs assumed; sqrt(d_x) bounds the 1-norm of a unit vector
        ones = np.zeros((1, 1, params.d_x))
        ones[0, 0, 0] = 1.0
        prof = empirical.extract_norm_profile(params, SequenceBatch(ones, np.zeros(1, dtype=np.int64)))
        prof = prof.replace(B_x1=math.sqrt(params.d_x))
        meta = {}
    _announce(args, {"model": args.model, "config": args.config, "epoch": epoch})
    out = prof.to_dict()
    out.update(meta)
    out["activation"] = params.activation.kind
    _emit(args, dumps_json(out))
    return EXIT_OK


def cmd_bounds(args):
    entry = _profile_entry(args.norms, args)
    loss = LossSpec(args.loss, args.gamma)
    which = _which(args.which)
    omega = _omega(args.omega, args.norms)
    _announce(args, {"norms": args.norms, "t": entry["t"], "n": entry["n"], "loss": loss.to_dict(),
                     "which": list(which), "delta": args.delta, "omega": omega})
    rep = capacity.compute_bounds(entry["profile"], entry["t"], entry["n"], loss, args.delta,
                                  args.empirical_risk, omega, which, entry["dataset"],
                                  entry["activation"])
    if (args.format or "csv") == "csv":
        _emit(args, rows_to_csv([rep.row()], capacity.REPORT_COLUMNS))
    else:
        _emit(args, dumps_json(rep.to_dict()))
    return EXIT_OK


def cmd_verify(args):
    if args.trials < 1 or args.loss_trials < 1:
        raise UsageError("trials must be >= 1")
    _announce(args, {"suite": args.suite, "trials": args.trials, "loss_trials": args.loss_trials})
    reports = []
    if args.suite in ("lemmas", "hidden"):
        reports.append(empirical.verify_hidden_norm(args.trials, seed=args.seed))
    if args.suite in ("lemmas", "output"):
        reports.append(empirical.verify_output_lipschitz(args.trials, seed=args.seed))
    if args.suite in ("lemmas", "loss"):
        for kind in ("cross_entropy", "hinge", "ramp"):
            reports.append(empirical.verify_loss_lipschitz(LossSpec(kind, 1.0), args.loss_trials, seed=args.seed))
    total = sum(r["violations"] for r in reports)
    if (args.format or "json") == "csv":
        _emit(args, rows_to_csv(reports, ("op", "trials", "violations", "max_slack_ratio", "seed")))
    else:
        _emit(args, dumps_json({"suite": args.suite, "violations": total, "reports": reports}))
    if total:
        raise VerificationFailed(f"{total} violation(s) found")
    return EXIT_OK


def cmd_erc(args):
    radii = {}
    if args.norms:
        d = _read_json(args.norms)
        radii = {k: d[k] for k in ("B_U", "B_V", "B_W", "M_U") if k in d}
    for k in ("B_U", "B_V", "B_W", "M_U"):
        if getattr(args, k) is not None:
            radii[k] = getattr(args, k)
    missing = {"B_U", "B_V", "B_W"} - set(radii)
    if missing:
        raise UsageError(f"missing class radii {sorted(missing)}")
    cons = empirical.ClassConstraints(activation=Activation(args.activation), **radii)
    data = harness.synth_dataset(args.task, args.n, args.t, args.d_x, args.K, args.seed)
    loss = LossSpec(args.loss, args.gamma)
    _announce(args, {"constraints": {k: radii[k] for k in sorted(radii)}, "activation": args.activation,
                     "task": args.task, "n": args.n, "t": args.t, "d_x": args.d_x, "d_h": args.d_h,
                     "K": args.K, "loss": loss.to_dict(), "draws": args.draws, "restarts": args.restarts,
                     "steps": args.steps, "lr": args.lr, "exhaustive": args.exhaustive})
    est = empirical.estimate_erc_mc(cons, data, loss, args.draws, args.restarts, args.steps, args.lr,
                                    args.seed, d_h=args.d_h, d_y=args.K, exhaustive=args.exhaustive)
    prof = empirical.constraints_profile(cons, data, args.d_h, args.K)
    omega = capacity.output_bound(prof, args.t, "spectral")
    rho = loss.rho
    analytic = capacity.rademacher_exact(prof, args.t, args.n, rho, "spectral")
    out = est.to_dict()
    out["rademacher_exact"] = analytic
    out["omega_t"] = omega
    if (args.format or "json") == "csv":
        row = {k: v for k, v in out.items() if k != "best_correlations"}
        _emit(args, rows_to_csv([row], tuple(row)))
    else:
        _emit(args, dumps_json(out))
    return EXIT_OK


def cmd_compare(args):
    entries = [_profile_entry(p, args) for p in args.profiles]
    loss = LossSpec(args.loss, args.gamma)
    which = _which(args.which)
    _announce(args, {"profiles": args.profiles, "loss": loss.to_dict(), "which": list(which),
                     "delta": args.delta})
    rows = harness.compare(entries, loss, args.delta, which, imp_per=True)
    if (args.format or "csv") == "csv":
        _emit(args, harness.report_csv(rows))
    else:
        _emit(args, dumps_json(rows))
    return EXIT_OK


def _announce(args, resolved):
    info = {"command": args.command, "seed": args.seed, "out": args.out, "format": args.format}
    info.update(resolved)
    print("resolved config: " + json.dumps(info, sort_keys=True, default=str), file=sys.stderr)


COMMANDS = {
    "train": cmd_train,
    "norms": cmd_norms,
    "bounds": cmd_bounds,
    "verify": cmd_verify,
    "erc": cmd_erc,
    "compare": cmd_compare,
}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        if any(a in ("-h", "--help") for a in argv):
            try:
                parser.parse_args(argv)
            except SystemExit as exc:
                return int(exc.code or 0)
        args = parser.parse_args(argv)
        args.seed_given = any(a == "--seed" or a.startswith("--seed=") for a in argv)
        return COMMANDS[args.command](args)
    except VerificationFailed as exc:
        print(f"rnncap: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (UsageError, ValueError, KeyError, TypeError) as exc:
        print(f"rnncap: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (RuntimeError, ArithmeticError, OSError) as exc:
        print(f"rnncap: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
