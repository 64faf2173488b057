"""Time the compiled and numpy recurrence kernels on the same inputs.

Usage: python3 benchmarks/bench_kernels.py [--repeat 5] [--json out.json]
"""

import argparse
import json
import sys
import timeit

import numpy as np

from rnncap import kernels
from rnncap.linalg import stream_rng

SHAPES = [
    # (n, t, d_x, d_h, d_y)
    (20, 5, 4, 16, 2),  # one training minibatch
    (2000, 5, 4, 16, 2),  # full-data risk evaluation
    (32, 4, 4, 4, 2),  # ERC ascent step
    (200, 40, 30, 32, 10),  # longer sequences, wider layers
]


def make_inputs(n, t, d_x, d_h, d_y, seed=0):
    rng = stream_rng(seed, 0)
    U = rng.standard_normal((d_h, d_h)) * 0.5 / np.sqrt(d_h)
    W = rng.standard_normal((d_h, d_x)) / np.sqrt(d_x)
    V = rng.standard_normal((d_y, d_h)) / np.sqrt(d_h)
    X = rng.standard_normal((n, t, d_x))
    dY = rng.standard_normal((n, t, d_y)) / n
    return U, W, V, X, dY


def bench(backend, shape, repeat, kind):
    U, W, V, X, dY = make_inputs(*shape)
    H = kernels.forward_batch(U, W, X, kind, backend)

    def fwd():
        kernels.forward_batch(U, W, X, kind, backend)

    def bwd():
        kernels.backward_batch(U, W, V, X, H, dY, kind, backend)

    out = {}
    for name, fn in (("forward", fwd), ("backward", bwd)):
        number = max(1, int(0.2 / max(timeit.timeit(fn, number=1), 1e-7)))
        best = min(timeit.repeat(fn, number=number, repeat=repeat)) / number
        out[name] = best
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--activation", choices=("relu", "tanh"), default="tanh")
    ap.add_argument("--json", help="also write results as JSON")
    args = ap.parse_args(argv)
    kind = kernels.RELU if args.activation == "relu" else kernels.TANH
    backends = ["python"]
    try:
        kernels.get_backend("cython")
        backends.insert(0, "cython")
    except ImportError:
        print("compiled kernels not built; timing the numpy fallback only", file=sys.stderr)

    results = []
    print(f"{'n,t,d_x,d_h,d_y':>22} {'op':>9} " + " ".join(f"{b + ' (us)':>14}" for b in backends)
          + ("   speedup" if len(backends) == 2 else ""))
    for shape in SHAPES:
        times = {b: bench(b, shape, args.repeat, kind) for b in backends}
        for op in ("forward", "backward"):
            row = {"shape": shape, "op": op, **{b: times[b][op] for b in backends}}
            line = f"{','.join(map(str, shape)):>22} {op:>9} " + " ".join(
                f"{times[b][op] * 1e6:14.1f}" for b in backends)
            if len(backends) == 2:
                row["speedup"] = times["python"][op] / times["cython"][op]
                line += f"   {row['speedup']:6.1f}x"
            print(line)
            results.append(row)
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump({"activation": args.activation, "results": results}, fh, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
