"""Compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--hidden 64] [--steps 12] [--repeat 200] [--end-to-end]
"""
import argparse
import os
import subprocess
import sys
import time
import timeit

import numpy as np

from lookadapt.nncore import kernels


def lstm_case(rng, steps, hidden):
    Zx = rng.normal(size=(steps, 4 * hidden))
    Wh = rng.normal(scale=0.1, size=(4 * hidden, hidden))
    h0, c0 = np.zeros(hidden), np.zeros(hidden)
    return Zx, Wh, h0, c0


def bench(label, fast, slow, repeat):
    t_fast = min(timeit.repeat(fast, number=repeat, repeat=3)) / repeat
    t_slow = min(timeit.repeat(slow, number=repeat, repeat=3)) / repeat
    print(f"{label:<14} compiled {t_fast * 1e6:9.1f} us   numpy {t_slow * 1e6:9.1f} us   x{t_slow / t_fast:5.1f}")


def end_to_end(epochs):
    cmd = [sys.executable, "-m", "lookadapt", "train", "--sample", "--set", f"epochs={epochs}",
           "--out", os.devnull]
    for label, env in (("compiled", {}), ("numpy", {"LOOKADAPT_PURE_PYTHON": "1"})):
        t0 = time.perf_counter()
        subprocess.run(cmd, env=dict(os.environ, **env), check=True, stdout=subprocess.DEVNULL)
        print(f"train {epochs} epoch(s) on the sample grammar, {label}: {time.perf_counter() - t0:.1f} s")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--hidden", type=int, default=64)
    ap.add_argument("--steps", type=int, default=12)
    ap.add_argument("--repeat", type=int, default=200)
    ap.add_argument("--end-to-end", action="store_true", help="also time a short training run per backend")
    ap.add_argument("--epochs", type=int, default=2)
    args = ap.parse_args(argv)
    if kernels.BACKEND != "cython":
        print("compiled kernels are not available; rebuild with `pip install -e . --no-build-isolation`")
        return 1
    ext = kernels._ext
    rng = np.random.default_rng(0)
    Zx, Wh, h0, c0 = lstm_case(rng, args.steps, args.hidden)
    H, C, G = kernels.forward_numpy(Zx, Wh, h0, c0)
    dH = rng.normal(size=H.shape)
    dC = np.zeros(args.hidden)
    bench("lstm forward", lambda: ext.lstm_forward(Zx, Wh, h0, c0),
          lambda: kernels.forward_numpy(Zx, Wh, h0, c0), args.repeat)
    bench("lstm backward", lambda: ext.lstm_backward(dH, dC, Wh, C, G, c0),
          lambda: kernels.backward_numpy(dH, dC, Wh, C, G, c0), args.repeat)
    n = 4 * args.hidden * args.hidden
    w, g = rng.normal(size=n), rng.normal(size=n)
    m, v = np.zeros(n), np.zeros(n)
    step = (1.0, 1e-3, 0.9, 0.999, 0.1, 0.001, 1e-8)
    bench("adam", lambda: ext.adam_update(w, g, m, v, *step),
          lambda: kernels.adam_numpy(w, g, m, v, *step), args.repeat)
    if args.end_to_end:
        end_to_end(args.epochs)
    return 0


if __name__ == "__main__":
    sys.exit(main())
