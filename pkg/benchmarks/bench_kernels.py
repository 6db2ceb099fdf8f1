"""Compare the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]

Reports the best wall time of N runs per kernel and backend, plus the
speedup. Outputs are checked for agreement before timing.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from shiftwatch.kernels import available_backends


def best_of(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def cases():
    rng = np.random.default_rng(0)
    frame = np.ascontiguousarray(rng.uniform(0, 255, (240, 320)))
    window = np.ascontiguousarray(frame[:64, :64])
    weights = rng.normal(size=1764)
    m = np.array([[0.8, -0.1, 40.0], [0.1, 0.8, 20.0]])
    hog = (8, 2, 1, 9, False, 0.2, 1e-6)
    return {
        "hog_window 64x64": lambda k: k.hog_window(window, *hog),
        "scan_windows 320x240": lambda k: k.scan_windows(frame, weights, -0.5, 64, 64, 8, *hog),
        "warp_affine 96x96": lambda k: k.warp_affine(frame, m, 96, 96),
        "gradients 320x240": lambda k: k.gradients(frame, False),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    backends = available_backends()
    if "cython" not in backends:
        print("compiled extension not built; only the numpy fallback is available")
    names = [n for n in ("numpy", "cython") if n in backends]
    print(f"{'kernel':<24}" + "".join(f"{n:>12}" for n in names) + ("   speedup" if len(names) > 1 else ""))
    for label, fn in cases().items():
        outs = [fn(backends[n]) for n in names]
        for o in outs[1:]:
            a, b = (outs[0], o) if not isinstance(o, tuple) else (np.stack(outs[0]), np.stack(o))
            assert np.allclose(a, b, atol=1e-9), f"{label}: backends disagree"
        times = [best_of(lambda n=n: fn(backends[n]), args.repeat) for n in names]
        line = f"{label:<24}" + "".join(f"{t * 1e3:>10.2f}ms" for t in times)
        if len(times) > 1:
            line += f"   {times[0] / times[1]:>6.1f}x"
        print(line)


if __name__ == "__main__":
    main()
