"""Compare the compiled kernels against the pure-numpy fallback.

Runs NLM and sliding-DCT on the same inputs through both implementations,
reporting wall time per call and the maximum absolute difference between the
two routes. Usage:

    python benchmarks/bench_kernels.py [--size 128] [--repeats 3]
"""

import argparse
import time

import numpy as np

from denoisebench._kernels import get_impl


def timed(fn, repeats):
    best = float("inf")
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return out, best


def bench_nlm(impl, x, patch, search, h, sigma, repeats):
    ph, sh = patch // 2, search // 2
    pad = ph + sh
    padded = np.pad(x, ((0, 0), (pad, pad), (pad, pad)), mode="symmetric")
    return timed(lambda: impl.nlm(padded, x.shape[1], x.shape[2],
                                  patch, search, h, sigma), repeats)


def bench_dct(impl, x, block, threshold, repeats):
    def run():
        return np.stack([impl.dct_denoise(x[c], block, block // 2, threshold)
                         for c in range(x.shape[0])])
    return timed(run, repeats)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=128, help="square image side")
    ap.add_argument("--repeats", type=int, default=3, help="best-of-N timing")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    try:
        native = get_impl("native")
    except ImportError:
        native = None
    fallback = get_impl("numpy")

    rng = np.random.default_rng(args.seed)
    x = rng.random((3, args.size, args.size), dtype=np.float64)
    sigma = 50.0 / 255.0
    h = 0.4 * sigma
    thr = 2.7 * sigma

    print(f"image 3x{args.size}x{args.size}, best of {args.repeats}")
    print(f"{'kernel':<22}{'numpy':>12}{'native':>12}{'speedup':>10}{'max|diff|':>12}")

    for name, run in (
        ("nlm p7 s21", lambda impl: bench_nlm(impl, x, 7, 21, h, sigma, args.repeats)),
        ("nlm p3 s9", lambda impl: bench_nlm(impl, x, 3, 9, h, sigma, args.repeats)),
        ("dct b8", lambda impl: bench_dct(impl, x, 8, thr, args.repeats)),
        ("dct b16", lambda impl: bench_dct(impl, x, 16, thr, args.repeats)),
    ):
        ref, t_np = run(fallback)
        if native is None:
            print(f"{name:<22}{t_np * 1e3:>10.1f}ms{'n/a':>12}{'':>10}{'':>12}")
            continue
        out, t_nat = run(native)
        diff = float(np.abs(out - ref).max())
        print(f"{name:<22}{t_np * 1e3:>10.1f}ms{t_nat * 1e3:>10.1f}ms"
              f"{t_np / t_nat:>9.1f}x{diff:>12.2e}")

    if native is None:
        print("\ncompiled kernels unavailable; showing fallback timings only")


if __name__ == "__main__":
    main()
