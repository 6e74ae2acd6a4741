"""Time the numba kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--points 100000] [--n 6] [--repeat 3]

Both paths run in the same process (``use_numba`` is passed explicitly), so
the comparison needs no environment juggling. Results also report the
largest relative disagreement between the two paths.
"""

import argparse
import time

import numpy as np

from sglab import kernels
from sglab import scattering as scat
from sglab import soliton as sc


def best_of(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_exp_sum(n, points, repeat):
    cfg = sc.SolitonConfig.from_angles(np.linspace(-1.2, 1.3, n), np.linspace(-0.5, 0.5, n))
    S = cfg.sums
    Z = sc._jet_columns(S)
    rng = np.random.default_rng(0)
    x, y = rng.uniform(-20, 20, points), rng.uniform(-20, 20, points)
    args = (x, y, S.b, S.cx, S.cy, Z)
    kernels.exp_sum(x[:10], y[:10], S.b, S.cx, S.cy, Z, use_numba=True)  # compile outside the timer
    t_nb, (a, sa) = best_of(lambda: kernels.exp_sum(*args, use_numba=True), repeat)
    t_np, (b, sb) = best_of(lambda: kernels.exp_sum(*args, use_numba=False), repeat)
    err = np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-300))
    return t_nb, t_np, float(err), S.b.size


def bench_lax(repeat):
    cfg = sc.SolitonConfig.four_end(0.8, 0.6)
    xs = np.linspace(-40, 40, 2 * 16000 + 1)
    lam = 0.7
    A = scat.lax_coefficient(cfg, xs, 0.0, lam)
    k = lam - 1 / lam
    B = A - 0.25j * k * scat.SIGMA3
    ph = np.exp(-0.5j * k * xs)
    B[:, 0, 1] *= ph
    B[:, 1, 0] *= np.conj(ph)
    kernels.lax_rk4(B[:5], 0.005, use_numba=True)
    t_nb, Ta = best_of(lambda: kernels.lax_rk4(B, 0.005, use_numba=True), repeat)
    t_np, Tb = best_of(lambda: kernels.lax_rk4(B, 0.005, use_numba=False), repeat)
    return t_nb, t_np, float(np.max(np.abs(Ta - Tb)))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=100_000)
    ap.add_argument("--n", type=int, default=6)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if not kernels.HAVE_NUMBA:
        raise SystemExit("numba is disabled (SGLAB_DISABLE_NUMBA); nothing to compare")

    t_nb, t_np, err, terms = bench_exp_sum(args.n, args.points, args.repeat)
    print(f"exp_sum  n={args.n} terms={terms} points={args.points}: "
          f"numba {t_nb * 1e3:8.1f} ms  numpy {t_np * 1e3:8.1f} ms  "
          f"speedup {t_np / t_nb:5.1f}x  max rel diff {err:.1e}")
    t_nb, t_np, err = bench_lax(args.repeat)
    print(f"lax_rk4  16000 steps: numba {t_nb * 1e3:8.1f} ms  numpy {t_np * 1e3:8.1f} ms  "
          f"speedup {t_np / t_nb:5.1f}x  max abs diff {err:.1e}")


if __name__ == "__main__":
    main()
