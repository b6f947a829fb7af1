"""Compare the numba kernels against the pure-numpy fallback.

Run twice to see both paths:

    python benchmarks/bench_kernels.py
    TORUSCONJ_NO_NUMBA=1 python benchmarks/bench_kernels.py

or rely on the built-in side-by-side timing below (it calls both
implementations directly, regardless of the dispatch flag).
"""

import time

import numpy as np

from torusconj import parse_spec
from torusconj import _kernels, dynamics

SPEC = parse_spec(
    "dim=2\n"
    "M=[[2,1],[0,1]]\n"
    "G[1]=0.03*sin(2*pi*(z1+z2))+0.01*cos(2*pi*(2*z1-z2))\n"
    "G[2]=0.03*cos(2*pi*(z2))+0.01*sin(2*pi*(z1+3*z2))\n")


def timeit(fn, *args, repeat=5):
    fn(*args)                       # warm-up (JIT compile, caches)
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ta = dynamics.term_arrays(SPEC)
    Mf = dynamics.M_array(SPEC)
    rng = np.random.default_rng(0)

    print(f"numba available: {_kernels.HAVE_NUMBA}   "
          f"dispatch uses numba: {_kernels.USE_NUMBA}")
    print(f"{'kernel':<24}{'n':>10}{'numpy':>12}{'numba':>12}{'speedup':>10}")

    for n in (1_000, 100_000):
        Z = rng.uniform(-2, 2, size=(n, 2))
        t_np = timeit(_kernels.eval_trig_numpy, Z, ta.comps, ta.coefs,
                      ta.kinds, ta.freqs, 2)
        if _kernels.HAVE_NUMBA:
            t_nb = timeit(_kernels.eval_trig_numba, Z, ta.comps, ta.coefs,
                          ta.kinds, ta.freqs, 2)
            print(f"{'eval_trig':<24}{n:>10}{t_np:>12.2e}{t_nb:>12.2e}"
                  f"{t_np / t_nb:>10.2f}")
        else:
            print(f"{'eval_trig':<24}{n:>10}{t_np:>12.2e}{'-':>12}{'-':>10}")

    for n, steps in ((1_000, 40), (20_000, 40)):
        theta = rng.uniform(0, 1, size=(n, 2))
        t_np = timeit(_kernels.orbit_g_values_numpy, theta, Mf, ta.comps,
                      ta.coefs, ta.kinds, ta.freqs, steps)
        if _kernels.HAVE_NUMBA:
            t_nb = timeit(_kernels.orbit_g_values_numba, theta, Mf, ta.comps,
                          ta.coefs, ta.kinds, ta.freqs, steps)
            print(f"{'orbit_g_values(N=40)':<24}{n:>10}{t_np:>12.2e}"
                  f"{t_nb:>12.2e}{t_np / t_nb:>10.2f}")
        else:
            print(f"{'orbit_g_values(N=40)':<24}{n:>10}{t_np:>12.2e}"
                  f"{'-':>12}{'-':>10}")


if __name__ == "__main__":
    main()
