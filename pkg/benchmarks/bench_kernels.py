"""Numba vs numpy timings for the hot kernels.

    python benchmarks/bench_kernels.py [--repeat 5]

Each kernel is warmed up once (JIT compile excluded) and then timed with
timeit; the table reports the best mean over ``repeat`` runs.
"""
import argparse
import timeit

import numpy as np

from irsbeam import _accel, kernels, su_phase as su
from irsbeam.channel import cn, phasor_table


def cases():
    rng = np.random.default_rng(0)
    n, m = 64, 8
    q = su.build_quadratic(cn(rng, (n, m)), cn(rng, n), cn(rng, m))
    lv = np.zeros(n, dtype=np.int64)
    tab = phasor_table(1)
    trace = np.empty(1 + 100 * n)
    yield ("su_sweeps N=64 b=1", kernels.su_sweeps_py, kernels.su_sweeps_jit,
           lambda f: f(q.a, q.h_hat, q.constant, lv.copy(), tab, 1e-4, 100, trace))
    u0 = np.ones(n, dtype=complex)
    yield ("cont_sweeps N=64", kernels.cont_sweeps_py, kernels.cont_sweeps_jit,
           lambda f: f(q.a, q.h_hat, q.constant, u0.copy(), 1e-4, 100, trace))

    n_b = 16
    qb = su.build_quadratic(cn(rng, (n_b, 4)), cn(rng, n_b), cn(rng, 4))
    base = float(np.real(np.trace(qb.a))) + qb.constant
    warm = su.successive_refinement(qb, su.PhaseVector.zeros(n_b, 1))
    yield ("bnb_search N=16 b=1", kernels.bnb_search_py, kernels.bnb_search_jit,
           lambda f: f(qb.a, qb.h_hat, phasor_table(1), warm.theta.levels.copy(),
                       warm.objective, base, 10**7))

    amp = np.abs(cn(rng, (2000, 200)))
    err = rng.uniform(-np.pi / 2, np.pi / 2, (2000, 200))
    yield ("cascade_power 2000x200", kernels.cascade_power_py, kernels.cascade_power_jit,
           lambda f: f(amp, err))

    k, mm = 4, 6
    hc = cn(rng, (k, mm))
    sigma2, gamma = np.full(k, 1.0), np.full(k, 10.0)
    lam0 = gamma * sigma2 / np.sum(np.abs(hc) ** 2, axis=1)
    yield ("mmse_fixed_point K=4 M=6", kernels.mmse_fixed_point_py, kernels.mmse_fixed_point_jit,
           lambda f: f(hc, sigma2, gamma, lam0.copy(), 1e-10, 500))


def bench(call, fn, repeat):
    call(fn)                                  # warm-up / compile
    timer = timeit.Timer(lambda: call(fn))
    number, _ = timer.autorange()
    return min(timer.repeat(repeat, number)) / number


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if not _accel.NUMBA_AVAILABLE:
        raise SystemExit("numba is not installed; nothing to compare")
    print(f"{'kernel':<28}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>10}")
    for name, f_py, f_jit, call in cases():
        t_py = bench(call, f_py, args.repeat)
        t_jit = bench(call, f_jit, args.repeat)
        print(f"{name:<28}{t_py * 1e3:>12.3f}{t_jit * 1e3:>12.3f}{t_py / t_jit:>9.1f}x")


if __name__ == "__main__":
    main()
