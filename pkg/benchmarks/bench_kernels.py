"""Compiled kernels vs the numpy fallback on Besov-sized inputs.

    python benchmarks/bench_kernels.py [--n 400] [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from hyperfill import _pykernels

try:
    from hyperfill import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def inputs(n, seed=0):
    rng = np.random.default_rng(seed)
    x = np.sort(rng.uniform(0, 1, n))
    dist = np.abs(x[:, None] - x[None, :])
    mass = rng.uniform(0.5, 1.5, n)
    i, j = np.triu_indices(n, 1)
    w = rng.uniform(0.1, 1.0, i.size)
    u = rng.standard_normal(n)
    return dist, mass, i.astype(np.int64), j.astype(np.int64), w, u


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=400)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--p", type=float, default=1.5)
    args = ap.parse_args()
    dist, mass, i, j, w, u = inputs(args.n)
    cases = {
        "pair_energy": lambda m: m.pair_energy(i, j, w, u, args.p),
        "pair_energy_grad": lambda m: m.pair_energy_grad(i, j, w, u, args.p),
        "open_ball_masses": lambda m: m.open_ball_masses(dist, mass),
    }
    print(f"n={args.n} pairs={i.size} p={args.p}")
    print(f"{'kernel':<18}{'numpy ms':>10}{'cython ms':>11}{'speedup':>9}")
    for name, call in cases.items():
        t_py = min(timeit.repeat(lambda: call(_pykernels), number=1, repeat=args.repeat)) * 1e3
        if _ckernels is None:
            print(f"{name:<18}{t_py:>10.2f}{'n/a':>11}{'':>9}")
            continue
        ref, got = call(_pykernels), call(_ckernels)
        for a, b in zip(np.atleast_1d(ref) if not isinstance(ref, tuple) else ref,
                        np.atleast_1d(got) if not isinstance(got, tuple) else got):
            np.testing.assert_allclose(a, b, rtol=1e-9)
        t_c = min(timeit.repeat(lambda: call(_ckernels), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:<18}{t_py:>10.2f}{t_c:>11.2f}{t_py / t_c:>8.1f}x")


if __name__ == "__main__":
    main()
