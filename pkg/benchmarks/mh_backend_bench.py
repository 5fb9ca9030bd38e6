"""Benchmark: compiled vs pure-Python Metropolis-Hastings sweep kernel.

Times both implementations on a synthetic latent-probability chain and
checks that they produce bit-identical states.  Run from the repository
root:

    python3 benchmarks/mh_backend_bench.py [--n 60] [--t 10] [--sweeps 400]
"""

import argparse
import time

import numpy as np

from binarygp import backend


def build_problem(n, seed):
    rng = np.random.default_rng(seed)
    x = rng.random((n, 2))
    dists = ((x[:, None, :] - x[None, :, :]) ** 2).sum(axis=2)
    r = np.exp(-dists / 0.5) + 1e-8 * np.eye(n)
    q = np.ascontiguousarray(np.linalg.inv(r))
    mu = rng.normal(size=n)
    y = rng.integers(0, 2, n).astype(np.int8)
    return q, mu, y


def run(impl, q, mu, y, sweeps, t_blocks, seed):
    n = mu.size
    total = 0
    state = []
    for b in range(t_blocks):
        gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, b))))
        eta = mu.copy()
        qd = np.zeros(n)
        total += impl.run_sweeps(
            q, mu, y, eta, qd, 0.8,
            gen.standard_normal((sweeps, n)), gen.random((sweeps, n)),
        )
        state.append(eta.copy())
    return total, np.concatenate(state)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=60, help="sites per time block")
    parser.add_argument("--t", type=int, default=10, help="time blocks")
    parser.add_argument("--sweeps", type=int, default=400, help="sweeps per block")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    q, mu, y = build_problem(args.n, args.seed)
    updates = args.n * args.sweeps * args.t
    results = {}
    for name in ("python", "cython"):
        try:
            impl = backend.get_impl(name)
        except ImportError:
            print(f"{name:>7}: extension not built, skipping")
            continue
        start = time.perf_counter()
        accepted, state = run(impl, q, mu, y, args.sweeps, args.t, args.seed)
        elapsed = time.perf_counter() - start
        results[name] = (elapsed, state, accepted)
        print(
            f"{name:>7}: {elapsed:8.3f} s  "
            f"({updates / elapsed / 1e6:7.2f} M updates/s, "
            f"acceptance {accepted / updates:.3f})"
        )
    if len(results) == 2:
        py, cy = results["python"], results["cython"]
        identical = np.array_equal(py[1], cy[1]) and py[2] == cy[2]
        print(f"speedup: {py[0] / cy[0]:.1f}x   bit-identical states: {identical}")
        if not identical:
            raise SystemExit("backends disagree")


if __name__ == "__main__":
    main()
