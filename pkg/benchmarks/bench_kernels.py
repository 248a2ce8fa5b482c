"""Time the compiled walk/skip-gram kernels against their plain Python versions.

    python benchmarks/bench_kernels.py [--nodes 300] [--repeat 3]

Both versions get the same pre-drawn random numbers, so the script also
checks that their outputs agree.
"""

import argparse
import time

import numpy as np

from metacascade._jit import NUMBA_ENABLED, python_impl
from metacascade.embed import _sgns_batch, _walk_kernel, csr_from_edges, noise_distribution, WalkCorpus


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        tic = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - tic)
    return min(times), out


def random_graph(n, avg_degree, rng):
    m = n * avg_degree // 2
    e = rng.integers(0, n, size=(m, 2))
    e = e[e[:, 0] != e[:, 1]]
    # star edges keep it connected, like a retweet cascade
    star = np.column_stack([np.zeros(n - 1, dtype=np.int64), np.arange(1, n)])
    return csr_from_edges(n, np.vstack([star, e]).tolist())


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--nodes", type=int, default=300)
    ap.add_argument("--walks-per-node", type=int, default=10)
    ap.add_argument("--walk-length", type=int, default=80)
    ap.add_argument("--dim", type=int, default=128)
    ap.add_argument("--batch", type=int, default=16, help="walks per skip-gram batch")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    n, indptr, indices = random_graph(args.nodes, 4, rng)
    starts = np.repeat(np.arange(n), args.walks_per_node).astype(np.int64)
    u = rng.random((starts.size, args.walk_length - 1))

    # warm-up triggers compilation (or loads the on-disk cache)
    _walk_kernel(indptr, indices, starts[:2], u[:2], args.walk_length)
    t_fast, (walks, lengths) = best_of(lambda: _walk_kernel(indptr, indices, starts, u, args.walk_length),
                                       args.repeat)
    t_slow, (walks2, _) = best_of(
        lambda: python_impl(_walk_kernel)(indptr, indices, starts, u, args.walk_length), args.repeat)
    assert np.array_equal(walks, walks2)

    window, neg = 5, 5
    batch = min(args.batch, walks.shape[0])
    reduced = rng.integers(1, window + 1, size=(batch, args.walk_length))
    cdf = np.cumsum(noise_distribution(WalkCorpus(walks, lengths, n)))
    negs = np.minimum(np.searchsorted(cdf, rng.random((batch, args.walk_length, 2 * window, neg)),
                                      side="right"), n - 1)
    w0 = rng.uniform(-0.5 / args.dim, 0.5 / args.dim, size=(n, args.dim))

    def sgns(kernel):
        w_in, w_out = w0.copy(), np.zeros_like(w0)
        loss, pairs, _ = kernel(walks[:batch], lengths[:batch], w_in, w_out, reduced, negs, window,
                                0.025, 1e-6, 0, batch * args.walk_length)
        return loss, pairs, w_in

    sgns(_sgns_batch)
    s_fast, r_fast = best_of(lambda: sgns(_sgns_batch), args.repeat)
    s_slow, r_slow = best_of(lambda: sgns(python_impl(_sgns_batch)), 1)
    assert r_fast[1] == r_slow[1] and np.allclose(r_fast[2], r_slow[2], rtol=1e-10, atol=1e-14)

    label = "numba" if NUMBA_ENABLED else "python (numba disabled)"
    print(f"graph: {n} nodes, {indices.size // 2} edges; dim={args.dim}")
    print(f"{'kernel':<12} {label:>24} {'python':>10} {'speedup':>8}")
    print(f"{'walks':<12} {t_fast:>23.4f}s {t_slow:>9.4f}s {t_slow / t_fast:>7.1f}x")
    print(f"{'sgns batch':<12} {s_fast:>23.4f}s {s_slow:>9.4f}s {s_slow / s_fast:>7.1f}x"
          f"  ({r_fast[1]} pairs)")


if __name__ == "__main__":
    main()
