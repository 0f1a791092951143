"""Compiled kernels against the pure-Python fallback.

Run with ``python3 benchmarks/bench_kernels.py [--quick]``.  Each workload
is timed with :mod:`timeit` on both backends, the outputs are compared, and
a table of best-of-repeat times and speedups is printed.

The workloads mirror the hot loops of the package: resolvent powers for
the flow doubling scheme (up to 2^24 steps per flow time), distances and
geodesics for certificates, and the Jacobi eigensolver and Karcher
iteration behind SPD resolvents.
"""

from __future__ import annotations

import argparse
import sys
import timeit

import numpy as np

from proxcat import _pykernels

try:
    from proxcat import _ckernels
except ImportError:  # pragma: no cover - extension not built
    _ckernels = None


def spd(rng, n):
    G = rng.standard_normal((n, n))
    return G @ G.T + n * np.eye(n)


def workloads(quick: bool):
    rng = np.random.default_rng(0)
    power = 2 ** (14 if quick else 20)
    x2, a2 = rng.standard_normal(2), rng.standard_normal(2)
    anchors = rng.standard_normal((5, 3))
    weights = rng.uniform(0.5, 2.0, 5)
    h1 = np.array([np.sqrt(1.0 + 0.25 + 0.04), 0.5, 0.2])
    h2 = np.array([np.sqrt(1.0 + 1.0 + 0.81), -1.0, 0.9])
    A2, B2 = spd(rng, 2), spd(rng, 2)
    A3, B3 = spd(rng, 3), spd(rng, 3)
    S5 = spd(rng, 5)
    kanchors = np.stack([spd(rng, 3) for _ in range(4)])
    kweights = rng.uniform(0.5, 2.0, 4)
    # name, callable(kernels) -> result, inner repetitions[, agreement rtol]
    return [
        (f"euclid_sqdist_power n=2^{int(np.log2(power))}",
         lambda k: k.euclid_sqdist_power(x2, a2, 1.0 / power, power), 1),
        (f"euclid_sqsum_power n=2^{int(np.log2(power)) - 2}",
         lambda k: k.euclid_sqsum_power(anchors[0], anchors, weights, 1.0 / power, power // 4), 1),
        ("euclid_dist", lambda k: k.euclid_dist(x2, a2), 2000),
        ("hyp_dist", lambda k: k.hyp_dist(h1, h2), 2000),
        ("hyp_geodesic", lambda k: k.hyp_geodesic(h1, h2, 0.3), 2000),
        ("spd_dist 2x2", lambda k: k.spd_dist(A2, B2), 500),
        ("spd_dist 3x3", lambda k: k.spd_dist(A3, B3), 500),
        ("spd_geodesic 3x3", lambda k: k.spd_geodesic(A3, B3, 0.4), 500),
        ("jacobi_eigh 5x5", lambda k: k.jacobi_eigh(S5), 200),
        # both stop once the gradient is below 1e-12, not at the same iterate
        ("spd_karcher 3x3, 4 anchors",
         lambda k: k.spd_karcher(kanchors[0], kanchors, kweights, 1e-12, 200)[0], 5, 1e-9),
    ]


def agree(a, b, rtol=1e-10) -> bool:
    if isinstance(a, tuple):
        return all(agree(x, y, rtol) for x, y in zip(a, b))
    return bool(np.allclose(np.asarray(a, dtype=float), np.asarray(b, dtype=float),
                            rtol=rtol, atol=1e-12))


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--quick", action="store_true", help="smaller resolvent powers")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if _ckernels is None:
        print("compiled extension not available; only the fallback can run", file=sys.stderr)
        return 1
    print(f"{'workload':40s} {'cython':>12s} {'python':>12s} {'speedup':>9s}  agree")
    ok = True
    for name, fn, number, *rtol in workloads(args.quick):
        same = agree(fn(_ckernels), fn(_pykernels), *rtol)
        ok &= same
        tc = min(timeit.repeat(lambda: fn(_ckernels), number=number, repeat=args.repeat)) / number
        tp = min(timeit.repeat(lambda: fn(_pykernels), number=number, repeat=args.repeat)) / number
        print(f"{name:40s} {tc * 1e6:10.1f}us {tp * 1e6:10.1f}us {tp / tc:8.1f}x  {same}")
    return 0 if ok else 2


if __name__ == "__main__":
    sys.exit(main())
