"""Compiled vs pure-Python kernels on the hot loops.

    python3 benchmarks/bench_kernels.py [--repeat 3] [--json out.json]

Both backends are imported directly, so this runs regardless of which one
``bvfix._backend`` selected.  Results are checked for equality before timing
is reported.
"""
import argparse
import json
import sys
import time

import numpy as np

from bvfix import _fallback

try:
    from bvfix import _kernels
except ImportError:  # pragma: no cover - depends on the build
    _kernels = None

EPS = 1e-12


def _matrix(rng, n):
    A = np.triu(rng.uniform(0.1, 5.0, (n, n)), 1)
    return np.ascontiguousarray(A + A.T)


def _best(fn, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def cases(rng):
    for n, v in [(10, 1), (14, 2), (16, 3)]:
        D = _matrix(rng, n)
        yield f"axiom_scan n={n} v={v}", "axiom_scan", (D, v, EPS)
    n, v = 20, 3
    D = _matrix(rng, n)
    total = n * (n - 1) // 2 * _fallback.perm_count(n - 2, v)
    idx = np.sort(rng.choice(total, 50_000, replace=False)).astype(np.int64)
    yield f"axiom_scan_indices n={n} v={v} k=50000", "axiom_scan_indices", (D, v, idx, EPS)
    m = 800
    D, DS = _matrix(rng, m), _matrix(rng, m) * 0.3
    R = rng.uniform(0, 1, m)
    yield f"banach_scan m={m}", "banach_scan", (D, DS, EPS)
    yield f"kannan_scan m={m}", "kannan_scan", (DS, R, EPS)
    yield f"weak_scan m={m}", "weak_scan", (D, DS, D * D / (1 + D), EPS)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--json", help="also write results here")
    args = ap.parse_args(argv)
    if _kernels is None:
        print("compiled kernels not built; run `pip install -e . --no-build-isolation`", file=sys.stderr)
        return 1

    rows = []
    print(f"{'kernel':42s} {'python [s]':>11s} {'compiled [s]':>13s} {'speedup':>9s}")
    for label, name, fargs in cases(np.random.default_rng(args.seed)):
        tp, rp = _best(lambda: getattr(_fallback, name)(*fargs), args.repeat)
        tc, rc = _best(lambda: getattr(_kernels, name)(*fargs), args.repeat)
        norm = lambda r: tuple(tuple(x) if isinstance(x, (tuple, list)) else x for x in r)  # noqa: E731
        if norm(rp) != norm(rc):
            raise SystemExit(f"{label}: backends disagree: {rp} vs {rc}")
        rows.append({"kernel": label, "python_s": tp, "compiled_s": tc, "speedup": tp / tc})
        print(f"{label:42s} {tp:11.4f} {tc:13.5f} {tp / tc:8.0f}x")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
