#!/usr/bin/env python3
"""Benchmark the compiled kernels against the numpy fallback.

Times each kernel on synthetic columns at a chosen scale, then an
end-to-end pass over every view payload with each backend forced in a
subprocess (the backend is chosen at import time).

    python3 benchmarks/bench_kernels.py --n 1000000
    python3 benchmarks/bench_kernels.py --views        # end-to-end comparison
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def best_of(fn, repeats=5):
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def bench_kernels(n: int, repeats: int) -> None:
    from clfbox._kernels import available_backends

    backends = available_backends()
    rng = np.random.default_rng(0)
    mask = (rng.random(n) < 0.4).astype(np.uint8)
    codes = rng.integers(0, 144, size=n).astype(np.int32)
    values = rng.normal(0, 1, size=n)
    actual = rng.integers(0, 12, size=n).astype(np.int32)
    pred = rng.integers(0, 12, size=n).astype(np.int32)
    words = backends["numpy"].pack_mask(mask)
    other = backends["numpy"].pack_mask((rng.random(n) < 0.5).astype(np.uint8))

    cases = {
        "pack_mask": lambda k: k.pack_mask(mask),
        "popcount": lambda k: k.popcount(words),
        "popcount_and": lambda k: k.popcount_and(words, other),
        "members": lambda k: k.members(words, n),
        "filter_eq": lambda k: k.filter_eq(codes, 7, n),
        "filter_range": lambda k: k.filter_range(values, -0.5, 0.5, False, n),
        "masked_bincount": lambda k: k.masked_bincount(codes, words, 144, n),
        "confusion_counts": lambda k: k.confusion_counts(actual, pred, words, 12, n),
    }

    names = sorted(backends)
    print(f"kernel benchmark, n={n:,} ({', '.join(names)})")
    header = f"{'kernel':<18}" + "".join(f"{b:>12}" for b in names)
    if len(names) == 2:
        header += f"{'speedup':>10}"
    print(header)
    for case, fn in cases.items():
        row = f"{case:<18}"
        per_backend = {}
        for backend in names:
            impl = backends[backend]
            seconds = best_of(lambda: fn(impl), repeats)
            per_backend[backend] = seconds
            row += f"{seconds * 1000:>10.2f}ms"
        if len(names) == 2:
            row += f"{per_backend['numpy'] / per_backend['native']:>9.1f}x"
        print(row)


def bench_views(n: int) -> None:
    """Run the view pass in a subprocess per backend (import-time selection)."""
    for backend in ("numpy", "native"):
        env = dict(os.environ, CLFBOX_KERNELS=backend)
        out = subprocess.run(
            [sys.executable, __file__, "--n", str(n), "--views-single"],
            env=env,
            capture_output=True,
            text=True,
        )
        if out.returncode != 0:
            print(f"{backend}: failed\n{out.stderr}")
            continue
        print(f"-- backend: {backend}")
        print(out.stdout, end="")


def bench_views_single(n: int) -> None:
    import tempfile

    from clfbox import views
    from clfbox._kernels import BACKEND
    from clfbox.dataset import load_dataset
    from clfbox.query import parse
    from clfbox.selection import SelectionState
    from clfbox.synth import generate

    with tempfile.TemporaryDirectory() as tmp:
        manifest = generate(tmp, n=n, m=12, l=12, n_features=10, seed=1)
        ds = load_dataset(manifest)
        ds.precompute()
        st = SelectionState(ds)
        st.set_slot("first", parse("correct(clf00)"))
        st.set_slot("second", parse("incorrect(clf01)"))
        calls = {
            "classifier_performance": lambda: views.classifier_performance(ds, st),
            "histogram": lambda: views.histogram(ds, st, feature="num00"),
            "cumulative_accuracy": lambda: views.cumulative_accuracy(ds, st),
            "confusion_grid": lambda: views.confusion_grid(ds, st),
            "pairwise_consensus": lambda: views.pairwise_consensus(ds, st),
            "per_class_performance": lambda: views.per_class_performance(ds, st),
            "metrics": lambda: views.metrics_table(ds, st),
            "instance_list": lambda: views.instance_list(ds, st),
        }
        results = {}
        for name, call in calls.items():
            call()
            results[name] = best_of(call, repeats=3)
        for name, seconds in results.items():
            print(f"{name:<24} {seconds * 1000:>8.2f}ms  [{BACKEND}]")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=1_000_000)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--views", action="store_true", help="end-to-end view comparison")
    parser.add_argument("--views-single", action="store_true", help=argparse.SUPPRESS)
    args = parser.parse_args()
    if args.views_single:
        bench_views_single(args.n)
    elif args.views:
        bench_views(args.n)
    else:
        bench_kernels(args.n, args.repeats)


if __name__ == "__main__":
    main()
