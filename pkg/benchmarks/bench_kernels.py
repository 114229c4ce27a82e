#!/usr/bin/env python3
"""Benchmark the compiled group-by kernels against the numpy fallback, plus the
end-to-end materialized-view vs full-scan query latency on a synthetic store.

Run: python benchmarks/bench_kernels.py [--rows 1000000] [--repeat 5]
"""

from __future__ import annotations

import argparse
import statistics
import time

import numpy as np

from starcube import kernels
from starcube.cube import GroupBySpec
from starcube.kernels import fallback
from starcube.mview import MViewDef
from starcube.query import query_from_doc
from starcube.testsupport import bulk_synthetic_engine


def bench(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times) * 1000.0


def bench_kernels(rows: int, repeat: int) -> None:
    rng = np.random.default_rng(7)
    print(f"\n== sum_by_key over {rows:,} rows (median of {repeat}) ==")
    for name, bound in [("dense (2k groups)", 2_000), ("hashed (50M key space)", 50_000_000)]:
        keys = rng.integers(0, min(bound, 2_000), rows).astype(np.int64)
        if bound > 2_000:
            keys = keys * 25_000 + rng.integers(0, 3, rows)  # sparse keys, big bound
        values = rng.integers(-10**9, 10**9, rows).astype(np.int64)
        t_fb = bench(lambda: fallback.sum_by_key(keys, values, bound), repeat)
        line = f"{name:<24} fallback {t_fb:8.2f} ms"
        if kernels.HAVE_NATIVE:
            from starcube.kernels import _native

            t_nat = bench(lambda: _native.sum_by_key(keys, values, bound), repeat)
            line += f"   native {t_nat:8.2f} ms   speedup {t_fb / t_nat:5.1f}x"
        print(line)
    if not kernels.HAVE_NATIVE:
        print("(compiled extension not available; showing fallback only)")


def bench_query_paths(rows: int, repeat: int) -> None:
    print(f"\n== mview vs scan: sum(montant) by regime,prestation,office over {rows:,} facts ==")
    engine = bulk_synthetic_engine(seed=42, facts=rows)
    engine.mviews.define(
        MViewDef(
            name="MvtRegPresBr",
            spec=GroupBySpec.from_levels(
                engine.schema,
                {"regime": "regime", "prestation": "prestation", "office": "office"},
            ),
            measures=(("sum", "montant"),),
        )
    )
    engine.refresh_views()
    query = query_from_doc(engine.schema, {
        "group_by": {"regime": "regime", "prestation": "prestation", "office": "office"},
    })
    t_view = bench(lambda: engine.execute(query, force="mview"), repeat)
    t_scan = bench(lambda: engine.execute(query, force="scan"), repeat)
    print(f"kernel path: {kernels.ACTIVE}")
    print(f"mview  {t_view:8.2f} ms")
    print(f"scan   {t_scan:8.2f} ms")
    print(f"speedup {t_scan / t_view:5.1f}x")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--rows", type=int, default=1_000_000)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    print(f"kernel implementation active: {kernels.ACTIVE}")
    bench_kernels(args.rows, args.repeat)
    bench_query_paths(args.rows, args.repeat)


if __name__ == "__main__":
    main()
