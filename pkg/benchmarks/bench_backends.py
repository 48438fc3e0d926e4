"""Time the compiled run loop against the pure-Python fallback.

    python3 benchmarks/bench_backends.py [--runs 5] [--N 1000]

Prints per-replication wall time for each backend and policy, the speedup,
and the largest absolute difference between the two traces.
"""

from __future__ import annotations

import argparse
import time
from dataclasses import replace

import numpy as np

from hiresim import MarketConfig, backend, run_single

CASES = [
    ("LF", "none", 0.0),
    ("UCB", "ucb_index", 0.0),
    ("Hybrid", "cost_saving", 0.0),
    ("Rooney", "none", 1.0),
]


def _time(cfg, policy, subsidy, runs, which):
    backend.force(which)
    traces = []
    t0 = time.perf_counter()
    for i in range(runs):
        traces.append(run_single(cfg, policy, subsidy, i))
    return (time.perf_counter() - t0) / runs, traces


def _maxdiff(a, b) -> float:
    worst = 0.0
    for k, v in a.__dict__.items():
        w = b.__dict__[k]
        if v is None:
            continue
        worst = max(worst, float(np.max(np.abs(np.asarray(v, float) - np.asarray(w, float)))))
    return worst


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--runs", type=int, default=5)
    ap.add_argument("--N", type=int, default=1000)
    args = ap.parse_args()
    if not backend.available():
        raise SystemExit("compiled backend not built; run `pip install -e . --no-build-isolation`")

    print(f"{'policy':<10} {'subsidy':<12} {'compiled ms':>12} {'python ms':>10} {'speedup':>8} {'max |diff|':>11}")
    for policy, subsidy, sigma_eta in CASES:
        cfg = replace(MarketConfig(), N=args.N, sigma_eta=sigma_eta)
        tc, a = _time(cfg, policy, subsidy, args.runs, "compiled")
        tp, b = _time(cfg, policy, subsidy, args.runs, "python")
        diff = max(_maxdiff(x, y) for x, y in zip(a, b))
        print(f"{policy:<10} {subsidy:<12} {tc * 1e3:12.2f} {tp * 1e3:10.1f} {tp / tc:8.1f} {diff:11.3g}")
    backend.force(None)


if __name__ == "__main__":
    main()
