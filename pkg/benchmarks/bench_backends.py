#!/usr/bin/env python3
"""Benchmark: compiled evaluation kernel vs the numpy fallback.

Times the three evaluation orders (value / gradient / Hessian) on
representative expressions over large point batches, plus one end-to-end
interpolation-kernel estimate.  Run from the repo root:

    python3 benchmarks/bench_backends.py [--quick]
"""
import argparse
import time

import numpy as np

from gaussconc import FunctionModel, parse_expression
from gaussconc.backends import compiled_available, evaluate_program
from gaussconc.config import EstimatorConfig

CASES = [
    ("softplus example", "y1 - log(1+exp(y1))", 1),
    ("two-dim concave", "-log(1 + exp(-(0.8*y1 + 0.6*y2)))", 2),
    ("mixed transcendental",
     "sin(y1^2)*tanh(y2) + erf(y1/(1+y2^2)) - logistic(y1*y2)^3 + atan(y3)", 3),
]

ORDERS = {0: "value", 1: "gradient", 2: "hessian"}


def time_backend(prog, pts, order, force, repeats):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        evaluate_program(prog, pts, order, force=force)
        best = min(best, time.perf_counter() - start)
    return best


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--quick", action="store_true",
                        help="smaller batches, fewer repeats")
    parser.add_argument("--batch", type=int, default=None)
    args = parser.parse_args()
    batch = args.batch or (100_000 if args.quick else 1_000_000)
    repeats = 2 if args.quick else 3

    if not compiled_available():
        print("compiled kernel not built; showing the pure backend only")

    rng = np.random.default_rng(0)
    print(f"batch size {batch:,} points, best of {repeats}\n")
    header = f"{'case':<22} {'order':<9} {'pure':>10} {'compiled':>10} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for name, text, dim in CASES:
        prog = FunctionModel(parse_expression(text, dim)).program
        pts = rng.normal(size=(batch, dim))
        for order, label in ORDERS.items():
            pure = time_backend(prog, pts, order, "pure", repeats)
            if compiled_available():
                comp = time_backend(prog, pts, order, "compiled", repeats)
                print(f"{name:<22} {label:<9} {pure:>9.3f}s {comp:>9.3f}s "
                      f"{pure / comp:>7.1f}x")
            else:
                print(f"{name:<22} {label:<9} {pure:>9.3f}s {'-':>10} {'-':>8}")

    # end-to-end: one interpolation-kernel estimate (quadrature path)
    from gaussconc.interpolation import stein_kernel

    model = FunctionModel(parse_expression(CASES[1][1], 2))
    cfg = EstimatorConfig()
    print()
    for force in (("pure", "compiled") if compiled_available() else ("pure",)):
        import gaussconc.backends as backends

        saved = backends._USE_COMPILED
        backends._USE_COMPILED = force == "compiled"
        try:
            start = time.perf_counter()
            est = stein_kernel(model, [0.3, -0.2], cfg)
            elapsed = time.perf_counter() - start
        finally:
            backends._USE_COMPILED = saved
        print(f"kernel estimate ({force}): {elapsed:.3f}s  "
              f"value={est.value:.10f}")


if __name__ == "__main__":
    main()
