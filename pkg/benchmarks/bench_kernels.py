#!/usr/bin/env python3
"""Compare the compiled trial kernel against its pure-Python twin.

Verifies the two produce bit-identical draw counts, then times a
representative grid cell with each.  Run from the repository root:

    python benchmarks/bench_kernels.py [--trials N]
"""
import argparse
import time

import numpy as np

from markaudit import _kernels_py
from markaudit.engine import TestSettings
from markaudit.simkit import ErrorModel, _kernel_args, trial_seed_sequences

try:
    from markaudit import _kernels
except ImportError:
    _kernels = None


def run(impl, args, seqs):
    bgs = [np.random.PCG64(s) for s in seqs]
    t0 = time.perf_counter()
    out = impl.simulate_trials(*args, bgs)
    return out, time.perf_counter() - t0


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--trials", type=int, default=5000)
    opts = parser.parse_args()

    model = ErrorModel.symmetric(margin=0.01, p_m=0.5)
    args = _kernel_args(model, "bayesian", TestSettings())
    seqs = trial_seed_sequences(7, (0,), opts.trials)

    py_out, py_time = run(_kernels_py, args, seqs)
    print(f"pure python : {opts.trials} trials in {py_time:8.3f}s "
          f"(mean draws {py_out.mean():.1f})")

    if _kernels is None:
        print("compiled    : extension not built (pip install -e . builds it)")
        return

    cy_out, cy_time = run(_kernels, args, seqs)
    print(f"compiled    : {opts.trials} trials in {cy_time:8.3f}s "
          f"(mean draws {cy_out.mean():.1f})")
    identical = np.array_equal(py_out, cy_out)
    print(f"bit-identical results: {identical}")
    if not identical:
        raise SystemExit("kernel implementations disagree")
    print(f"speedup     : {py_time / cy_time:.1f}x")


if __name__ == "__main__":
    main()
