#!/usr/bin/env python3
"""Benchmark the event-loop kernel: compiled vs pure-python backend.

Runs the same scenarios through both backends, asserts the outputs are
bit-identical, and prints a timing table. Compilation (or cache load)
happens in a warmup pass so the timed numbers measure steady state.

Usage:
    python benchmarks/bench_kernel.py [--repeat N]
"""
import argparse
import time

import numpy as np

from hetpipe.allocator import default_pipeline_plan
from hetpipe.engine_model import calibrate, default_measurements, default_orin_catalog
from hetpipe.pipeline_sim import Scenario, SourceSpec
from hetpipe.pipeline_sim.core import build_stage_tables, run_kernel

CASES = (
    ("fdfn_gpu 1x650 realtime", "fdfn_gpu", 1, "realtime"),
    ("fdfn_gpu 1x650 saturated", "fdfn_gpu", 1, "saturated"),
    ("fdfn_dla 2x650 realtime", "fdfn_dla", 2, "realtime"),
    ("fdfn_dla 2x650 saturated", "fdfn_dla", 2, "saturated"),
    ("fd_dla_fn_gpu 8x650 saturated", "fd_dla_fn_gpu", 8, "saturated"),
)


def outputs_equal(a, b) -> bool:
    return (
        np.array_equal(a.release_t, b.release_t)
        and np.array_equal(a.comp_t, b.comp_t)
        and np.array_equal(a.busy_work, b.busy_work)
        and np.array_equal(a.busy_intv, b.busy_intv)
        and a.completed == b.completed
    )


def time_backend(tables, horizon, mode, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = run_kernel(tables, horizon, mode)
        best = min(best, time.perf_counter() - t0)
    return out, best


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5, help="timed repetitions per case")
    args = ap.parse_args()

    cat = default_orin_catalog(cost_params=calibrate(default_measurements()))
    prepared = []
    for label, scheme, streams, pacing in CASES:
        plan = default_pipeline_plan(scheme, cat)
        sc = Scenario(sources=tuple(SourceSpec() for _ in range(streams)),
                      plan=plan, catalog=cat, pacing=pacing)
        prepared.append((label, build_stage_tables(sc), sc.horizon_s))

    # Warmup triggers JIT compilation / cache load outside the timed region.
    t0 = time.perf_counter()
    run_kernel(prepared[0][1], prepared[0][2], "numba")
    print("numba warmup (compile or cache load): %.2f s" % (time.perf_counter() - t0))
    print()
    print("%-30s %12s %12s %9s  %s" % ("case", "python (ms)", "numba (ms)", "speedup", "identical"))

    worst = 0.0
    for label, tables, horizon in prepared:
        py, t_py = time_backend(tables, horizon, "python", args.repeat)
        nb, t_nb = time_backend(tables, horizon, "numba", args.repeat)
        same = outputs_equal(py, nb)
        assert same, "backend outputs diverge for %s" % label
        speed = t_py / t_nb
        worst = max(worst, t_nb)
        print("%-30s %12.2f %12.2f %8.1fx  %s"
              % (label, t_py * 1e3, t_nb * 1e3, speed, same))

    print()
    print("all cases bit-identical across backends")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
