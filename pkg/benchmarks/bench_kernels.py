"""Time the compiled Gibbs kernels against the interpreted twins.

The same kernel source runs as a C extension and as plain Python; draws
are bit-identical, so this is a pure speed comparison. Run as

    python3 benchmarks/bench_kernels.py [--iterations N]
"""

import argparse
import importlib.util
import time
from pathlib import Path

import numpy as np

import ordanova
from ordanova import ChainConfig, PriorSpec
from ordanova.designs import (
    SimulationTruth,
    make_latin_square,
    make_nested_design,
    simulate_latin,
    simulate_nested,
)
import ordanova.hierarchical as hierarchical
import ordanova.samplers as samplers


def load_interpreted():
    source = Path(ordanova.__file__).parent / "_kernels.py"
    spec = importlib.util.spec_from_file_location(
        "ordanova_kernels_interpreted", source
    )
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


def best_of(repeats, fn):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--iterations", type=int, default=20_000,
                        help="Gibbs sweeps per chain (default 20000)")
    parser.add_argument("--repeats", type=int, default=3,
                        help="repetitions, best time kept (default 3)")
    args = parser.parse_args()

    compiled = samplers._kernels
    if not compiled.is_compiled():
        parser.error("the installed backend is not compiled; build the "
                     "extension first")
    interpreted = load_interpreted()

    oneway_data = simulate_latin(
        make_latin_square(5, seed=1),
        SimulationTruth(grand_mean=0.0,
                        effect_sds={"row": 0.5, "col": 0.5, "treatment": 2.0},
                        residual_sd=1.0),
        seed=2,
    )
    nested_data = simulate_nested(
        make_nested_design(n_machines=20, n_groups=4, n_measures=6),
        SimulationTruth(grand_mean=5.0,
                        effect_sds={"treatment": 2.0, "machine": 1.0},
                        residual_sd=0.5),
        seed=3,
    )
    cfg = ChainConfig(iterations=args.iterations,
                      burn_in=args.iterations // 5, seed=0)

    cases = [
        ("one-way conjugate chain",
         lambda: samplers.gibbs_oneway(oneway_data, PriorSpec(), cfg)),
        ("latin-square chain",
         lambda: hierarchical.gibbs_latin(oneway_data, config=cfg)),
        ("three-level chain",
         lambda: hierarchical.gibbs_three_level(nested_data, config=cfg)),
    ]

    print(f"{args.iterations} sweeps per chain, best of {args.repeats}\n")
    print(f"{'kernel':<26}{'compiled':>10}{'interpreted':>13}{'speedup':>9}")
    for name, run in cases:
        samplers._kernels = compiled
        hierarchical._kernels = compiled
        t_fast = best_of(args.repeats, run)
        samplers._kernels = interpreted
        hierarchical._kernels = interpreted
        t_slow = best_of(args.repeats, run)
        samplers._kernels = compiled
        hierarchical._kernels = compiled
        print(f"{name:<26}{t_fast:>9.3f}s{t_slow:>12.3f}s"
              f"{t_slow / t_fast:>8.1f}x")


if __name__ == "__main__":
    main()
