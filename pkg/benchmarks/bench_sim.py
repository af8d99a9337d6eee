"""Compare the compiled and numpy program runners on bit-parallel simulation.

    python benchmarks/bench_sim.py [--vectors N] [--repeat R]
"""
import argparse
import timeit

import numpy as np

from sfqmap import simcore
from sfqmap.driver import RunConfig, gen_array_multiplier, gen_ripple_adder, run_pipeline
from sfqmap.verify import compile_program, random_words, run

try:
    from sfqmap import _simcore
except ImportError:
    _simcore = None


def workloads():
    for name, net in (("adder64", gen_ripple_adder(64)),
                      ("mult8", gen_array_multiplier(8)),
                      ("mult16", gen_array_multiplier(16))):
        design = run_pipeline(RunConfig(name=name, verify="random:64"), net).design
        yield f"{name} (untimed)", compile_program(design.net)
        yield f"{name} (timed)", compile_program(design.net, design)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--vectors", type=int, default=1 << 16)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if _simcore is None:
        print("compiled kernel not built; only the numpy runner is available")
    print(f"active backend: {simcore.BACKEND}; {args.vectors} vectors, best of {args.repeat}")
    print(f"{'workload':<22}{'rows':>7}{'numpy ms':>11}{'cython ms':>11}{'speedup':>9}")
    for name, prog in workloads():
        npi = len(prog.pi_rows)
        words, _ = random_words(npi, args.vectors, 1)
        t_py = min(timeit.repeat(lambda: run(prog, words, simcore.run_program_py),
                                 number=1, repeat=args.repeat))
        if _simcore is not None:
            a = run(prog, words, _simcore.run_program)
            b = run(prog, words, simcore.run_program_py)
            assert np.array_equal(a, b), "kernels disagree"
            t_cy = min(timeit.repeat(lambda: run(prog, words, _simcore.run_program),
                                     number=1, repeat=args.repeat))
            print(f"{name:<22}{len(prog.code):>7}{t_py * 1e3:>11.2f}"
                  f"{t_cy * 1e3:>11.2f}{t_py / t_cy:>8.1f}x")
        else:
            print(f"{name:<22}{len(prog.code):>7}{t_py * 1e3:>11.2f}{'-':>11}{'-':>9}")


if __name__ == "__main__":
    main()
