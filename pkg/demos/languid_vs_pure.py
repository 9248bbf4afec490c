"""Languid vs. standard inertia on one benchmark function.

Runs LDIW-PSO with and without the languid inertia policy on the same
function for a handful of seeds and prints the mean final error of each arm
together with the Welch/Wilcoxon comparison.

    python3 demos/languid_vs_pure.py [FUNCTION_ID] [DIM]
"""

import sys

import numpy as np

from languidpso import VariantSpec, build_suite, compare_pair, mean_error, optimize_many


def main(fid: str = "F4", D: int = 10, runs: int = 15, eval_max: int = 20_000) -> None:
    f = {g.id: g for g in build_suite(D)}[fid]
    seeds = np.arange(runs)
    errors = {}
    for languid in (False, True):
        spec = VariantSpec("ldiw", languid=languid, n=30, w0=0.7, c=1.0)
        results = optimize_many(spec, f.evaluate, D, eval_max, seeds=[np.random.default_rng(s + 1000 * languid) for s in seeds])
        errors[languid] = mean_error([r.best_f for r in results], f.f_star)
        label = "languid " if languid else "standard"
        print(f"{label}: mean error {errors[languid].mean:.6g}  (median {np.median(errors[languid].values):.6g})")
    cmp = compare_pair(errors[False], errors[True], function=fid)
    print(f"alpha = {cmp.alpha:+.4f}  winner = {cmp.H1}  test = {cmp.test}  p = {cmp.p}")


if __name__ == "__main__":
    args = sys.argv[1:]
    main(args[0] if args else "F4", int(args[1]) if len(args) > 1 else 10)
