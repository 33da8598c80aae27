"""Draw data from two small structural models and measure their gaps.

The gap is the mean log residual-variance margin separating the best
wrong-order regression from the generating order.  A linear chain with equal
noise variances has no margin at all; a sine chain has a solid one.
"""

import numpy as np

from semorder.dictionary import CUBIC_B_SPLINE, Dictionary
from semorder.regress import ClassSpec
from semorder.semgen import EdgeFunction, SemSpec, identifiability_gap, sample


def show(name: str, spec: SemSpec, cs: ClassSpec, oracle_n: int) -> None:
    data = sample(spec, 5, seed=0)
    print(f"\n{name}: p={spec.p}, first rows of a draw:")
    print(np.array2string(data.values, precision=3))
    rep = identifiability_gap(spec, cs, oracle_n=oracle_n, seed=1, return_table=True)
    print(f"gap estimate: {rep.gap:.5f}")
    print("permutation table (mean log sd ratio against the generating order):")
    for row in rep.to_json()["table"]:
        tag = "topological" if row["topological"] else "           "
        print(f"  {row['permutation']}  {row['mean_log_sd_ratio']:+.5f}  {tag}")


def main() -> None:
    linear = SemSpec(
        p=2,
        order=(0, 1),
        edges={(0, 1): EdgeFunction("linear", (1.0,))},
        noise_sd=(1.0, 1.0),
    )
    show("linear equal-variance chain", linear,
         ClassSpec(Dictionary(CUBIC_B_SPLINE, 6, (-12.0, 12.0))), oracle_n=100_000)

    sine = SemSpec(
        p=3,
        order=(0, 1, 2),
        edges={
            (0, 1): EdgeFunction("sine", (2.0, 1.5)),
            (1, 2): EdgeFunction("sine", (2.0, 1.5)),
        },
        noise_sd=(1.0, 0.3, 0.3),
    )
    show("sine chain", sine,
         ClassSpec(Dictionary(CUBIC_B_SPLINE, 6, (-5.0, 5.0))), oracle_n=60_000)

    print("\nthe linear gap sits at Monte-Carlo noise level; the sine gap does not")


if __name__ == "__main__":
    main()
