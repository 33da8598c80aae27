"""Tour of the three basis families and their population moments.

All three map a bounded interval into a fixed number of features.  The
trigonometric family is orthogonal under the uniform design, the other two
trade that for locality.
"""

import numpy as np

from semorder.dictionary import (
    CUBIC_B_SPLINE,
    PIECEWISE_CONSTANT,
    TRIGONOMETRIC,
    Dictionary,
    basis_matrix,
    moment_matrix,
)


def describe(d: Dictionary) -> None:
    print(f"\n{d.family}, size {d.size}, domain {d.domain}")
    x = np.linspace(d.domain[0], d.domain[1], 7)
    phi = basis_matrix(d, x)
    print(f"  feature matrix on a 7-point grid: shape {phi.shape}")
    print("  row sums:", np.array2string(phi.sum(axis=1), precision=4))
    m2 = moment_matrix(d)
    eigs = np.linalg.eigvalsh(m2)
    print(f"  uniform-design second moments: eigenvalues in [{eigs[0]:.4g}, {eigs[-1]:.4g}]")
    print(f"  sup-norm envelope: {d.sup_bound:.4g}")


def main() -> None:
    describe(Dictionary(PIECEWISE_CONSTANT, 5, (0.0, 1.0)))
    describe(Dictionary(CUBIC_B_SPLINE, 8, (-2.0, 3.0)))
    describe(Dictionary(TRIGONOMETRIC, 6, (-1.0, 1.0)))

    # the spline family reproduces polynomials up to degree three exactly
    d = Dictionary(CUBIC_B_SPLINE, 8, (-2.0, 3.0))
    x = np.linspace(-2.0, 3.0, 501)
    phi = basis_matrix(d, x)
    target = x**3 - 2.0 * x
    coef, *_ = np.linalg.lstsq(phi, target, rcond=None)
    err = np.max(np.abs(phi @ coef - target))
    print(f"\ncubic reproduction error of the spline family: {err:.2e}")

    # out-of-domain inputs clamp to the boundary instead of extrapolating
    wild = basis_matrix(d, np.array([-50.0, 50.0]))
    edge = basis_matrix(d, np.array([-2.0, 3.0]))
    print(f"clamping matches the boundary rows: {np.array_equal(wild, edge)}")


if __name__ == "__main__":
    main()
