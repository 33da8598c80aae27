"""Least-squares regression onto dictionary spans, with optional l1 budgets.

Two estimators over the same additive design:

* :func:`fit_span` solves unpenalized least squares (minimum-norm under rank
  deficiency);
* :func:`fit_l1` minimizes the same objective subject to an l1 budget on the
  non-intercept coefficients, by projected gradient descent with backtracking,
  and certifies the result with an explicit KKT residual.

:func:`misspec_experiment` measures convergence of the fitted coefficients to
the population projection when the true regression function lies outside the
class.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import empproc
from ._linalg import min_norm_lstsq, pinv_solve_psd, project_l1
from ._rng import derived_rng
from .dictionary import Dictionary, basis_matrix, design_matrix
from .errors import CapacityError, UsageError

SPAN = "span"
L1 = "l1"

__all__ = [
    "ClassSpec",
    "FitResult",
    "ProjectionResult",
    "MisspecTruth",
    "MisspecReport",
    "fit_span",
    "fit_l1",
    "kkt_residual",
    "population_projection",
    "fit_over_subsets",
    "misspec_experiment",
    "SPAN",
    "L1",
]


@dataclass(frozen=True)
class ClassSpec:
    """A regression class: dictionary expansion plus fitting rule.

    ``kind`` is ``"span"`` (plain least squares over the additive span) or
    ``"l1"`` (same span, coefficients constrained to an l1 budget).  For l1
    classes ``budget`` is the per-block budget; the total budget scales with
    the number of input columns.  ``intercept`` adds an unpenalized constant.
    """

    dictionary: Dictionary
    kind: str = SPAN
    budget: float | None = None
    intercept: bool = True

    def __post_init__(self):
        if self.kind not in (SPAN, L1):
            raise UsageError(f"class kind must be 'span' or 'l1', got {self.kind!r}")
        if self.kind == L1:
            if self.budget is None or not (float(self.budget) > 0):
                raise UsageError("l1 class needs a positive budget")
            object.__setattr__(self, "budget", float(self.budget))
        elif self.budget is not None:
            raise UsageError("span class takes no budget")

    def design(self, columns, n_rows: int | None = None) -> np.ndarray:
        return design_matrix(self.dictionary, columns, intercept=self.intercept, n_rows=n_rows)

    def total_budget(self, n_blocks: int) -> float:
        if self.kind != L1:
            raise UsageError("total_budget is only defined for l1 classes")
        return self.budget * n_blocks

    def fit(self, columns, y, n_rows: int | None = None) -> "FitResult":
        """Fit the class regression of `y` on the given input columns."""
        y = np.asarray(y, dtype=np.float64).ravel()
        x = self.design(columns, n_rows=n_rows if n_rows is not None else y.shape[0])
        if self.kind == SPAN or len(columns) == 0:
            return fit_span(x, y)
        return fit_l1(x, y, self.total_budget(len(columns)), intercept=self.intercept)

    def to_config(self) -> dict:
        cfg = {"dictionary": self.dictionary.to_config(), "kind": self.kind, "intercept": self.intercept}
        if self.kind == L1:
            cfg["budget"] = self.budget
        return cfg

    @classmethod
    def from_config(cls, cfg: dict) -> "ClassSpec":
        try:
            dcfg = cfg["dictionary"]
        except (KeyError, TypeError) as exc:
            raise UsageError(f"class config needs a dictionary entry, got {cfg!r}") from exc
        return cls(
            dictionary=Dictionary.from_config(dcfg),
            kind=str(cfg.get("kind", SPAN)),
            budget=cfg.get("budget"),
            intercept=bool(cfg.get("intercept", True)),
        )


@dataclass
class FitResult:
    """Outcome of one least-squares fit."""

    coefficients: np.ndarray
    residual_variance: float
    kind: str
    degenerate: bool = False
    converged: bool = True
    kkt_residual: float | None = None
    budget: float | None = None
    intercept: bool = False
    n_obs: int = 0


@dataclass
class ProjectionResult:
    """Population least-squares projection coefficients."""

    coefficients: np.ndarray
    degenerate: bool = False


def fit_span(x: np.ndarray, y: np.ndarray) -> FitResult:
    """Ordinary least squares; minimum-norm coefficients if rank-deficient.

    The residual variance is the mean squared residual (no degrees-of-freedom
    correction).  Rank deficiency is reported through ``degenerate``.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape[0] < 1:
        raise UsageError("need at least one observation")
    beta, degenerate = min_norm_lstsq(x, y)
    resid = y - x @ beta
    rv = float(resid @ resid) / x.shape[0]
    return FitResult(
        coefficients=beta,
        residual_variance=rv,
        kind=SPAN,
        degenerate=degenerate,
        n_obs=x.shape[0],
    )


def _split_penalized(v: np.ndarray, intercept: bool) -> np.ndarray:
    return v[1:] if intercept else v


def kkt_residual(x: np.ndarray, y: np.ndarray, beta: np.ndarray, budget: float, intercept: bool = False) -> float:
    """Stationarity residual for the l1-constrained least-squares problem.

    For an interior iterate the residual is the sup-norm of the gradient (the
    intercept coordinate included either way).  On the boundary it measures
    how far the negative gradient is from a common multiplier ``lam =
    max_j |grad_j|`` aligned with the sign pattern on the support.  A true
    minimizer has residual 0; small residuals certify near-optimality.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    beta = np.asarray(beta, dtype=np.float64).ravel()
    n = x.shape[0]
    grad = 2.0 * (x.T @ (x @ beta - y)) / n
    return _kkt_from_gradient(grad, beta, budget, intercept)


def _kkt_from_gradient(grad: np.ndarray, beta: np.ndarray, budget: float, intercept: bool) -> float:
    g_int = abs(float(grad[0])) if intercept and grad.shape[0] else 0.0
    g_pen = _split_penalized(grad, intercept)
    b_pen = _split_penalized(beta, intercept)
    if g_pen.shape[0] == 0:
        return g_int
    used = float(np.abs(b_pen).sum())
    if used < budget - 1e-6:
        return max(g_int, float(np.max(np.abs(g_pen))))
    lam = float(np.max(np.abs(g_pen)))
    support = np.abs(b_pen) > 1e-10 * max(1.0, budget)
    if not np.any(support):
        return g_int
    align = float(np.max(np.abs(-g_pen[support] * np.sign(b_pen[support]) - lam)))
    return max(g_int, align)


def fit_l1(
    x: np.ndarray,
    y: np.ndarray,
    budget: float,
    tol: float = 1e-8,
    max_iter: int = 50000,
    intercept: bool = False,
) -> FitResult:
    """Least squares under ``sum_j |beta_j| <= budget`` (intercept exempt).

    Projected gradient descent on the precomputed second-moment form of the
    objective, with backtracking line search.  Iterations stop once the KKT
    residual from :func:`kkt_residual` drops to `tol`; hitting `max_iter`
    first returns the iterate with ``converged=False`` and a warning.

    Parameters
    ----------
    x, y : ndarray
        Design (n, d) and response (n,).  When ``intercept=True`` column 0 of
        `x` is treated as the unpenalized intercept.
    budget : float
        Nonnegative l1 budget over the penalized coordinates.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.ndim != 2 or y.shape != (x.shape[0],):
        raise UsageError(f"incompatible shapes {x.shape} and {y.shape}")
    if x.shape[0] < 1:
        raise UsageError("need at least one observation")
    if not (budget >= 0):
        raise UsageError(f"budget must be nonnegative, got {budget!r}")
    n, d = x.shape
    if d == 0:
        return FitResult(np.zeros(0), float(y @ y) / n, L1, kkt_residual=0.0, budget=budget, n_obs=n)

    a = x.T @ x / n
    b = x.T @ y / n
    y2 = float(y @ y) / n

    def obj(v: np.ndarray) -> float:
        return y2 - 2.0 * float(b @ v) + float(v @ (a @ v))

    def proj(v: np.ndarray) -> np.ndarray:
        if intercept:
            out = v.copy()
            out[1:] = project_l1(v[1:], budget)
            return out
        return project_l1(v, budget)

    lip = 2.0 * float(np.linalg.eigvalsh(a)[-1])
    if lip <= 0:
        beta = proj(np.zeros(d))
        return FitResult(beta, obj(beta), L1, kkt_residual=0.0, budget=budget, intercept=intercept, n_obs=n)

    beta = proj(min_norm_lstsq(x, y)[0])
    step = 1.0 / lip
    residual = _kkt_from_gradient(2.0 * (a @ beta - b), beta, budget, intercept)
    converged = residual <= tol
    it = 0
    while not converged and it < max_iter:
        grad = 2.0 * (a @ beta - b)
        s = min(step * 1.5, 64.0 / lip)
        f0 = obj(beta)
        while True:
            cand = proj(beta - s * grad)
            diff = cand - beta
            quad = f0 + float(grad @ diff) + float(diff @ diff) / (2.0 * s)
            if obj(cand) <= quad + 1e-15 * (1.0 + abs(quad)) or s <= 0.25 / lip:
                break
            s *= 0.5
        step = s
        beta = cand
        residual = _kkt_from_gradient(2.0 * (a @ beta - b), beta, budget, intercept)
        converged = residual <= tol
        it += 1
    if not converged:
        warnings.warn(
            f"l1 fit stopped after {max_iter} iterations with KKT residual {residual:.3e} > {tol:.1e}",
            RuntimeWarning,
            stacklevel=2,
        )
    resid = y - x @ beta
    return FitResult(
        coefficients=beta,
        residual_variance=float(resid @ resid) / n,
        kind=L1,
        converged=bool(converged),
        kkt_residual=float(residual),
        budget=float(budget),
        intercept=intercept,
        n_obs=n,
    )


def population_projection(sigma: np.ndarray, c: np.ndarray) -> ProjectionResult:
    """Coefficients of the population projection ``argmin_b b'Sigma b - 2 c'b``.

    `sigma` must be symmetric positive semidefinite; a singular system is
    solved in the minimum-norm sense and flagged.
    """
    beta, degenerate = pinv_solve_psd(sigma, np.asarray(c, dtype=np.float64).ravel())
    return ProjectionResult(coefficients=beta, degenerate=degenerate)


def fit_over_subsets(data, j: int, class_spec: ClassSpec, subsets) -> dict[tuple[int, ...], FitResult]:
    """Fit the class regression of column `j` on each subset of other columns.

    Basis expansions are computed once per distinct column and reused across
    subsets.  Keys of the returned dict are sorted index tuples.
    """
    values = np.asarray(getattr(data, "values", data), dtype=np.float64)
    if values.ndim != 2:
        raise UsageError(f"data must be a 2-d matrix, got shape {values.shape}")
    n, p = values.shape
    if not (0 <= j < p):
        raise UsageError(f"target index {j} out of range for {p} columns")
    keys = []
    for s in subsets:
        key = tuple(sorted(int(v) for v in s))
        if len(set(key)) != len(key):
            raise UsageError(f"subset {s!r} has repeated indices")
        for v in key:
            if not (0 <= v < p):
                raise UsageError(f"subset index {v} out of range for {p} columns")
            if v == j:
                raise UsageError(f"target column {j} cannot be its own predictor")
        keys.append(key)
    n_basis = class_spec.dictionary.size
    for key in keys:
        if len(key) * n_basis + 1 > n:
            raise CapacityError(
                f"subset of {len(key)} columns needs {len(key) * n_basis + 1} observations, have {n}"
            )
    blocks: dict[int, np.ndarray] = {}
    for key in keys:
        for v in key:
            if v not in blocks:
                blocks[v] = basis_matrix(class_spec.dictionary, values[:, v])
    y = values[:, j]
    out: dict[tuple[int, ...], FitResult] = {}
    for key in keys:
        if key in out:
            continue
        parts = ([np.ones((n, 1))] if class_spec.intercept else []) + [blocks[v] for v in key]
        if not parts:
            raise UsageError("empty subset with no intercept gives an empty design")
        design = np.hstack(parts)
        if class_spec.kind == L1 and len(key) > 0:
            out[key] = fit_l1(design, y, class_spec.total_budget(len(key)), intercept=class_spec.intercept)
        else:
            out[key] = fit_span(design, y)
    return out


@dataclass(frozen=True)
class MisspecTruth:
    """A true regression function: conditional mean plus Gaussian noise level."""

    mean: Callable[[np.ndarray], np.ndarray]
    noise_sd: float
    label: str = "truth"

    def __post_init__(self):
        if not (float(self.noise_sd) >= 0):
            raise UsageError(f"noise_sd must be nonnegative, got {self.noise_sd!r}")
        object.__setattr__(self, "noise_sd", float(self.noise_sd))


@dataclass
class MisspecReport:
    """Results of a misspecified-regression convergence experiment."""

    truth_label: str
    class_config: dict
    oracle_n: int
    seed: int
    beta_star: np.ndarray
    population_residual_variance: float
    k0: float
    lambda_min: float
    n_features: int
    cells: list[dict] = field(default_factory=list)
    records: list[dict] = field(default_factory=list)
    slope: float = float("nan")
    slope_stderr: float = float("nan")
    r_squared: float = float("nan")
    theoretical_exponent: float = -0.5

    def to_json(self) -> dict:
        return {
            "truth": self.truth_label,
            "class": self.class_config,
            "oracle_n": self.oracle_n,
            "seed": self.seed,
            "beta_star": [float(v) for v in self.beta_star],
            "population_residual_variance": self.population_residual_variance,
            "k0": self.k0,
            "lambda_min": self.lambda_min,
            "n_features": self.n_features,
            "cells": self.cells,
            "slope": self.slope,
            "slope_stderr": self.slope_stderr,
            "r_squared": self.r_squared,
            "theoretical_exponent": self.theoretical_exponent,
        }

    def csv_rows(self):
        header = ["n", "rep", "metric", "value"]
        rows = []
        for r in self.records:
            rows.append([r["n"], r["rep"], "coef_distance", r["coef_distance"]])
            rows.append([r["n"], r["rep"], "variance_gap", r["variance_gap"]])
        return header, rows


def misspec_experiment(
    truth: MisspecTruth,
    class_spec: ClassSpec,
    n_grid,
    reps: int,
    oracle_n: int = 200_000,
    seed: int = 0,
) -> MisspecReport:
    """Convergence of the class fit to the population projection.

    The design is uniform on the class dictionary's domain.  A large oracle
    sample pins down the population quantities: projection coefficients, the
    population residual variance, and the moment matrix used both for the
    distance metric and for the theoretical rate.  Cell ``(n, rep)`` uses the
    stream derived from ``(seed, n, rep)``; the oracle uses ``(seed,
    oracle_n, 0)``, so the cell with ``n == oracle_n``, ``rep == 0`` sees
    exactly the oracle sample.

    Per cell the report records the Sigma-weighted coefficient distance
    ``sqrt((b - b*)' Sigma (b - b*))`` and the gap between empirical and
    population residual variance; per sample size it records their mean and
    0.9 quantile plus the ratio of the mean distance to the plug-in rate from
    :func:`semorder.empproc.delta_n`.
    """
    n_grid = [int(n) for n in n_grid]
    if not n_grid or any(n < 1 for n in n_grid):
        raise UsageError(f"n_grid must contain positive integers, got {n_grid!r}")
    if reps < 1:
        raise UsageError("reps must be at least 1")
    a, b = class_spec.dictionary.domain

    def draw(rng, n):
        x = rng.uniform(a, b, n)
        y = np.asarray(truth.mean(x), dtype=np.float64) + truth.noise_sd * rng.standard_normal(n)
        return x, y

    x_o, y_o = draw(derived_rng(seed, oracle_n, 0), oracle_n)
    psi_o = class_spec.design([x_o])
    d = psi_o.shape[1]
    if oracle_n < 10 * d:
        raise UsageError(f"oracle_n={oracle_n} too small for {d} features (need >= {10 * d})")
    sigma_o = psi_o.T @ psi_o / oracle_n
    c_o = psi_o.T @ y_o / oracle_n
    proj = population_projection(sigma_o, c_o)
    beta_star = proj.coefficients
    resid_o = y_o - psi_o @ beta_star
    pop_rv = float(resid_o @ resid_o) / oracle_n
    k0 = float(np.sqrt(np.mean(y_o**2)))
    lam_min = empproc.lambda_min(sigma_o)

    report = MisspecReport(
        truth_label=truth.label,
        class_config=class_spec.to_config(),
        oracle_n=int(oracle_n),
        seed=int(seed),
        beta_star=beta_star,
        population_residual_variance=pop_rv,
        k0=k0,
        lambda_min=lam_min,
        n_features=d,
    )
    mean_dists = []
    for n in n_grid:
        dists = np.empty(reps)
        vgaps = np.empty(reps)
        for rep in range(reps):
            x, y = draw(derived_rng(seed, n, rep), n)
            fit = class_spec.fit([x], y)
            db = fit.coefficients - beta_star
            dists[rep] = float(np.sqrt(max(db @ (sigma_o @ db), 0.0)))
            vgaps[rep] = abs(fit.residual_variance - pop_rv)
            report.records.append(
                {"n": n, "rep": rep, "coef_distance": dists[rep], "variance_gap": vgaps[rep]}
            )
        dn = empproc.delta_n(k_x=class_spec.dictionary.sup_bound, k_0=k0, p=d, n=n, lam_min=lam_min)
        mean_dists.append(float(dists.mean()))
        report.cells.append(
            {
                "n": n,
                "reps": reps,
                "mean_dist": float(dists.mean()),
                "q90": float(np.quantile(dists, 0.9)),
                "mean_variance_gap": float(vgaps.mean()),
                "q90_variance_gap": float(np.quantile(vgaps, 0.9)),
                "delta_n": dn,
                "ratio_to_delta_n": float(dists.mean() / dn) if dn > 0 else float("inf"),
            }
        )
    if len(n_grid) >= 2:
        report.slope, report.slope_stderr, report.r_squared = empproc.loglog_slope(n_grid, mean_dists)
    return report
