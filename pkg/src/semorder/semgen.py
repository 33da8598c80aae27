"""Nonlinear Gaussian structural equations models: specification and sampling.

A model is a DAG over p variables given by a generating order and a map of
edges to 1-d functions; each variable is the sum of its parents' edge
functions plus independent centered Gaussian noise.  The module also
estimates, by a large oracle sample, the population residual variances a
regression class attains under an arbitrary ordering, and from those the
identifiability gap separating the true orders from all others.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from itertools import permutations

import numpy as np

from ._rng import derived_rng
from .dictionary import Dictionary, basis_matrix
from .errors import CapacityError, UsageError
from .regress import ClassSpec, fit_l1, fit_span

SAMPLE_BLOCK = 4096

__all__ = [
    "EdgeFunction",
    "SemSpec",
    "DataMatrix",
    "PopulationSigmas",
    "GapReport",
    "sample",
    "topological_orders",
    "population_sigma",
    "identifiability_gap",
    "SAMPLE_BLOCK",
]

_EDGE_KINDS = ("sine", "cubic", "tanh", "linear", "dictionary-combination")


@dataclass(frozen=True)
class EdgeFunction:
    """A 1-d edge function of one of five parametric kinds.

    sine(amplitude, frequency), cubic(scale), tanh(scale), linear(slope), or
    a fixed linear combination of dictionary basis functions.  All kinds are
    finite on the whole real line; the dictionary combination is bounded by
    the l1 norm of its coefficients.
    """

    kind: str
    params: tuple[float, ...] = ()
    dictionary: Dictionary | None = None
    coefficients: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind not in _EDGE_KINDS:
            raise UsageError(f"unknown edge kind {self.kind!r}; expected one of {_EDGE_KINDS}")
        object.__setattr__(self, "params", tuple(float(v) for v in self.params))
        if self.kind == "dictionary-combination":
            if self.dictionary is None or self.coefficients is None:
                raise UsageError("dictionary-combination needs a dictionary and coefficients")
            coefs = tuple(float(v) for v in self.coefficients)
            if len(coefs) != self.dictionary.size:
                raise UsageError(
                    f"coefficient count {len(coefs)} does not match dictionary size {self.dictionary.size}"
                )
            object.__setattr__(self, "coefficients", coefs)
        else:
            if self.dictionary is not None or self.coefficients is not None:
                raise UsageError(f"{self.kind} takes scalar params only")
            want = 2 if self.kind == "sine" else 1
            if len(self.params) != want:
                raise UsageError(f"{self.kind} takes {want} parameter(s), got {len(self.params)}")
        for v in self.params:
            if not math.isfinite(v):
                raise UsageError(f"edge parameters must be finite, got {self.params!r}")

    @classmethod
    def sine(cls, amplitude: float, frequency: float) -> "EdgeFunction":
        return cls("sine", (amplitude, frequency))

    @classmethod
    def cubic(cls, scale: float) -> "EdgeFunction":
        return cls("cubic", (scale,))

    @classmethod
    def tanh(cls, scale: float) -> "EdgeFunction":
        return cls("tanh", (scale,))

    @classmethod
    def linear(cls, slope: float) -> "EdgeFunction":
        return cls("linear", (slope,))

    @classmethod
    def dictionary_combination(cls, dictionary: Dictionary, coefficients) -> "EdgeFunction":
        return cls("dictionary-combination", (), dictionary, tuple(coefficients))

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        if self.kind == "sine":
            amp, freq = self.params
            return amp * np.sin(freq * x)
        if self.kind == "cubic":
            return self.params[0] * x**3
        if self.kind == "tanh":
            return np.tanh(self.params[0] * x)
        if self.kind == "linear":
            return self.params[0] * x
        return basis_matrix(self.dictionary, x) @ np.asarray(self.coefficients)

    def to_config(self) -> dict:
        if self.kind == "dictionary-combination":
            return {
                "kind": self.kind,
                "params": {
                    "dictionary": self.dictionary.to_config(),
                    "coefficients": list(self.coefficients),
                },
            }
        return {"kind": self.kind, "params": list(self.params)}

    @classmethod
    def from_config(cls, cfg: dict) -> "EdgeFunction":
        try:
            kind = str(cfg["kind"])
            params = cfg.get("params", [])
        except (KeyError, TypeError) as exc:
            raise UsageError(f"edge config needs a kind, got {cfg!r}") from exc
        if kind == "dictionary-combination":
            if not isinstance(params, dict):
                raise UsageError("dictionary-combination params must hold dictionary and coefficients")
            return cls.dictionary_combination(
                Dictionary.from_config(params["dictionary"]), params["coefficients"]
            )
        if not isinstance(params, (list, tuple)):
            raise UsageError(f"edge params must be a list, got {params!r}")
        return cls(kind, tuple(params))


@dataclass(frozen=True)
class SemSpec:
    """Structure of a nonlinear Gaussian SEM.

    `order` is the generating permutation (0-based variable indices), `edges`
    maps (source, target) pairs to edge functions where every source must
    strictly precede its target in the order, and `noise_sd` gives the
    positive noise standard deviation of each variable.
    """

    p: int
    order: tuple[int, ...]
    edges: dict[tuple[int, int], EdgeFunction]
    noise_sd: tuple[float, ...]

    def __post_init__(self):
        if self.p < 1:
            raise UsageError(f"p must be at least 1, got {self.p}")
        order = tuple(int(v) for v in self.order)
        if sorted(order) != list(range(self.p)):
            raise UsageError(f"order must be a permutation of 0..{self.p - 1}, got {order!r}")
        object.__setattr__(self, "order", order)
        sds = tuple(float(s) for s in self.noise_sd)
        if len(sds) != self.p or any(not (s > 0) for s in sds):
            raise UsageError(f"noise_sd must be {self.p} positive reals, got {self.noise_sd!r}")
        object.__setattr__(self, "noise_sd", sds)
        pos = {v: i for i, v in enumerate(order)}
        edges = {}
        for (k, j), fn in self.edges.items():
            k, j = int(k), int(j)
            # error messages name edges 1-based, matching the config convention
            if not (0 <= k < self.p and 0 <= j < self.p) or k == j:
                raise UsageError(f"edge {k + 1}->{j + 1} is out of range or a self-loop")
            if pos[k] >= pos[j]:
                raise UsageError(f"edge {k + 1}->{j + 1} violates the generating order (cycle)")
            if not isinstance(fn, EdgeFunction):
                raise UsageError(f"edge {k + 1}->{j + 1} must map to an EdgeFunction")
            edges[(k, j)] = fn
        object.__setattr__(self, "edges", edges)

    def parents(self, j: int) -> list[int]:
        return sorted(k for (k, t) in self.edges if t == j)

    def to_json(self) -> dict:
        return {
            "p": self.p,
            "order": [v + 1 for v in self.order],
            "edges": [
                {"from": k + 1, "to": j + 1, **fn.to_config()}
                for (k, j), fn in sorted(self.edges.items())
            ],
            "noise_sd": list(self.noise_sd),
        }

    @classmethod
    def from_json(cls, cfg: dict) -> "SemSpec":
        try:
            p = int(cfg["p"])
            order = [int(v) - 1 for v in cfg["order"]]
            noise_sd = cfg["noise_sd"]
            edge_list = cfg.get("edges", [])
        except (KeyError, TypeError, ValueError) as exc:
            raise UsageError(f"sem config needs p/order/noise_sd, got {cfg!r}") from exc
        edges = {}
        for e in edge_list:
            try:
                key = (int(e["from"]) - 1, int(e["to"]) - 1)
            except (KeyError, TypeError, ValueError) as exc:
                raise UsageError(f"edge entry needs from/to, got {e!r}") from exc
            edges[key] = EdgeFunction.from_config(e)
        return cls(p=p, order=tuple(order), edges=edges, noise_sd=tuple(noise_sd))


@dataclass
class DataMatrix:
    """An n x p matrix of observations with optional generation metadata."""

    values: np.ndarray
    seed: int | tuple | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or self.values.shape[0] < 1 or self.values.shape[1] < 1:
            raise UsageError(f"data must be a nonempty 2-d matrix, got shape {self.values.shape}")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow([f"x{j + 1}" for j in range(self.p)])
            for row in self.values:
                writer.writerow([format(v, ".17g") for v in row])

    @classmethod
    def from_csv(cls, path) -> "DataMatrix":
        with open(path, "r", newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise UsageError(f"{path}: empty file") from None
            expected = [f"x{j + 1}" for j in range(len(header))]
            if header != expected:
                raise UsageError(f"{path}: header must be x1..x{len(header)}, got {header!r}")
            try:
                rows = [[float(v) for v in row] for row in reader if row]
            except ValueError as exc:
                raise UsageError(f"{path}: non-numeric cell ({exc})") from exc
        if not rows:
            raise UsageError(f"{path}: no data rows")
        return cls(values=np.array(rows, dtype=np.float64))


def sample(spec: SemSpec, n: int, seed) -> DataMatrix:
    """Draw n iid rows from the model.

    Rows are generated in the model order: each variable is the sum of its
    parents' edge functions plus fresh N(0, sd^2) noise.  The noise tensor is
    drawn in fixed-size row blocks, each from its own counter-based stream
    derived from (seed, block index), so output is bit-identical for the same
    (spec, n, seed) regardless of scheduling and blocks could be filled in
    parallel.
    """
    if n < 1:
        raise UsageError(f"n must be at least 1, got {n}")
    p = spec.p
    eps = np.empty((n, p))
    for b, start in enumerate(range(0, n, SAMPLE_BLOCK)):
        stop = min(start + SAMPLE_BLOCK, n)
        eps[start:stop] = derived_rng(seed, b).standard_normal((stop - start, p))
    x = np.empty((n, p))
    by_target: dict[int, list[tuple[int, EdgeFunction]]] = {}
    for (k, j), fn in spec.edges.items():
        by_target.setdefault(j, []).append((k, fn))
    for pos, j in enumerate(spec.order):
        col = spec.noise_sd[j] * eps[:, pos]
        for k, fn in sorted(by_target.get(j, []), key=lambda t: t[0]):
            col = col + fn(x[:, k])
        x[:, j] = col
    return DataMatrix(values=x, seed=seed)


def topological_orders(spec: SemSpec) -> set[tuple[int, ...]]:
    """All permutations in which every edge's source precedes its target."""
    if spec.p > 10:
        raise CapacityError(f"topological order enumeration is limited to p <= 10, got p={spec.p}")
    parents_mask = [0] * spec.p
    for (k, j) in spec.edges:
        parents_mask[j] |= 1 << k
    out: set[tuple[int, ...]] = set()
    order: list[int] = []

    def extend(done_mask: int):
        if len(order) == spec.p:
            out.add(tuple(order))
            return
        for v in range(spec.p):
            if done_mask & (1 << v):
                continue
            if parents_mask[v] & ~done_mask:
                continue
            order.append(v)
            extend(done_mask | (1 << v))
            order.pop()

    extend(0)
    return out


@dataclass
class PopulationSigmas:
    """Estimated residual variances along one ordering, with degeneracy flags."""

    values: np.ndarray
    degenerate: tuple[bool, ...]
    order: tuple[int, ...]


def _class_fit_columns(columns, y, class_spec: ClassSpec):
    """Fit y on the dictionary expansion of the given columns (shared helper)."""
    n = y.shape[0]
    parts = ([np.ones((n, 1))] if class_spec.intercept else []) + [
        basis_matrix(class_spec.dictionary, c) for c in columns
    ]
    if not parts:
        # no intercept and no predictors: the residual is y itself
        return fit_span(np.zeros((n, 0)), y)
    design = np.hstack(parts)
    if class_spec.kind == "l1" and columns:
        return fit_l1(design, y, class_spec.total_budget(len(columns)), intercept=class_spec.intercept)
    return fit_span(design, y)


def _sigma_along_order(data: np.ndarray, pi, class_spec: ClassSpec, cache: dict):
    values = np.empty(len(pi))
    flags = []
    for pos, v in enumerate(pi):
        key = (v, frozenset(pi[:pos]))
        if key not in cache:
            cols = [data[:, k] for k in sorted(pi[:pos])]
            fit = _class_fit_columns(cols, data[:, v], class_spec)
            cache[key] = (fit.residual_variance, fit.degenerate)
        values[pos], flag = cache[key]
        flags.append(flag)
    return values, tuple(flags)


def population_sigma(
    spec: SemSpec,
    pi,
    class_spec: ClassSpec,
    oracle_n: int = 200_000,
    seed: int = 0,
) -> PopulationSigmas:
    """Residual variances of the class regressions along an ordering.

    Position j regresses the j-th variable of `pi` on all earlier ones over a
    fresh oracle sample of size `oracle_n`; the first position gets the empty
    predictor set.  Values approximate the population quantities at
    Monte-Carlo accuracy O(oracle_n^-1/2).  Rank-deficient designs fall back
    to minimum-norm fits and are flagged.
    """
    pi = tuple(int(v) for v in pi)
    if sorted(pi) != list(range(spec.p)):
        raise UsageError(f"pi must be a permutation of 0..{spec.p - 1}, got {pi!r}")
    min_n = 10 * spec.p * class_spec.dictionary.size
    if oracle_n < min_n:
        raise UsageError(f"oracle_n={oracle_n} too small; need at least 10*p*N = {min_n}")
    data = sample(spec, oracle_n, seed).values
    values, flags = _sigma_along_order(data, pi, class_spec, {})
    return PopulationSigmas(values=values, degenerate=flags, order=pi)


@dataclass
class GapReport:
    """Identifiability gap with the per-permutation score table behind it."""

    gap: float
    order: tuple[int, ...]
    rows: list[dict] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "gap": self.gap,
            "order": [v + 1 for v in self.order],
            "table": [
                {
                    "permutation": [v + 1 for v in r["permutation"]],
                    "mean_log_sd_ratio": r["mean_log_sd_ratio"],
                    "topological": r["topological"],
                }
                for r in self.rows
            ],
        }


def identifiability_gap(
    spec: SemSpec,
    class_spec: ClassSpec,
    oracle_n: int = 200_000,
    seed: int = 0,
    return_table: bool = False,
):
    """Smallest mean log residual-sd ratio separating wrong orders from true ones.

    For each permutation pi the score is ``(1/p) sum_j log(sigma_j(pi) /
    sigma_j(order))`` with both sides estimated by :func:`population_sigma`
    on one shared oracle sample.  The gap is the minimum over permutations
    that are not topological orders of the DAG; +inf when every permutation
    is topological (nothing to separate).  Estimates share the oracle sample,
    so the gap carries Monte-Carlo error of order oracle_n^-1/2.

    With ``return_table=True`` returns a :class:`GapReport` carrying scores
    for all permutations (topological ones included, for near-tie
    inspection).
    """
    if spec.p > 8:
        raise CapacityError(f"identifiability gap enumerates all p! permutations; p={spec.p} > 8")
    min_n = 10 * spec.p * class_spec.dictionary.size
    if oracle_n < min_n:
        raise UsageError(f"oracle_n={oracle_n} too small; need at least 10*p*N = {min_n}")
    pi0_set = topological_orders(spec)
    data = sample(spec, oracle_n, seed).values
    cache: dict = {}
    base, _ = _sigma_along_order(data, spec.order, class_spec, cache)
    base_by_var = {v: base[i] for i, v in enumerate(spec.order)}
    gap = float("inf")
    rows = []
    for pi in permutations(range(spec.p)):
        in_pi0 = pi in pi0_set
        if in_pi0 and not return_table:
            continue
        values, _ = _sigma_along_order(data, pi, class_spec, cache)
        # log sd ratio = half the log variance ratio, matched per variable
        score = 0.0
        for pos, v in enumerate(pi):
            score += 0.5 * (math.log(values[pos]) - math.log(base_by_var[v]))
        score /= spec.p
        rows.append({"permutation": pi, "mean_log_sd_ratio": score, "topological": in_pi0})
        if not in_pi0:
            gap = min(gap, score)
    rows.sort(key=lambda r: r["mean_log_sd_ratio"])
    if return_table:
        return GapReport(gap=gap, order=spec.order, rows=rows)
    return gap
