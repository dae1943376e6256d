"""Criterion-function machinery: sample criteria, set estimators, confidence
sets under four coverage notions, projection intervals, and the by-product
specification test.

One documented bootstrap serves every coverage tag: nonparametric resampling
of recentred standardized moments with hard-threshold moment selection
(kappa_n = sqrt(log n)). Point coverage uses per-point quantiles, set
coverage the supremum-over-grid statistic's quantile from the same draws, so
the nesting chain between the estimators holds replication by replication.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .randomset import DomainError

FLAVORS = ("sum", "max")
COVERAGES = ("set-pointwise", "point-pointwise", "set-uniform-style", "point-uniform-style")


@dataclass
class Dataset:
    """Columnar observations; the empirical distribution P_n."""

    columns: dict

    def __post_init__(self):
        lens = {len(v) for v in self.columns.values()}
        if len(lens) != 1:
            raise DomainError("ragged columns")
        self.columns = {k: np.asarray(v) for k, v in self.columns.items()}

    @property
    def n(self) -> int:
        return len(next(iter(self.columns.values())))

    def __getitem__(self, key):
        return self.columns[key]


@dataclass
class MomentModel:
    """Moment (in)equality model: E m_j(w; theta) <= 0 for j in ineq and
    = 0 for j in eq, over a box parameter space.

    ``moment_fn(data, theta)`` returns the (n, J) matrix of rowwise moment
    values. ``degenerate`` asserts the degeneracy condition under which the
    estimation slack can be set to zero; it is never inferred.

    ``stats_fn(data, grid) -> (mbar, sd)`` with (k, J) outputs and
    ``resampled_means_fn(data, W, grid) -> (reps, k, J)`` are optional
    vectorized fast paths; when present they must reproduce the rowwise
    definition exactly (the test suite cross-checks them).
    """

    box: tuple
    moment_fn: Callable
    ineq: tuple[int, ...]
    eq: tuple[int, ...] = ()
    degenerate: bool = False
    stats_fn: Callable | None = None
    resampled_means_fn: Callable | None = None

    def __post_init__(self):
        if set(self.ineq) & set(self.eq):
            raise DomainError("inequality and equality indices overlap")
        if len(self.ineq) + len(self.eq) == 0:
            raise DomainError("need at least one moment")

    @property
    def dim(self) -> int:
        return len(self.box)

    @property
    def n_moments(self) -> int:
        return len(self.ineq) + len(self.eq)


@dataclass
class CriterionSpec:
    model: MomentModel
    flavor: str = "max"
    standardize: bool = True

    def __post_init__(self):
        if self.flavor not in FLAVORS:
            raise DomainError(f"flavor must be one of {FLAVORS}")


@dataclass
class EstimatorSpec:
    grid: np.ndarray | None = None
    resolution: int = 101
    tau: float | None = None  # None: default rule; model degeneracy forces 0
    bootstrap_reps: int = 200
    seed: int = 0
    alpha: float = 0.05
    coverage: str = "point-pointwise"
    method: str = "gms-hard-threshold"

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise DomainError("alpha outside (0, 1)")
        if self.bootstrap_reps < 100:
            raise DomainError("need at least 100 bootstrap replications")
        if self.coverage not in COVERAGES:
            raise DomainError(f"coverage must be one of {COVERAGES}")


@dataclass
class RegionResult:
    """Grid representation of a region: criterion values and in/out flags."""

    grid: np.ndarray
    crit: np.ndarray
    inside: np.ndarray
    meta: dict = field(default_factory=dict)

    def points(self) -> np.ndarray:
        return self.grid[self.inside]

    def is_empty(self) -> bool:
        return not bool(self.inside.any())

    def to_json(self) -> dict:
        return {
            "grid": self.grid.tolist(),
            "criterion": self.crit.tolist(),
            "inside": self.inside.astype(int).tolist(),
            "meta": self.meta,
        }

    def to_csv(self, path: str) -> None:
        from .util import write_csv

        dim = self.grid.shape[1]
        header = [f"theta{k + 1}" for k in range(dim)] + ["criterion", "inside"]
        rows = [
            [*g, c, int(i)] for g, c, i in zip(self.grid.tolist(), self.crit.tolist(), self.inside)
        ]
        write_csv(path, header, rows)


def make_grid(box: Sequence[tuple[float, float]], resolution) -> np.ndarray:
    res = [resolution] * len(box) if np.isscalar(resolution) else list(resolution)
    axes = [np.linspace(lo, hi, r) for (lo, hi), r in zip(box, res)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([m.ravel() for m in mesh])


def _grid_for(spec: CriterionSpec, est: EstimatorSpec) -> np.ndarray:
    if est.grid is not None:
        g = np.atleast_2d(np.asarray(est.grid, dtype=float))
        if g.shape[0] == 1 and spec.model.dim == 1 and g.shape[1] > 1:
            g = g.T
        return g
    return make_grid(spec.model.box, est.resolution)


def moment_stats(spec: CriterionSpec, data: Dataset, theta) -> tuple[np.ndarray, np.ndarray, list]:
    """Sample means and standard deviations of the moment functions."""
    m = np.asarray(spec.model.moment_fn(data, np.atleast_1d(np.asarray(theta, dtype=float))))
    if m.ndim != 2 or m.shape[0] != data.n:
        raise DomainError("moment_fn must return an (n, J) matrix")
    mbar = m.mean(axis=0)
    sd = m.std(axis=0)
    flags = []
    if spec.standardize and np.any(sd == 0):
        flags.append("zero-variance-moment-unstandardized")
    return mbar, sd, flags


def _standardizer(spec: CriterionSpec, sd: np.ndarray) -> np.ndarray:
    if not spec.standardize:
        return np.ones_like(sd)
    return np.where(sd > 0, sd, 1.0)


def q_sample(spec: CriterionSpec, data: Dataset, theta) -> float:
    """Sample criterion q_n(theta) >= 0; zero iff all standardized
    inequality violations are <= 0 and equalities hold."""
    if data.n == 0:
        raise DomainError("empty data")
    mbar, sd, _ = moment_stats(spec, data, theta)
    z = mbar / _standardizer(spec, sd)
    ineq = np.asarray(spec.model.ineq, dtype=int)
    eq = np.asarray(spec.model.eq, dtype=int)
    if spec.flavor == "sum":
        val = float(np.sum(np.maximum(z[ineq], 0.0) ** 2)) if len(ineq) else 0.0
        val += float(np.sum(z[eq] ** 2)) if len(eq) else 0.0
        return val
    parts = []
    if len(ineq):
        parts.append(np.max(np.maximum(z[ineq], 0.0)))
    if len(eq):
        parts.append(np.max(np.abs(z[eq])))
    return float(max(parts) ** 2) if parts else 0.0


def _grid_stats(spec: CriterionSpec, data: Dataset, grid: np.ndarray):
    """(mbar, sd) arrays of shape (k, J) over the grid."""
    if spec.model.stats_fn is not None:
        mbar, sd = spec.model.stats_fn(data, grid)
        return np.asarray(mbar, dtype=float), np.asarray(sd, dtype=float)
    rows = [moment_stats(spec, data, th)[:2] for th in grid]
    return np.array([r[0] for r in rows]), np.array([r[1] for r in rows])


def _aggregate(spec: CriterionSpec, z: np.ndarray) -> np.ndarray:
    """Criterion aggregation over the last axis of standardized means."""
    ineq = np.asarray(spec.model.ineq, dtype=int)
    eq = np.asarray(spec.model.eq, dtype=int)
    if spec.flavor == "sum":
        val = np.zeros(z.shape[:-1])
        if len(ineq):
            val = val + np.sum(np.maximum(z[..., ineq], 0.0) ** 2, axis=-1)
        if len(eq):
            val = val + np.sum(z[..., eq] ** 2, axis=-1)
        return val
    parts = []
    if len(ineq):
        parts.append(np.max(np.maximum(z[..., ineq], 0.0), axis=-1))
    if len(eq):
        parts.append(np.max(np.abs(z[..., eq]), axis=-1))
    return np.maximum.reduce(parts) ** 2 if parts else np.zeros(z.shape[:-1])


def q_profile(spec: CriterionSpec, data: Dataset, grid: np.ndarray) -> np.ndarray:
    if data.n == 0:
        raise DomainError("empty data")
    mbar, sd = _grid_stats(spec, data, grid)
    z = mbar / np.where(sd > 0, sd, 1.0) if spec.standardize else mbar
    return _aggregate(spec, z)


def default_tau(spec: CriterionSpec, n: int) -> float:
    if spec.model.degenerate:
        return 0.0
    return math.log(n) ** 1.5 / n


def set_estimate(spec: CriterionSpec, est: EstimatorSpec, data: Dataset) -> RegionResult:
    """Level set of the normalized criterion: {q_n <= inf q_n + tau_n}."""
    grid = _grid_for(spec, est)
    q = q_profile(spec, data, grid)
    tau = default_tau(spec, data.n) if est.tau is None else est.tau
    norm = q - q.min()
    inside = norm <= tau
    return RegionResult(grid, q, inside, meta={"tau": tau, "n": data.n, "kind": "set-estimate"})


# ---------------------------------------------------------------------------
# bootstrap critical values


def _bootstrap_weights(n: int, reps: int, seed: int) -> np.ndarray:
    """Multinomial resampling counts, one deterministic substream per rep so
    results do not depend on execution order or thread count."""
    W = np.empty((reps, n), dtype=float)
    p = np.full(n, 1.0 / n)
    for r in range(reps):
        rng = np.random.default_rng(np.random.SeedSequence([seed, r]))
        W[r] = rng.multinomial(n, p)
    return W


def kappa_n(n: int) -> float:
    return math.sqrt(math.log(n))


def bootstrap_stat_matrix(
    spec: CriterionSpec, data: Dataset, grid: np.ndarray, reps: int, seed: int
) -> np.ndarray:
    """(reps, k) matrix of bootstrap statistics.

    Inequality j enters at theta only when sqrt(n) mbar_j / sd_j >= -kappa_n
    (hard-threshold moment selection); equalities always enter two-sided.
    The resampled means are recentred at the sample means.
    """
    n = data.n
    W = _bootstrap_weights(n, reps, seed)
    kap = kappa_n(n)
    k = len(grid)
    ineq = np.asarray(spec.model.ineq, dtype=int)
    eq = np.asarray(spec.model.eq, dtype=int)
    mbar, sd_raw = _grid_stats(spec, data, grid)
    sd = np.where(sd_raw > 0, sd_raw, 1.0) if spec.standardize else np.ones_like(sd_raw)
    sel = np.ones((k, mbar.shape[1]), dtype=bool)
    if len(ineq):
        sel[:, ineq] = math.sqrt(n) * mbar[:, ineq] / sd[:, ineq] >= -kap
    if spec.model.resampled_means_fn is not None:
        mb = np.asarray(spec.model.resampled_means_fn(data, W, grid))  # (reps, k, J)
        T = math.sqrt(n) * (mb - mbar[None, :, :]) / sd[None, :, :]
        T = np.where(sel[None, :, :], T, -np.inf if spec.flavor == "max" else 0.0)
        T_eq = T[..., eq] if len(eq) else None
        return _bootstrap_aggregate(spec, T, T_eq, ineq, eq, reps, k)
    out = np.zeros((reps, k))
    for t, theta in enumerate(grid):
        m = np.asarray(spec.model.moment_fn(data, np.atleast_1d(theta)))
        mb = (W @ m) / n
        T = math.sqrt(n) * (mb - mbar[t]) / sd[t]
        T = np.where(sel[t][None, :], T, -np.inf if spec.flavor == "max" else 0.0)
        if spec.flavor == "sum":
            stat = np.zeros(reps)
            if len(ineq):
                stat += np.sum(np.maximum(T[:, ineq], 0.0) ** 2, axis=1)
            if len(eq):
                stat += np.sum(T[:, eq] ** 2, axis=1)
        else:
            parts = []
            if len(ineq):
                parts.append(np.max(np.maximum(T[:, ineq], 0.0), axis=1))
            if len(eq):
                parts.append(np.max(np.abs(T[:, eq]), axis=1))
            stat = np.maximum.reduce(parts) ** 2 if parts else np.zeros(reps)
        out[:, t] = stat
    return out


def _bootstrap_aggregate(spec, T, T_eq, ineq, eq, reps, k):
    if spec.flavor == "sum":
        stat = np.zeros((reps, k))
        if len(ineq):
            stat += np.sum(np.maximum(T[..., ineq], 0.0) ** 2, axis=-1)
        if len(eq):
            stat += np.sum(T_eq**2, axis=-1)
        return stat
    parts = []
    if len(ineq):
        parts.append(np.max(np.maximum(T[..., ineq], 0.0), axis=-1))
    if len(eq):
        parts.append(np.max(np.abs(T_eq), axis=-1))
    return np.maximum.reduce(parts) ** 2 if parts else np.zeros((reps, k))


def bootstrap_critical_value(
    spec: CriterionSpec,
    data: Dataset,
    grid: np.ndarray,
    alpha: float,
    coverage: str = "point-pointwise",
    reps: int = 200,
    seed: int = 0,
) -> np.ndarray:
    """Critical values c_{1-alpha} on the grid.

    Point coverage: per-point quantile of the bootstrap statistic. Set
    coverage: the quantile of the supremum over the grid, common to all
    points. Deterministic given the seed.
    """
    stats = bootstrap_stat_matrix(spec, data, grid, reps, seed)
    if coverage.startswith("set"):
        sup = stats.max(axis=1)
        c = float(np.quantile(sup, 1 - alpha))
        return np.full(len(grid), c)
    return np.quantile(stats, 1 - alpha, axis=0)


def confidence_set(spec: CriterionSpec, est: EstimatorSpec, data: Dataset) -> RegionResult:
    """Level set {theta : n q_n(theta) <= c_{1-alpha}(theta)}."""
    grid = _grid_for(spec, est)
    q = q_profile(spec, data, grid)
    c = bootstrap_critical_value(
        spec, data, grid, est.alpha, est.coverage, est.bootstrap_reps, est.seed
    )
    inside = data.n * q <= c
    _, sd = _grid_stats(spec, data, grid)
    degenerate_cells = np.where(np.any(sd == 0, axis=1))[0].tolist()
    return RegionResult(
        grid, q, inside,
        meta={
            "alpha": est.alpha, "coverage": est.coverage, "method": est.method,
            "reps": est.bootstrap_reps, "seed": est.seed, "n": data.n,
            "critical_values": c.tolist(), "kind": "confidence-set",
            "uniformity": "design target, not proven",
            "zero_variance_cells": degenerate_cells,
        },
    )


def half_median_unbiased_estimate(
    spec: CriterionSpec, est: EstimatorSpec, data: Dataset
) -> RegionResult:
    """Level set with the half-median critical value c_{1/2}: contains any
    fixed point of the identified set with asymptotic probability >= 1/2."""
    grid = _grid_for(spec, est)
    q = q_profile(spec, data, grid)
    c = bootstrap_critical_value(
        spec, data, grid, 0.5, est.coverage, est.bootstrap_reps, est.seed
    )
    inside = data.n * q <= c
    return RegionResult(
        grid, q, inside,
        meta={"alpha": 0.5, "coverage": est.coverage, "seed": est.seed,
              "kind": "half-median-unbiased"},
    )


# ---------------------------------------------------------------------------
# projections and tests


def profile_ci(
    spec: CriterionSpec,
    est: EstimatorSpec,
    data: Dataset,
    u,
    refine: bool = True,
) -> dict:
    """Profiled confidence interval for u.theta: scan s, minimize n q_n over
    the slice {u.theta = s}, accept when below the bootstrap critical value.

    The grid scan is refined by bisection on the boundary in the scalar
    case, where slices are single points.
    """
    u = np.asarray(u, dtype=float)
    grid = _grid_for(spec, est)
    s_vals = grid @ u
    q = q_profile(spec, data, grid)
    c = bootstrap_critical_value(
        spec, data, grid, est.alpha, est.coverage, est.bootstrap_reps, est.seed
    )
    stat = data.n * q
    order = np.argsort(s_vals)
    s_sorted = s_vals[order]
    # bucket grid points sharing (up to fp noise) the same projection value
    accepted = []
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and s_sorted[j + 1] - s_sorted[i] < 1e-12:
            j += 1
        idx = order[i : j + 1]
        best = np.argmin(stat[idx])
        if stat[idx][best] <= c[idx][best]:
            accepted.append(s_sorted[i])
        i = j + 1
    if not accepted:
        return {"lower": math.nan, "upper": math.nan, "empty": True}
    lo, hi = min(accepted), max(accepted)
    if refine and spec.model.dim == 1:
        lo = _refine_endpoint(spec, est, data, u, lo, -1)
        hi = _refine_endpoint(spec, est, data, u, hi, +1)
    return {"lower": lo, "upper": hi, "empty": False}


def _refine_endpoint(spec, est, data, u, s0, direction, span=None, tol=1e-9):
    """Bisection along the scalar parameter for the exact boundary of
    {s : n q_n(s/u) <= c(s/u)}."""
    u0 = float(u[0])

    def g(s):
        theta = np.array([s / u0])
        qv = data.n * q_sample(spec, data, theta)
        c = bootstrap_critical_value(
            spec, data, theta.reshape(1, 1), est.alpha, est.coverage,
            est.bootstrap_reps, est.seed,
        )[0]
        return qv - c

    lo_box, hi_box = spec.model.box[0]
    s_min, s_max = sorted((u0 * lo_box, u0 * hi_box))
    inside = s0
    step = span if span is not None else max(1e-3, 0.05 * (s_max - s_min))
    outside = inside + direction * step
    while s_min <= outside <= s_max and g(outside) <= 0:
        inside = outside
        outside = outside + direction * step
    outside = min(max(outside, s_min), s_max)
    if g(outside) <= 0:
        return outside
    a, b = inside, outside
    while abs(b - a) > tol:
        mid = 0.5 * (a + b)
        if g(mid) <= 0:
            a = mid
        else:
            b = mid
    return a


def calibrated_projection_ci(
    spec: CriterionSpec,
    est: EstimatorSpec,
    data: Dataset,
    u,
    solver: str = "grid",
    eam_budget: int = 120,
    return_logs: bool = False,
) -> dict:
    """Calibrated projection interval: endpoints are sup/inf of u.theta
    subject to sqrt(n) mbar_j / sd_j <= c_{1-alpha}(theta) for every
    inequality (equalities are split two-sided).

    ``grid`` solves exhaustively over the grid (the oracle); ``eam`` runs the
    surrogate expected-improvement search with the same constraint surface.
    """
    if solver not in ("grid", "eam"):
        raise DomainError("solver must be 'grid' or 'eam'")
    u = np.asarray(u, dtype=float)
    n = data.n

    def g_bar(theta):
        mbar, sd, _ = moment_stats(spec, data, theta)
        sdv = _standardizer(spec, sd)
        z = math.sqrt(n) * mbar / sdv
        vals = [z[j] for j in spec.model.ineq]
        vals += [abs(z[j]) for j in spec.model.eq]
        return max(vals)

    def c_fn(theta):
        return float(
            bootstrap_critical_value(
                spec, data, np.atleast_2d(theta), est.alpha, "point-pointwise",
                est.bootstrap_reps, est.seed,
            )[0]
        ) ** 0.5  # constraints live on the sqrt scale of the max statistic

    if solver == "grid":
        grid = _grid_for(spec, est)
        mbar, sd_raw = _grid_stats(spec, data, grid)
        sdv = np.where(sd_raw > 0, sd_raw, 1.0) if spec.standardize else np.ones_like(sd_raw)
        z = math.sqrt(n) * mbar / sdv
        gvals = np.max(
            np.column_stack(
                [z[:, list(spec.model.ineq)]] + ([np.abs(z[:, list(spec.model.eq)])] if spec.model.eq else [])
            ),
            axis=1,
        )
        c = np.sqrt(
            bootstrap_critical_value(
                spec, data, grid, est.alpha, "point-pointwise", est.bootstrap_reps, est.seed
            )
        )
        feasible = gvals <= c
        if not feasible.any():
            return {"lower": math.nan, "upper": math.nan, "empty": True, "calls": len(grid)}
        proj = grid[feasible] @ u
        return {
            "lower": float(proj.min()), "upper": float(proj.max()),
            "empty": False, "calls": len(grid),
        }

    from .eam import EamProblem, eam_solve

    results = {}
    calls = 0
    logs = []
    for sign, name in ((1.0, "upper"), (-1.0, "lower")):
        prob = EamProblem(
            box=spec.model.box, direction=sign * u, constraint=g_bar, critical=c_fn,
            budget=eam_budget,
        )
        res = eam_solve(prob, seed=est.seed)
        calls += res["calls"]
        logs.extend(res["log"])
        results[name] = sign * res["value"] if res["feasible"] else math.nan
    empty = math.isnan(results["lower"]) or math.isnan(results["upper"])
    out = {"lower": results["lower"], "upper": results["upper"], "empty": empty, "calls": calls}
    if return_logs:
        out["log"] = logs
    return out


def specification_test(
    spec: CriterionSpec, est: EstimatorSpec, data: Dataset
) -> dict:
    """By-product test: reject correct specification when the point-coverage
    confidence set is empty, i.e. when min over the grid of n q_n exceeds the
    critical value at the minimizer."""
    grid = _grid_for(spec, est)
    q = q_profile(spec, data, grid)
    i0 = int(np.argmin(q))
    stat = data.n * q[i0]
    c = bootstrap_critical_value(
        spec, data, grid[i0 : i0 + 1], est.alpha, "point-pointwise",
        est.bootstrap_reps, est.seed,
    )[0]
    return {"reject": bool(stat > c), "statistic": float(stat), "c": float(c),
            "argmin": grid[i0].tolist(), "alpha": est.alpha}


# ---------------------------------------------------------------------------
# stock moment models


def interval_mean_model(lo: float = -2.0, hi: float = 3.0, degenerate: bool = True) -> MomentModel:
    """Interval-identified mean: E yL <= theta <= E yU.

    The criterion vanishes on the whole sample interval, which is the
    degenerate case: the estimation slack can be set to zero. The moments are
    affine in theta, which the vectorized fast paths exploit.
    """

    def moments(data: Dataset, theta):
        t = float(theta[0])
        return np.column_stack([data["yl"] - t, t - data["yu"]])

    def stats(data: Dataset, grid):
        t = np.asarray(grid, dtype=float).reshape(-1)
        mbar = np.column_stack([data["yl"].mean() - t, t - data["yu"].mean()])
        sd = np.column_stack([np.full(len(t), data["yl"].std()), np.full(len(t), data["yu"].std())])
        return mbar, sd

    def resampled(data: Dataset, W, grid):
        t = np.asarray(grid, dtype=float).reshape(-1)
        n = data.n
        wl = (W @ data["yl"]) / n  # (reps,)
        wu = (W @ data["yu"]) / n
        m1 = wl[:, None] - t[None, :]
        m2 = t[None, :] - wu[:, None]
        return np.stack([m1, m2], axis=-1)

    return MomentModel(
        box=((lo, hi),), moment_fn=moments, ineq=(0, 1), degenerate=degenerate,
        stats_fn=stats, resampled_means_fn=resampled,
    )


def intersection_bounds_model(
    y0: float, y1: float, arm, z_values: Sequence, box: tuple[tuple[float, float], ...]
) -> MomentModel:
    """Mean-independence intersection bounds for one treatment arm: per
    instrument cell z, L_z <= theta <= U_z in rowwise moment form."""

    def rows(data: Dataset):
        y, s, z = data["y"], data["s"], data["z"]
        treated = (s == arm).astype(float)
        obs = np.where(s == arm, y, 0.0)
        low = obs * treated + y0 * (1 - treated)
        up = obs * treated + y1 * (1 - treated)
        a_cols, b_cols = [], []
        for zv in z_values:
            in_z = (z == zv).astype(float)
            pz = max(in_z.mean(), 1e-12)
            a_cols += [in_z * low / pz, -in_z * up / pz]
            b_cols += [-in_z / pz, in_z / pz]
        return np.column_stack(a_cols), np.column_stack(b_cols)

    def moments(data: Dataset, theta):
        a, b = rows(data)
        return a + float(theta[0]) * b

    def stats(data: Dataset, grid):
        t = np.asarray(grid, dtype=float).reshape(-1)
        a, b = rows(data)
        am, bm = a.mean(axis=0), b.mean(axis=0)
        mbar = am[None, :] + t[:, None] * bm[None, :]
        # var(a + t b) = var(a) + 2 t cov(a,b) + t^2 var(b), columnwise
        va = a.var(axis=0)
        vb = b.var(axis=0)
        cab = (a * b).mean(axis=0) - am * bm
        var = va[None, :] + 2 * t[:, None] * cab[None, :] + (t**2)[:, None] * vb[None, :]
        return mbar, np.sqrt(np.maximum(var, 0.0))

    def resampled(data: Dataset, W, grid):
        t = np.asarray(grid, dtype=float).reshape(-1)
        a, b = rows(data)
        n = data.n
        wa = (W @ a) / n  # (reps, J)
        wb = (W @ b) / n
        return wa[:, None, :] + t[None, :, None] * wb[:, None, :]

    return MomentModel(
        box=box, moment_fn=moments, ineq=tuple(range(2 * len(z_values))),
        stats_fn=stats, resampled_means_fn=resampled,
    )
