"""Closed-form nonparametric bounds for selectively observed outcomes,
interval data, and treatment effects.

Conditional moments arrive pre-aggregated per discrete covariate cell; the
identification layer is exact given those moments. Emptiness of an
intersection bound is a first-class refutation result, not an error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .randomset import DomainError, FiniteRandomSet, SelectionDistribution

TOL = 1e-10


@dataclass(frozen=True)
class Interval1D:
    """A closed bound [lo, hi]; ``empty`` marks a refuted (crossing) bound."""

    lo: float
    hi: float
    empty: bool = False
    flags: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.empty and self.lo > self.hi + TOL:
            raise DomainError(f"interval [{self.lo}, {self.hi}] is empty but not flagged")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def contains(self, x: float, tol: float = TOL) -> bool:
        return (not self.empty) and self.lo - tol <= x <= self.hi + tol

    def to_json(self) -> dict:
        return {"lower": self.lo, "upper": self.hi, "empty": self.empty, "diagnostics": list(self.flags)}


@dataclass
class CellMoments:
    """Observed moments for one covariate cell of selectively observed data.

    ``quantile_fn_obs`` is the left-continuous generalized inverse of the
    observed-outcome CDF (min t with CDF >= level); ``interval_prob`` returns
    P(t0 <= y <= t1 | d=1) for the cell.
    """

    p_obs: float
    g0: float
    g1: float
    mean_obs: float | None = None
    quantile_fn_obs: Callable[[float], float] | None = None
    interval_prob: Callable[[float, float], float] | None = None
    support_points: tuple[float, ...] = ()

    def __post_init__(self):
        if not 0.0 <= self.p_obs <= 1.0:
            raise DomainError(f"p_obs = {self.p_obs} outside [0, 1]")
        if not (math.isfinite(self.g0) and math.isfinite(self.g1)) or self.g0 > self.g1:
            raise DomainError("invalid range (g0, g1)")
        if self.mean_obs is not None and self.p_obs > 0:
            if not self.g0 - TOL <= self.mean_obs <= self.g1 + TOL:
                raise DomainError("mean_obs outside the stated range")


@dataclass
class TreatmentMoments:
    """Per-arm observed moments for one (x, z) cell: P(s=t) and E[y | s=t]."""

    arms: tuple  # ordered treatment labels
    p: dict
    mean: dict
    y0: float
    y1: float

    def __post_init__(self):
        total = math.fsum(self.p[t] for t in self.arms)
        if abs(total - 1.0) > 1e-12:
            raise DomainError(f"arm probabilities sum to {total}")
        for t in self.arms:
            if self.p[t] > 0 and not self.y0 - TOL <= self.mean[t] <= self.y1 + TOL:
                raise DomainError(f"mean for arm {t} outside [y0, y1]")


# ---------------------------------------------------------------------------
# selectively observed outcomes


def mean_bounds_missing(cm: CellMoments) -> Interval1D:
    """Worst-case bounds on E[g(y)] when g(y) is seen only where d=1."""
    if cm.mean_obs is None and cm.p_obs > 0:
        raise DomainError("mean_obs required")
    base = (cm.mean_obs or 0.0) * cm.p_obs
    q = 1.0 - cm.p_obs
    return Interval1D(base + cm.g0 * q, base + cm.g1 * q)


def quantile_bounds_missing(cm: CellMoments, alpha: float) -> Interval1D:
    """Bounds on the alpha-quantile of g(y) under selective observation.

    The lower endpoint is informative when p_obs > 1 - alpha and the upper
    when p_obs >= alpha; otherwise the range endpoint is returned. Boundary
    cells (conditions holding with equality) are flagged.
    """
    if not 0.0 < alpha < 1.0:
        raise DomainError("alpha must lie in (0, 1)")
    if cm.quantile_fn_obs is None:
        raise DomainError("quantile_fn_obs required")
    flags = []
    if cm.p_obs > 1.0 - alpha:
        r = cm.quantile_fn_obs(1.0 - (1.0 - alpha) / cm.p_obs)
    else:
        r = cm.g0
        if cm.p_obs == 1.0 - alpha:
            flags.append("lower-informativeness-boundary")
    if cm.p_obs >= alpha:
        s = cm.quantile_fn_obs(alpha / cm.p_obs)
        if cm.p_obs == alpha:
            flags.append("upper-informativeness-boundary")
    else:
        s = cm.g1
    return Interval1D(r, s, flags=tuple(flags))


def cdf_pointwise_band(cm: CellMoments, grid: Sequence[float]) -> list[tuple[float, Interval1D]]:
    """Pointwise-sharp CDF band: at each t the envelope
    [P(y<=t|d=1) p_obs, P(y<=t|d=1) p_obs + 1 - p_obs]."""
    if cm.interval_prob is None:
        raise DomainError("interval_prob required")
    out = []
    for t in grid:
        lo = cm.interval_prob(-math.inf, t) * cm.p_obs
        out.append((t, Interval1D(lo, lo + 1.0 - cm.p_obs)))
    return out


def cdf_sharp_member(
    F: Callable[[float], float],
    cm: CellMoments,
    grid: Sequence[float],
    F_left: Callable[[float], float] | None = None,
    tol: float = TOL,
) -> tuple[bool, dict]:
    """Sharp membership for a candidate CDF on a bounded-interval outcome.

    Checks F(t1) - F(t0-) >= P(t0 <= y <= t1 | d=1) p_obs over all pairs from
    the union of the cell's support points and ``grid``. Strictly stronger
    than band membership. ``F_left`` supplies left limits; omit it for
    continuous candidates.
    """
    if cm.interval_prob is None:
        raise DomainError("interval_prob required")
    left = F_left or F
    pts = sorted(set(cm.support_points) | set(grid))
    vals = [F(t) for t in pts]
    if any(b - a < -tol for a, b in zip(vals, vals[1:])):
        raise DomainError("candidate CDF is not monotone on the grid")
    if any(v < -tol or v > 1 + tol for v in vals):
        raise DomainError("candidate CDF outside [0, 1]")
    worst = {"pair": None, "slack": math.inf}
    ok = True
    for i, t0 in enumerate(pts):
        f0 = left(t0)
        for t1 in pts[i:]:
            need = cm.interval_prob(t0, t1) * cm.p_obs
            slack = (F(t1) - f0) - need
            if slack < worst["slack"]:
                worst = {"pair": (t0, t1), "slack": slack, "required": need, "mass": F(t1) - f0}
            if slack < -tol:
                ok = False
    return ok, worst


def interval_outcome_mean_bounds(e_yl: float, e_yu: float) -> Interval1D:
    """Sharp mean bounds with interval outcome data: [E yL, E yU]."""
    if e_yl > e_yu + TOL:
        raise DomainError("E[yL] exceeds E[yU]")
    return Interval1D(min(e_yl, e_yu), e_yu)


def missing_to_random_set(cm: CellMoments, pmf_obs: Mapping[float, float]) -> FiniteRandomSet:
    """Induced finite random set for discrete outcomes: the singleton {y}
    where observed, the full carrier where missing."""
    carrier = sorted(set(pmf_obs) | {cm.g0, cm.g1})
    atoms = [(frozenset([y]), p * cm.p_obs) for y, p in pmf_obs.items() if p > 0]
    if cm.p_obs < 1.0:
        atoms.append((frozenset(carrier), 1.0 - cm.p_obs))
    return FiniteRandomSet(carrier, atoms)


def pmf_to_selection(carrier: Sequence[float], pmf: Mapping[float, float]) -> SelectionDistribution:
    return SelectionDistribution(tuple(carrier), dict(pmf))


# ---------------------------------------------------------------------------
# treatment effects


def treatment_worstcase(tm: TreatmentMoments, t) -> Interval1D:
    """Assumption-free bounds on E[y(t)]."""
    if t not in tm.arms:
        raise DomainError(f"arm {t!r} not in treatment set")
    p, m = tm.p[t], tm.mean[t]
    base = m * p
    return Interval1D(base + tm.y0 * (1 - p), base + tm.y1 * (1 - p))


def ate_worstcase(tm: TreatmentMoments, t1, t0) -> Interval1D:
    """Worst-case average treatment effect bound; always covers zero and has
    width (y1 - y0)(2 - p_{t1} - p_{t0})."""
    b1 = treatment_worstcase(tm, t1)
    b0 = treatment_worstcase(tm, t0)
    return Interval1D(b1.lo - b0.hi, b1.hi - b0.lo)


def _ordered_index(tm: TreatmentMoments, t) -> int:
    try:
        return tm.arms.index(t)
    except ValueError:
        raise DomainError(f"arm {t!r} not in treatment set") from None


def treatment_mtr(tm: TreatmentMoments, t) -> Interval1D:
    """Bounds on E[y(t)] under monotone treatment response.

    lower = E[y | s<=t] P(s<=t) + y0 P(s>t); upper mirrors with s>=t and y1.
    Informative even for arms with zero mass.
    """
    i = _ordered_index(tm, t)
    below = tm.arms[: i + 1]
    above = tm.arms[i:]
    p_below = math.fsum(tm.p[a] for a in below)
    p_above = math.fsum(tm.p[a] for a in above)
    ey_below = math.fsum(tm.p[a] * tm.mean[a] for a in below)
    ey_above = math.fsum(tm.p[a] * tm.mean[a] for a in above)
    lo = ey_below + tm.y0 * (1.0 - p_below)
    hi = ey_above + tm.y1 * (1.0 - p_above)
    return Interval1D(lo, hi)


def ate_mtr(tm: TreatmentMoments, t1, t0) -> Interval1D:
    """ATE bound under monotone response for t1 above t0: lower bound zero."""
    if _ordered_index(tm, t1) <= _ordered_index(tm, t0):
        raise DomainError("t1 must rank above t0")
    return Interval1D(0.0, treatment_mtr(tm, t1).hi - treatment_mtr(tm, t0).lo)


def intersection_bounds(cells: Sequence[TreatmentMoments], t) -> Interval1D:
    """Intersection of per-instrument-cell worst-case bounds; an empty
    intersection refutes the mean-independence assumption."""
    if len(cells) == 0:
        raise DomainError("at least one instrument cell required")
    bounds = [treatment_worstcase(tm, t) for tm in cells]
    lo = max(b.lo for b in bounds)
    hi = min(b.hi for b in bounds)
    if lo > hi + TOL:
        return Interval1D(lo, hi, empty=True, flags=("refuted",))
    return Interval1D(lo, hi)


# ---------------------------------------------------------------------------
# interval covariates


def monotone_regression_bounds(
    cells: Mapping[tuple[float, float], float], x: float, g0: float, g1: float
) -> Interval1D:
    """Bounds on E[y | x] under interval covariates, monotonicity, and mean
    independence: sup of cell means with xU <= x against inf with xL >= x."""
    lows = [m for (xl, xu), m in cells.items() if xu <= x]
    highs = [m for (xl, xu), m in cells.items() if xl >= x]
    flags = []
    if lows:
        lo = max(lows)
    else:
        lo, flags = g0, flags + ["lower-trivial"]
    if highs:
        hi = min(highs)
    else:
        hi, flags = g1, flags + ["upper-trivial"]
    if lo > hi + TOL:
        return Interval1D(lo, hi, empty=True, flags=tuple(flags + ["refuted"]))
    return Interval1D(lo, hi, flags=tuple(flags))


def parametric_regression_region(
    f: Callable,
    cells: Sequence[tuple],
    theta_grid: np.ndarray,
    tol: float = TOL,
):
    """Region {theta : f(w, xL; theta) <= E[y|cell] <= f(w, xU; theta)} on a
    grid, with the worst cell violation as the criterion value.

    ``cells`` holds (w, xL, xU, ey) tuples; ``f`` must be weakly increasing
    in its covariate argument.
    """
    from .inference import RegionResult

    theta_grid = np.atleast_2d(theta_grid)
    crit = np.zeros(len(theta_grid))
    for w, xl, xu, ey in cells:
        for k, th in enumerate(theta_grid):
            viol = max(f(w, xl, th) - ey, ey - f(w, xu, th), 0.0)
            crit[k] = max(crit[k], viol)
    return RegionResult(theta_grid, crit, crit <= tol, meta={"kind": "parametric-regression"})


def binary_choice_region(
    cells: Sequence[tuple],
    alpha: float,
    theta_grid: np.ndarray,
    tol: float = TOL,
):
    """Binary-response region with an interval covariate: the criterion is
    the total mass of violating cells, so a point stays in as long as no
    positive-mass cell breaks either threshold-crossing requirement (p1 at
    most 1 - alpha when w.theta + xU <= 0, at least 1 - alpha when
    w.theta + xL >= 0).
    """
    from .inference import RegionResult

    if not 0.0 < alpha < 1.0:
        raise DomainError("alpha must lie in (0, 1)")
    theta_grid = np.atleast_2d(theta_grid)
    crit = np.zeros(len(theta_grid))
    cut = 1.0 - alpha
    for w, xl, xu, p1, mass in cells:
        if mass <= 0:
            continue
        w = np.atleast_1d(np.asarray(w, dtype=float))
        for k, th in enumerate(theta_grid):
            wt = float(w @ np.atleast_1d(th))
            violates = (wt + xu <= 0 and p1 > cut + tol) or (wt + xl >= 0 and p1 < cut - tol)
            if violates:
                crit[k] += mass
    return RegionResult(theta_grid, crit, crit <= 0.0, meta={"kind": "binary-choice", "alpha": alpha})
