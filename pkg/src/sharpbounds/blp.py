"""Sharp identification regions for best linear prediction with interval
outcome (and optionally interval covariate) data.

The interval-outcome region is the selection expectation of per-row segments
mapped through the inverse design matrix, so its support function has an
exact sample-analog formula. With interval covariates the region is checked
pointwise through a convex program over the unit ball.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .randomset import DomainError, direction_grid

MEMBER_SLACK = -1e-8


@dataclass
class IntervalSample:
    """Rows of (yL, yU, x), optionally with covariate brackets (xL, xU)."""

    yl: np.ndarray
    yu: np.ndarray
    x: np.ndarray | None = None
    xl: np.ndarray | None = None
    xu: np.ndarray | None = None

    def __post_init__(self):
        self.yl = np.asarray(self.yl, dtype=float)
        self.yu = np.asarray(self.yu, dtype=float)
        if self.yl.shape != self.yu.shape or self.yl.ndim != 1:
            raise DomainError("yL and yU must be matching 1-d arrays")
        if np.any(self.yl > self.yu):
            raise DomainError("yL > yU in some row")
        if self.n < 2:
            raise DomainError("need n >= 2")
        for name in ("x", "xl", "xu"):
            v = getattr(self, name)
            if v is not None:
                v = np.asarray(v, dtype=float)
                if v.shape != self.yl.shape:
                    raise DomainError(f"{name} shape mismatch")
                setattr(self, name, v)
        if self.xl is not None and self.xu is not None and np.any(self.xl > self.xu):
            raise DomainError("xL > xU in some row")
        if self.x is not None and np.var(self.x) <= 0:
            raise DomainError("x has zero sample variance")

    @property
    def n(self) -> int:
        return len(self.yl)


@dataclass
class BlpRegion:
    """Interval-outcome BLP region: the Minkowski average of the per-row
    segments Sigma^{-1}(y, yx), y in [yL, yU], stored by endpoint arrays.

    ``representation`` records which route produced the region: the exact
    selection-expectation geometry here, versus the pointwise membership
    test used when covariates are interval valued.
    """

    sigma: np.ndarray
    seg_a: np.ndarray  # (n, 2) low-endpoint images
    seg_b: np.ndarray  # (n, 2) high-endpoint images
    directions: np.ndarray
    representation: str = "exact-aumann"

    def support(self, u) -> float:
        u = np.asarray(u, dtype=float)
        if not np.any(u != 0):
            raise DomainError("zero direction")
        return float(np.mean(np.maximum(self.seg_a @ u, self.seg_b @ u)))

    def support_point(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        take_b = (self.seg_b @ u) >= (self.seg_a @ u)
        pts = np.where(take_b[:, None], self.seg_b, self.seg_a)
        return pts.mean(axis=0)

    def contains(self, theta, tol: float = 1e-9) -> bool:
        theta = np.asarray(theta, dtype=float)
        return all(float(theta @ u) <= self.support(u) + tol for u in self.directions)

    def support_table(self) -> list[dict]:
        return [{"u": list(u), "h": self.support(u)} for u in self.directions]

    def polygon(self, size: int = 256) -> np.ndarray:
        pts = np.array([self.support_point(u) for u in direction_grid(2, size)])
        keep = [pts[0]]
        for p in pts[1:]:
            if np.linalg.norm(p - keep[-1]) > 1e-12:
                keep.append(p)
        return np.array(keep)


def design_moments(sample: IntervalSample) -> np.ndarray:
    x = sample.x
    return np.array([[1.0, x.mean()], [x.mean(), np.mean(x * x)]])


def blp_support(sample: IntervalSample, u) -> float:
    """Sample support function of the interval-outcome BLP region:
    h(u) = mean over rows of (yL 1(f<0) + yU 1(f>=0)) f with f = [1 x] Sigma^{-1} u."""
    u = np.asarray(u, dtype=float)
    if u.shape != (2,):
        raise DomainError("direction must lie in R^2")
    if not np.any(u != 0):
        raise DomainError("zero direction")
    if sample.x is None:
        raise DomainError("outcome-only support needs point-valued x")
    sigma = design_moments(sample)
    f = np.column_stack([np.ones(sample.n), sample.x]) @ np.linalg.solve(sigma, u)
    y_star = np.where(f >= 0, sample.yu, sample.yl)
    # np.mean reduces pairwise: bit-stable across runs
    return float(np.mean(y_star * f))


def blp_region(sample: IntervalSample, grid_size: int = 256) -> BlpRegion:
    """Exact region via the endpoint images of every row segment."""
    if sample.x is None:
        raise DomainError("blp_region needs point-valued x")
    sigma = design_moments(sample)
    sinv = np.linalg.inv(sigma)
    lo = np.column_stack([sample.yl, sample.yl * sample.x]) @ sinv.T
    hi = np.column_stack([sample.yu, sample.yu * sample.x]) @ sinv.T
    return BlpRegion(sigma=sigma, seg_a=lo, seg_b=hi, directions=direction_grid(2, grid_size))


def _rect_max_rows(u, theta, yl, yu, xl, xu) -> np.ndarray:
    """Rowwise exact max over [yL,yU] x [xL,xU] of
    u1(y - t0 - t1 x) + u2(yx - t0 x - t1 x^2).

    Linear in y and quadratic in x, so the max sits at a corner or at the
    clipped stationary x for one of the y endpoints.
    """
    t0, t1 = float(theta[0]), float(theta[1])
    u1, u2 = float(u[0]), float(u[1])

    def val(y, x):
        return u1 * (y - t0 - t1 * x) + u2 * (y * x - t0 * x - t1 * x * x)

    best = np.full(len(yl), -np.inf)
    for y in (yl, yu):
        for x in (xl, xu):
            best = np.maximum(best, val(y, x))
        if u2 * t1 != 0.0:
            x_star = np.clip((u2 * y - u1 * t1 - u2 * t0) / (2.0 * u2 * t1), xl, xu)
            best = np.maximum(best, val(y, x_star))
    return best


def blp_xy_member(
    sample: IntervalSample,
    theta,
    grid_size: int = 512,
    slack: float = MEMBER_SLACK,
) -> tuple[bool, float]:
    """Membership when both outcome and covariate are interval valued.

    theta is in the region iff min over the unit ball of the sample mean of
    the rowwise rectangle support function equals zero. Returns the verdict
    and the attained minimum (the criterion value).
    """
    if sample.xl is None or sample.xu is None:
        raise DomainError("blp_xy_member needs covariate brackets")
    if not (np.all(np.isfinite(sample.yl)) and np.all(np.isfinite(sample.yu))
            and np.all(np.isfinite(sample.xl)) and np.all(np.isfinite(sample.xu))):
        raise DomainError("unbounded intervals")
    theta = np.asarray(theta, dtype=float)

    def objective(u):
        return float(np.mean(_rect_max_rows(u, theta, sample.yl, sample.yu, sample.xl, sample.xu)))

    best_val = 0.0  # h(0) = 0 is always attainable on the ball
    best_u = np.zeros(2)
    for u in direction_grid(2, grid_size):
        v = objective(u)
        if v < best_val:
            best_val, best_u = v, u
    if best_val < 0:
        res = minimize(
            lambda z: objective(z) if np.linalg.norm(z) <= 1 else objective(z / np.linalg.norm(z)),
            best_u,
            method="Nelder-Mead",
            options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 400},
        )
        if res.fun < best_val:
            best_val = float(res.fun)
    return best_val >= slack, best_val
