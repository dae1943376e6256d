"""Bounds on the valuation distribution in incomplete English auctions, plus
the sharp dominance test built from the ordered-bid random set.

The two behavioral assumptions (no one bids above their valuation; no one
lets an opponent win at a beatable price) confine the ordered bid vector to
a box intersected with the ordered cone, which yields closed-form order
statistic envelopes and, through the hitting probabilities of that set, a
sharp membership test.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.special import betainc, betaincinv

from .randomset import DomainError

MIN_STRATUM = 5


@dataclass
class BidData:
    """Ordered bids per auction, grouped by bidder count."""

    auctions: list  # (n, sorted bid array) pairs
    delta: float = 0.0
    v_lo: float = 0.0
    v_hi: float = 1.0

    def __post_init__(self):
        if self.delta < 0:
            raise DomainError("minimum bid increment must be >= 0")
        if self.v_lo >= self.v_hi:
            raise DomainError("empty valuation support")
        clean = []
        for n, bids in self.auctions:
            bids = np.asarray(bids, dtype=float)
            if n < 2 or len(bids) != n:
                raise DomainError("auction must record n >= 2 ordered bids")
            if np.any(np.diff(bids) < -1e-12):
                raise DomainError("bids must be sorted nondecreasing")
            if bids[0] < self.v_lo - 1e-12 or bids[-1] > self.v_hi + 1e-12:
                raise DomainError("bid outside valuation support")
            clean.append((int(n), bids))
        self.auctions = clean

    def strata(self) -> dict:
        out: dict[int, np.ndarray] = {}
        for n, bids in self.auctions:
            out.setdefault(n, []).append(bids)
        return {n: np.vstack(rows) for n, rows in out.items()}


@dataclass
class CdfBand:
    grid: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    refuted: bool = False
    warnings: tuple[str, ...] = ()

    def to_rows(self):
        return [
            {"v": float(v), "lower": float(lo), "upper": float(hi)}
            for v, lo, hi in zip(self.grid, self.lower, self.upper)
        ]


def beta_quantile_map(p: float, i: int, n: int) -> float:
    """Quantile of Beta(i, n - i + 1) at p: maps an order statistic CDF value
    back to the parent CDF value."""
    if not (1 <= i <= n):
        raise DomainError(f"invalid order statistic ({i}, {n})")
    if not 0.0 <= p <= 1.0:
        raise DomainError("p outside [0, 1]")
    return float(betaincinv(i, n - i + 1, p))


def beta_cdf(v: float, i: int, n: int) -> float:
    return float(betainc(i, n - i + 1, v))


def _monotonize(band_lower: np.ndarray, band_upper: np.ndarray):
    """Least nondecreasing majorant of the lower envelope, greatest
    nondecreasing minorant of the upper: both stay valid for a nondecreasing
    target CDF."""
    lo = np.maximum.accumulate(band_lower)
    hi = np.minimum.accumulate(band_upper[::-1])[::-1]
    return lo, hi


def ht_band_from_cdfs(
    g: Mapping[tuple[int, int], Callable[[float], float]],
    ns: Sequence[int],
    grid: Sequence[float],
    delta: float = 0.0,
) -> CdfBand:
    """Envelopes from order-statistic bid CDFs G_{i:n}.

    upper(v) = min over (i, n) of BetaQ(G_{i:n}(v); i, n-i+1);
    lower(v) = max over n of BetaQ(G_{n:n}(v - delta); n-1, 2), the image of
    the top bid through the (n-1)-th valuation order statistic (the top bid
    cannot fall below the second-highest valuation minus the increment).
    """
    grid = np.asarray(grid, dtype=float)
    upper = np.full(len(grid), np.inf)
    lower = np.zeros(len(grid))
    for n in ns:
        for k, v in enumerate(grid):
            up = min(beta_quantile_map(min(1.0, max(0.0, g[(i, n)](v))), i, n) for i in range(1, n + 1))
            upper[k] = min(upper[k], up)
            lo = beta_quantile_map(min(1.0, max(0.0, g[(n, n)](v - delta))), n - 1, n)
            lower[k] = max(lower[k], lo)
    lower, upper = _monotonize(lower, upper)
    refuted = bool(np.any(lower > upper + 1e-9))
    return CdfBand(grid, lower, upper, refuted=refuted)


def ht_band(data: BidData, grid: Sequence[float]) -> CdfBand:
    """Empirical envelopes; strata with fewer than five auctions are dropped
    with a warning."""
    strata = data.strata()
    warnings = []
    cdfs = {}
    ns = []
    for n, rows in sorted(strata.items()):
        if len(rows) < MIN_STRATUM:
            warnings.append(f"stratum n={n}: only {len(rows)} auctions, excluded")
            continue
        ns.append(n)
        for i in range(1, n + 1):
            col = np.sort(rows[:, i - 1])
            cdfs[(i, n)] = _ecdf(col)
    if not ns:
        raise DomainError("no stratum with enough auctions")
    band = ht_band_from_cdfs(cdfs, ns, grid, delta=data.delta)
    band.warnings = tuple(warnings)
    return band


def _ecdf(sorted_col: np.ndarray) -> Callable[[float], float]:
    def f(v: float) -> float:
        return float(np.searchsorted(sorted_col, v, side="right")) / len(sorted_col)

    return f


# ---------------------------------------------------------------------------
# sharp membership


@dataclass(frozen=True)
class CandidateCdf:
    """A candidate valuation CDF given by values on a grid, interpolated
    linearly; must be a valid CDF over [v_lo, v_hi]."""

    grid: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if len(g) != len(v) or len(g) < 2:
            raise DomainError("grid and values must align, length >= 2")
        if np.any(np.diff(g) <= 0):
            raise DomainError("grid must be strictly increasing")
        if np.any(np.diff(v) < -1e-12):
            raise DomainError("candidate CDF must be nondecreasing")
        if abs(v[0]) > 1e-9 or abs(v[-1] - 1.0) > 1e-9:
            raise DomainError("candidate CDF must run from 0 to 1 over the support")

    def cdf(self, x):
        return np.interp(x, self.grid, self.values)

    def quantile(self, u):
        return np.interp(u, self.values, self.grid)


def box_family(n: int, v_lo: float, v_hi: float, cutpoints: int = 8, cap: int = 100_000):
    """Boxes on a per-coordinate cutpoint grid.

    The full product family is used when it fits under ``cap``; otherwise
    boxes constraining one coordinate pair at a time (all other coordinates
    free) are generated.
    """
    cuts = np.linspace(v_lo, v_hi, cutpoints)
    intervals = [(cuts[a], cuts[b]) for a in range(cutpoints) for b in range(a + 1, cutpoints)]
    per = len(intervals)
    free = (v_lo, v_hi)
    boxes = []
    if per**n <= cap:
        idx = np.indices([per] * n).reshape(n, -1).T
        for row in idx:
            boxes.append(tuple(intervals[k] for k in row))
    else:
        for i in range(n):
            for j in range(i + 1, n):
                for a in intervals:
                    for b in intervals:
                        box = [free] * n
                        box[i], box[j] = a, b
                        boxes.append(tuple(box))
        for i in range(n):
            for a in intervals:
                box = [free] * n
                box[i] = a
                boxes.append(tuple(box))
    return boxes


def _ordered_hit(lowers: np.ndarray, uppers: np.ndarray) -> np.ndarray:
    """Rowwise: does an ordered point exist with coordinates in the given
    intervals? Greedy running max of the lower ends."""
    b = np.maximum.accumulate(lowers, axis=1)
    return np.all(b <= uppers + 1e-12, axis=1)


def predicted_bid_box(vals_sorted: np.ndarray, delta: float, v_lo: float):
    """Per-draw coordinate bounds of the ordered-bid set B(v): lows are the
    support floor except the top (second-highest valuation minus delta),
    highs are the sorted valuations."""
    R, n = vals_sorted.shape
    lo = np.full((R, n), v_lo)
    lo[:, n - 1] = np.maximum(v_lo, vals_sorted[:, n - 2] - delta)
    hi = vals_sorted.copy()
    return lo, hi


def auction_sharp_member(
    candidate: CandidateCdf,
    data: BidData,
    draws: int = 20_000,
    seed: int = 0,
    cutpoints: int = 8,
    blocks: int = 8,
    threads: int = 1,
    tol: float = 1e-6,
) -> tuple[bool, dict]:
    """Sharp dominance test over a graded box family.

    For each box K, the hitting probability of the model-predicted ordered
    bid set under the candidate CDF is estimated by Monte Carlo and compared
    with the empirical probability of the observed bid vector falling in K;
    a member must satisfy every inequality within Monte Carlo noise.
    """
    strata = data.strata()
    worst = {"n": None, "box": None, "slack": math.inf}
    ok = True
    for n, rows in sorted(strata.items()):
        if len(rows) < MIN_STRATUM:
            continue
        vals = _candidate_order_stat_draws(candidate, n, draws, seed, blocks, threads)
        box_lo, box_hi = predicted_bid_box(vals, data.delta, data.v_lo)
        for box in box_family(n, data.v_lo, data.v_hi, cutpoints=cutpoints):
            K_lo = np.array([b[0] for b in box])
            K_hi = np.array([b[1] for b in box])
            lowers = np.maximum(box_lo, K_lo[None, :])
            uppers = np.minimum(box_hi, K_hi[None, :])
            hits = _ordered_hit(lowers, uppers)
            t_hat = float(hits.mean())
            se = math.sqrt(max(t_hat * (1 - t_hat), 1e-12) / len(hits))
            emp = float(
                np.mean(np.all((rows >= K_lo[None, :] - 1e-12) & (rows <= K_hi[None, :] + 1e-12), axis=1))
            )
            slack = t_hat + 3 * se + tol - emp
            if slack < worst["slack"]:
                worst = {"n": n, "box": box, "slack": slack, "T": t_hat, "P": emp, "se": se}
            if slack < 0:
                ok = False
    return ok, worst


def _candidate_order_stat_draws(
    candidate: CandidateCdf, n: int, draws: int, seed: int, blocks: int, threads: int = 1
) -> np.ndarray:
    from .util import blocked_map

    per = draws // blocks
    sizes = [per + (1 if b < draws % blocks else 0) for b in range(blocks)]

    def one_block(b: int) -> np.ndarray:
        rng = np.random.default_rng(np.random.SeedSequence([seed, n, b]))
        u = rng.uniform(size=(sizes[b], n))
        return np.sort(candidate.quantile(u), axis=1)

    return np.vstack(blocked_map(one_block, blocks, threads))


# ---------------------------------------------------------------------------
# simulator

BIDDING_RULES = ("button", "uniform-shading", "jump")


def simulate_auction(
    quantile: Callable[[np.ndarray], np.ndarray],
    n: int,
    rule: str,
    delta: float,
    n_auctions: int,
    seed: int,
    v_lo: float = 0.0,
    v_hi: float = 1.0,
    blocks: int = 8,
) -> BidData:
    """Simulate i.i.d. auctions with bids inside the model-predicted set.

    ``quantile`` maps uniforms to valuations. Rules: ``button`` (losers bid
    their valuations, the winner stops at the second-highest), ``uniform-
    shading`` (bids drawn uniformly inside the predicted box, top down), and
    ``jump`` (heavy shading below, the winner jumps to her valuation).
    """
    if rule not in BIDDING_RULES:
        raise DomainError(f"unknown bidding rule {rule!r}")
    per = n_auctions // blocks
    sizes = [per + (1 if b < n_auctions % blocks else 0) for b in range(blocks)]
    out = []
    for b, size in enumerate(sizes):
        rng = np.random.default_rng(np.random.SeedSequence([seed, b]))
        v = np.sort(np.asarray(quantile(rng.uniform(size=(size, n)))), axis=1)
        bids = np.empty_like(v)
        if rule == "button":
            bids[:, : n - 1] = v[:, : n - 1]
            bids[:, n - 1] = v[:, n - 2]
        elif rule == "uniform-shading":
            top_lo = np.maximum(v_lo, v[:, n - 2] - delta)
            bids[:, n - 1] = rng.uniform(top_lo, v[:, n - 1])
            upper = bids[:, n - 1]
            for i in range(n - 2, -1, -1):
                hi = np.minimum(v[:, i], upper)
                bids[:, i] = rng.uniform(v_lo, hi)
                upper = bids[:, i]
        else:  # jump
            shade = rng.uniform(size=(size, n - 1)) ** 2
            bids[:, : n - 1] = v_lo + (v[:, : n - 1] - v_lo) * shade
            bids[:, : n - 1] = np.maximum.accumulate(bids[:, : n - 1], axis=1)
            bids[:, n - 1] = v[:, n - 1]
        # every rule must stay inside the predicted ordered-bid set
        box_lo, box_hi = predicted_bid_box(v, delta, v_lo)
        assert np.all(bids >= box_lo - 1e-12) and np.all(bids <= box_hi + 1e-12)
        assert np.all(np.diff(bids, axis=1) >= -1e-12)
        out.extend((n, row) for row in bids)
    return BidData(auctions=out, delta=delta, v_lo=v_lo, v_hi=v_hi)
