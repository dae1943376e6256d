"""Two-player entry game: equilibrium-region geometry, model-implied outcome
probabilities, the four-inequality outer region, and sharp membership tests
under pure-strategy, mixed-strategy, and Bayesian Nash play.

Payoffs are y_j (x_j.b_j + d_j y_{3-j} + eps_j) with d_j <= 0, so pure
equilibria exist and the eps plane splits into nine rectangles: four unique
outcome regions, a multiplicity rectangle where both (1,0) and (0,1) are
equilibria, and their unions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy import integrate

from .randomset import DomainError, direction_grid

OUTCOMES = ((0, 0), (1, 0), (0, 1), (1, 1))
_OUT_INDEX = {o: i for i, o in enumerate(OUTCOMES)}
SHARP_TOL = 1e-9

# eps1 band x eps2 band -> set of equilibrium outcome indices; bands are
# (-inf, t), [t, t - d), [t - d, inf) per player
_EQSETS = (
    (frozenset({0}), frozenset({2}), frozenset({2})),
    (frozenset({1}), frozenset({1, 2}), frozenset({2})),
    (frozenset({1}), frozenset({1}), frozenset({3})),
)


def _phi(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


# Gauss-Legendre nodes/weights for the Drezner decomposition (6/12/20 points)
_GL = {
    6: (
        [0.9324695142031522, 0.6612093864662647, 0.2386191860831970],
        [0.1713244923791705, 0.3607615730481384, 0.4679139345726904],
    ),
    12: (
        [0.9815606342467191, 0.9041172563704750, 0.7699026741943050,
         0.5873179542866171, 0.3678314989981802, 0.1252334085114692],
        [0.04717533638651177, 0.1069393259953183, 0.1600783285433464,
         0.2031674267230659, 0.2334925365383547, 0.2491470458134029],
    ),
    20: (
        [0.9931285991850949, 0.9639719272779138, 0.9122344282513259,
         0.8391169718222188, 0.7463319064601508, 0.6360536807265150,
         0.5108670019508271, 0.3737060887154196, 0.2277858511416451,
         0.07652652113349733],
        [0.01761400713915212, 0.04060142980038694, 0.06267204833410906,
         0.08327674157670475, 0.1019301198172404, 0.1181945319615184,
         0.1316886384491766, 0.1420961093183821, 0.1491729864726037,
         0.1527533871307259],
    ),
}


def bvn_cdf(h: float, k: float, rho: float) -> float:
    """P(X <= h, Y <= k) for standard bivariate normal, |err| <= 1e-10.

    Moderate correlations use Gauss-Legendre on the Drezner angular
    decomposition; |rho| > 0.925 falls back to adaptive quadrature of the
    same decomposition, and |rho| within 1e-12 of one uses the exact
    degenerate laws.
    """
    if math.isnan(h) or math.isnan(k) or math.isnan(rho):
        raise DomainError("NaN input to bvn_cdf")
    if abs(rho) > 1.0 + 1e-12:
        raise DomainError("|rho| > 1")
    if h == -math.inf or k == -math.inf:
        return 0.0
    if h == math.inf:
        return _phi(k) if k < math.inf else 1.0
    if k == math.inf:
        return _phi(h)
    if rho >= 1.0 - 1e-12:
        return _phi(min(h, k))
    if rho <= -1.0 + 1e-12:
        return max(0.0, _phi(h) + _phi(k) - 1.0)
    if rho == 0.0:
        return _phi(h) * _phi(k)
    if abs(rho) <= 0.925:
        n = 6 if abs(rho) < 0.3 else (12 if abs(rho) < 0.75 else 20)
        xs, ws = _GL[n]
        hk = h * k
        hs = (h * h + k * k) / 2.0
        asr = math.asin(rho) / 2.0
        total = 0.0
        for x, w in zip(xs, ws):
            for sn in (math.sin(asr * (1.0 - x)), math.sin(asr * (1.0 + x))):
                total += w * math.exp((sn * hk - hs) / (1.0 - sn * sn))
        return _clip01(total * asr / (2.0 * math.pi) + _phi(h) * _phi(k))

    # high |rho|: integrate d Phi2 / d r along r = sin(theta)
    def integrand(theta):
        c2 = math.cos(theta) ** 2
        return math.exp(-(h * h + k * k - 2.0 * h * k * math.sin(theta)) / (2.0 * c2)) if c2 > 1e-300 else (
            math.exp(-(h - k) ** 2 / 4.0) if h == k else 0.0
        )

    val, _ = integrate.quad(integrand, 0.0, math.asin(rho), epsabs=1e-13, epsrel=1e-12, limit=200)
    return _clip01(_phi(h) * _phi(k) + val / (2.0 * math.pi))


def _clip01(x: float) -> float:
    return 0.0 if x < 0.0 else (1.0 if x > 1.0 else x)


def bvn_rect(a1: float, b1: float, a2: float, b2: float, rho: float) -> float:
    """P(eps1 in [a1,b1], eps2 in [a2,b2]) for standard bivariate normal."""
    for v in (a1, b1, a2, b2):
        if math.isnan(v):
            raise DomainError("NaN rectangle bound")
    if a1 > b1 or a2 > b2:
        return 0.0
    val = (
        bvn_cdf(b1, b2, rho)
        - bvn_cdf(a1, b2, rho)
        - bvn_cdf(b1, a2, rho)
        + bvn_cdf(a1, a2, rho)
    )
    return _clip01(val)


# ---------------------------------------------------------------------------
# game primitives


@dataclass(frozen=True)
class GameTheta:
    """Payoff parameters: interaction effects are nonpositive by assumption."""

    beta1: tuple[float, ...]
    beta2: tuple[float, ...]
    delta1: float
    delta2: float
    rho: float = 0.0
    gamma: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "beta1", _as_vec(self.beta1))
        object.__setattr__(self, "beta2", _as_vec(self.beta2))
        if self.delta1 > 0 or self.delta2 > 0:
            raise DomainError("interaction effects must be <= 0")
        if abs(self.rho) > 1:
            raise DomainError("|rho| > 1")
        if self.gamma <= 0:
            raise DomainError("gamma must be positive")


def _as_vec(v) -> tuple[float, ...]:
    if np.isscalar(v):
        return (float(v),)
    return tuple(float(x) for x in v)


@dataclass(frozen=True)
class GameCell:
    """One covariate cell (x1, x2) with sampling weight."""

    x1: tuple[float, ...]
    x2: tuple[float, ...]
    weight: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "x1", _as_vec(self.x1))
        object.__setattr__(self, "x2", _as_vec(self.x2))


def thresholds(theta: GameTheta, cell: GameCell) -> tuple[float, float]:
    t1 = -float(np.dot(cell.x1, theta.beta1))
    t2 = -float(np.dot(cell.x2, theta.beta2))
    return t1, t2


@dataclass
class OutcomeLaw:
    """Per-cell multinomial distributions over the four outcomes, ordered as
    ((0,0), (1,0), (0,1), (1,1))."""

    probs: dict

    def __post_init__(self):
        for key, p in self.probs.items():
            p = np.asarray(p, dtype=float)
            if p.shape != (4,) or np.any(p < -1e-12):
                raise DomainError(f"cell {key}: invalid outcome probabilities")
            if abs(p.sum() - 1.0) > 1e-12:
                raise DomainError(f"cell {key}: probabilities sum to {p.sum()}")
            self.probs[key] = p

    def cells(self):
        return self.probs.items()


@dataclass
class EquilibriumRegions:
    """The nine-rectangle partition of the eps plane for one cell."""

    t1: float
    t2: float
    delta1: float
    delta2: float
    rho: float
    breaks1: tuple[float, float] = field(init=False)
    breaks2: tuple[float, float] = field(init=False)

    def __post_init__(self):
        self.breaks1 = (self.t1, self.t1 - self.delta1)
        self.breaks2 = (self.t2, self.t2 - self.delta2)
        self._probs: dict[tuple[int, int], float] = {}

    def _band(self, breaks, i):
        lo = (-math.inf, breaks[0], breaks[1])[i]
        hi = (breaks[0], breaks[1], math.inf)[i]
        return lo, hi

    def cell_prob(self, i: int, j: int) -> float:
        if (i, j) not in self._probs:
            lo1, hi1 = self._band(self.breaks1, i)
            lo2, hi2 = self._band(self.breaks2, j)
            self._probs[(i, j)] = bvn_rect(lo1, hi1, lo2, hi2, self.rho)
        return self._probs[(i, j)]

    def equilibria(self, i: int, j: int) -> frozenset:
        return _EQSETS[i][j]

    def unique_region_probs(self) -> dict:
        out = {o: 0.0 for o in OUTCOMES}
        for i in range(3):
            for j in range(3):
                s = _EQSETS[i][j]
                if len(s) == 1:
                    out[OUTCOMES[next(iter(s))]] += self.cell_prob(i, j)
        return out

    def multiplicity_prob(self) -> float:
        return self.cell_prob(1, 1)

    def multiplicity_rectangle(self) -> tuple[tuple[float, float], tuple[float, float]]:
        """Corner intervals of [t1, t1-d1) x [t2, t2-d2)."""
        return (self.breaks1, self.breaks2)

    def capacity(self, K: frozenset) -> float:
        """T(K): probability some equilibrium outcome falls in K."""
        total = 0.0
        for i in range(3):
            for j in range(3):
                if _EQSETS[i][j] & K:
                    total += self.cell_prob(i, j)
        return _clip01(total)


def psne_region_map(theta: GameTheta, cell: GameCell) -> EquilibriumRegions:
    t1, t2 = thresholds(theta, cell)
    return EquilibriumRegions(t1, t2, theta.delta1, theta.delta2, theta.rho)


# ---------------------------------------------------------------------------
# complete information membership tests


def ct_outer_member(
    theta: GameTheta, law: OutcomeLaw, cells: Mapping, tol: float = SHARP_TOL
) -> tuple[bool, dict]:
    """Outer-region test: two equalities ((0,0) and (1,1)) and upper/lower
    envelopes for each of (0,1) and (1,0), all cells."""
    slacks = {}
    ok = True
    for key, p in law.cells():
        reg = psne_region_map(theta, cells[key])
        mult = reg.multiplicity_prob()
        p00 = bvn_rect(-math.inf, reg.t1, -math.inf, reg.t2, reg.rho)
        p11 = bvn_rect(reg.breaks1[1], math.inf, reg.breaks2[1], math.inf, reg.rho)
        up01 = bvn_rect(-math.inf, reg.breaks1[1], reg.t2, math.inf, reg.rho)
        up10 = bvn_rect(reg.t1, math.inf, -math.inf, reg.breaks2[1], reg.rho)
        checks = {
            "eq00": -abs(p[0] - p00),
            "eq11": -abs(p[3] - p11),
            "up01": up01 - p[2],
            "lo01": p[2] - (up01 - mult),
            "up10": up10 - p[1],
            "lo10": p[1] - (up10 - mult),
        }
        slacks[key] = checks
        if any(v < -tol for v in checks.values()):
            ok = False
    return ok, slacks


def _proper_subsets():
    out = []
    for mask in range(1, 15):
        out.append(frozenset(i for i in range(4) if mask >> i & 1))
    return out


_PROPER_K = _proper_subsets()


def psne_sharp_member(
    theta: GameTheta, law: OutcomeLaw, cells: Mapping, tol: float = SHARP_TOL
) -> tuple[bool, dict]:
    """Sharp test: P(y in K | x) <= T(K) for all 14 proper nonempty K."""
    worst = {"cell": None, "K": None, "slack": math.inf}
    ok = True
    for key, p in law.cells():
        reg = psne_region_map(theta, cells[key])
        for K in _PROPER_K:
            slack = reg.capacity(K) - float(sum(p[i] for i in K))
            if slack < worst["slack"]:
                worst = {"cell": key, "K": tuple(sorted(K)), "slack": slack}
            if slack < -tol:
                ok = False
    return ok, worst


# ---------------------------------------------------------------------------
# mixed strategies


@dataclass(frozen=True)
class MonteCarloSpec:
    draws: int = 200_000
    seed: int = 0
    blocks: int = 8
    threads: int = 1


def _draw_eps(rho: float, mc: MonteCarloSpec) -> np.ndarray:
    """(draws, 2) correlated normal draws, block-seeded so the result does
    not depend on thread count or batching."""
    from .util import blocked_map

    per = mc.draws // mc.blocks
    sizes = [per + (1 if b < mc.draws % mc.blocks else 0) for b in range(mc.blocks)]

    def one_block(b: int) -> np.ndarray:
        rng = np.random.default_rng(np.random.SeedSequence([mc.seed, b]))
        z = rng.standard_normal((sizes[b], 2))
        e2 = rho * z[:, 0] + math.sqrt(max(0.0, 1 - rho * rho)) * z[:, 1]
        return np.column_stack([z[:, 0], e2])

    return np.vstack(blocked_map(one_block, mc.blocks, mc.threads))


class MixedSupportSampler:
    """Monte Carlo evaluator of u -> E[h_Q(u)] for one cell, with common
    random numbers across directions."""

    def __init__(self, theta: GameTheta, cell: GameCell, mc: MonteCarloSpec):
        t1, t2 = thresholds(theta, cell)
        eps = _draw_eps(theta.rho, mc)
        b1, b2 = t1 - theta.delta1, t2 - theta.delta2
        in_mult = (eps[:, 0] >= t1) & (eps[:, 0] < b1) & (eps[:, 1] >= t2) & (eps[:, 1] < b2)
        if np.any(in_mult) and (theta.delta1 == 0.0 or theta.delta2 == 0.0):
            raise AssertionError("multiplicity rectangle must be empty when a delta is zero")
        enter1 = np.where(eps[:, 0] >= b1, 1, np.where(eps[:, 0] < t1, 0, -1))
        enter2 = np.where(eps[:, 1] >= b2, 1, np.where(eps[:, 1] < t2, 0, -1))
        # outside the rectangle the game has a unique equilibrium vertex
        lab = np.full(len(eps), -1)
        i_band = np.where(eps[:, 0] < t1, 0, np.where(eps[:, 0] < b1, 1, 2))
        j_band = np.where(eps[:, 1] < t2, 0, np.where(eps[:, 1] < b2, 1, 2))
        for i in range(3):
            for j in range(3):
                s = _EQSETS[i][j]
                if len(s) == 1:
                    lab[(i_band == i) & (j_band == j)] = next(iter(s))
        self.n = len(eps)
        self.counts = np.array([(lab == k).sum() for k in range(4)], dtype=float)
        if in_mult.any():
            s1 = (-eps[in_mult, 1] - (-t2)) / theta.delta2
            s2 = (-eps[in_mult, 0] - (-t1)) / theta.delta1
            self.q_mult = np.column_stack(
                [(1 - s1) * (1 - s2), s1 * (1 - s2), (1 - s1) * s2, s1 * s2]
            )
        else:
            self.q_mult = np.zeros((0, 4))

    def value_and_se(self, u) -> tuple[float, float]:
        u = np.asarray(u, dtype=float)
        vals_single = np.array([u[k] for k in range(4)])
        m = len(self.q_mult)
        if m:
            hm = np.maximum(np.maximum(u[1], u[2]), self.q_mult @ u)
            total = float(self.counts @ vals_single + hm.sum())
            sq = float(self.counts @ (vals_single**2) + (hm**2).sum())
        else:
            total = float(self.counts @ vals_single)
            sq = float(self.counts @ (vals_single**2))
        mean = total / self.n
        var = max(0.0, sq / self.n - mean * mean)
        return mean, math.sqrt(var / self.n)

    def supergradient(self, u) -> np.ndarray:
        """E of the maximizing vertex of h_Q(u): a supergradient of E h."""
        u = np.asarray(u, dtype=float)
        g = self.counts.copy()
        m = len(self.q_mult)
        if m:
            opts = np.column_stack(
                [np.full(m, u[1]), np.full(m, u[2]), self.q_mult @ u]
            )
            pick = np.argmax(opts, axis=1)
            g[1] += (pick == 0).sum()
            g[2] += (pick == 1).sum()
            if (pick == 2).any():
                g += self.q_mult[pick == 2].sum(axis=0)
        return g / self.n


def msne_support(theta: GameTheta, cell: GameCell, u, mc: MonteCarloSpec) -> tuple[float, float]:
    """E[h_Q(u) | x] by Monte Carlo, with standard error."""
    u = np.asarray(u, dtype=float)
    if np.linalg.norm(u) > 1 + 1e-9:
        raise DomainError("direction outside the unit ball")
    return MixedSupportSampler(theta, cell, mc).value_and_se(u)


def msne_sharp_member(
    theta: GameTheta,
    law: OutcomeLaw,
    cells: Mapping,
    mc: MonteCarloSpec,
    grid_size: int = 128,
    ascent_steps: int = 200,
) -> tuple[bool, dict]:
    """Sharp MSNE test: max over the unit ball of u.p - E h_Q(u) should be
    zero for members. Concavity makes grid warm start plus projected
    supergradient ascent globally valid."""
    detail = {}
    ok = True
    dirs = direction_grid(4, grid_size)
    for key, p in law.cells():
        sampler = MixedSupportSampler(theta, cells[key], mc)

        def f(u):
            val, se = sampler.value_and_se(u)
            return float(p @ u) - val, se

        best_u = None
        best_val = 0.0  # u = 0 attains 0
        for u in dirs:
            v, _ = f(u)
            if v > best_val:
                best_val, best_u = v, u.copy()
        converged = True
        if best_u is not None:
            u = best_u
            cur, _ = f(u)
            for step in range(ascent_steps):
                g = np.asarray(p, dtype=float) - sampler.supergradient(u)
                gn = np.linalg.norm(g)
                if gn < 1e-12:
                    break
                stepsize = 0.5 / math.sqrt(step + 1.0)
                cand = u + stepsize * g / gn
                nrm = np.linalg.norm(cand)
                if nrm > 1.0:
                    cand = cand / nrm
                v, _ = f(cand)
                if v > cur:
                    u, cur = cand, v
            best_val = max(best_val, cur)
            best_u = u
            # first-order check for the ball-constrained concave maximum
            g = np.asarray(p, dtype=float) - sampler.supergradient(u)
            on_boundary = np.linalg.norm(u) > 1.0 - 1e-9
            tangential = g - (g @ u) * u if on_boundary else g
            converged = bool(np.linalg.norm(tangential) < 5e-3 or (on_boundary and g @ u >= -1e-9))
        _, se = f(best_u if best_u is not None else np.zeros(4))
        detail[key] = {"max": best_val, "se": se, "converged": converged}
        if not converged:
            detail[key]["indeterminate"] = True
        if best_val > 3.0 * se + 1e-6:
            ok = False
    return ok, detail


# ---------------------------------------------------------------------------
# incomplete information (Bayesian Nash)


def _prior_cdf(t: float, gamma: float) -> float:
    return _phi(t / gamma)


def bne_equilibria(
    theta: GameTheta, cell: GameCell, grid_points: int = 2000, tol: float = 1e-12
) -> list[tuple[float, float]]:
    """All Bayesian Nash cutoff pairs t_j = -x_j.b_j - d_j (1 - F(t_{3-j})).

    The composed best response is monotone, so sign-change bracketing on a
    wide grid followed by bisection finds every fixed point.
    """
    t1_0, t2_0 = thresholds(theta, cell)

    def b1(t2):
        return t1_0 - theta.delta1 * (1.0 - _prior_cdf(t2, theta.gamma))

    def b2(t1):
        return t2_0 - theta.delta2 * (1.0 - _prior_cdf(t1, theta.gamma))

    def g(t1):
        return b1(b2(t1)) - t1

    lo = min(t1_0, t2_0) - abs(theta.delta1) - abs(theta.delta2) - 10.0
    hi = max(t1_0, t2_0) + abs(theta.delta1) + abs(theta.delta2) + 10.0
    grid = np.linspace(lo, hi, grid_points)
    vals = np.array([g(t) for t in grid])
    roots = []
    for a, b, va, vb in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
        if va == 0.0:
            roots.append(a)
        elif va * vb < 0:
            x0, x1 = a, b
            while x1 - x0 > tol:
                mid = 0.5 * (x0 + x1)
                if g(x0) * g(mid) <= 0:
                    x1 = mid
                else:
                    x0 = mid
            roots.append(0.5 * (x0 + x1))
    if vals[-1] == 0.0:
        roots.append(grid[-1])
    uniq = []
    for r in roots:
        if not uniq or abs(r - uniq[-1]) > 1e-8:
            uniq.append(r)
    if not uniq:
        raise AssertionError("no BNE cutoff found: search box too small or invariant violated")
    return [(t1, b2(t1)) for t1 in uniq]


def _bne_cell_vertex_sets(eqs: Sequence[tuple[float, float]], gamma: float):
    """Grid cells of the eps plane cut at every equilibrium cutoff, each with
    its probability and the set of outcome vertices achievable across
    equilibria."""
    b1s = sorted({t for t, _ in eqs})
    b2s = sorted({s for _, s in eqs})
    edges1 = [-math.inf] + b1s + [math.inf]
    edges2 = [-math.inf] + b2s + [math.inf]
    cells = []
    for i in range(len(edges1) - 1):
        lo1, hi1 = edges1[i], edges1[i + 1]
        p1 = _prior_cdf(hi1, gamma) - _prior_cdf(lo1, gamma)
        for j in range(len(edges2) - 1):
            lo2, hi2 = edges2[j], edges2[j + 1]
            p2 = _prior_cdf(hi2, gamma) - _prior_cdf(lo2, gamma)
            prob = p1 * p2
            verts = set()
            for t1, t2 in eqs:
                y1 = 1 if lo1 >= t1 - 1e-15 else 0
                y2 = 1 if lo2 >= t2 - 1e-15 else 0
                verts.add(_OUT_INDEX[(y1, y2)])
            cells.append((prob, frozenset(verts)))
    return cells


def bne_sharp_member(
    theta: GameTheta, law: OutcomeLaw, cells: Mapping, tol: float = SHARP_TOL
) -> tuple[bool, dict]:
    """Sharp BNE test: the binary-direction support dominance reduces to the
    14 capacity inequalities P(y in K | x) <= T(K), computed exactly from the
    cutoff equilibria."""
    worst = {"cell": None, "K": None, "slack": math.inf}
    ok = True
    for key, p in law.cells():
        eqs = bne_equilibria(theta, cells[key])
        parts = _bne_cell_vertex_sets(eqs, theta.gamma)
        for K in _PROPER_K:
            cap = math.fsum(prob for prob, verts in parts if verts & K)
            slack = cap - float(sum(p[i] for i in K))
            if slack < worst["slack"]:
                worst = {"cell": key, "K": tuple(sorted(K)), "slack": slack}
            if slack < -tol:
                ok = False
    return ok, worst


# ---------------------------------------------------------------------------
# simulator


SELECTION_RULES = ("always-10", "always-01", "coin", "threshold", "mixed")


def simulate_game(
    theta: GameTheta,
    cells: Sequence[GameCell],
    selection: str,
    n: int,
    seed: int,
    coin_p: float = 0.5,
) -> dict:
    """Simulate n i.i.d. markets under PSNE play with the named selection
    rule resolving the multiplicity region."""
    if selection not in SELECTION_RULES:
        raise DomainError(f"unknown selection rule {selection!r}")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    weights = np.array([c.weight for c in cells], dtype=float)
    weights = weights / weights.sum()
    cell_idx = rng.choice(len(cells), size=n, p=weights)
    eps_rng = np.random.default_rng(np.random.SeedSequence([seed, 2]))
    z = eps_rng.standard_normal((n, 2))
    e1 = z[:, 0]
    e2 = theta.rho * z[:, 0] + math.sqrt(max(0.0, 1 - theta.rho**2)) * z[:, 1]
    sel_rng = np.random.default_rng(np.random.SeedSequence([seed, 3]))
    y1 = np.zeros(n, dtype=int)
    y2 = np.zeros(n, dtype=int)
    for ci, cell in enumerate(cells):
        mask = cell_idx == ci
        if not mask.any():
            continue
        t1, t2 = thresholds(theta, cell)
        b1, b2 = t1 - theta.delta1, t2 - theta.delta2
        i_band = np.where(e1[mask] < t1, 0, np.where(e1[mask] < b1, 1, 2))
        j_band = np.where(e2[mask] < t2, 0, np.where(e2[mask] < b2, 1, 2))
        out = np.zeros(mask.sum(), dtype=int)
        for i in range(3):
            for j in range(3):
                s = _EQSETS[i][j]
                sub = (i_band == i) & (j_band == j)
                if not sub.any():
                    continue
                if len(s) == 1:
                    out[sub] = next(iter(s))
                else:
                    out[sub] = _resolve_multiplicity(
                        selection, theta, t1, t2, e1[mask][sub], e2[mask][sub], sel_rng, coin_p
                    )
        y1[mask] = [OUTCOMES[o][0] for o in out]
        y2[mask] = [OUTCOMES[o][1] for o in out]
    return {"cell": cell_idx, "y1": y1, "y2": y2, "e1": e1, "e2": e2}


def _resolve_multiplicity(selection, theta, t1, t2, e1, e2, rng, coin_p):
    m = len(e1)
    if selection == "always-10":
        return np.full(m, 1)
    if selection == "always-01":
        return np.full(m, 2)
    if selection == "coin":
        return np.where(rng.uniform(size=m) < coin_p, 1, 2)
    if selection == "threshold":
        return np.where(e1 - t1 >= e2 - t2, 1, 2)
    # mixed: draw the outcome from the mixed-equilibrium multinomial q(sigma*)
    s1 = (-e2 + t2) / theta.delta2
    s2 = (-e1 + t1) / theta.delta1
    q = np.column_stack([(1 - s1) * (1 - s2), s1 * (1 - s2), (1 - s1) * s2, s1 * s2])
    u = rng.uniform(size=m)
    cum = np.cumsum(q, axis=1)
    return (u[:, None] > cum).sum(axis=1)


def empirical_law(data: dict, n_cells: int) -> OutcomeLaw:
    probs = {}
    for ci in range(n_cells):
        mask = data["cell"] == ci
        total = mask.sum()
        if total == 0:
            continue
        p = np.zeros(4)
        for k, (a, b) in enumerate(OUTCOMES):
            p[k] = ((data["y1"][mask] == a) & (data["y2"][mask] == b)).sum()
        probs[ci] = p / total
    return OutcomeLaw(probs)


def entry_game_model(
    cells: Sequence[GameCell],
    delta1: float,
    delta2: float,
    rho: float,
    box: tuple[tuple[float, float], tuple[float, float]],
):
    """Moment model over the payoff coefficients (beta1, beta2) with the
    interaction effects and correlation held fixed.

    Per covariate cell: equalities matching the (0,0) and (1,1) outcome
    probabilities, and the upper/lower envelope inequalities for (0,1); the
    (1,0) pair is implied by adding up. Rowwise moments follow the
    indicator-minus-probability form, so they plug into the criterion
    machinery directly.
    """
    from .inference import MomentModel

    def moments(data, theta):
        b1, b2 = float(theta[0]), float(theta[1])
        th = GameTheta(beta1=b1, beta2=b2, delta1=delta1, delta2=delta2, rho=rho)
        cols = []
        for ci, cell in enumerate(cells):
            reg = psne_region_map(th, cell)
            p00 = bvn_rect(-math.inf, reg.t1, -math.inf, reg.t2, rho)
            p11 = bvn_rect(reg.breaks1[1], math.inf, reg.breaks2[1], math.inf, rho)
            up01 = bvn_rect(-math.inf, reg.breaks1[1], reg.t2, math.inf, rho)
            lo01 = up01 - reg.multiplicity_prob()
            in_cell = (data["cell"] == ci).astype(float)
            is00 = ((data["y1"] == 0) & (data["y2"] == 0)).astype(float)
            is11 = ((data["y1"] == 1) & (data["y2"] == 1)).astype(float)
            is01 = ((data["y1"] == 0) & (data["y2"] == 1)).astype(float)
            cols.append((is00 - p00) * in_cell)
            cols.append((is11 - p11) * in_cell)
            cols.append((is01 - up01) * in_cell)
            cols.append((lo01 - is01) * in_cell)
        return np.column_stack(cols)

    eq = tuple(j for ci in range(len(cells)) for j in (4 * ci, 4 * ci + 1))
    ineq = tuple(j for ci in range(len(cells)) for j in (4 * ci + 2, 4 * ci + 3))
    return MomentModel(box=box, moment_fn=moments, ineq=ineq, eq=eq)


def law_from_selection_weights(theta: GameTheta, cell: GameCell, w10: float) -> np.ndarray:
    """Exact member law: unique-region probabilities plus the multiplicity
    mass split w10 / (1 - w10) between (1,0) and (0,1)."""
    reg = psne_region_map(theta, cell)
    uniq = reg.unique_region_probs()
    mult = reg.multiplicity_prob()
    p = np.array([uniq[(0, 0)], uniq[(1, 0)] + w10 * mult, uniq[(0, 1)] + (1 - w10) * mult, uniq[(1, 1)]])
    total = p.sum()
    return p / total
