"""Random closed sets on finite carrier spaces and the convex geometry
(support functions, Minkowski averages, selection expectations) used by the
model-specific modules.

Carriers are finite and explicitly ordered, so every dominance check
(capacity / containment inequalities) can be enumerated exhaustively at desk
scale and validated against brute-force selection oracles.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Mapping, Sequence

import numpy as np
from scipy.optimize import linprog
from scipy.stats import norm, qmc

PROB_TOL = 1e-12
INEQ_TOL = 1e-10

Point = Hashable


class CapacityError(Exception):
    """Raised when an exhaustive enumeration would exceed the desk-scale cap."""


class DomainError(ValueError):
    """Raised on inputs outside an operation's domain (bad subsets, zero directions)."""


# ---------------------------------------------------------------------------
# finite random sets


@dataclass(frozen=True)
class FiniteRandomSet:
    """A random closed set on a finite ordered carrier.

    ``atoms`` lists (realization, probability) pairs. Duplicates are merged,
    zero-probability atoms dropped, and probabilities must sum to one.
    """

    carrier: tuple[Point, ...]
    atoms: tuple[tuple[frozenset, float], ...]

    def __init__(self, carrier: Sequence[Point], atoms: Iterable[tuple[Iterable[Point], float]]):
        carrier = tuple(carrier)
        if len(set(carrier)) != len(carrier):
            raise DomainError("carrier has duplicate points")
        cset = set(carrier)
        merged: dict[frozenset, float] = {}
        for subset, p in atoms:
            s = frozenset(subset)
            if not s:
                raise DomainError("empty atom realization")
            if not s <= cset:
                raise DomainError(f"atom {set(s)} not contained in carrier")
            if p < -PROB_TOL:
                raise DomainError("negative atom probability")
            merged[s] = merged.get(s, 0.0) + float(p)
        merged = {s: p for s, p in merged.items() if p > 0.0}
        total = math.fsum(merged.values())
        if abs(total - 1.0) > PROB_TOL:
            raise DomainError(f"atom probabilities sum to {total}, not 1")
        order = {x: i for i, x in enumerate(carrier)}
        key = lambda s: sorted(order[x] for x in s)
        object.__setattr__(self, "carrier", carrier)
        object.__setattr__(self, "atoms", tuple(sorted(merged.items(), key=lambda kv: key(kv[0]))))

    def to_json(self) -> dict:
        return {
            "carrier": list(self.carrier),
            "atoms": [{"set": sorted(s, key=self.carrier.index), "p": p} for s, p in self.atoms],
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "FiniteRandomSet":
        return cls(obj["carrier"], [(a["set"], a["p"]) for a in obj["atoms"]])


@dataclass(frozen=True)
class SelectionDistribution:
    """A candidate law for a selection: point masses on the carrier."""

    carrier: tuple[Point, ...]
    prob: dict[Point, float]

    def __init__(self, carrier: Sequence[Point], prob: Mapping[Point, float]):
        carrier = tuple(carrier)
        cset = set(carrier)
        clean = {}
        for x, p in prob.items():
            if x not in cset:
                raise DomainError(f"mass point {x!r} not in carrier")
            if p < -PROB_TOL:
                raise DomainError("negative mass")
            clean[x] = float(p)
        total = math.fsum(clean.values())
        if abs(total - 1.0) > PROB_TOL:
            raise DomainError(f"masses sum to {total}, not 1")
        object.__setattr__(self, "carrier", carrier)
        object.__setattr__(self, "prob", clean)

    def mass(self, subset: Iterable[Point]) -> float:
        return math.fsum(self.prob.get(x, 0.0) for x in subset)


def _check_subset(rs: FiniteRandomSet, K: Iterable[Point]) -> frozenset:
    K = frozenset(K)
    if not K <= set(rs.carrier):
        raise DomainError(f"subset {set(K)} not contained in carrier")
    return K


def capacity(rs: FiniteRandomSet, K: Iterable[Point]) -> float:
    """Hitting probability T(K) = P(X intersects K)."""
    K = _check_subset(rs, K)
    if not K:
        return 0.0
    return math.fsum(p for s, p in rs.atoms if s & K)


def containment(rs: FiniteRandomSet, F: Iterable[Point]) -> float:
    """Containment probability C(F) = P(X subset of F)."""
    F = _check_subset(rs, F)
    return math.fsum(p for s, p in rs.atoms if s <= F)


def _all_nonempty_subsets(points: Sequence[Point]):
    for r in range(1, len(points) + 1):
        yield from (frozenset(c) for c in itertools.combinations(points, r))


@dataclass
class SelectionReport:
    """Outcome of a dominance check: verdict plus the worst-violated subset."""

    selectionable: bool
    worst_subset: frozenset | None
    worst_slack: float  # min over checked K of T(K) - mu(K); negative when violated
    checked: int

    def __bool__(self) -> bool:
        return self.selectionable


def is_selectionable(
    rs: FiniteRandomSet,
    mu: SelectionDistribution,
    subsets: Sequence[frozenset] | None = None,
    tol: float = INEQ_TOL,
) -> SelectionReport:
    """Check the selection dominance condition mu(K) <= T(K).

    Runs over all nonempty subsets of the carrier (carrier size <= 24), or
    over a supplied core determining family ``subsets``.
    """
    if tuple(mu.carrier) != tuple(rs.carrier):
        raise DomainError("selection law and random set live on different carriers")
    if subsets is None:
        if len(rs.carrier) > 24:
            raise CapacityError("carrier too large for exhaustive check; pass a core determining class")
        subsets = list(_all_nonempty_subsets(rs.carrier))
    worst_slack = math.inf
    worst = None
    for K in subsets:
        slack = capacity(rs, K) - mu.mass(K)
        if slack < worst_slack:
            worst_slack = slack
            worst = K
    return SelectionReport(worst_slack >= -tol, worst, worst_slack, len(subsets))


def selection_oracle(rs: FiniteRandomSet, cap: int = 10**6) -> list[dict[Point, float]]:
    """Enumerate the laws induced by all deterministic selection rules.

    A rule picks one point from each atom; its law puts the atom probability
    on the picked point. Any selectionable law is a convex combination of
    these, which makes the output a brute-force ground truth for
    :func:`is_selectionable`.
    """
    sizes = 1
    for s, _ in rs.atoms:
        sizes *= len(s)
        if sizes > cap:
            raise CapacityError(f"selection rules exceed cap {cap}")
    order = {x: i for i, x in enumerate(rs.carrier)}
    laws: dict[tuple, dict] = {}
    choices = [sorted(s, key=order.get) for s, _ in rs.atoms]
    probs = [p for _, p in rs.atoms]
    for rule in itertools.product(*choices):
        law: dict[Point, float] = {}
        for x, p in zip(rule, probs):
            law[x] = law.get(x, 0.0) + p
        key = tuple(sorted(((order[x], round(p, 12)) for x, p in law.items())))
        laws.setdefault(key, law)
    return list(laws.values())


def in_convex_hull_of_laws(
    laws: Sequence[Mapping[Point, float]], mu: SelectionDistribution, tol: float = 1e-9
) -> bool:
    """LP feasibility: is mu a mixture of the given laws?"""
    points = list(mu.carrier)
    A = np.array([[law.get(x, 0.0) for law in laws] for x in points])
    A = np.vstack([A, np.ones(len(laws))])
    b = np.array([mu.prob.get(x, 0.0) for x in points] + [1.0])
    res = linprog(np.zeros(len(laws)), A_eq=A, b_eq=b, bounds=[(0, None)] * len(laws), method="highs")
    if res.status == 0:
        return True
    # infeasibility can be numerical at the hull boundary; retry with slack
    res = linprog(
        np.zeros(len(laws)),
        A_ub=np.vstack([A, -A]),
        b_ub=np.concatenate([b + tol, -(b - tol)]),
        bounds=[(0, None)] * len(laws),
        method="highs",
    )
    return res.status == 0


def core_determining_class(rs: FiniteRandomSet) -> list[frozenset]:
    """A family M of subsets such that checking mu(K) <= T(K) on M implies it
    for every subset of the carrier.

    Pruning drops (i) vacuous sets with T(K) = 1 and (ii) sets whose
    inequality is additive over a two-part split into already-covered sets:
    if T(K) = T(K1) + T(K2) then mu(K) <= T(K) follows from the parts.
    Soundness is independent of pruning order; the exhaustive validator in the
    test suite enforces it on randomized instances.
    """
    if len(rs.carrier) > 20:
        raise CapacityError("carrier too large for subset enumeration")
    cap_cache: dict[frozenset, float] = {}

    def T(K: frozenset) -> float:
        if K not in cap_cache:
            cap_cache[K] = capacity(rs, K)
        return cap_cache[K]

    kept: list[frozenset] = []
    covered: set[frozenset] = set()
    for K in sorted(_all_nonempty_subsets(rs.carrier), key=len):
        if T(K) >= 1.0 - PROB_TOL:
            covered.add(K)
            continue
        implied = False
        if len(K) >= 2:
            pts = sorted(K, key=rs.carrier.index)
            for r in range(1, len(pts) // 2 + 1):
                for combo in itertools.combinations(pts, r):
                    K1 = frozenset(combo)
                    K2 = K - K1
                    if K1 in covered and K2 in covered and abs(T(K1) + T(K2) - T(K)) <= PROB_TOL:
                        implied = True
                        break
                if implied:
                    break
        if implied:
            covered.add(K)
        else:
            kept.append(K)
            covered.add(K)
    return kept


# ---------------------------------------------------------------------------
# convex bodies


def direction_grid(dim: int, size: int = 256) -> np.ndarray:
    """Deterministic unit-direction grid: {-1,+1} in dim 1, equally spaced
    angles in dim 2, a Halton-based spherical lattice for dim >= 3."""
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    if dim == 2:
        ang = 2 * np.pi * np.arange(size) / size
        return np.column_stack([np.cos(ang), np.sin(ang)])
    h = qmc.Halton(d=dim, scramble=False)
    h.fast_forward(1)  # skip the origin sample
    u = h.random(size)
    z = norm.ppf(np.clip(u, 1e-12, 1 - 1e-12))
    nrm = np.linalg.norm(z, axis=1, keepdims=True)
    return z / nrm


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        if self.lo > self.hi:
            raise DomainError(f"interval [{self.lo}, {self.hi}] is empty")


@dataclass(frozen=True)
class Segment:
    a: tuple[float, ...]
    b: tuple[float, ...]


@dataclass(frozen=True)
class Polytope:
    vertices: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        if len(self.vertices) == 0:
            raise DomainError("polytope needs at least one vertex")


@dataclass(frozen=True)
class Mixture:
    """Weighted Minkowski combination: h = sum_i w_i h_i."""

    parts: tuple[tuple["ConvexBody", float], ...]

    def __post_init__(self):
        total = math.fsum(w for _, w in self.parts)
        if abs(total - 1.0) > PROB_TOL:
            raise DomainError(f"mixture weights sum to {total}, not 1")


@dataclass
class ConvexBody:
    """A convex compact set represented by an exact form plus a support cache."""

    dim: int
    exact: Interval | Segment | Polytope | Mixture
    support_cache: dict[tuple[float, ...], float] = field(default_factory=dict)

    def support(self, u: Sequence[float]) -> float:
        return support_function(self, u)

    def to_json(self) -> dict:
        e = self.exact
        if isinstance(e, Interval):
            return {"kind": "interval", "payload": [e.lo, e.hi]}
        if isinstance(e, Segment):
            return {"kind": "segment", "payload": [list(e.a), list(e.b)]}
        if isinstance(e, Polytope):
            return {"kind": "polytope", "payload": [list(v) for v in e.vertices]}
        return {
            "kind": "mixture",
            "payload": [{"body": b.to_json(), "w": w} for b, w in e.parts],
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "ConvexBody":
        kind, payload = obj["kind"], obj["payload"]
        if kind == "interval":
            return interval_body(*payload)
        if kind == "segment":
            return segment_body(payload[0], payload[1])
        if kind == "polytope":
            return polytope_body(payload)
        if kind == "mixture":
            return ConvexBody(
                dim=cls.from_json(payload[0]["body"]).dim,
                exact=Mixture(tuple((cls.from_json(p["body"]), p["w"]) for p in payload)),
            )
        raise DomainError(f"unknown body kind {kind!r}")


def interval_body(lo: float, hi: float) -> ConvexBody:
    return ConvexBody(1, Interval(float(lo), float(hi)))


def segment_body(a: Sequence[float], b: Sequence[float]) -> ConvexBody:
    if len(a) != len(b):
        raise DomainError("segment endpoints of different dimension")
    return ConvexBody(len(a), Segment(tuple(map(float, a)), tuple(map(float, b))))


def polytope_body(vertices: Sequence[Sequence[float]]) -> ConvexBody:
    vs = tuple(tuple(map(float, v)) for v in vertices)
    return ConvexBody(len(vs[0]), Polytope(vs))


def support_function(body: ConvexBody, u: Sequence[float]) -> float:
    """h(u) = sup over the body of k . u."""
    u = np.asarray(u, dtype=float)
    if u.shape != (body.dim,):
        raise DomainError(f"direction of dim {u.shape} against body of dim {body.dim}")
    if not np.any(u != 0.0):
        raise DomainError("zero direction")
    key = tuple(u)
    if key in body.support_cache:
        return body.support_cache[key]
    e = body.exact
    if isinstance(e, Interval):
        h = e.hi * u[0] if u[0] >= 0 else e.lo * u[0]
    elif isinstance(e, Segment):
        h = max(float(np.dot(e.a, u)), float(np.dot(e.b, u)))
    elif isinstance(e, Polytope):
        h = float(np.max(np.asarray(e.vertices) @ u))
    else:
        h = math.fsum(w * support_function(b, u) for b, w in e.parts)
    body.support_cache[key] = h
    return h


def support_point(body: ConvexBody, u: Sequence[float]) -> np.ndarray:
    """A maximizer of k . u over the body (a boundary point)."""
    u = np.asarray(u, dtype=float)
    e = body.exact
    if isinstance(e, Interval):
        return np.array([e.hi if u[0] >= 0 else e.lo])
    if isinstance(e, Segment):
        return np.asarray(e.a if np.dot(e.a, u) >= np.dot(e.b, u) else e.b, dtype=float)
    if isinstance(e, Polytope):
        vs = np.asarray(e.vertices)
        return vs[int(np.argmax(vs @ u))]
    return np.sum([w * support_point(b, u) for b, w in e.parts], axis=0)


def hausdorff(a: ConvexBody, b: ConvexBody, directions: np.ndarray | None = None) -> float:
    """Hausdorff distance via sup over directions of |h_a - h_b|.

    Exact in dim 1 (directions {-1,+1}); a grid approximation otherwise.
    """
    if a.dim != b.dim:
        raise DomainError("dimension mismatch")
    if directions is None:
        directions = direction_grid(a.dim)
    return max(abs(support_function(a, u) - support_function(b, u)) for u in directions)


def minkowski_average(bodies: Sequence[ConvexBody]) -> ConvexBody:
    """Minkowski average: support function equals the mean of the components'."""
    if len(bodies) == 0:
        raise DomainError("empty list")
    dim = bodies[0].dim
    if any(b.dim != dim for b in bodies):
        raise DomainError("dimension mismatch")
    w = 1.0 / len(bodies)
    if all(isinstance(b.exact, Interval) for b in bodies):
        lo = math.fsum(b.exact.lo for b in bodies) * w
        hi = math.fsum(b.exact.hi for b in bodies) * w
        return interval_body(lo, hi)
    return ConvexBody(dim, Mixture(tuple((b, w) for b in bodies)))


def aumann_expectation(weighted: Sequence[tuple[ConvexBody, float]]) -> ConvexBody:
    """Selection expectation of a finite mixture of convex bodies.

    The support function is the probability-weighted average of the component
    support functions; membership is tested through it.
    """
    if len(weighted) == 1:
        if abs(weighted[0][1] - 1.0) > PROB_TOL:
            raise DomainError("single-body weight must be 1")
        return weighted[0][0]
    dim = weighted[0][0].dim
    if any(b.dim != dim for b, _ in weighted):
        raise DomainError("dimension mismatch")
    if all(isinstance(b.exact, Interval) for b, _ in weighted):
        lo = math.fsum(w * b.exact.lo for b, w in weighted)
        hi = math.fsum(w * b.exact.hi for b, w in weighted)
        total = math.fsum(w for _, w in weighted)
        if abs(total - 1.0) > PROB_TOL:
            raise DomainError(f"weights sum to {total}, not 1")
        return interval_body(lo, hi)
    return ConvexBody(dim, Mixture(tuple(weighted)))


def contains_point(
    body: ConvexBody,
    point: Sequence[float],
    directions: np.ndarray | None = None,
    tol: float = INEQ_TOL,
) -> bool:
    """Membership via the dominance b . u <= h(u) on a direction grid."""
    point = np.asarray(point, dtype=float)
    if directions is None:
        directions = direction_grid(body.dim)
    return all(float(point @ u) <= support_function(body, u) + tol for u in directions)


def polygon_vertices(body: ConvexBody, size: int = 256) -> np.ndarray:
    """Boundary polygon of a 2-d body from support points on a direction grid."""
    if body.dim != 2:
        raise DomainError("polygon extraction is 2-d only")
    pts = np.array([support_point(body, u) for u in direction_grid(2, size)])
    uniq = [pts[0]]
    for p in pts[1:]:
        if np.linalg.norm(p - uniq[-1]) > 1e-12:
            uniq.append(p)
    return np.array(uniq)


def scale_body(body: ConvexBody, c: float) -> ConvexBody:
    """Image of the body under multiplication by a nonnegative scalar."""
    if c < 0:
        raise DomainError("negative scaling of a support representation")
    e = body.exact
    if isinstance(e, Interval):
        return interval_body(c * e.lo, c * e.hi)
    if isinstance(e, Segment):
        return segment_body([c * x for x in e.a], [c * x for x in e.b])
    if isinstance(e, Polytope):
        return polytope_body([[c * x for x in v] for v in e.vertices])
    return ConvexBody(body.dim, Mixture(tuple((scale_body(b, c), w) for b, w in e.parts)))
