import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sharpbounds import randomset as rsm
from sharpbounds.randomset import (
    CapacityError,
    ConvexBody,
    DomainError,
    FiniteRandomSet,
    SelectionDistribution,
    aumann_expectation,
    capacity,
    containment,
    contains_point,
    core_determining_class,
    direction_grid,
    hausdorff,
    in_convex_hull_of_laws,
    interval_body,
    is_selectionable,
    minkowski_average,
    polygon_vertices,
    segment_body,
    selection_oracle,
    support_function,
)


def two_atom_set():
    return FiniteRandomSet(["a", "b"], [({"a"}, 0.5), ({"a", "b"}, 0.5)])


def random_finite_set(rng, max_carrier=4, max_atoms=4):
    n = rng.integers(1, max_carrier + 1)
    carrier = list(range(n))
    subsets = [frozenset(c) for r in range(1, n + 1) for c in itertools.combinations(carrier, r)]
    k = rng.integers(1, min(max_atoms, len(subsets)) + 1)
    picks = rng.choice(len(subsets), size=k, replace=False)
    w = rng.dirichlet(np.ones(k))
    return FiniteRandomSet(carrier, [(subsets[i], w[j]) for j, i in enumerate(picks)])


def random_law(rng, rs):
    w = rng.dirichlet(np.ones(len(rs.carrier)))
    return SelectionDistribution(rs.carrier, dict(zip(rs.carrier, w)))


def law_from_selection(rng, rs):
    # mixture of two random deterministic selection rules: selectionable by construction
    prob = {x: 0.0 for x in rs.carrier}
    lam = rng.uniform()
    for weight in (lam, 1 - lam):
        for s, p in rs.atoms:
            pick = sorted(s)[rng.integers(len(s))]
            prob[pick] += weight * p
    return SelectionDistribution(rs.carrier, prob)


class TestCapacityContainment:
    def test_capacity_examples(self):
        r = two_atom_set()
        assert capacity(r, {"b"}) == 0.5
        assert capacity(r, {"a", "b"}) == 1.0
        assert capacity(r, set()) == 0.0

    def test_containment_examples(self):
        r = two_atom_set()
        assert containment(r, {"a"}) == 0.5
        assert containment(r, {"a", "b"}) == 1.0
        assert containment(r, set()) == 0.0

    def test_outside_carrier_rejected(self):
        r = two_atom_set()
        with pytest.raises(DomainError):
            capacity(r, {"z"})
        with pytest.raises(DomainError):
            containment(r, {"z"})

    def test_duplicates_merged_zero_dropped(self):
        r = FiniteRandomSet(["a", "b"], [({"a"}, 0.3), ({"a"}, 0.4), ({"b"}, 0.3), ({"a", "b"}, 0.0)])
        assert len(r.atoms) == 2
        assert capacity(r, {"a"}) == pytest.approx(0.7, abs=1e-15)

    def test_complement_duality(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            r = random_finite_set(rng)
            pts = list(r.carrier)
            for K in (frozenset(c) for rr in range(len(pts) + 1) for c in itertools.combinations(pts, rr)):
                comp = frozenset(pts) - K
                assert containment(r, K) + capacity(r, comp) == pytest.approx(1.0, abs=1e-12)

    @given(st.lists(st.floats(0.01, 1.0), min_size=2, max_size=5))
    @settings(max_examples=50, deadline=None)
    def test_capacity_monotone(self, weights):
        w = np.array(weights) / math.fsum(weights)
        carrier = list(range(len(w)))
        atoms = [({i, (i + 1) % len(w)}, w[i]) for i in range(len(w))]
        r = FiniteRandomSet(carrier, atoms)
        sets = sorted(
            (frozenset(c) for rr in range(len(carrier) + 1) for c in itertools.combinations(carrier, rr)),
            key=len,
        )
        for K in sets:
            for K2 in sets:
                if K <= K2:
                    assert capacity(r, K) <= capacity(r, K2) + 1e-12


class TestSelectionable:
    def test_examples(self):
        r = two_atom_set()
        assert is_selectionable(r, SelectionDistribution(["a", "b"], {"a": 0.7, "b": 0.3})).selectionable
        rep = is_selectionable(r, SelectionDistribution(["a", "b"], {"a": 0.3, "b": 0.7}))
        assert not rep.selectionable
        assert rep.worst_subset == frozenset({"b"})
        assert rep.worst_slack == pytest.approx(-0.2, abs=1e-12)

    def test_deterministic_point_mass(self):
        r = FiniteRandomSet(["a"], [({"a"}, 1.0)])
        assert is_selectionable(r, SelectionDistribution(["a"], {"a": 1.0})).selectionable

    def test_oracle_examples(self):
        r = two_atom_set()
        laws = selection_oracle(r)
        assert {frozenset(l.items()) for l in laws} == {
            frozenset({("a", 1.0)}),
            frozenset({("a", 0.5), ("b", 0.5)}),
        }
        single = FiniteRandomSet(["a", "b"], [({"a"}, 0.4), ({"b"}, 0.6)])
        assert len(selection_oracle(single)) == 1
        full = FiniteRandomSet(["a", "b"], [({"a", "b"}, 1.0)])
        assert {frozenset(l.items()) for l in selection_oracle(full)} == {
            frozenset({("a", 1.0)}),
            frozenset({("b", 1.0)}),
        }

    def test_oracle_capacity_guard(self):
        carrier = list(range(21))
        atoms = [(set(carrier), 1.0 / 5)] * 5  # merged to one atom; force blowup differently
        r = FiniteRandomSet(carrier, [(set(carrier), 1.0)])
        with pytest.raises(CapacityError):
            selection_oracle(FiniteRandomSet(carrier, [(set(carrier), 0.25)] * 4 + []), cap=10)
        with pytest.raises(CapacityError):
            selection_oracle(r, cap=20)

    def test_agreement_with_hull_oracle(self):
        # smaller copy of acceptance criterion 2
        rng = np.random.default_rng(11)
        for i in range(300):
            r = random_finite_set(rng)
            mu = law_from_selection(rng, r) if i % 2 else random_law(rng, r)
            verdict = is_selectionable(r, mu).selectionable
            hull = in_convex_hull_of_laws(selection_oracle(r), mu)
            assert verdict == hull, f"disagreement on case {i}"


class TestCoreDetermining:
    def test_spec_instances(self):
        single = FiniteRandomSet(["a", "b"], [({"a"}, 0.4), ({"b"}, 0.6)])
        cls1 = core_determining_class(single)
        assert set(cls1) <= {frozenset({"a"}), frozenset({"b"})}
        two = two_atom_set()
        assert set(core_determining_class(two)) <= {frozenset({"a"}), frozenset({"b"})}
        det = FiniteRandomSet(["a", "b", "c"], [({"a", "b"}, 1.0)])
        cls3 = core_determining_class(det)
        assert len(cls3) <= 3

    def test_verdicts_match_exhaustive(self):
        rng = np.random.default_rng(3)
        for i in range(1000):
            r = random_finite_set(rng)
            mu = law_from_selection(rng, r) if i % 3 == 0 else random_law(rng, r)
            cls = core_determining_class(r)
            assert (
                is_selectionable(r, mu, subsets=cls).selectionable
                == is_selectionable(r, mu).selectionable
            )

    def test_no_larger_than_exhaustive(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            r = random_finite_set(rng)
            n_all = 2 ** len(r.carrier) - 1
            assert len(core_determining_class(r)) <= n_all


class TestSupportFunction:
    def test_interval(self):
        b = interval_body(0.0, 2.0)
        assert support_function(b, [1.0]) == 2.0
        assert support_function(b, [-1.0]) == 0.0

    def test_segment(self):
        s = segment_body([0, 0], [1, 1])
        assert support_function(s, [1.0, 0.0]) == 1.0

    def test_minkowski_mixture(self):
        m = aumann_expectation([(interval_body(0, 1), 0.5), (interval_body(2, 4), 0.5)])
        assert support_function(m, [1.0]) == pytest.approx(2.5, abs=1e-15)

    def test_zero_direction_rejected(self):
        with pytest.raises(DomainError):
            support_function(interval_body(0, 1), [0.0])

    def test_homogeneity_subadditivity(self):
        rng = np.random.default_rng(2)
        body = ConvexBody(2, rsm.Polytope(tuple(map(tuple, rng.normal(size=(5, 2))))))
        for _ in range(200):
            u, v = rng.normal(size=2), rng.normal(size=2)
            c = rng.uniform(0.1, 5.0)
            assert support_function(body, c * u) == pytest.approx(
                c * support_function(body, u), abs=1e-12, rel=1e-12
            )
            if np.any(u + v != 0):
                assert support_function(body, u + v) <= (
                    support_function(body, u) + support_function(body, v) + 1e-12
                )


class TestHausdorff:
    def test_intervals(self):
        assert hausdorff(interval_body(0, 1), interval_body(0, 2)) == 1.0
        assert hausdorff(interval_body(0, 1), interval_body(0, 1)) == 0.0

    def test_shifted_square(self):
        sq = rsm.polytope_body([[0, 0], [1, 0], [1, 1], [0, 1]])
        sh = rsm.polytope_body([[1, 0], [2, 0], [2, 1], [1, 1]])
        grid = direction_grid(2, 720)
        assert hausdorff(sq, sh, grid) == pytest.approx(1.0, abs=1e-3)

    def test_metric_properties(self):
        rng = np.random.default_rng(4)
        grid = direction_grid(2, 256)
        bodies = [
            rsm.polytope_body(rng.normal(size=(4, 2)).tolist()) for _ in range(6)
        ]
        for a in bodies:
            assert hausdorff(a, a, grid) == 0.0
            for b in bodies:
                assert hausdorff(a, b, grid) == pytest.approx(hausdorff(b, a, grid), abs=1e-14)
                for c in bodies:
                    assert hausdorff(a, c, grid) <= hausdorff(a, b, grid) + hausdorff(b, c, grid) + 1e-10


class TestMinkowskiAumann:
    def test_average_of_intervals(self):
        avg = minkowski_average([interval_body(0, 2), interval_body(2, 4)])
        assert (avg.exact.lo, avg.exact.hi) == (1.0, 3.0)

    def test_idempotent_on_copies(self):
        k = rsm.polytope_body([[0, 0], [1, 0], [0, 1]])
        avg = minkowski_average([k] * 5)
        for u in direction_grid(2, 64):
            assert support_function(avg, u) == pytest.approx(support_function(k, u), abs=1e-12)

    def test_average_of_segments(self):
        avg = minkowski_average([segment_body([0, 0], [1, 0]), segment_body([0, 0], [0, 1])])
        for u in direction_grid(2, 64):
            expect = 0.5 * max(u[0], 0.0) + 0.5 * max(u[1], 0.0)
            assert support_function(avg, u) == pytest.approx(expect, abs=1e-12)

    def test_aumann_intervals_and_membership(self):
        e = aumann_expectation([(interval_body(0, 1), 0.5), (interval_body(1, 3), 0.5)])
        assert (e.exact.lo, e.exact.hi) == (0.5, 2.0)
        seg_avg = aumann_expectation(
            [(segment_body([0, 0], [1, 0]), 0.5), (segment_body([0, 0], [0, 1]), 0.5)]
        )
        assert contains_point(seg_avg, [0.0, 0.0])
        assert not contains_point(seg_avg, [1.0, 1.0])

    def test_single_body_identity(self):
        k = rsm.polytope_body([[0, 0], [2, 1]])
        assert aumann_expectation([(k, 1.0)]) is k

    def test_empirical_lln(self):
        # Minkowski average of [u_i, u_i + 1], u_i ~ U(0,1): limit is [0.5, 1.5]
        target = interval_body(0.5, 1.5)
        for seed in range(1, 21):
            rng = np.random.default_rng(seed)
            u = rng.uniform(size=10_000)
            avg = interval_body(u.mean(), u.mean() + 1.0)
            assert hausdorff(avg, target) < 0.05
        small = np.mean(np.random.default_rng(1).uniform(size=50))
        assert hausdorff(interval_body(small, small + 1), target) >= 0.0


class TestSerialization:
    def test_roundtrip_random_set(self):
        r = two_atom_set()
        assert FiniteRandomSet.from_json(r.to_json()) == r

    def test_roundtrip_bodies(self):
        for b in [
            interval_body(0, 1),
            segment_body([0, 0], [1, 2]),
            rsm.polytope_body([[0, 0], [1, 0], [0, 1]]),
            minkowski_average([segment_body([0, 0], [1, 0]), segment_body([0, 0], [0, 1])]),
        ]:
            b2 = ConvexBody.from_json(b.to_json())
            for u in direction_grid(b.dim, 32):
                assert support_function(b2, u) == pytest.approx(support_function(b, u), abs=1e-14)


class TestDirectionGrid:
    def test_unit_norm_all_dims(self):
        for d in (1, 2, 3, 4):
            g = direction_grid(d, 64)
            assert np.allclose(np.linalg.norm(g, axis=1), 1.0)

    def test_deterministic(self):
        assert np.array_equal(direction_grid(3, 128), direction_grid(3, 128))

    def test_polygon_extraction(self):
        sq = rsm.polytope_body([[0, 0], [1, 0], [1, 1], [0, 1]])
        poly = polygon_vertices(sq, 128)
        assert poly.shape[1] == 2
        assert set(map(tuple, np.round(poly, 9))) <= {(0, 0), (1, 0), (1, 1), (0, 1)}
