import math

import numpy as np
import pytest
from scipy import integrate
from scipy.optimize import linprog
from scipy.stats import norm

from sharpbounds.games import (
    OUTCOMES,
    DomainError,
    GameCell,
    GameTheta,
    MonteCarloSpec,
    OutcomeLaw,
    bne_equilibria,
    bne_sharp_member,
    bvn_cdf,
    bvn_rect,
    ct_outer_member,
    empirical_law,
    law_from_selection_weights,
    msne_sharp_member,
    msne_support,
    psne_region_map,
    psne_sharp_member,
    simulate_game,
    _bne_cell_vertex_sets,
)
from sharpbounds.randomset import FiniteRandomSet, SelectionDistribution, direction_grid, is_selectionable


def bvn_cdf_quad(h, k, rho):
    """Independent quadrature oracle: integrate phi(x) Phi((k - rho x)/sqrt(1-rho^2))."""
    if rho == 1.0:
        return norm.cdf(min(h, k))
    if rho == -1.0:
        return max(0.0, norm.cdf(h) + norm.cdf(k) - 1.0)
    s = math.sqrt(1 - rho * rho)
    val, _ = integrate.quad(
        lambda x: norm.pdf(x) * norm.cdf((k - rho * x) / s),
        -9.0, min(h, 9.0), epsabs=1e-13, epsrel=1e-12, limit=300,
    )
    return val


class TestBvn:
    def test_full_plane(self):
        assert bvn_rect(-math.inf, math.inf, -math.inf, math.inf, 0.3) == 1.0

    def test_independent_quadrant(self):
        assert bvn_rect(-math.inf, 0, -math.inf, 0, 0.0) == pytest.approx(0.25, abs=1e-14)

    def test_orthant_arcsine_identity(self):
        for rho in (-0.9, -0.5, -0.1, 0.1, 0.5, 0.9, 0.99):
            want = 0.25 + math.asin(rho) / (2 * math.pi)
            assert bvn_rect(-math.inf, 0, -math.inf, 0, rho) == pytest.approx(want, abs=1e-10)
        assert bvn_rect(-math.inf, 0, -math.inf, 0, 0.5) == pytest.approx(1 / 3, abs=1e-12)

    def test_against_quadrature_oracle(self):
        pts = [-2.5, -0.7, 0.0, 0.4, 1.9]
        rhos = [-0.999, -0.95, -0.6, -0.2, 0.0, 0.33, 0.75, 0.9, 0.97, 0.9999]
        for rho in rhos:
            for h in pts:
                for k in pts:
                    assert bvn_cdf(h, k, rho) == pytest.approx(
                        bvn_cdf_quad(h, k, rho), abs=1e-10
                    ), (h, k, rho)

    def test_degenerate_rho(self):
        assert bvn_cdf(0.3, 0.8, 1.0) == pytest.approx(norm.cdf(0.3), abs=1e-14)
        assert bvn_cdf(0.3, -0.1, -1.0) == pytest.approx(
            max(0.0, norm.cdf(0.3) + norm.cdf(-0.1) - 1), abs=1e-14
        )

    def test_nan_rejected(self):
        with pytest.raises(DomainError):
            bvn_rect(math.nan, 1, 0, 1, 0.0)

    def test_empty_rect(self):
        assert bvn_rect(1.0, 0.0, -1.0, 1.0, 0.2) == 0.0


def simple_theta(delta=(-1.0, -1.0), beta=(0.0, 0.0), rho=0.0, gamma=1.0):
    return GameTheta(beta1=beta[0], beta2=beta[1], delta1=delta[0], delta2=delta[1], rho=rho, gamma=gamma)


CELL = {0: GameCell(x1=1.0, x2=1.0)}


class TestRegionMap:
    def test_delta_zero_no_multiplicity(self):
        reg = psne_region_map(simple_theta(delta=(0.0, 0.0), beta=(0.5, -0.2)), CELL[0])
        assert reg.multiplicity_prob() == 0.0
        uniq = reg.unique_region_probs()
        assert math.fsum(uniq.values()) == pytest.approx(1.0, abs=1e-12)

    def test_unit_multiplicity_rectangle(self):
        reg = psne_region_map(simple_theta(), GameCell(x1=0.0, x2=0.0))
        assert reg.breaks1 == (0.0, 1.0)
        assert reg.breaks2 == (0.0, 1.0)
        assert reg.multiplicity_prob() == pytest.approx(
            (norm.cdf(1) - 0.5) ** 2, abs=1e-10
        )

    def test_capacity_01_equals_half_phi1(self):
        reg = psne_region_map(simple_theta(), GameCell(x1=0.0, x2=0.0))
        # derived: unique (0,1) region mass + multiplicity mass = Phi(1)/2
        got = reg.capacity(frozenset({2}))
        assert got == pytest.approx(norm.cdf(1.0) * 0.5, abs=1e-9)

    def test_partition_sums_to_one(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            th = GameTheta(
                beta1=rng.normal(), beta2=rng.normal(),
                delta1=-rng.uniform(0, 2), delta2=-rng.uniform(0, 2),
                rho=rng.uniform(-0.95, 0.95),
            )
            reg = psne_region_map(th, GameCell(x1=1.0, x2=1.0))
            total = math.fsum(reg.cell_prob(i, j) for i in range(3) for j in range(3))
            assert total == pytest.approx(1.0, abs=1e-10)

    def test_capacity_monotone(self):
        reg = psne_region_map(simple_theta(rho=0.4), GameCell(x1=0.3, x2=-0.2))
        subsets = [frozenset(i for i in range(4) if m >> i & 1) for m in range(1, 16)]
        for K in subsets:
            for K2 in subsets:
                if K <= K2:
                    assert reg.capacity(K) <= reg.capacity(K2) + 1e-12


def random_theta(rng):
    return GameTheta(
        beta1=rng.normal(scale=0.7), beta2=rng.normal(scale=0.7),
        delta1=-rng.uniform(0, 1.5), delta2=-rng.uniform(0, 1.5),
        rho=rng.uniform(-0.9, 0.9),
    )


def random_law_pair(rng, i):
    """(theta, law) with a mix of member and perturbed laws."""
    theta = random_theta(rng)
    p = law_from_selection_weights(theta, CELL[0], rng.uniform())
    if i % 2:
        bump = rng.dirichlet(np.ones(4)) * rng.uniform(0.01, 0.2)
        p = (p + bump) / (p + bump).sum()
    return theta, OutcomeLaw({0: p})


class TestCompleteInfoMembers:
    def test_member_law_by_construction(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            theta = random_theta(rng)
            law = OutcomeLaw({0: law_from_selection_weights(theta, CELL[0], rng.uniform())})
            assert ct_outer_member(theta, law, CELL)[0]
            assert psne_sharp_member(theta, law, CELL)[0]

    def test_delta_zero_requires_exact_law(self):
        theta = simple_theta(delta=(0.0, 0.0), beta=(0.2, -0.1))
        law = OutcomeLaw({0: law_from_selection_weights(theta, CELL[0], 0.5)})
        assert ct_outer_member(theta, law, CELL)[0]
        p = law.probs[0].copy()
        p[0] += 0.02
        p = p / p.sum()
        assert not ct_outer_member(theta, OutcomeLaw({0: p}), CELL)[0]

    def test_wrong_00_mass_fails_eq(self):
        theta = simple_theta()
        p = law_from_selection_weights(theta, CELL[0], 0.5)
        p = p.copy()
        p[0], p[1] = p[0] + 0.05, p[1] - 0.05
        ok, slacks = ct_outer_member(theta, OutcomeLaw({0: p}), CELL)
        assert not ok
        assert slacks[0]["eq00"] < -1e-9

    def test_K_full_would_be_trivial(self):
        theta = simple_theta()
        reg = psne_region_map(theta, CELL[0])
        assert reg.capacity(frozenset({0, 1, 2, 3})) == pytest.approx(1.0, abs=1e-10)

    def test_sharp_equals_outer_on_randomized_pairs(self):
        rng = np.random.default_rng(11)
        for i in range(300):
            theta, law = random_law_pair(rng, i)
            assert ct_outer_member(theta, law, CELL)[0] == psne_sharp_member(theta, law, CELL)[0], i

    def test_sharp_agrees_with_selection_oracle(self):
        # the 9-rectangle partition induces a finite random set over outcomes;
        # sharp membership must match the selection dominance check on it
        rng = np.random.default_rng(13)
        for i in range(100):
            theta, law = random_law_pair(rng, i)
            reg = psne_region_map(theta, CELL[0])
            atom_probs = {}
            for a in range(3):
                for b in range(3):
                    s = reg.equilibria(a, b)
                    pr = reg.cell_prob(a, b)
                    if pr > 0:
                        atom_probs[s] = atom_probs.get(s, 0.0) + pr
            total = math.fsum(atom_probs.values())
            rs = FiniteRandomSet(range(4), [(set(s), p / total) for s, p in atom_probs.items()])
            mu = SelectionDistribution(range(4), dict(enumerate(law.probs[0])))
            art = is_selectionable(rs, mu, tol=1e-9).selectionable
            assert psne_sharp_member(theta, law, CELL)[0] == art, i


class TestMixedStrategies:
    def test_delta_zero_singleton_value(self):
        theta = simple_theta(delta=(0.0, 0.0), beta=(0.3, -0.4))
        mc = MonteCarloSpec(draws=100_000, seed=4)
        reg = psne_region_map(theta, CELL[0])
        uniq = reg.unique_region_probs()
        p_vec = np.array([uniq[o] for o in OUTCOMES])
        for u in direction_grid(4, 8):
            val, se = msne_support(theta, CELL[0], u * 0.9, mc)
            assert val == pytest.approx(float(p_vec @ (u * 0.9)), abs=3 * se + 5e-3)

    def test_e11_direction_inside_rectangle(self):
        # h contribution inside multiplicity = max(0, 0, sigma1* sigma2*) >= 0
        theta = simple_theta()
        mc = MonteCarloSpec(draws=50_000, seed=9)
        u = np.array([0.0, 0.0, 0.0, 1.0])
        val, _ = msne_support(theta, CELL[0], u, mc)
        reg = psne_region_map(theta, CELL[0])
        assert val >= reg.unique_region_probs()[(1, 1)] - 1e-3

    def test_sublinearity_in_u(self):
        theta = simple_theta(rho=0.3)
        mc = MonteCarloSpec(draws=50_000, seed=2)
        rng = np.random.default_rng(3)
        for _ in range(10):
            u, v = rng.normal(size=4), rng.normal(size=4)
            u, v = u / np.linalg.norm(u) / 2, v / np.linalg.norm(v) / 2
            hu, _ = msne_support(theta, CELL[0], u, mc)
            hv, _ = msne_support(theta, CELL[0], v, mc)
            huv, _ = msne_support(theta, CELL[0], u + v, mc)
            assert huv <= hu + hv + 1e-9  # common random numbers: exact per draw

    def test_continuity_at_delta_zero(self):
        mc = MonteCarloSpec(draws=100_000, seed=7)
        th_eps = simple_theta(delta=(-1e-6, -1e-6), beta=(0.1, 0.2))
        th_zero = simple_theta(delta=(0.0, 0.0), beta=(0.1, 0.2))
        for u in direction_grid(4, 16):
            a, _ = msne_support(th_eps, CELL[0], u, mc)
            b, _ = msne_support(th_zero, CELL[0], u, mc)
            assert abs(a - b) < 1e-3

    def test_member_and_nonmember(self):
        theta = simple_theta(delta=(0.0, 0.0), beta=(0.2, 0.1))
        mc = MonteCarloSpec(draws=100_000, seed=5)
        law = OutcomeLaw({0: law_from_selection_weights(theta, CELL[0], 0.3)})
        ok, det = msne_sharp_member(theta, law, CELL, mc)
        assert ok, det
        bad = OutcomeLaw({0: np.array([0.0, 0.0, 0.0, 1.0])})
        ok2, det2 = msne_sharp_member(theta, bad, CELL, mc)
        assert not ok2

    def test_mixed_selection_law_is_member(self):
        theta = simple_theta(delta=(-0.8, -0.8), beta=(0.1, 0.1), rho=0.2)
        data = simulate_game(theta, [CELL[0]], "mixed", 200_000, seed=21)
        law = empirical_law(data, 1)
        mc = MonteCarloSpec(draws=200_000, seed=6)
        ok, det = msne_sharp_member(theta, law, CELL, mc)
        assert ok, det


class TestBne:
    def test_delta_zero_unique_cutoffs_and_product_law(self):
        theta = simple_theta(delta=(0.0, 0.0), beta=(0.4, -0.3))
        eqs = bne_equilibria(theta, CELL[0])
        assert len(eqs) == 1
        t1, t2 = eqs[0]
        assert t1 == pytest.approx(-0.4, abs=1e-10)
        assert t2 == pytest.approx(0.3, abs=1e-10)
        p1, p2 = 1 - norm.cdf(t1), 1 - norm.cdf(t2)
        law = OutcomeLaw({0: np.array([(1 - p1) * (1 - p2), p1 * (1 - p2), (1 - p1) * p2, p1 * p2])})
        assert bne_sharp_member(theta, law, CELL)[0]
        off = OutcomeLaw({0: np.array([0.4, 0.1, 0.1, 0.4])})
        assert not bne_sharp_member(theta, off, CELL)[0]

    def test_fixed_point_residuals(self):
        rng = np.random.default_rng(17)
        for _ in range(20):
            theta = GameTheta(
                beta1=rng.normal(), beta2=rng.normal(),
                delta1=-rng.uniform(0, 3), delta2=-rng.uniform(0, 3),
                gamma=rng.uniform(0.3, 2.0),
            )
            for t1, t2 in bne_equilibria(theta, CELL[0]):
                r1 = t1 - (-np.dot(CELL[0].x1, theta.beta1) - theta.delta1 * (1 - norm.cdf(t2 / theta.gamma)))
                r2 = t2 - (-np.dot(CELL[0].x2, theta.beta2) - theta.delta2 * (1 - norm.cdf(t1 / theta.gamma)))
                assert abs(r1) < 1e-10 and abs(r2) < 1e-10

    def multi_eq_theta(self):
        # steep prior (small gamma) and strong interaction: three equilibria
        return GameTheta(beta1=1.0, beta2=1.0, delta1=-2.0, delta2=-2.0, gamma=0.25)

    def test_multiple_equilibria_found(self):
        theta = self.multi_eq_theta()
        eqs = bne_equilibria(theta, CELL[0])
        assert len(eqs) == 3

    def test_verdict_matches_lp_enumeration_oracle(self):
        theta = self.multi_eq_theta()
        eqs = bne_equilibria(theta, CELL[0])
        parts = _bne_cell_vertex_sets(eqs, theta.gamma)

        def lp_member(p):
            # feasibility: per-cell distributions over achievable vertices matching p
            cols = []
            for ci, (prob, verts) in enumerate(parts):
                for v in sorted(verts):
                    col = np.zeros(4 + len(parts))
                    col[v] = prob
                    col[4 + ci] = 1.0
                    cols.append(col)
            A = np.array(cols).T
            b = np.concatenate([p, np.ones(len(parts))])
            res = linprog(np.zeros(A.shape[1]), A_eq=A, b_eq=b,
                          bounds=[(0, None)] * A.shape[1], method="highs")
            if res.status == 0:
                return True
            slack = 1e-9
            res = linprog(
                np.zeros(A.shape[1]),
                A_ub=np.vstack([A, -A]), b_ub=np.concatenate([b + slack, -(b - slack)]),
                bounds=[(0, None)] * A.shape[1], method="highs",
            )
            return res.status == 0

        rng = np.random.default_rng(23)
        # mixtures over equilibria (members) and random laws (mostly not)
        for i in range(60):
            if i % 2:
                w = rng.dirichlet(np.ones(len(eqs)))
                p = np.zeros(4)
                for wgt, (t1, t2) in zip(w, eqs):
                    q1, q2 = 1 - norm.cdf(t1 / theta.gamma), 1 - norm.cdf(t2 / theta.gamma)
                    p += wgt * np.array([(1 - q1) * (1 - q2), q1 * (1 - q2), (1 - q1) * q2, q1 * q2])
            else:
                p = rng.dirichlet(np.ones(4))
            p = p / p.sum()
            ours = bne_sharp_member(theta, OutcomeLaw({0: p}), CELL)[0]
            assert ours == lp_member(p), (i, p)

    def test_K_full_passes(self):
        theta = self.multi_eq_theta()
        eqs = bne_equilibria(theta, CELL[0])
        parts = _bne_cell_vertex_sets(eqs, theta.gamma)
        cap = math.fsum(pr for pr, verts in parts if verts & frozenset(range(4)))
        assert cap == pytest.approx(1.0, abs=1e-10)


class TestSimulator:
    def test_unknown_rule_rejected(self):
        with pytest.raises(DomainError):
            simulate_game(simple_theta(), [CELL[0]], "nope", 10, 0)

    def test_seed_reproducibility(self):
        a = simulate_game(simple_theta(), [CELL[0]], "coin", 500, seed=3)
        b = simulate_game(simple_theta(), [CELL[0]], "coin", 500, seed=3)
        for k in a:
            assert np.array_equal(a[k], b[k])

    def test_delta_zero_matches_complete_model(self):
        theta = simple_theta(delta=(0.0, 0.0), beta=(0.3, -0.2), rho=0.4)
        data = simulate_game(theta, [CELL[0]], "always-10", 200_000, seed=8)
        law = empirical_law(data, 1)
        reg = psne_region_map(theta, CELL[0])
        uniq = reg.unique_region_probs()
        for k, o in enumerate(OUTCOMES):
            se = math.sqrt(uniq[o] * (1 - uniq[o]) / 200_000)
            assert law.probs[0][k] == pytest.approx(uniq[o], abs=4 * se + 1e-9)

    def test_always_01_hits_upper_envelope(self):
        theta = simple_theta()
        data = simulate_game(theta, [CELL[0]], "always-01", 400_000, seed=10)
        law = empirical_law(data, 1)
        reg = psne_region_map(theta, CELL[0])
        upper = bvn_rect(-math.inf, reg.breaks1[1], reg.t2, math.inf, theta.rho)
        se = math.sqrt(upper * (1 - upper) / 400_000)
        assert law.probs[0][2] == pytest.approx(upper, abs=4 * se)

    def test_selection_laws_are_members(self):
        theta = simple_theta(rho=-0.3)
        for rule in ("always-10", "coin", "threshold"):
            data = simulate_game(theta, [CELL[0]], rule, 150_000, seed=12)
            law = empirical_law(data, 1)
            # sampling noise: 4 sigma slack on the sharp test
            ok, worst = psne_sharp_member(theta, law, CELL, tol=4.0 / math.sqrt(150_000))
            assert ok, (rule, worst)
