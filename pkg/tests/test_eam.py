import math

import numpy as np
import pytest

from sharpbounds.eam import (
    DomainError,
    EamProblem,
    Surrogate,
    eam_solve,
    expected_improvement,
    fit_surrogate,
)


def linear_problem(budget=60, epsilon=0.1):
    # maximize theta1 over [0,1]^2 subject to theta1 + theta2 <= 1
    return EamProblem(
        box=((0, 1), (0, 1)),
        direction=np.array([1.0, 0.0]),
        constraint=lambda t: t[0] + t[1],
        critical=lambda t: 1.0,
        budget=budget,
        epsilon=epsilon,
    )


def sinusoidal_problem(budget=100):
    return EamProblem(
        box=((0, 1), (0, 1)),
        direction=np.array([1.0, 0.0]),
        constraint=lambda t: t[0] + t[1],
        critical=lambda t: 1.0 + 0.2 * math.sin(4.0 * t[0]),
        budget=budget,
    )


def sinusoidal_grid_oracle(points=1000):
    # separable: optimum has theta2 = 0; scan theta1 on a fine grid
    t1 = np.linspace(0, 1, points)
    feas = t1 <= 1.0 + 0.2 * np.sin(4.0 * t1)
    return t1[feas].max()


class TestSurrogate:
    def test_two_point_interpolation(self):
        s = fit_surrogate(np.array([[0.0], [1.0]]), np.array([0.3, 0.9]), seed=1)
        mean, sd = s.predict(np.array([[0.0], [1.0]]))
        assert np.allclose(mean, [0.3, 0.9], atol=3 * math.sqrt(s.nugget))
        assert np.all(sd <= 3 * math.sqrt(s.nugget) + 1e-8)

    def test_linear_surface_accuracy(self):
        rng = np.random.default_rng(3)
        x = rng.uniform(size=(10, 2))
        y = 0.5 + 2.0 * x[:, 0] - 1.0 * x[:, 1]
        s = fit_surrogate(x, y, seed=2)
        test = rng.uniform(0.1, 0.9, size=(50, 2))
        mean, _ = s.predict(test)
        want = 0.5 + 2.0 * test[:, 0] - test[:, 1]
        assert np.max(np.abs(mean - want)) < 1e-3

    def test_duplicates_rejected(self):
        with pytest.raises(DomainError):
            fit_surrogate(np.array([[0.5], [0.5]]), np.array([1.0, 1.0]))

    def test_training_interpolation_invariant(self):
        rng = np.random.default_rng(5)
        x = rng.uniform(size=(15, 2))
        y = np.sin(3 * x[:, 0]) + x[:, 1] ** 2
        s = fit_surrogate(x, y, seed=3)
        mean, sd = s.predict(x)
        assert np.max(np.abs(mean - y)) <= 3 * math.sqrt(s.nugget) + 1e-6
        assert np.all(sd**2 <= 3 * s.nugget + 1e-8)


class TestExpectedImprovement:
    def surrogate(self):
        return fit_surrogate(
            np.array([[0.0, 0.0], [1.0, 1.0], [0.5, 0.2]]), np.array([1.0, 1.0, 1.0]), seed=1
        )

    def test_zero_below_incumbent(self):
        s = self.surrogate()
        assert expected_improvement(s, [0.2, 0.2], 0.5, g_bar=0.0, direction=[1, 0]) == 0.0

    def test_deep_feasibility_approaches_gain(self):
        s = self.surrogate()
        ei = expected_improvement(s, [0.9, 0.1], -0.1, g_bar=-50.0, direction=[1, 0])
        assert ei == pytest.approx(1.0, abs=1e-6)

    def test_half_probability_at_zero_slack(self):
        # improvement 2, standardized slack 0: EI = 2 * 0.5 = 1
        s = self.surrogate()
        theta = np.array([2.0, 0.0])
        mean, sd = s.predict(theta.reshape(1, -1))
        assert sd[0] > 0
        ei = expected_improvement(s, theta, 0.0, g_bar=float(mean[0]), direction=[1, 0])
        assert ei == pytest.approx(2.0 * 0.5, abs=1e-9)

    def test_degenerate_sd_indicator(self):
        s = self.surrogate()
        s2 = Surrogate(
            x=s.x, y=s.y, lengthscales=s.lengthscales, signal_var=0.0,
            nugget=s.nugget, y_mean=s.y_mean,
        )
        s2.finalize()
        ei_feas = expected_improvement(s2, [0.9, 0.0], 0.0, g_bar=-1.0, direction=[1, 0])
        ei_infeas = expected_improvement(s2, [0.9, 0.0], 0.0, g_bar=5.0, direction=[1, 0])
        assert ei_feas == pytest.approx(0.9, abs=1e-9)
        assert ei_infeas == 0.0


class TestSolver:
    def test_linear_benchmark(self):
        res = eam_solve(linear_problem(budget=50), seed=0)
        assert res["feasible"]
        assert res["value"] == pytest.approx(1.0, abs=1e-6)
        assert res["calls"] <= 50

    def test_incumbents_nondecreasing_and_truly_feasible(self):
        res = eam_solve(sinusoidal_problem(), seed=1)
        incs = [e["incumbent"] for e in res["log"]]
        assert all(b >= a for a, b in zip(incs, incs[1:]))
        for e in res["log"]:
            if e["feasible"]:
                assert e["g"] <= e["c"] + 1e-12

    def test_sinusoidal_matches_grid_oracle(self):
        oracle = sinusoidal_grid_oracle(1_000_000)
        res = eam_solve(sinusoidal_problem(budget=100), seed=2)
        assert res["calls"] <= 100
        assert res["value"] == pytest.approx(oracle, abs=1e-3)
        assert res["value"] <= oracle + 1e-12  # never exceeds the truth

    def test_epsilon_one_random_search_still_converges(self):
        prob = linear_problem(budget=300, epsilon=0.999)
        prob.stall_iters = 10_000  # let pure random search run its budget
        res = eam_solve(prob, seed=3)
        assert res["feasible"]
        assert res["value"] > 0.8
        incs = [e["incumbent"] for e in res["log"]]
        assert all(b >= a for a, b in zip(incs, incs[1:]))

    def test_budget_exhausted_no_feasible_point(self):
        prob = EamProblem(
            box=((0, 1),), direction=np.array([1.0]),
            constraint=lambda t: 1.0, critical=lambda t: -1.0, budget=15,
        )
        res = eam_solve(prob, seed=4)
        assert not res["feasible"]
        assert math.isnan(res["value"])

    def test_call_count_equals_log_length(self):
        calls = {"n": 0}

        def c(t):
            calls["n"] += 1
            return 1.0

        prob = EamProblem(
            box=((0, 1), (0, 1)), direction=np.array([1.0, 0.0]),
            constraint=lambda t: t[0] + t[1], critical=c, budget=40,
        )
        res = eam_solve(prob, seed=5)
        assert calls["n"] == len(res["log"]) == res["calls"]

    def test_deterministic_given_seed(self):
        a = eam_solve(sinusoidal_problem(budget=40), seed=6)
        b = eam_solve(sinusoidal_problem(budget=40), seed=6)
        assert a["value"] == b["value"]
        assert a["calls"] == b["calls"]

    def test_monotone_in_budget(self):
        vals = [eam_solve(sinusoidal_problem(budget=b), seed=7)["value"] for b in (25, 60, 100)]
        assert vals[0] <= vals[1] + 1e-9 <= vals[2] + 2e-9
