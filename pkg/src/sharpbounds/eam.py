"""Evaluation-Approximation-Maximization solver for constrained projection
problems max u.theta s.t. g_j(theta) <= c(theta), where the critical-level
surface c is expensive and deterministic.

The expensive surface is approximated by Gaussian-process regression on the
evaluated points; candidate points maximize expected improvement against the
surrogate, but every reported incumbent is feasible under the true
constraints, so the answer never leans on the approximation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.stats import qmc

from .randomset import DomainError

NUGGET = 1e-10


@dataclass
class EamProblem:
    box: Sequence[tuple[float, float]]
    direction: np.ndarray
    constraint: Callable  # theta -> max_j g_j(theta), cheap
    critical: Callable  # theta -> c(theta), expensive and deterministic
    budget: int = 100
    epsilon: float = 0.1
    stall_iters: int = 10
    tol: float = 1e-6
    initial: int | None = None  # default max(10, 5 d)

    def __post_init__(self):
        self.direction = np.asarray(self.direction, dtype=float)
        self.box = tuple((float(lo), float(hi)) for lo, hi in self.box)
        if any(lo >= hi for lo, hi in self.box):
            raise DomainError("empty box")
        if not 0.0 < self.epsilon < 1.0:
            raise DomainError("epsilon must lie in (0, 1)")
        k = self.initial if self.initial is not None else max(10, 5 * len(self.box))
        if self.budget < k:
            raise DomainError("budget smaller than the initial design")

    @property
    def dim(self) -> int:
        return len(self.box)

    @property
    def k_init(self) -> int:
        return self.initial if self.initial is not None else max(10, 5 * self.dim)


@dataclass
class Surrogate:
    """GP posterior for the critical surface: anisotropic squared-exponential
    kernel, hyperparameters from marginal-likelihood ascent."""

    x: np.ndarray
    y: np.ndarray
    lengthscales: np.ndarray
    signal_var: float
    nugget: float
    _chol: np.ndarray = field(repr=False, default=None)
    _alpha: np.ndarray = field(repr=False, default=None)
    y_mean: float = 0.0

    def _k(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        d = (a[:, None, :] - b[None, :, :]) / self.lengthscales
        return self.signal_var * np.exp(-0.5 * np.sum(d * d, axis=-1))

    def finalize(self):
        K = self._k(self.x, self.x) + self.nugget * np.eye(len(self.x))
        self._chol = np.linalg.cholesky(K)
        resid = self.y - self.y_mean
        self._alpha = np.linalg.solve(self._chol.T, np.linalg.solve(self._chol, resid))
        return self

    def predict(self, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        pts = np.atleast_2d(pts)
        ks = self._k(pts, self.x)
        mean = self.y_mean + ks @ self._alpha
        v = np.linalg.solve(self._chol, ks.T)
        var = np.maximum(self.signal_var - np.sum(v * v, axis=0), 0.0)
        return mean, np.sqrt(var)


def _nll(log_params, x, y, nugget):
    d = x.shape[1]
    ls = np.exp(log_params[:d])
    sv = np.exp(log_params[d])
    diff = (x[:, None, :] - x[None, :, :]) / ls
    K = sv * np.exp(-0.5 * np.sum(diff * diff, axis=-1)) + nugget * np.eye(len(x))
    try:
        L = np.linalg.cholesky(K)
    except np.linalg.LinAlgError:
        return 1e12
    resid = y - y.mean()
    alpha = np.linalg.solve(L.T, np.linalg.solve(L, resid))
    return float(0.5 * resid @ alpha + np.sum(np.log(np.diag(L))))


def fit_surrogate(
    x: np.ndarray, y: np.ndarray, seed: int = 0, restarts: int = 5, nugget: float = NUGGET
) -> Surrogate:
    """Fit the GP by marginal-likelihood ascent with seeded restarts."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=float)
    if len(x) < 2:
        raise DomainError("need at least two points")
    if len(np.unique(x, axis=0)) < 2:
        raise DomainError("duplicate-only inputs")
    d = x.shape[1]
    span = np.maximum(x.max(axis=0) - x.min(axis=0), 1e-6)
    y_scale = max(float(np.std(y)), 1e-8)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 101]))
    best = None
    starts = [np.concatenate([np.log(span), [2 * math.log(y_scale)]])]
    for _ in range(restarts - 1):
        starts.append(
            np.concatenate([
                np.log(span * rng.uniform(0.1, 2.0, size=d)),
                [2 * math.log(y_scale) + rng.uniform(-2, 2)],
            ])
        )
    bounds = [(math.log(s) - 6, math.log(s) + 4) for s in span] + [
        (2 * math.log(y_scale) - 10, 2 * math.log(y_scale) + 6)
    ]
    for s0 in starts:
        res = minimize(_nll, s0, args=(x, y, nugget), method="L-BFGS-B", bounds=bounds)
        if best is None or res.fun < best.fun:
            best = res
    ls = np.exp(best.x[:d])
    sv = float(np.exp(best.x[d]))
    return Surrogate(
        x=x, y=y, lengthscales=ls, signal_var=sv, nugget=nugget, y_mean=float(y.mean())
    ).finalize()


def expected_improvement(
    surrogate: Surrogate, theta, incumbent_value: float, g_bar: float, direction
) -> float:
    """EI(theta) = (u.theta - incumbent)_+ (1 - Phi((g - c_hat)/sd)).

    With a degenerate posterior the probability term collapses to the
    feasibility indicator of the posterior mean.
    """
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    mean, sd = surrogate.predict(theta)
    gain = max(float(np.dot(theta[0], direction)) - incumbent_value, 0.0)
    if gain == 0.0:
        return 0.0
    if sd[0] <= 0.0:
        return gain if g_bar - mean[0] <= 0 else 0.0
    z = (g_bar - mean[0]) / sd[0]
    return gain * (1.0 - 0.5 * math.erfc(-z / math.sqrt(2.0)))


def _ei_batch(surrogate, pts, incumbent_value, g_vals, direction):
    from scipy.special import ndtr

    mean, sd = surrogate.predict(pts)
    gain = np.maximum(pts @ direction - incumbent_value, 0.0)
    safe_sd = np.where(sd > 0, sd, 1.0)
    prob = np.where(sd > 0, 1.0 - ndtr((g_vals - mean) / safe_sd), (g_vals <= mean) * 1.0)
    return gain * prob


def eam_solve(problem: EamProblem, seed: int = 0) -> dict:
    """Run the E-A-M loop and report the best point feasible under the true
    constraints among all evaluated points.

    The log records every expensive evaluation (the call count equals the log
    length); incumbents are nondecreasing by construction.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, 7]))
    lo = np.array([b[0] for b in problem.box])
    hi = np.array([b[1] for b in problem.box])
    u = problem.direction

    evals: list[dict] = []
    xs: list[np.ndarray] = []
    cs: list[float] = []

    def evaluate(theta) -> None:
        theta = np.clip(theta, lo, hi)
        c_val = float(problem.critical(theta))
        g_val = float(problem.constraint(theta))
        feasible = g_val <= c_val
        xs.append(theta)
        cs.append(c_val)
        value = float(theta @ u)
        prev = evals[-1]["incumbent"] if evals else -math.inf
        inc = max(prev, value) if feasible else prev
        evals.append({
            "iteration": len(evals), "theta": theta.tolist(), "c": c_val, "g": g_val,
            "feasible": feasible, "value": value, "incumbent": inc,
        })

    # Step 1: uniform initial design, true-c evaluations
    for _ in range(problem.k_init):
        evaluate(lo + (hi - lo) * rng.uniform(size=problem.dim))

    sobol = qmc.Sobol(d=problem.dim, scramble=True, seed=seed)
    stall = 0
    while len(evals) < problem.budget:
        incumbent = evals[-1]["incumbent"]
        inc_eff = incumbent if incumbent > -math.inf else float(min(x @ u for x in xs))
        if rng.uniform() < problem.epsilon:
            theta_next = lo + (hi - lo) * rng.uniform(size=problem.dim)
        else:
            surrogate = fit_surrogate(np.array(xs), np.array(cs), seed=seed)
            cand = lo + (hi - lo) * sobol.random(512)
            g_cand = np.array([problem.constraint(t) for t in cand])
            ei = _ei_batch(surrogate, cand, inc_eff, g_cand, u)
            order = np.argsort(ei)[::-1][:5]
            best_theta, best_ei = cand[order[0]], ei[order[0]]
            for idx in order:
                res = minimize(
                    lambda t: -_ei_batch(
                        surrogate, np.clip(t, lo, hi).reshape(1, -1), inc_eff,
                        np.array([problem.constraint(np.clip(t, lo, hi))]), u,
                    )[0],
                    cand[idx], method="Nelder-Mead",
                    options={"maxiter": 80, "xatol": 1e-9, "fatol": 1e-12},
                )
                if -res.fun > best_ei:
                    best_ei = -res.fun
                    best_theta = np.clip(res.x, lo, hi)
            theta_next = best_theta
        before = evals[-1]["incumbent"]
        evaluate(theta_next)
        after = evals[-1]["incumbent"]
        stall = stall + 1 if after - before < problem.tol else 0
        if stall >= problem.stall_iters and any(e["feasible"] for e in evals):
            break

    # Step 3: report against the true constraints only
    feas = [e for e in evals if e["feasible"]]
    if not feas:
        return {"feasible": False, "value": math.nan, "argmax": None,
                "calls": len(evals), "log": evals}
    best = max(feas, key=lambda e: e["value"])
    return {"feasible": True, "value": best["value"], "argmax": best["theta"],
            "calls": len(evals), "log": evals}


def write_log_csv(log: list[dict], path: str) -> None:
    """Audit trail of the expensive evaluations:
    iteration, theta..., c, feasible, incumbent."""
    from .util import write_csv

    if not log:
        write_csv(path, ["iteration", "c", "g", "feasible", "incumbent"], [])
        return
    dim = len(log[0]["theta"])
    header = ["iteration"] + [f"theta{k + 1}" for k in range(dim)] + [
        "c", "g", "feasible", "incumbent",
    ]
    rows = [
        [e["iteration"], *e["theta"], e["c"], e["g"], int(e["feasible"]), e["incumbent"]]
        for e in log
    ]
    write_csv(path, header, rows)
