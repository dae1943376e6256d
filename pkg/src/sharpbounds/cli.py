"""Command-line front end: config-driven runs of every analysis with
deterministic JSON result envelopes.

Exit codes: 0 success, 2 input error, 3 refutation / empty region /
rejection, 4 numerical non-convergence or oracle disagreement. Wall-clock
timing goes to stderr only, so envelopes are byte-identical across reruns
with the same config and seed.
"""

from __future__ import annotations

import argparse
import csv
import importlib.resources as resources
import json
import math
import sys
import time

import numpy as np
from jsonschema import Draft202012Validator

from . import __version__, auctions, blp, games, npbounds
from .inference import (
    CriterionSpec,
    Dataset,
    EstimatorSpec,
    calibrated_projection_ci,
    confidence_set,
    half_median_unbiased_estimate,
    interval_mean_model,
    intersection_bounds_model,
    profile_ci,
    set_estimate,
    specification_test,
)
from .randomset import (
    FiniteRandomSet,
    SelectionDistribution,
    in_convex_hull_of_laws,
    is_selectionable,
    selection_oracle,
)
from .util import canonical_json, write_csv

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_REFUTED = 3
EXIT_NONCONV = 4

COMMANDS = ("bounds", "region", "infer", "project", "spectest", "simulate", "oracle")


class InputError(Exception):
    pass


class RefutedResult(Exception):
    def __init__(self, payload):
        self.payload = payload


class NonConvergence(Exception):
    def __init__(self, payload):
        self.payload = payload


def _schema(command: str) -> dict:
    ref = resources.files("sharpbounds.schemas").joinpath(f"{command}.json")
    return json.loads(ref.read_text())


def validate_config(config: dict) -> None:
    command = config.get("command")
    if command not in COMMANDS:
        raise InputError(f"unknown command {command!r}")
    validator = Draft202012Validator(_schema(command))
    errors = sorted(validator.iter_errors(config), key=lambda e: e.json_path)
    if errors:
        raise InputError("; ".join(e.message for e in errors[:5]))


def read_csv_columns(path: str) -> dict:
    try:
        with open(path, newline="") as f:
            reader = csv.reader(f)
            header = next(reader)
            rows = [r for r in reader if r]
    except (OSError, StopIteration) as exc:
        raise InputError(f"cannot read CSV {path}: {exc}") from exc
    cols: dict[str, list] = {h: [] for h in header}
    for r in rows:
        if len(r) != len(header):
            raise InputError(f"malformed CSV row in {path}: {r}")
        for h, v in zip(header, r):
            cols[h].append(v)

    def parse(vals):
        out = []
        for v in vals:
            if v == "":
                out.append(math.nan)
            else:
                try:
                    out.append(float(v))
                except ValueError:
                    raise InputError(f"non-numeric CSV value {v!r}") from None
        return np.array(out)

    return {h: parse(v) for h, v in cols.items()}


def _require(cols: dict, names, path: str) -> None:
    missing = [n for n in names if n not in cols]
    if missing:
        raise InputError(f"CSV {path} lacks required columns {missing}")


def _region_payload(reg) -> dict:
    return reg.to_json()


# ---------------------------------------------------------------------------
# command handlers


def cmd_bounds(config: dict) -> tuple[dict, list, int]:
    params = config.get("params", {})
    kind = config["kind"]
    path = config["input"]
    cols = read_csv_columns(path)
    warnings: list[str] = []

    if kind in ("mean-missing", "quantile-missing", "cdf-band", "cdf-sharp"):
        _require(cols, ["y", "d"], path)
        d = cols["d"].astype(int)
        y_obs = cols["y"][d == 1]
        if np.any(np.isnan(y_obs)):
            raise InputError("observed rows with missing y")
        p_obs = float(d.mean()) if len(d) else 1.0
        cm = _cell_from_observed(y_obs, p_obs, params)
        if kind == "mean-missing":
            payload = {"bound": npbounds.mean_bounds_missing(cm).to_json()}
        elif kind == "quantile-missing":
            b = npbounds.quantile_bounds_missing(cm, float(params.get("alpha", 0.5)))
            payload = {"bound": b.to_json()}
            warnings += list(b.flags)
        elif kind == "cdf-band":
            grid = params.get("grid") or sorted(set(np.round(y_obs, 12)))
            band = npbounds.cdf_pointwise_band(cm, grid)
            payload = {"band": [{"t": t, **b.to_json()} for t, b in band]}
        else:
            cand = params["candidate"]
            F = _piecewise_cdf(cand["grid"], cand["values"])
            ok, worst = npbounds.cdf_sharp_member(F, cm, params.get("grid", list(cm.support_points)))
            payload = {"member": ok, "worst": _jsonify(worst)}
            if not ok:
                raise RefutedResult(payload)
        return payload, warnings, EXIT_OK

    if kind == "interval-mean":
        _require(cols, ["yl", "yu"], path)
        b = npbounds.interval_outcome_mean_bounds(float(cols["yl"].mean()), float(cols["yu"].mean()))
        return {"bound": b.to_json()}, warnings, EXIT_OK

    if kind in ("treatment-worstcase", "treatment-mtr", "ate-worstcase", "intersection"):
        _require(cols, ["y", "s"], path)
        y0, y1 = float(params["y0"]), float(params["y1"])
        if kind == "intersection":
            _require(cols, ["z"], path)
            cells = _treatment_cells_by_z(cols, y0, y1)
            b = npbounds.intersection_bounds(cells, params["arm"])
            payload = {"bound": b.to_json()}
            if b.empty:
                raise RefutedResult(payload)
            return payload, warnings, EXIT_OK
        tm = _treatment_moments(cols["y"], cols["s"].astype(int), y0, y1)
        if kind == "treatment-worstcase":
            b = npbounds.treatment_worstcase(tm, params["arm"])
        elif kind == "treatment-mtr":
            b = npbounds.treatment_mtr(tm, params["arm"])
        else:
            b = npbounds.ate_worstcase(tm, params["t1"], params["t0"])
        return {"bound": b.to_json()}, warnings, EXIT_OK

    if kind == "monotone-regression":
        _require(cols, ["xl", "xu", "ey"], path)
        cells = {(xl, xu): ey for xl, xu, ey in zip(cols["xl"], cols["xu"], cols["ey"])}
        b = npbounds.monotone_regression_bounds(
            cells, float(params["x"]), float(params["g0"]), float(params["g1"])
        )
        payload = {"bound": b.to_json()}
        if b.empty:
            raise RefutedResult(payload)
        return payload, list(b.flags), EXIT_OK

    raise InputError(f"unknown bounds kind {kind!r}")


def _cell_from_observed(y_obs: np.ndarray, p_obs: float, params: dict) -> npbounds.CellMoments:
    g = params.get("g", {"type": "identity"})
    if g.get("type") == "indicator":
        t = float(g["t"])
        vals = (y_obs <= t).astype(float)
        g0, g1 = 0.0, 1.0
    else:
        vals = y_obs.astype(float)
        g0 = float(g.get("g0", vals.min() if len(vals) else 0.0))
        g1 = float(g.get("g1", vals.max() if len(vals) else 1.0))
    sorted_vals = np.sort(vals)

    def quantile(u: float) -> float:
        if len(sorted_vals) == 0:
            return g0
        k = max(1, math.ceil(u * len(sorted_vals)))
        return float(sorted_vals[min(k, len(sorted_vals)) - 1])

    def interval_prob(a: float, b: float) -> float:
        if len(vals) == 0 or b < a:
            return 0.0
        return float(np.mean((vals >= a) & (vals <= b)))

    support = sorted(set(np.round(vals, 12).tolist()))
    if len(support) > 64:
        # continuous data: exhaustive pair grids are out of reach, keep
        # quantile knots (discrete data stays exhaustive, hence sharp)
        qs = np.quantile(vals, np.linspace(0, 1, 64))
        support = sorted(set(np.round(qs, 12).tolist()))
    return npbounds.CellMoments(
        p_obs=p_obs, g0=g0, g1=g1,
        mean_obs=float(vals.mean()) if len(vals) else None,
        quantile_fn_obs=quantile, interval_prob=interval_prob,
        support_points=tuple(support),
    )


def _piecewise_cdf(grid, values):
    g = np.asarray(grid, dtype=float)
    v = np.asarray(values, dtype=float)

    def F(t):
        return float(np.interp(t, g, v, left=0.0, right=1.0))

    return F


def _treatment_moments(y, s, y0, y1) -> npbounds.TreatmentMoments:
    arms = tuple(sorted(set(int(a) for a in s)))
    p = {t: float(np.mean(s == t)) for t in arms}
    mean = {t: (float(y[s == t].mean()) if p[t] > 0 else 0.5 * (y0 + y1)) for t in arms}
    return npbounds.TreatmentMoments(arms, p, mean, y0, y1)


def _treatment_cells_by_z(cols, y0, y1):
    z = cols["z"].astype(int)
    return [
        _treatment_moments(cols["y"][z == zv], cols["s"][z == zv].astype(int), y0, y1)
        for zv in sorted(set(z.tolist()))
    ]


def cmd_region(config: dict) -> tuple[dict, list, int]:
    params = config.get("params", {})
    kind = config["kind"]
    path = config["input"]
    cols = read_csv_columns(path)
    seed = int(config.get("seed", 0))
    threads = int(config.get("threads", 1))
    warnings: list[str] = []

    if kind == "blp":
        _require(cols, ["yl", "yu", "x"], path)
        sample = blp.IntervalSample(yl=cols["yl"], yu=cols["yu"], x=cols["x"])
        reg = blp.blp_region(sample, grid_size=int(params.get("grid_size", 256)))
        payload = {
            "support": reg.support_table(),
            "polygon": reg.polygon(int(params.get("polygon_size", 128))).tolist(),
            "slope": [-reg.support([0.0, -1.0]), reg.support([0.0, 1.0])],
            "intercept": [-reg.support([-1.0, 0.0]), reg.support([1.0, 0.0])],
        }
        return payload, warnings, EXIT_OK

    if kind == "blp-xy-member":
        _require(cols, ["yl", "yu", "xl", "xu"], path)
        sample = blp.IntervalSample(yl=cols["yl"], yu=cols["yu"], xl=cols["xl"], xu=cols["xu"])
        ok, val = blp.blp_xy_member(sample, params["theta"])
        return {"member": ok, "criterion": val, "slack": blp.MEMBER_SLACK}, warnings, EXIT_OK

    if kind == "entry-game-scan":
        _require(cols, ["cell", "y1", "y2"], path)
        cells = [games.GameCell(**c) for c in params["cells"]]
        model = games.entry_game_model(
            cells, float(params.get("delta1", 0.0)), float(params.get("delta2", 0.0)),
            float(params.get("rho", 0.0)), tuple(tuple(b) for b in params["box"]),
        )
        spec = CriterionSpec(model, params.get("flavor", "sum"))
        est = EstimatorSpec(
            resolution=int(params.get("resolution", 21)),
            tau=params.get("tau"), seed=seed,
        )
        data = Dataset({k: cols[k] for k in ("cell", "y1", "y2")})
        n_grid = est.resolution ** 2 if est.grid is None else len(est.grid)
        print(f"[sharpbounds] scanning {n_grid} grid points", file=sys.stderr)
        reg = set_estimate(spec, est, data)
        payload = _region_payload(reg)
        if reg.is_empty():
            raise RefutedResult(payload)
        if config.get("oracle"):
            payload["oracle"] = _game_scan_oracle(params, data, reg)
        return payload, warnings, EXIT_OK

    if kind == "entry-game-member":
        _require(cols, ["cell", "p00", "p10", "p01", "p11"], path)
        law = games.OutcomeLaw({
            int(c): np.array([p00, p10, p01, p11])
            for c, p00, p10, p01, p11 in zip(
                cols["cell"], cols["p00"], cols["p10"], cols["p01"], cols["p11"]
            )
        })
        cells = {i: games.GameCell(**c) for i, c in enumerate(params["cells"])}
        theta = games.GameTheta(**params["theta"])
        concept = params.get("concept", "psne-sharp")
        if concept == "psne-sharp":
            ok, detail = games.psne_sharp_member(theta, law, cells)
        elif concept == "ct-outer":
            ok, detail = games.ct_outer_member(theta, law, cells)
        elif concept == "msne":
            mc = games.MonteCarloSpec(
                draws=int(params.get("draws", 200_000)), seed=seed, threads=threads
            )
            ok, detail = games.msne_sharp_member(theta, law, cells, mc)
            if any(v.get("indeterminate") for v in detail.values()):
                raise NonConvergence({"member": None, "detail": _jsonify(detail)})
        elif concept == "bne":
            ok, detail = games.bne_sharp_member(theta, law, cells)
        else:
            raise InputError(f"unknown solution concept {concept!r}")
        payload = {"member": ok, "detail": _jsonify(detail)}
        return payload, warnings, EXIT_OK

    if kind == "auction-band":
        data = _bid_data(cols, params)
        band = auctions.ht_band(data, params["grid"])
        payload = {"band": band.to_rows(), "refuted": band.refuted}
        warnings += list(band.warnings)
        if params.get("band_csv"):
            write_csv(
                params["band_csv"], ["v", "lower", "upper"],
                list(zip(band.grid.tolist(), band.lower.tolist(), band.upper.tolist())),
            )
        if band.refuted:
            raise RefutedResult(payload)
        return payload, warnings, EXIT_OK

    if kind == "auction-member":
        data = _bid_data(cols, params)
        cand = auctions.CandidateCdf(
            grid=tuple(params["candidate"]["grid"]), values=tuple(params["candidate"]["values"])
        )
        ok, worst = auctions.auction_sharp_member(
            cand, data, draws=int(params.get("draws", 20_000)), seed=seed, threads=threads
        )
        return {"member": ok, "worst": _jsonify(worst)}, warnings, EXIT_OK

    if kind == "binary-choice":
        _require(cols, ["w", "xl", "xu", "p1", "mass"], path)
        cells = list(zip(cols["w"], cols["xl"], cols["xu"], cols["p1"], cols["mass"]))
        from .inference import make_grid

        grid = make_grid([tuple(b) for b in params["box"]], int(params.get("resolution", 41)))
        reg = npbounds.binary_choice_region(cells, float(params.get("alpha", 0.5)), grid)
        payload = _region_payload(reg)
        if reg.is_empty():
            raise RefutedResult(payload)
        return payload, warnings, EXIT_OK

    raise InputError(f"unknown region kind {kind!r}")


def _bid_data(cols, params) -> auctions.BidData:
    if "n" not in cols:
        raise InputError("auction CSV needs columns auction_id,n,b1..")
    rows = []
    ns = cols["n"].astype(int)
    for i, n in enumerate(ns):
        bids = [cols[f"b{j}"][i] for j in range(1, n + 1)]
        rows.append((int(n), bids))
    return auctions.BidData(
        auctions=rows, delta=float(params.get("delta", 0.0)),
        v_lo=float(params.get("v_lo", 0.0)), v_hi=float(params.get("v_hi", 1.0)),
    )


def _game_scan_oracle(params, data, reg) -> dict:
    """Cross-check sharp verdicts against the selection-enumeration oracle on
    the scanned grid (small fixtures only)."""
    cells = [games.GameCell(**c) for c in params["cells"]]
    law = games.empirical_law(
        {"cell": data["cell"].astype(int), "y1": data["y1"].astype(int), "y2": data["y2"].astype(int)},
        len(cells),
    )
    agree = 0
    total = 0
    for th in reg.grid[:: max(1, len(reg.grid) // 50)]:
        theta = games.GameTheta(
            beta1=float(th[0]), beta2=float(th[1]),
            delta1=float(params.get("delta1", 0.0)), delta2=float(params.get("delta2", 0.0)),
            rho=float(params.get("rho", 0.0)),
        )
        sharp = games.psne_sharp_member(theta, law, dict(enumerate(cells)), tol=1e-6)[0]
        art = True
        for key, p in law.cells():
            regmap = games.psne_region_map(theta, cells[key])
            atom_probs: dict = {}
            for a in range(3):
                for b in range(3):
                    pr = regmap.cell_prob(a, b)
                    if pr > 0:
                        s = regmap.equilibria(a, b)
                        atom_probs[s] = atom_probs.get(s, 0.0) + pr
            total_p = math.fsum(atom_probs.values())
            rs = FiniteRandomSet(range(4), [(set(s), p_ / total_p) for s, p_ in atom_probs.items()])
            mu = SelectionDistribution(range(4), dict(enumerate(p)))
            if not is_selectionable(rs, mu, tol=1e-6).selectionable:
                art = False
        agree += sharp == art
        total += 1
    return {"cases": total, "agreements": agree}


def _make_model(config: dict):
    params = config.get("params", {})
    if config["model"] == "interval-mean":
        box = params.get("box", (-2.0, 3.0))
        return interval_mean_model(box[0], box[1]), ("yl", "yu")
    box = tuple(tuple(b) for b in params.get("box", [(-0.5, 1.5)]))
    return (
        intersection_bounds_model(
            float(params.get("y0", 0.0)), float(params.get("y1", 1.0)),
            int(params.get("arm", 1)), params.get("z_values", [0, 1]), box,
        ),
        ("y", "s", "z"),
    )


def _estimator(config: dict) -> EstimatorSpec:
    e = dict(config.get("estimator", {}))
    return EstimatorSpec(
        resolution=int(e.get("resolution", 201)),
        tau=e.get("tau"),
        bootstrap_reps=int(e.get("reps", 200)),
        seed=int(config.get("seed", 0)),
        alpha=float(e.get("alpha", 0.05)),
        coverage=e.get("coverage", "point-pointwise"),
    )


def cmd_infer(config: dict) -> tuple[dict, list, int]:
    model, needed = _make_model(config)
    cols = read_csv_columns(config["input"])
    _require(cols, needed, config["input"])
    data = Dataset({k: cols[k] for k in needed})
    spec = CriterionSpec(model, config.get("params", {}).get("flavor", "max"))
    est = _estimator(config)
    estimate = set_estimate(spec, est, data)
    cs = confidence_set(spec, est, data)
    hmu = half_median_unbiased_estimate(spec, est, data)
    payload = {
        "estimate": _region_payload(estimate),
        "confidence_set": _region_payload(cs),
        "half_median_unbiased": _region_payload(hmu),
    }
    region_csv = config.get("params", {}).get("region_csv")
    if region_csv:
        cs.to_csv(region_csv)
    if cs.is_empty():
        raise RefutedResult(payload)
    return payload, [], EXIT_OK


def cmd_project(config: dict) -> tuple[dict, list, int]:
    model, needed = _make_model(config)
    cols = read_csv_columns(config["input"])
    _require(cols, needed, config["input"])
    data = Dataset({k: cols[k] for k in needed})
    spec = CriterionSpec(model, config.get("params", {}).get("flavor", "max"))
    est = _estimator(config)
    u = np.asarray(config["direction"], dtype=float)
    params = config.get("params", {})
    if config.get("method", "profile") == "profile":
        out = profile_ci(spec, est, data, u)
    else:
        out = calibrated_projection_ci(
            spec, est, data, u, solver=config.get("solver", "grid"),
            eam_budget=int(params.get("eam_budget", 120)),
            return_logs=bool(params.get("log_csv")),
        )
        if params.get("log_csv"):
            from .eam import write_log_csv

            write_log_csv(out.pop("log"), params["log_csv"])
    if out.get("empty"):
        raise RefutedResult(_jsonify(out))
    return _jsonify(out), [], EXIT_OK


def cmd_spectest(config: dict) -> tuple[dict, list, int]:
    model, needed = _make_model(config)
    cols = read_csv_columns(config["input"])
    _require(cols, needed, config["input"])
    data = Dataset({k: cols[k] for k in needed})
    spec = CriterionSpec(model, config.get("params", {}).get("flavor", "max"))
    out = specification_test(spec, _estimator(config), data)
    if out["reject"]:
        raise RefutedResult(out)
    return out, [], EXIT_OK


def cmd_simulate(config: dict) -> tuple[dict, list, int]:
    params = config.get("params", {})
    dgp = config["dgp"]
    n = int(config["n"])
    seed = int(config.get("seed", 0))
    out_path = config["out"]

    if dgp == "entry-game":
        theta = games.GameTheta(**params.get("theta", {"beta1": 0.0, "beta2": 0.0, "delta1": -1.0, "delta2": -1.0}))
        cells = [games.GameCell(**c) for c in params.get("cells", [{"x1": 0.0, "x2": 0.0}])]
        if n == 0:
            write_csv(out_path, ["cell", "y1", "y2"], [])
        else:
            data = games.simulate_game(theta, cells, params.get("selection", "coin"), n, seed)
            write_csv(
                out_path, ["cell", "y1", "y2"],
                list(zip(data["cell"].tolist(), data["y1"].tolist(), data["y2"].tolist())),
            )
    elif dgp == "auction":
        nb = int(params.get("bidders", 2))
        header = ["auction_id", "n"] + [f"b{j}" for j in range(1, nb + 1)]
        if n == 0:
            write_csv(out_path, header, [])
        else:
            data = auctions.simulate_auction(
                lambda u: u, nb, params.get("rule", "button"), float(params.get("delta", 0.0)),
                n, seed,
            )
            rows = [[i, nn] + list(bids) for i, (nn, bids) in enumerate(data.auctions)]
            write_csv(out_path, header, rows)
    elif dgp == "missing-data":
        rng = np.random.default_rng(np.random.SeedSequence([seed, 11]))
        p_obs = float(params.get("p_obs", 2 / 3))
        d = (rng.uniform(size=n) < p_obs).astype(int)
        y = rng.uniform(0.0, float(params.get("y_max", 3.0)), size=n)
        rows = [[y[i] if d[i] else None, d[i]] for i in range(n)]
        write_csv(out_path, ["y", "d"], rows)
    elif dgp == "interval-data":
        rng = np.random.default_rng(np.random.SeedSequence([seed, 13]))
        w = float(params.get("width", 0.25))
        th0, th1 = params.get("theta", (0.2, 0.8))
        x = rng.integers(0, 2, size=n).astype(float)
        y = th0 + th1 * x + rng.normal(scale=float(params.get("sigma", 0.3)), size=n)
        rows = list(zip((y - w).tolist(), (y + w).tolist(), x.tolist()))
        write_csv(out_path, ["yl", "yu", "x"], rows)
    else:
        raise InputError(f"unknown dgp {dgp!r}")
    return {"written": out_path, "rows": n, "dgp": dgp}, [], EXIT_OK


def cmd_oracle(config: dict) -> tuple[dict, list, int]:
    target = config["target"]
    cases = int(config.get("cases", 100))
    seed = int(config.get("seed", 0))
    rng = np.random.default_rng(np.random.SeedSequence([seed, 17]))
    disagreements = 0

    if target == "selection":
        for i in range(cases):
            rs = _random_finite_set(rng)
            mu = _random_selection_law(rng, rs)
            a = is_selectionable(rs, mu).selectionable
            b = in_convex_hull_of_laws(selection_oracle(rs), mu)
            disagreements += a != b
    elif target == "entry-game":
        cell = games.GameCell(x1=1.0, x2=1.0)
        for i in range(cases):
            theta = games.GameTheta(
                beta1=rng.normal(scale=0.7), beta2=rng.normal(scale=0.7),
                delta1=-rng.uniform(0, 1.5), delta2=-rng.uniform(0, 1.5),
                rho=rng.uniform(-0.9, 0.9),
            )
            p = games.law_from_selection_weights(theta, cell, rng.uniform())
            if i % 2:
                bump = rng.dirichlet(np.ones(4)) * rng.uniform(0.01, 0.2)
                p = (p + bump) / (p + bump).sum()
            law = games.OutcomeLaw({0: p})
            a = games.psne_sharp_member(theta, law, {0: cell})[0]
            b = games.ct_outer_member(theta, law, {0: cell})[0]
            disagreements += a != b
    elif target == "missing-cdf":
        for i in range(cases):
            k = int(rng.integers(2, 6))
            support = np.sort(rng.choice(np.arange(0.0, 8.0), size=k, replace=False))
            pmf_obs = rng.dirichlet(np.ones(k))
            p_obs = float(rng.uniform(0.3, 1.0))
            obs = dict(zip(support.tolist(), pmf_obs.tolist()))
            cm = npbounds.CellMoments(
                p_obs=p_obs, g0=float(support[0]), g1=float(support[-1]),
                mean_obs=float(np.dot(support, pmf_obs)),
                interval_prob=lambda a, b, obs=obs: math.fsum(
                    p for yv, p in obs.items() if a <= yv <= b
                ),
                support_points=tuple(support.tolist()),
            )
            rs = npbounds.missing_to_random_set(cm, obs)
            mu_pmf = dict(zip(rs.carrier, rng.dirichlet(np.ones(len(rs.carrier)))))
            F = lambda t, mu=mu_pmf: math.fsum(p for yv, p in mu.items() if yv <= t)
            F_left = lambda t, mu=mu_pmf: math.fsum(p for yv, p in mu.items() if yv < t)
            a, _ = npbounds.cdf_sharp_member(F, cm, rs.carrier, F_left=F_left)
            b = is_selectionable(rs, npbounds.pmf_to_selection(rs.carrier, mu_pmf)).selectionable
            disagreements += a != b
    else:
        raise InputError(f"unknown oracle target {target!r}")

    payload = {"target": target, "cases": cases, "disagreements": disagreements}
    if disagreements:
        raise NonConvergence(payload)
    return payload, [], EXIT_OK


def _random_finite_set(rng) -> FiniteRandomSet:
    import itertools

    n = int(rng.integers(1, 5))
    carrier = list(range(n))
    subsets = [frozenset(c) for r in range(1, n + 1) for c in itertools.combinations(carrier, r)]
    k = int(rng.integers(1, min(4, len(subsets)) + 1))
    picks = rng.choice(len(subsets), size=k, replace=False)
    w = rng.dirichlet(np.ones(k))
    return FiniteRandomSet(carrier, [(subsets[i], w[j]) for j, i in enumerate(picks)])


def _random_selection_law(rng, rs) -> SelectionDistribution:
    w = rng.dirichlet(np.ones(len(rs.carrier)))
    return SelectionDistribution(rs.carrier, dict(zip(rs.carrier, w)))


def _jsonify(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, frozenset):
        return sorted(obj)
    if isinstance(obj, float) and math.isnan(obj):
        return None
    return obj


HANDLERS = {
    "bounds": cmd_bounds,
    "region": cmd_region,
    "infer": cmd_infer,
    "project": cmd_project,
    "spectest": cmd_spectest,
    "simulate": cmd_simulate,
    "oracle": cmd_oracle,
}


def run(config: dict) -> tuple[dict, int]:
    """Validate, dispatch, and wrap the result in an envelope."""
    validate_config(config)
    started = time.monotonic()
    code = EXIT_OK
    try:
        payload, warnings, code = HANDLERS[config["command"]](config)
    except RefutedResult as r:
        payload, warnings, code = r.payload, [], EXIT_REFUTED
    except NonConvergence as r:
        payload, warnings, code = r.payload, [], EXIT_NONCONV
    elapsed = time.monotonic() - started
    envelope = {
        "tool_version": __version__,
        "command": config["command"],
        "config": json.loads(json.dumps(config, sort_keys=True)),
        "seed": int(config.get("seed", 0)),
        "warnings": list(warnings),
        "payload": _jsonify(payload),
        "timing_seconds": None,  # wall time goes to stderr to keep envelopes byte-stable
        "exit_code": code,
    }
    print(f"[sharpbounds] {config['command']} finished in {elapsed:.3f}s", file=sys.stderr)
    return envelope, code


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="sharpbounds", description=__doc__)
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="path to the JSON run configuration")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--threads", type=int, default=None, help="override the config thread count")
    parser.add_argument("--out", default=None, help="write the envelope here instead of stdout")
    args = parser.parse_args(argv)

    try:
        with open(args.config) as f:
            config = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot load config: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if not isinstance(config, dict):
        print("error: config must be a JSON object", file=sys.stderr)
        return EXIT_INPUT
    config.setdefault("command", args.command)
    if config["command"] != args.command:
        print("error: config command does not match the subcommand", file=sys.stderr)
        return EXIT_INPUT
    if args.seed is not None:
        config["seed"] = args.seed
    if args.threads is not None:
        config["threads"] = args.threads

    try:
        envelope, code = run(config)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except npbounds.DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT

    text = canonical_json(envelope)
    if args.out:
        with open(args.out, "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
