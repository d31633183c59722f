"""Verification suites run by ``fractransport verify``.

Each suite takes a parameter dict (missing keys fall back to the defaults
below) and returns ``(report, passed)``; ``report`` is JSON-serialisable.
The pass conditions are frozen regression bounds.
"""

from __future__ import annotations

import math

import numpy as np

from .commutators import commutator_norm_estimate, commutator_hypothesis, verify_lambda_alpha_weight_bound
from .diagnostics import check_cordoba_inequality, check_pointwise_sobolev_inequality
from .littlewood_paley import bernstein_check, build_filter_bank, reconstruct
from .spectral import Field, Grid
from .weights import UNIT_WEIGHT, Weight, ap_constant_for_weight, check_pointwise_weight_inequality


class PreconditionError(ValueError):
    """Suite parameters violate a hypothesis the checked statement needs."""


DEFAULTS = {
    "commutator": {"matrix": [[0.6, 0.25, 2], [1.5, 0.5, 2], [1.5, 0.9, 4]],
                "grids": [[2048, 200.0], [4096, 200.0]], "n_random": 100, "seed": 0,
                "max_drift": 0.2},
    "weight_ratio": {"lambda": 0.5, "kappa": 2, "n_pairs": 10**6, "sample_factor": 4,
                 "half_width": 100.0, "seed": 0, "check_factor": 1.01, "max_drift": 0.1},
    "weight_laplacian": {"alphas": [0.6, 1.0, 1.5], "lambda": 0.5, "kappa": 2, "n_points": 1024,
                "lengths": [400.0, 800.0], "max_drift": 0.1},
    "bernstein": {"n_points": 4096, "length": 200.0, "s": 0.5, "lambda": 0.5, "kappa": 2,
                  "seed": 0, "min_bands": 8, "slack": 0.1, "max_residual": 1e-10},
    "cordoba": {"n_points": [512, 1024, 2048], "tol": 1e-6},
    "mazya": {"n_points": [1024, 2048], "length": 64.0, "s": 0.5, "width": 1.0,
              "max_drift": 0.1, "scale_tol": 1e-12},
    "ap": {"unit": False, "lambda": 0.5, "kappa": 2, "p": 2.0, "n_points": [4096, 8192],
           "length": 200.0, "max_drift": 0.05, "unit_tol": 1e-12},
}


def _params(name, params):
    p = dict(DEFAULTS[name])
    unknown = set(params or {}) - set(p)
    if unknown:
        raise ValueError(f"unknown parameters for suite {name}: {sorted(unknown)}")
    p.update(params or {})
    return p


def _drift(a, b):
    return abs(b - a) / abs(a) if a else (0.0 if b == a else math.inf)


def suite_commutator(params=None):
    p = _params("commutator", params)
    grids = [Grid(int(n), float(L)) for n, L in p["grids"]]
    rows = []
    for alpha, lam, kappa in p["matrix"]:
        if not commutator_hypothesis(alpha, lam):
            raise PreconditionError(
                f"(alpha={alpha}, lambda={lam}) violates the commutator hypothesis "
                "(supercritical alpha needs lambda < alpha/2)")
        w = Weight(lam, kappa, alpha)
        rep = commutator_norm_estimate(w, alpha, grids, p["n_random"], p["seed"])
        drift = rep.refinement_drift
        ok = math.isfinite(rep.sup_estimate) and drift < p["max_drift"]
        rows.append({"alpha": alpha, "lambda": lam, "kappa": kappa, "sup_estimate": rep.sup_estimate,
                     "argmax_kind": rep.argmax_kind, "trials": len(rep.rayleigh_quotients),
                     "trace": rep.refinement_trace, "drift": drift, "passed": ok})
    return {"suite": "commutator", "rows": rows}, all(r["passed"] for r in rows)


def suite_weight_ratio(params=None):
    p = _params("weight_ratio", params)
    w = Weight(p["lambda"], p["kappa"])
    base = check_pointwise_weight_inequality(w, p["n_pairs"], p["half_width"], p["seed"], p["check_factor"])
    big = check_pointwise_weight_inequality(w, p["n_pairs"] * p["sample_factor"], p["half_width"],
                                            p["seed"] + 1, p["check_factor"])
    drift = _drift(base.fitted_constant, big.fitted_constant)
    ok = base.violations == 0 and drift < p["max_drift"] and math.isfinite(base.fitted_constant)
    return {"suite": "weight_ratio", "fitted_constant": base.fitted_constant,
            "argmax": base.max_ratio_location, "violations": base.violations,
            "per_stratum": base.per_stratum, "fitted_constant_large_sample": big.fitted_constant,
            "drift": drift}, ok


def suite_weight_laplacian(params=None):
    p = _params("weight_laplacian", params)
    rows = []
    for alpha in p["alphas"]:
        w = Weight(p["lambda"], p["kappa"])
        grid = Grid(p["n_points"], p["lengths"][0])
        rep = verify_lambda_alpha_weight_bound(w, alpha, grid, lengths=p["lengths"])
        ok = math.isfinite(rep.sup_ratio) and rep.drift < p["max_drift"]
        rows.append({"alpha": alpha, "sup_ratio": rep.sup_ratio, "ratio_at_origin": rep.ratio_at_origin,
                     "trace": rep.trace, "drift": rep.drift, "quadrature_error": rep.quadrature_error,
                     "passed": ok})
    return {"suite": "weight_laplacian", "rows": rows}, all(r["passed"] for r in rows)


def white_noise(grid: Grid, seed: int = 0) -> Field:
    rng = np.random.default_rng(seed)
    return Field(grid, rng.standard_normal(grid.n_points))


def suite_bernstein(params=None):
    p = _params("bernstein", params)
    grid = Grid(p["n_points"], p["length"])
    bank = build_filter_bank(grid)
    f = white_noise(grid, p["seed"])
    w = Weight(p["lambda"], p["kappa"])
    rep = bernstein_check(bank, f, p["s"], w)
    resid = float(np.max(np.abs(reconstruct(f, bank).values - f.values)))
    lo = 2.0 ** (-p["s"]) * (1 - p["slack"])
    hi = 2.0 ** p["s"] * (1 + p["slack"])
    inside = all(lo <= r <= hi for r in rep.ratios.values())
    ok = (not rep.empty and rep.active_bands >= p["min_bands"] and inside
          and resid < p["max_residual"])
    return {"suite": "bernstein", "ratios": {str(j): r for j, r in rep.ratios.items()},
            "envelope": list(rep.envelope), "allowed": [lo, hi], "active_bands": rep.active_bands,
            "reconstruction_residual": resid}, ok


def suite_cordoba(params=None):
    p = _params("cordoba", params)
    rows = []
    for n in p["n_points"]:
        g = Grid(int(n), 2 * math.pi)
        rep = check_cordoba_inequality(Field(g, 2 + np.sin(g.nodes)), p["tol"])
        rows.append({"n_points": n, "violation": rep.violation, "margin": rep.margin,
                     "scale": rep.scale, "passed": rep.passed})
    viol = [r["violation"] for r in rows]
    monotone = all(b <= a for a, b in zip(viol, viol[1:]))
    return {"suite": "cordoba", "rows": rows, "nonincreasing": monotone}, \
        monotone and all(r["passed"] for r in rows)


def suite_mazya(params=None):
    p = _params("mazya", params)
    rows = []
    for n in p["n_points"]:
        g = Grid(int(n), p["length"])
        th = Field(g, np.exp(-(g.nodes / p["width"]) ** 2))
        rep = check_pointwise_sobolev_inequality(th, p["s"])
        scaled = check_pointwise_sobolev_inequality(Field(g, 2 * th.values), p["s"])
        scale_err = float(np.max(np.abs(scaled.ratios - rep.ratios)) / max(rep.fitted_constant, 1e-300))
        rows.append({"n_points": n, "fitted_constant": rep.fitted_constant, "argmax": rep.argmax,
                     "flagged": rep.flagged, "scale_error": scale_err})
    drift = _drift(rows[0]["fitted_constant"], rows[-1]["fitted_constant"])
    ok = (all(math.isfinite(r["fitted_constant"]) and not r["flagged"] and r["scale_error"] <= p["scale_tol"]
              for r in rows) and drift < p["max_drift"])
    return {"suite": "mazya", "rows": rows, "drift": drift}, ok


def suite_ap(params=None):
    p = _params("ap", params)
    w = UNIT_WEIGHT if p["unit"] else Weight(p["lambda"], p["kappa"])
    rows = []
    for n in p["n_points"]:
        rep = ap_constant_for_weight(w, Grid(int(n), p["length"]), p["p"])
        rows.append({"n_points": n, "constant": rep.constant,
                     "interval_family_size": rep.interval_family_size,
                     "trace": rep.refinement_trace})
    consts = [r["constant"] for r in rows]
    drift = _drift(consts[0], consts[-1])
    if p["unit"]:
        ok = all(abs(c - 1.0) <= p["unit_tol"] for c in consts)
    else:
        ok = all(math.isfinite(c) for c in consts) and drift < p["max_drift"]
    return {"suite": "ap", "p": p["p"], "lambda": w.lam, "kappa": w.kappa, "rows": rows,
            "drift": drift}, ok


SUITES = {
    "commutator": suite_commutator,
    "weight_ratio": suite_weight_ratio,
    "weight_laplacian": suite_weight_laplacian,
    "bernstein": suite_bernstein,
    "cordoba": suite_cordoba,
    "mazya": suite_mazya,
    "ap": suite_ap,
}
