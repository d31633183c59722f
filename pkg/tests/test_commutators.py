import json

import numpy as np
import pytest

from fractransport.commutators import (
    commutator_apply, commutator_kernel, commutator_norm_estimate, kernel_bound_constant,
    kernel_branches_integrable, lambda_alpha_weight, commutator_hypothesis, rayleigh_quotient, trial_plan,
    verify_lambda_alpha_weight_bound,
)
from fractransport.spectral import DomainTooSmallError, Field, Grid, fractional_laplacian, fractional_power
from fractransport.weights import UNIT_WEIGHT, Weight

W = Weight(0.5, 2)
GRID = Grid(1024, 80.0)


def gaussian(grid, width=1.0, center=0.0):
    return Field(grid, np.exp(-((grid.nodes - center) / width) ** 2))


def test_unit_weight_commutes():
    out = commutator_apply(gaussian(GRID), UNIT_WEIGHT, 1.2)
    assert np.max(np.abs(out.values)) < 1e-14


def test_constant_input():
    c = Field(GRID, np.full(GRID.n_points, 2.5))
    out = commutator_apply(c, W, 1.0, check_decay=False).values
    wf = Field(GRID, W(GRID.nodes))
    assert np.max(np.abs(out - 2.5 * fractional_power(wf, 0.5).values)) < 1e-12


def test_decay_is_checked():
    with pytest.raises(DomainTooSmallError):
        commutator_apply(gaussian(GRID, width=20.0), W, 1.0)


def test_linearity():
    f = gaussian(GRID)
    g = gaussian(GRID, 2.0, 3.0)
    lhs = commutator_apply(2 * f - g * 0.5, W, 1.5).values
    rhs = 2 * commutator_apply(f, W, 1.5).values - 0.5 * commutator_apply(g, W, 1.5).values
    assert np.max(np.abs(lhs - rhs)) < 1e-10


@pytest.mark.parametrize("alpha", [0.6, 1.0, 1.5])
def test_kernel_oracle_matches_multiplier(alpha):
    g = Grid(2048, 80.0)
    f = gaussian(g)
    w = Weight(0.25 if alpha < 1 else 0.5, 2)
    ref = commutator_apply(f, w, alpha).values
    oracle = commutator_kernel(f, w, alpha).values
    inner = np.abs(g.nodes) <= 20
    assert np.max(np.abs(oracle - ref)[inner]) / np.max(np.abs(ref)) < 1e-3


def test_hypothesis_predicates():
    assert commutator_hypothesis(0.6, 0.25) and not commutator_hypothesis(0.6, 0.3)
    assert commutator_hypothesis(1.5, 0.9) and not commutator_hypothesis(1.0, 0.2)
    assert kernel_branches_integrable(0.6, 0.25) == (True, True)
    assert kernel_branches_integrable(0.6, 0.35) == (True, False)
    # the far branch of the kernel majorant needs lambda < alpha / 2 for every alpha
    assert kernel_branches_integrable(1.5, 0.9) == (True, False)


def test_norm_estimate_rejects_bad_regime():
    with pytest.raises(ValueError):
        commutator_norm_estimate(Weight(0.4, 2), 0.6, grids=(Grid(256, 200.0),), n_random=2)


def test_trial_plan():
    plan = trial_plan(200.0, 10.0, n_random=100, seed=0)
    kinds = {t.kind for t in plan}
    assert sum(t.kind == "random" for t in plan) == 100
    assert len(kinds) >= 3
    assert [repr(t) for t in plan] == [repr(t) for t in trial_plan(200.0, 10.0, 100, 0)]


def test_norm_estimate_small():
    rep = commutator_norm_estimate(W, 1.5, grids=(Grid(1024, 200.0), Grid(2048, 200.0)), n_random=10)
    assert len(rep.rayleigh_quotients) >= 10
    assert all(np.isfinite(q) and q >= 0 for q in rep.rayleigh_quotients)
    assert rep.sup_estimate == max(rep.rayleigh_quotients)
    assert rep.refinement_drift < 0.2
    d = json.loads(rep.to_json())
    assert d["sup_estimate"] == rep.sup_estimate


def test_norm_estimate_unit_weight():
    rep = commutator_norm_estimate(UNIT_WEIGHT, 1.0, grids=(Grid(1024, 200.0),), n_random=10)
    assert rep.sup_estimate < 1e-10


def test_rayleigh_quotient_scale_invariant():
    f = gaussian(GRID)
    assert rayleigh_quotient(3 * f, W, 1.2) == pytest.approx(rayleigh_quotient(f, W, 1.2), rel=1e-12)


def test_kernel_bound_constant_finite():
    c = kernel_bound_constant(gaussian(Grid(1024, 80.0)), W, 1.5)
    assert np.isfinite(c) and c > 0


def test_lambda_alpha_weight_matches_multiplier_on_decaying_data():
    # for a Gaussian the real-line quadrature and the torus multiplier agree closely
    g = Grid(2048, 80.0)

    class Bump:
        lam = 0.0

        def __call__(self, x):
            return np.exp(-np.asarray(x, dtype=float) ** 2)

    idx = [1024, 1037, 1057]
    x = g.nodes[idx]
    vals, err = lambda_alpha_weight(x, Bump(), 1.5)
    ref = fractional_laplacian(g.sample(Bump()), 1.5)
    assert np.max(np.abs(vals - ref.values[idx])) < 1e-3 * np.max(np.abs(ref.values))
    assert err < 1e-8


def test_weight_bound_examples():
    rep = verify_lambda_alpha_weight_bound(W, 1.0, Grid(256, 400.0), max_samples=33)
    assert np.isfinite(rep.sup_ratio) and rep.drift < 0.1
    at0, _ = lambda_alpha_weight(np.array([0.0]), W, 1.0)
    assert rep.ratio_at_origin == pytest.approx(abs(at0[0]))
    sups = [verify_lambda_alpha_weight_bound(Weight(lam, 2), 1.0, Grid(256, 400.0), lengths=[400.0],
                                             max_samples=33).sup_ratio
            for lam in (0.05, 0.2, 0.5, 0.8)]
    assert all(b > a for a, b in zip(sups, sups[1:]))
