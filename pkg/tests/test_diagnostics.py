import numpy as np
import pytest

from fractransport.diagnostics import (
    CSV_COLUMNS, EnergyRecord, check_cordoba_inequality, check_energy_growth, check_maximum_principle,
    check_pointwise_sobolev_inequality, energy_record, extrema_drift, fit_h2_monitor, gagliardo_integrand,
    read_energy_csv, sobolev_index, write_energy_csv,
)
from fractransport.solver import SolverConfig, initial_data, run
from fractransport.spectral import Field, Grid
from fractransport.weights import UNIT_WEIGHT, Weight

TWO_PI = 2 * np.pi
W = Weight(0.5, 2)


def record(t, e, d=0.0, sup=1.0):
    return EnergyRecord(t, e, e, d, 0.0, sup, 0.0, e, d, 0.0)


def test_sobolev_index():
    assert sobolev_index(0.6) == pytest.approx(0.9)
    assert sobolev_index(1.5) == 0.0
    assert sobolev_index(1.6) == 0.0


def test_zero_record():
    g = Grid(128, 10.0)
    r = energy_record(Field(g, np.zeros(128)), W, 1.0)
    assert r.l2w == r.hkw == r.dissipation == r.sup == r.grad_sup == r.h2w == 0.0
    assert not r.poisoned


def test_l2w_matches_quadrature_unit_weight():
    g = Grid(1024, 40.0)
    f = Field(g, np.exp(-g.nodes**2))
    r = energy_record(f, UNIT_WEIGHT, 1.0)
    assert r.l2w == pytest.approx(np.sqrt(np.pi / 2), abs=1e-10)


def test_hkw_collapses_for_large_alpha():
    g = Grid(256, 20.0)
    f = Field(g, np.exp(-g.nodes**2))
    r = energy_record(f, W, 1.6)
    assert r.k == 0.0 and r.hkw == r.l2w
    r2 = energy_record(f, W, 0.6)
    assert r2.k == pytest.approx(0.9) and r2.hkw > r2.l2w


def test_dissipation_of_a_single_mode():
    g = Grid(256, TWO_PI)
    f = Field(g, np.sin(4 * g.nodes))
    r = energy_record(f, UNIT_WEIGHT, 1.0)
    assert r.dissipation == pytest.approx(4 * np.pi, rel=1e-12)
    assert r.grad_sup == pytest.approx(4.0, rel=1e-12)


def test_poisoned_record():
    g = Grid(16, 1.0)

    class Raw:
        grid = g
        values = np.full(16, np.nan)

    r = energy_record(Raw(), W, 1.0)
    assert r.poisoned and np.isnan(r.l2w)


def test_energy_csv_round_trip(tmp_path):
    g = Grid(128, 10.0)
    recs = [energy_record(Field(g, np.exp(-(g.nodes - c) ** 2)), W, 1.0, time=c) for c in (0.0, 0.5)]
    path = tmp_path / "e.csv"
    write_energy_csv(path, recs)
    assert open(path).readline().strip() == ",".join(CSV_COLUMNS)
    rows = read_energy_csv(path)
    assert len(rows) == 2
    assert rows[1]["l2w"] == recs[1].l2w and rows[1]["t"] == 0.5


# --- energy growth --------------------------------------------------------------


def test_growth_undefined_for_short_series():
    rep = check_energy_growth([record(0, 1.0), record(1, 1.0)], nu=1.0)
    assert rep.undefined and np.isnan(rep.c_fit)
    with pytest.raises(ValueError):
        check_energy_growth([record(0, 1.0)] * 3, nu=1.0, norm="h1")


def test_growth_on_exact_exponential():
    t = np.linspace(0, 1, 11)
    recs = [record(ti, np.exp(0.3 * ti)) for ti in t]
    rep = check_energy_growth(recs, nu=0.0)
    assert rep.c_fit == pytest.approx(0.3, rel=2e-2) and rep.c_fit >= 0.3
    assert rep.integral_ok


def test_growth_on_heat_flow_is_nonpositive():
    cfg = SolverConfig(alpha=1.0, nu=1.0, n_points=512, length=64.0, t_final=1.0, nonlinear=False,
                       weight_lambda=None)
    res = run(cfg, initial_data("gaussian", cfg.grid), weight=UNIT_WEIGHT)
    rep = check_energy_growth(res.records, nu=1.0)
    # unweighted linear flow: dE/dt = -2 nu D exactly, up to the trapezoid error
    assert rep.c_fit <= 1e-2
    assert rep.integral_ok


# --- maximum principle ----------------------------------------------------------


def test_maximum_principle_pass_and_injected_failure():
    assert check_maximum_principle([1.0, 0.9, 0.8]).passed
    rep = check_maximum_principle([1.0, 0.9, 1.01, 0.5])
    assert not rep.passed and rep.worst_index == 2 and rep.rel_excess == pytest.approx(0.01)
    assert check_maximum_principle([record(0, 1, sup=2.0), record(1, 1, sup=2.0)]).passed
    assert not check_maximum_principle([1.0, np.nan]).passed
    with pytest.raises(ValueError):
        check_maximum_principle([])


def test_extrema_drift():
    g = Grid(16, 1.0)
    snaps = [Field(g, np.linspace(-1, 1, 16) * a) for a in (1.0, 0.5, 0.6)]
    rise, fall = extrema_drift([0.0, 1.0, 2.0], snaps)
    assert rise == pytest.approx(0.1) and fall == pytest.approx(0.1)


# --- Cordoba ---------------------------------------------------------------------


def test_cordoba_examples():
    g = Grid(256, TWO_PI)
    const = check_cordoba_inequality(Field(g, np.full(256, 2.0)))
    assert const.passed and abs(const.margin) < 1e-12
    rep = check_cordoba_inequality(Field(g, 2 + np.sin(g.nodes)))
    # strict inequality for non-constant positive data
    assert rep.passed and rep.violation == 0.0 and rep.margin < 0
    with pytest.raises(ValueError):
        check_cordoba_inequality(Field(g, np.sin(g.nodes)))


@pytest.mark.parametrize("seed", range(5))
def test_cordoba_random_positive(seed):
    g = Grid(512, TWO_PI)
    rng = np.random.default_rng(seed)
    m = np.arange(1, 9)[:, None]
    v = (rng.standard_normal((8, 1)) * np.cos(m * g.nodes) / m**2).sum(0)
    v = v - v.min() + 0.1
    assert check_cordoba_inequality(Field(g, v), alpha=0.7).passed


# --- pointwise Sobolev inequality -----------------------------------------------


def test_mazya_constant_field_is_degenerate():
    g = Grid(256, 32.0)
    rep = check_pointwise_sobolev_inequality(Field(g, np.zeros(256)), 0.5)
    assert rep.fitted_constant == 0.0 and not rep.flagged


def test_mazya_scale_invariance():
    g = Grid(1024, 64.0)
    f = Field(g, np.exp(-g.nodes**2))
    a = check_pointwise_sobolev_inequality(f, 0.5).fitted_constant
    b = check_pointwise_sobolev_inequality(f * 7.0, 0.5).fitted_constant
    assert abs(a - b) / a < 1e-12


def test_mazya_refinement_drift():
    cs = [check_pointwise_sobolev_inequality(Field(g, np.exp(-g.nodes**2)), 0.5).fitted_constant
          for g in (Grid(1024, 64.0), Grid(2048, 64.0))]
    assert np.isfinite(cs).all() and abs(cs[1] - cs[0]) / cs[1] < 0.05


def test_mazya_rejects_other_exponents():
    g = Grid(64, 8.0)
    with pytest.raises(NotImplementedError):
        check_pointwise_sobolev_inequality(Field(g, np.zeros(64)), 0.5, p=3)
    with pytest.raises(ValueError):
        gagliardo_integrand(Field(g, np.zeros(64)), 1.0)


def test_gagliardo_integrand_quadratic_scaling():
    g = Grid(512, 32.0)
    f = Field(g, np.exp(-g.nodes**2))
    a = gagliardo_integrand(f, 0.4)
    assert np.allclose(gagliardo_integrand(f * 3.0, 0.4), 9 * a, rtol=1e-12)
    assert np.all(a >= 0)


# --- H^2 monitor -----------------------------------------------------------------


def test_h2_monitor_fit():
    recs = [EnergyRecord(t, 1, 1, 0, 0, 1, 0, y, 0.0, 0) for t, y in ((0, 1.0), (1, 4.0), (2, 4.0))]
    rep = fit_h2_monitor(recs, nu=0.0, powers=(2.0,))
    # one term: a = 3 / X^2 with X^2 = 2.5
    assert rep.coefficients["2"] == pytest.approx(3 / 2.5)
    assert rep.finite and rep.lhs == [3.0, 0.0]
    with pytest.raises(ValueError):
        fit_h2_monitor(recs[:1], nu=0.0)


def test_h2_monitor_decaying_flow_has_zero_coefficients():
    recs = [EnergyRecord(t, 1, 1, 0, 0, 1, 0, np.exp(-t), 0.0, 0) for t in np.linspace(0, 1, 5)]
    rep = fit_h2_monitor(recs, nu=1.0)
    assert all(v == 0.0 for v in rep.coefficients.values())
    assert set(rep.coefficients) == {"2", "4", "5.33333"}
