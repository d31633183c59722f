import numpy as np
import pytest

from fractransport.io import save_field_binary
from fractransport.solver import (
    Integrator, Operators, SolverConfig, Status, TrajectoryState, blowup_monitor, initial_data,
    phi1, phi2, rhs_eval, run, step, truncation,
)
from fractransport.spectral import Field, Grid, fractional_laplacian, hilbert_transform

TWO_PI = 2 * np.pi


def cfg_for(**kw):
    base = dict(alpha=1.5, nu=1.0, n_points=256, length=32.0, t_final=0.5, weight_lambda=None)
    base.update(kw)
    return SolverConfig(**base)


def test_config_validation():
    for bad in (dict(alpha=2.0), dict(alpha=-0.1), dict(nu=-1.0), dict(dt=0.0), dict(scheme="rk4"),
                dict(tail_fraction=0.0), dict(blowup_grad=-1.0), dict(probes=[0.9]), dict(n_points=100)):
        with pytest.raises(ValueError):
            cfg_for(**bad)
    with pytest.raises(ValueError):
        SolverConfig.from_dict({"alpha": 1.0, "bogus": 1})
    cfg = cfg_for(probes=[0.5, 0.1])
    assert cfg.probes == [0.1, 0.5]
    assert SolverConfig.from_dict(cfg.to_dict()) == cfg


def test_default_probes():
    assert cfg_for().probe_times() == pytest.approx(np.linspace(0, 0.5, 11))
    assert all(type(t) is float for t in cfg_for().probe_times())


# --- initial data ------------------------------------------------------------------


def test_truncation_profile():
    x = np.linspace(-3, 3, 601)
    psi = truncation(x, 1.0)
    assert np.all(psi[np.abs(x) <= 1] == 1.0)
    assert np.all(psi[np.abs(x) >= 2] == 0.0)
    assert np.all((psi >= 0) & (psi <= 1))


def test_truncated_gaussian_plateau_and_support():
    g = Grid(1024, 64.0)
    plain = initial_data("gaussian", g, {"amplitude": 1, "width": 1})
    cut = initial_data("gaussian", g, {"amplitude": 1, "width": 1}, R=10)
    inner = np.abs(g.nodes) <= 10
    assert np.array_equal(cut.values[inner], plain.values[inner])
    for kind in ("gaussian", "odd_gaussian_derivative", "cosine_bump"):
        f = initial_data(kind, g, {"width": 8.0, "offset": 0.0}, R=5)
        assert np.all(f.values[np.abs(g.nodes) >= 10] == 0.0)


def test_truncation_window_too_large():
    with pytest.raises(ValueError):
        initial_data("gaussian", Grid(256, 40.0), R=9.0)
    with pytest.raises(ValueError):
        initial_data("gaussian", Grid(256, 40.0), R=-1.0)


def test_initial_data_kinds():
    g = Grid(256, 2 * np.pi)
    odd = initial_data("odd_gaussian_derivative", g)
    assert np.allclose(odd.values[1:], -odd.values[1:][::-1])
    cos = initial_data("cosine_bump", g, {"amplitude": 2, "width": np.pi, "offset": 0.5})
    assert np.allclose(cos.values, 1.5 + np.cos(g.nodes), atol=1e-14)
    with pytest.raises(ValueError):
        initial_data("triangle", g)


def test_positivity_check():
    g = Grid(256, 2 * np.pi)
    with pytest.raises(ValueError):
        initial_data("odd_gaussian_derivative", g, require_positive=True)
    f = initial_data("gaussian", g, {"offset": 0.1}, require_positive=True)
    assert f.values.min() > 0


def test_from_file_round_trip(tmp_path):
    g = Grid(128, 10.0)
    f = Field(g, np.random.default_rng(0).standard_normal(128))
    path = tmp_path / "f.bin"
    save_field_binary(path, f)
    back = initial_data("from_file", g, {"path": str(path)})
    assert np.array_equal(back.values, f.values)
    with pytest.raises(ValueError):
        initial_data("from_file", Grid(256, 10.0), {"path": str(path)})


# --- right-hand side ---------------------------------------------------------------


def test_rhs_constant_is_steady():
    cfg = cfg_for()
    c = Field(cfg.grid, np.full(256, 3.0))
    assert np.max(np.abs(rhs_eval(c, cfg).values)) < 1e-14
    for a in (0.0, 1.0, 0.5):
        assert np.max(np.abs(rhs_eval(c, cfg_for(a_param=a)).values)) < 1e-14


def test_rhs_linear_part():
    cfg = cfg_for(length=TWO_PI, nu=0.7, nonlinear=False)
    x = cfg.grid.nodes
    out = rhs_eval(Field(cfg.grid, np.sin(5 * x)), cfg).values
    assert np.allclose(out, -0.7 * 5**1.5 * np.sin(5 * x), atol=1e-12)


def test_rhs_matches_fine_grid_finite_differences():
    n = 256
    cfg = cfg_for(length=TWO_PI, n_points=n, nu=0.3)
    rng = np.random.default_rng(1)
    amps = rng.standard_normal((2, 20))

    def sample(x):
        m = np.arange(1, 21)[:, None]
        return (amps[0][:, None] * np.cos(m * x) + amps[1][:, None] * np.sin(m * x)).sum(0) / m.ravel()[:, None].sum()

    coarse = Field(cfg.grid, sample(cfg.grid.nodes))
    got = rhs_eval(coarse, cfg).values
    fine = Grid(4 * n, TWO_PI)
    f = fine.sample(sample)
    h = fine.spacing
    v = f.values
    dx = (8 * (np.roll(v, -1) - np.roll(v, 1)) - (np.roll(v, -2) - np.roll(v, 2))) / (12 * h)
    expect = -dx * hilbert_transform(f).values - 0.3 * fractional_laplacian(f, 1.5).values
    assert np.max(np.abs(got - expect[::4])) < 1e-6 * np.max(np.abs(expect))


def test_rhs_generalised_family():
    cfg = cfg_for(length=TWO_PI, a_param=1.0, nu=0.0)
    x = cfg.grid.nodes
    w = Field(cfg.grid, np.cos(x) + 0.5 * np.sin(2 * x))
    v = np.cos(x) + 0.25 * np.sin(2 * x)  # v_x = H w, zero mean
    hw = -np.sin(x) + 0.5 * np.cos(2 * x)
    wx = -np.sin(x) + np.cos(2 * x)
    expect = -1.0 * v * wx + w.values * hw
    assert np.allclose(rhs_eval(w, cfg).values, expect, atol=1e-12)


# --- time stepping -----------------------------------------------------------------


def test_phi_functions_small_arguments():
    z = np.array([-1e-9, -1e-3, -0.5, -30.0])
    assert np.allclose(phi1(z), np.expm1(z) / z, rtol=1e-12)
    exact = (np.expm1(z) - z) / z**2
    assert np.allclose(phi2(z[1:]), exact[1:], rtol=1e-8)
    assert phi2(np.array([0.0]))[0] == 0.5


def test_etd2_linear_decay_per_step():
    cfg = cfg_for(length=TWO_PI, nonlinear=False, dt=0.01, cfl_safety=None)
    x = cfg.grid.nodes
    state = TrajectoryState(0.0, Field(cfg.grid, np.sin(3 * x)))
    new = step(state, cfg)
    assert new.time == 0.01 and new.steps == 1 and new.status is Status.RUNNING
    expect = np.exp(-(3**1.5) * 0.01) * np.sin(3 * x)
    assert np.max(np.abs(new.theta.values - expect)) < 1e-12


@pytest.mark.parametrize("alpha", [0.6, 1.0, 1.5])
def test_linear_exactness_full_run(alpha):
    cfg = cfg_for(alpha=alpha, length=TWO_PI, nonlinear=False, t_final=0.5, dt=0.01, cfl_safety=None)
    x = cfg.grid.nodes
    res = run(cfg, Field(cfg.grid, np.sin(3 * x)), record_energy=False)
    err = np.max(np.abs(res.snapshots[-1].values - np.exp(-(3**alpha) * 0.5) * np.sin(3 * x)))
    assert res.status is Status.COMPLETED and err < 1e-10


def test_zero_field_stays_zero():
    cfg = cfg_for()
    res = run(cfg, Field(cfg.grid, np.zeros(256)))
    assert all(np.all(s.values == 0) for s in res.snapshots)
    assert res.status is Status.COMPLETED


def test_t_final_zero_returns_initial_data():
    cfg = cfg_for(t_final=0.0)
    th = initial_data("gaussian", cfg.grid)
    res = run(cfg, th)
    assert res.times == [0.0]
    assert np.array_equal(res.snapshots[0].values, th.values)


def _final(cfg, th):
    return run(cfg, th, record_energy=False).snapshots[-1].values


@pytest.mark.parametrize("scheme", ["etd2", "imex_bdf2"])
def test_self_convergence_order(scheme):
    base = dict(length=TWO_PI, n_points=128, nu=0.5, t_final=0.4, probes=[0.4], cfl_safety=None,
                scheme=scheme)
    th = initial_data("cosine_bump", cfg_for(**base).grid, {"amplitude": 1, "width": np.pi, "offset": 1})
    sols = [_final(cfg_for(dt=dt, **base), th) for dt in (0.02, 0.01, 0.005)]
    e1 = np.max(np.abs(sols[0] - sols[1]))
    e2 = np.max(np.abs(sols[1] - sols[2]))
    assert np.log2(e1 / e2) >= 1.8


def test_schemes_agree():
    base = dict(length=TWO_PI, n_points=128, nu=1.0, t_final=0.5, probes=[0.5], dt=1e-3, cfl_safety=None)
    th = initial_data("cosine_bump", cfg_for(**base).grid, {"amplitude": 1, "width": np.pi, "offset": 1})
    a = _final(cfg_for(scheme="etd2", **base), th)
    b = _final(cfg_for(scheme="imex_bdf2", **base), th)
    assert np.max(np.abs(a - b)) < 1e-5


def test_probe_times_are_hit_exactly():
    cfg = cfg_for(probes=[0.0, 0.123, 0.4, 0.5], dt=0.05)
    res = run(cfg, initial_data("gaussian", cfg.grid))
    assert res.times == [0.0, 0.123, 0.4, 0.5]
    assert [r.time for r in res.records] == res.times


def test_subcritical_run_maximum_principle():
    cfg = cfg_for(length=64.0, n_points=512, t_final=2.0)
    th = initial_data("gaussian", cfg.grid, {"amplitude": 1, "width": 1})
    res = run(cfg, th)
    sups = [s.sup() for s in res.snapshots]
    assert res.status is Status.COMPLETED
    assert all(b <= a * (1 + 1e-6) for a, b in zip(sups, sups[1:]))


def test_determinism():
    cfg = cfg_for(nu=0.1, t_final=0.3)
    th = initial_data("gaussian", cfg.grid)
    a = run(cfg, th).snapshots[-1].values
    b = run(cfg, th).snapshots[-1].values
    assert np.array_equal(a, b)


def test_monitor_trips_on_gradient_threshold():
    cfg = cfg_for(blowup_grad=1.0)
    x = cfg.grid.nodes
    # ||theta_x||_inf = 2 for sin(2 k0 x) scaled so the gradient is twice the threshold
    k0 = TWO_PI / cfg.length
    th = Field(cfg.grid, np.sin(k0 * x) * 2 / k0)
    ops = Operators(cfg)
    status, reason = blowup_monitor(np.fft.rfft(th.values), ops, cfg.blowup_grad)
    assert status is Status.BLOWUP_SUSPECTED and "gradient" in reason
    res = run(cfg, th)
    assert res.status is Status.BLOWUP_SUSPECTED and res.steps == 1


def test_monitor_quiet_on_smooth_decay():
    cfg = cfg_for(t_final=1.0)
    integ = Integrator(cfg, initial_data("gaussian", cfg.grid))
    assert integ.advance_to(1.0) is Status.RUNNING


def test_monitor_time_step_floor():
    # the CFL step on this grid is below 0.0125
    cfg = cfg_for(dt_min=0.05, dt=0.1)
    res = run(cfg, initial_data("gaussian", cfg.grid))
    assert res.status is Status.BLOWUP_SUSPECTED and "dt_min" in res.reason


def test_tail_trip_precedes_nan_when_under_resolved():
    base = dict(alpha=1.5, nu=0.0, n_points=64, length=TWO_PI, t_final=5.0, probes=[5.0], dt=0.05,
                cfl_safety=None, blowup_growth=1e12, weight_lambda=None, dealias=False)
    th = initial_data("cosine_bump", Grid(64, TWO_PI), {"amplitude": 2, "width": np.pi, "offset": 0.5})
    tripped = run(SolverConfig(**base), th, record_energy=False)
    assert tripped.status is Status.BLOWUP_SUSPECTED and "tail" in tripped.reason
    assert np.all(np.isfinite(tripped.snapshots[-1].values))
    # with the tail monitor effectively off, the same run goes non-finite later
    loose = run(SolverConfig(**{**base, "tail_fraction": 1.0, "blowup_grad": 1e300}), th, record_energy=False)
    assert loose.status is Status.POISONED
    assert loose.final_time > tripped.final_time


def test_step_refuses_finished_state():
    cfg = cfg_for()
    st = TrajectoryState(0.0, initial_data("gaussian", cfg.grid), status=Status.COMPLETED)
    with pytest.raises(ValueError):
        step(st, cfg)
