"""Pseudo-spectral integration of ``theta_t + theta_x H theta + nu Lambda^alpha theta = 0``.

The stiff dissipation ``-nu |k|^alpha`` is diagonal in Fourier space and is
propagated exactly (ETD2, the default) or implicitly (IMEX-BDF2).  The
quadratic nonlinearity is explicit and dealiased with the two-thirds rule.

``a_param = -1`` selects the transport equation above.  Any other value
selects the generalised family ``w_t + a v w_x - w H w = -nu Lambda^alpha w``
with ``v_x = H w`` in the zero-mean gauge (``a = 0`` and ``a = 1`` give the
CLM and De Gregorio models).
"""

from __future__ import annotations

import dataclasses
import enum
import logging
from dataclasses import dataclass, field
from math import pi

import numpy as np
from scipy import special

from .io import load_field_binary
from .spectral import Field, Grid, dealias_mask

log = logging.getLogger(__name__)

SCHEMES = ("etd2", "imex_bdf2")


@dataclass
class SolverConfig:
    alpha: float = 1.5
    nu: float = 1.0
    a_param: float = -1.0
    n_points: int = 1024
    length: float = 64.0
    scheme: str = "etd2"
    dt: float = 1e-2
    cfl_safety: float | None = 0.1
    t_final: float = 1.0
    probes: list = field(default_factory=list)
    dealias: bool = True
    nonlinear: bool = True
    blowup_grad: float | None = None
    blowup_growth: float = 50.0
    tail_fraction: float = 1e-6
    dt_min: float = 1e-9
    weight_lambda: float | None = 0.5
    weight_kappa: int = 2

    def __post_init__(self):
        if not 0 <= self.alpha < 2:
            raise ValueError(f"alpha must lie in [0, 2), got {self.alpha}")
        if self.nu < 0:
            raise ValueError(f"nu must be >= 0, got {self.nu}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.cfl_safety is not None and not self.cfl_safety > 0:
            raise ValueError("cfl_safety must be positive")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.t_final < 0:
            raise ValueError("t_final must be >= 0")
        for name in ("blowup_growth", "tail_fraction", "dt_min"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.blowup_grad is not None and not self.blowup_grad > 0:
            raise ValueError("blowup_grad must be positive")
        Grid(self.n_points, self.length)
        self.probes = sorted(float(t) for t in self.probes)
        if any(t < 0 or t > self.t_final for t in self.probes):
            raise ValueError("probe times must lie in [0, t_final]")

    @property
    def grid(self) -> Grid:
        return Grid(self.n_points, self.length)

    @property
    def transport(self) -> bool:
        return self.a_param == -1

    def probe_times(self) -> list[float]:
        if self.probes:
            return list(self.probes)
        return [float(t) for t in np.linspace(0.0, self.t_final, 11)] if self.t_final > 0 else [0.0]

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["probes"] = self.probe_times()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SolverConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


class Status(enum.Enum):
    RUNNING = "running"
    COMPLETED = "completed"
    BLOWUP_SUSPECTED = "blowup_suspected"
    POISONED = "poisoned"


@dataclass
class TrajectoryState:
    time: float
    theta: Field
    steps: int = 0
    status: Status = Status.RUNNING
    reason: str = ""
    # IMEX-BDF2 history: (previous coefficients, previous nonlinear term, previous dt)
    history: tuple | None = field(default=None, repr=False)


# --- initial data ------------------------------------------------------------------


def _psi(x):
    """Smooth cutoff: 1 on ``|x| <= 1``, 0 on ``|x| >= 2``."""
    t = np.clip(2.0 - np.abs(x), 0.0, 1.0)
    a = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
    b = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
    return a / (a + b)


def truncation(x, R: float):
    """``psi(x / R)``."""
    return _psi(np.asarray(x, dtype=float) / R)


def initial_data(kind: str, grid: Grid, params: dict | None = None, R: float | None = None,
                 require_positive: bool = False) -> Field:
    """Sample one of the library profiles, optionally truncated by ``psi(x/R)``.

    ``gaussian``: ``offset + amplitude exp(-(x-center)^2 / width^2)``;
    ``odd_gaussian_derivative``: ``-amplitude (x/width) exp(-x^2/width^2)``;
    ``cosine_bump``: ``offset + amplitude (1 + cos(pi x / width)) / 2`` on ``|x| < width``;
    ``from_file``: binary field dump at ``params["path"]``.
    """
    p = dict(params or {})
    x = grid.nodes
    amp = p.get("amplitude", 1.0)
    width = p.get("width", 1.0)
    center = p.get("center", 0.0)
    offset = p.get("offset", 0.0)
    if kind == "gaussian":
        v = offset + amp * np.exp(-((x - center) / width) ** 2)
    elif kind == "odd_gaussian_derivative":
        v = -amp * ((x - center) / width) * np.exp(-((x - center) / width) ** 2)
    elif kind == "cosine_bump":
        v = offset + np.where(np.abs(x - center) < width,
                              amp * 0.5 * (1 + np.cos(pi * (x - center) / width)), 0.0)
    elif kind == "from_file":
        f = load_field_binary(p["path"])
        if f.grid != grid:
            raise ValueError("file grid does not match the requested grid")
        v = f.values.copy()
    else:
        raise ValueError(f"unknown initial data kind {kind!r}")
    if R is not None:
        if not R > 0:
            raise ValueError("truncation radius must be positive")
        if 2 * R >= 0.45 * grid.length:
            raise ValueError(f"truncation window 2R={2 * R} exceeds the safe region 0.45 L")
        v = v * truncation(x, R)
    if require_positive and not np.min(v) > 0:
        raise ValueError("initial data must be strictly positive")
    return Field(grid, v)


# --- right-hand side ----------------------------------------------------------------


class Operators:
    """Precomputed symbols for one configuration."""

    def __init__(self, cfg: SolverConfig):
        self.cfg = cfg
        g = cfg.grid
        self.grid = g
        k = g.rwavenumbers
        self.ik = 1j * k
        self.ik[-1] = 0.0
        self.hil = 1j * np.sign(k)
        self.hil[-1] = 0.0
        self.inv_abs = np.zeros_like(k)
        self.inv_abs[1:] = 1.0 / k[1:]
        self.linear = np.zeros_like(k)
        self.linear[1:] = -cfg.nu * k[1:] ** cfg.alpha
        self.mask = dealias_mask(g) if cfg.dealias else np.ones(k.size, dtype=bool)
        n = g.n_points
        j = np.arange(k.size)
        top = n / 3 if cfg.dealias else n / 2
        self.tail = (j > top / 2) & (j <= top)

    def to_phys(self, uh):
        return np.fft.irfft(uh, n=self.grid.n_points)

    def to_spec(self, u):
        return np.fft.rfft(u)

    def nonlinear(self, uh):
        if not self.cfg.nonlinear:
            return np.zeros_like(uh)
        if self.cfg.transport:
            ux = self.to_phys(self.ik * uh)
            hu = self.to_phys(self.hil * uh)
            prod = -ux * hu
        else:
            u = self.to_phys(uh)
            ux = self.to_phys(self.ik * uh)
            hu = self.to_phys(self.hil * uh)
            v = self.to_phys(self.inv_abs * uh)
            prod = -self.cfg.a_param * v * ux + u * hu
        return self.mask * self.to_spec(prod)

    def rhs(self, uh):
        return self.nonlinear(uh) + self.linear * uh


def rhs_eval(theta: Field, cfg: SolverConfig) -> Field:
    ops = Operators(cfg)
    uh = ops.mask * ops.to_spec(theta.values)
    return Field(theta.grid, ops.to_phys(ops.rhs(uh)))


# --- time stepping ------------------------------------------------------------------


def phi1(z):
    return special.exprel(z)


def phi2(z):
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    small = np.abs(z) < 1e-2
    zs = z[small]
    out[small] = 0.5 + zs / 6 + zs**2 / 24 + zs**3 / 120 + zs**4 / 720
    zb = z[~small]
    out[~small] = (special.exprel(zb) - 1.0) / zb
    return out


def stable_dt(uh, ops: Operators, dt_cap: float) -> float:
    cfg = ops.cfg
    if cfg.cfl_safety is None:
        return dt_cap
    speed = np.max(np.abs(ops.to_phys(ops.hil * uh)))
    if not cfg.transport:
        speed = max(speed, abs(cfg.a_param) * np.max(np.abs(ops.to_phys(ops.inv_abs * uh))))
    return min(dt_cap, cfg.cfl_safety * ops.grid.spacing / max(1.0, speed))


def _etd2(uh, dt, ops):
    z = ops.linear * dt
    n0 = ops.nonlinear(uh)
    e = np.exp(z)
    a = e * uh + dt * phi1(z) * n0
    if not ops.cfg.nonlinear:
        return a
    return a + dt * phi2(z) * (ops.nonlinear(a) - n0)


def _imex_bdf2(uh, dt, ops, history):
    n0 = ops.nonlinear(uh)
    L = ops.linear
    if history is None:
        new = (uh + dt * n0) / (1.0 - dt * L)
    else:
        prev, nprev, dtprev = history
        w = dt / dtprev
        a0 = (1 + 2 * w) / (1 + w)
        a1 = -(1 + w)
        a2 = w * w / (1 + w)
        new = (-a1 * uh - a2 * prev + dt * ((1 + w) * n0 - w * nprev)) / (a0 - dt * L)
    return new, (uh, n0, dt)


def grad_sup(uh, ops: Operators) -> float:
    return float(np.max(np.abs(ops.to_phys(ops.ik * uh))))


def tail_ratio(uh, ops: Operators) -> float:
    e = np.abs(uh[1:]) ** 2
    total = e.sum()
    return float(e[ops.tail[1:]].sum() / total) if total > 0 else 0.0


class Integrator:
    """Stateful stepper bound to one configuration."""

    def __init__(self, cfg: SolverConfig, theta0: Field):
        if theta0.grid != cfg.grid:
            raise ValueError("initial field grid does not match the configuration")
        self.cfg = cfg
        self.ops = Operators(cfg)
        self.theta0 = theta0
        self.uh = self.ops.mask * self.ops.to_spec(theta0.values)
        self.time = 0.0
        self.steps = 0
        self.history = None
        self.last_dt = None
        g0 = grad_sup(self.uh, self.ops)
        if cfg.blowup_grad is not None:
            self.grad_threshold = cfg.blowup_grad
        else:
            self.grad_threshold = cfg.blowup_growth * g0 if g0 > 0 else np.inf
        self.status = Status.RUNNING
        self.reason = ""

    @property
    def theta(self) -> Field:
        if self.steps == 0:
            return self.theta0
        return Field(self.ops.grid, self.ops.to_phys(self.uh))

    def advance(self, dt: float):
        if self.cfg.scheme == "etd2":
            new = _etd2(self.uh, dt, self.ops)
        else:
            new, self.history = _imex_bdf2(self.uh, dt, self.ops, self.history)
        self.uh = new
        self.time += dt
        self.steps += 1
        self.last_dt = dt

    def monitor(self, dt: float | None = None) -> Status:
        self.status, self.reason = blowup_monitor(self.uh, self.ops, self.grad_threshold, dt)
        return self.status

    def advance_to(self, t_target: float) -> Status:
        """Step until ``t_target`` (landing on it exactly) or until a monitor trip."""
        cfg = self.cfg
        while self.time < t_target - 1e-14 * max(1.0, t_target):
            dt = stable_dt(self.uh, self.ops, cfg.dt)
            remaining = t_target - self.time
            if dt >= remaining * (1 - 1e-9):
                dt = remaining
            elif dt > 0.5 * remaining:
                # split instead of leaving a sliver step
                dt = 0.5 * remaining
            with np.errstate(all="ignore"):
                self.advance(dt)
            limit_dt = dt if dt < remaining else None
            if self.monitor(limit_dt) is not Status.RUNNING:
                return self.status
        self.time = max(self.time, t_target)
        return self.status


def blowup_monitor(uh, ops: Operators, grad_threshold: float, dt: float | None = None):
    """Return ``(status, reason)`` for the current coefficients.

    Trips on non-finite data (poisoned), on ``||theta_x||_inf`` above the
    threshold, on the top octave of the retained spectrum holding more than
    ``tail_fraction`` of the energy, or on a step below ``dt_min``.
    """
    cfg = ops.cfg
    if not np.all(np.isfinite(uh)):
        return Status.POISONED, "non-finite coefficients"
    gs = grad_sup(uh, ops)
    if gs > grad_threshold:
        return Status.BLOWUP_SUSPECTED, f"gradient {gs:.4g} above threshold {grad_threshold:.4g}"
    tr = tail_ratio(uh, ops)
    if tr > cfg.tail_fraction:
        return Status.BLOWUP_SUSPECTED, f"spectral tail fraction {tr:.3g} above {cfg.tail_fraction:.3g}"
    if dt is not None and dt < cfg.dt_min:
        return Status.BLOWUP_SUSPECTED, f"time step {dt:.3g} below dt_min"
    return Status.RUNNING, ""


def step(state: TrajectoryState, cfg: SolverConfig, dt: float | None = None) -> TrajectoryState:
    """Advance one step from ``state``; the input state is not modified."""
    if state.status is not Status.RUNNING:
        raise ValueError(f"cannot step a trajectory with status {state.status.value}")
    ops = Operators(cfg)
    uh = ops.mask * ops.to_spec(state.theta.values)
    if dt is None:
        dt = stable_dt(uh, ops, cfg.dt)
    with np.errstate(all="ignore"):
        if cfg.scheme == "etd2":
            new, hist = _etd2(uh, dt, ops), None
        else:
            new, hist = _imex_bdf2(uh, dt, ops, state.history)
    status, reason = blowup_monitor(new, ops, np.inf, dt)
    values = ops.to_phys(new)
    if status is Status.POISONED:
        values = state.theta.values
    return TrajectoryState(state.time + dt, Field(state.theta.grid, values), state.steps + 1,
                           status, reason, hist)


@dataclass
class RunResult:
    config: SolverConfig
    status: Status
    reason: str
    times: list
    snapshots: list = field(repr=False)
    records: list = field(repr=False)
    final_time: float = 0.0
    steps: int = 0
    grad_history: list = field(default_factory=list, repr=False)


def run(cfg: SolverConfig, theta0: Field, weight=None, record_energy: bool = True,
        track_gradient: bool = False) -> RunResult:
    """Integrate to ``t_final`` or until the blow-up monitor trips.

    Snapshots and energy records are taken at each probe time reached; a
    trip ends the run early and returns the partial trajectory.  With
    ``track_gradient`` the per-step ``(t, ||theta_x||_inf)`` history is kept.
    """
    from .diagnostics import energy_record
    from .weights import UNIT_WEIGHT, Weight

    if weight is None:
        weight = UNIT_WEIGHT if cfg.weight_lambda is None else Weight(cfg.weight_lambda, cfg.weight_kappa)
    integ = Integrator(cfg, theta0)
    times, snaps, records, grads = [], [], [], []

    def probe():
        th = integ.theta
        times.append(integ.time)
        snaps.append(th)
        if record_energy:
            records.append(energy_record(th, weight, cfg.alpha, time=integ.time))

    for t in cfg.probe_times():
        if track_gradient:
            while integ.time < t - 1e-14 * max(1.0, t):
                if integ.advance_to(min(t, integ.time + _grad_interval(integ))) is not Status.RUNNING:
                    break
                grads.append((integ.time, grad_sup(integ.uh, integ.ops)))
        else:
            integ.advance_to(t)
        if integ.status is not Status.RUNNING:
            log.info("run stopped at t=%.6g: %s", integ.time, integ.reason)
            if integ.status is Status.BLOWUP_SUSPECTED:
                probe()
            break
        probe()
    status = Status.COMPLETED if integ.status is Status.RUNNING else integ.status
    return RunResult(cfg, status, integ.reason, times, snaps, records, integ.time, integ.steps, grads)


def _grad_interval(integ: Integrator) -> float:
    return stable_dt(integ.uh, integ.ops, integ.cfg.dt)
