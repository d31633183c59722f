"""Energy functionals and inequality monitors for trajectories.

Weighted norms are squared: ``l2w = int w theta^2``, ``hkw = l2w +
||Lambda^k theta||^2_w`` with ``k = max(0, 3/2 - alpha)``.  Derivative-type
quantities use Fourier multipliers and the integrals use the rectangle rule,
which is spectrally accurate for periodic, boundary-decaying data.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .spectral import (BOUNDARY_FRACTION, Field, derivative, fractional_power, maximal_function,
                       symmetric_singular_integral, windowed_means, dyadic_cell_radii)

CSV_COLUMNS = ("t", "l2w", "hkw", "dissipation", "sup", "grad_sup",
               "dissipation_k", "h2w", "dissipation_h2")


def sobolev_index(alpha: float) -> float:
    return max(0.0, 1.5 - alpha)


@dataclass
class EnergyRecord:
    time: float
    l2w: float
    hkw: float
    dissipation: float
    dissipation_k: float
    sup: float
    grad_sup: float
    h2w: float
    dissipation_h2: float
    k: float
    poisoned: bool = False

    def row(self) -> list:
        return [self.time, self.l2w, self.hkw, self.dissipation, self.sup, self.grad_sup,
                self.dissipation_k, self.h2w, self.dissipation_h2]


def _wsq(values, wv, h) -> float:
    return float(h * np.sum(wv * values * values))


def energy_record(theta: Field, w, alpha: float, time: float = 0.0) -> EnergyRecord:
    """Weighted norms of one snapshot; a non-finite field yields a poisoned record."""
    k = sobolev_index(alpha)
    v = np.asarray(theta.values)
    if not np.all(np.isfinite(v)):
        nan = float("nan")
        return EnergyRecord(time, nan, nan, nan, nan, nan, nan, nan, nan, k, poisoned=True)
    g = theta.grid
    h = g.spacing
    wv = w(g.nodes)
    l2w = _wsq(v, wv, h)
    hkw = l2w + _wsq(fractional_power(theta, k).values, wv, h) if k > 0 else l2w
    diss = _wsq(fractional_power(theta, alpha / 2).values, wv, h)
    diss_k = _wsq(fractional_power(theta, k + alpha / 2).values, wv, h)
    h2w = l2w + _wsq(fractional_power(theta, 2.0).values, wv, h)
    diss_h2 = _wsq(fractional_power(theta, 2.0 + alpha / 2).values, wv, h)
    return EnergyRecord(time, l2w, hkw, diss, diss_k, float(np.max(np.abs(v))),
                        float(np.max(np.abs(derivative(theta).values))), h2w, diss_h2, k)


def write_energy_csv(path, records) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(CSV_COLUMNS)
        for r in records:
            out.writerow([repr(float(x)) for x in r.row()])


def read_energy_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return [{k: float(v) for k, v in row.items()} for row in csv.DictReader(fh)]


# --- energy growth ------------------------------------------------------------------


@dataclass
class GrowthReport:
    c_fit: float
    undefined: bool
    rates: list
    integral_ok: bool
    final_ratio: float
    bound_ratio: float
    dissipation_integral: float
    balance_residual: float
    norm: str

    def to_dict(self) -> dict:
        return asdict(self)


def check_energy_growth(records, nu: float, alpha: float | None = None, norm: str = "l2w",
                        rel_tol: float = 1e-9) -> GrowthReport:
    """Fit ``C`` in ``dE/dt + 2 nu D <= C E`` from a record series.

    Each probe interval contributes the rate ``(dE/dt + 2 nu D_avg) / E_left``
    (forward difference, trapezoidal ``D``, ``E`` at the interval start);
    ``C_fit`` is the largest.  With ``E`` at the left end the per-interval
    bound ``E_1 <= E_0 (1 + C dt) <= E_0 exp(C dt)`` chains, so the integral
    form ``E(T) <= E(0) exp(C_fit T)`` is re-checked against the data, and
    the balance ``E(T) - E(0) + 2 nu int D - C_fit sum E_left dt`` (which
    must be ``<= 0``) is reported relative to ``E(0)``.  ``norm`` selects ``l2w``
    (with ``dissipation``) or ``hkw`` (with ``dissipation + dissipation_k``).
    """
    recs = list(records)
    nan = float("nan")
    if len(recs) < 3 or norm not in ("l2w", "hkw"):
        if norm not in ("l2w", "hkw"):
            raise ValueError(f"norm must be 'l2w' or 'hkw', got {norm!r}")
        return GrowthReport(nan, True, [], False, nan, nan, nan, nan, norm)
    t = np.array([r.time for r in recs])
    E = np.array([getattr(r, norm) for r in recs])
    if norm == "l2w":
        D = np.array([r.dissipation for r in recs])
    else:
        D = np.array([r.dissipation + (r.dissipation_k if r.k > 0 else 0.0) for r in recs])
    if not np.all(np.isfinite(E)) or np.any(E <= 0) or np.any(np.diff(t) <= 0):
        return GrowthReport(nan, True, [], False, nan, nan, nan, nan, norm)
    dt = np.diff(t)
    e_left = E[:-1]
    d_avg = 0.5 * (D[1:] + D[:-1])
    rates = (np.diff(E) / dt + 2 * nu * d_avg) / e_left
    c = float(rates.max())
    T = t[-1] - t[0]
    final_ratio = float(E[-1] / E[0])
    bound = math.exp(c * T)
    d_int = float(np.sum(d_avg * dt))
    balance = float((E[-1] - E[0] + 2 * nu * d_int - c * np.sum(e_left * dt)) / E[0])
    ok = final_ratio <= bound * (1 + rel_tol) and balance <= rel_tol
    return GrowthReport(c, False, rates.tolist(), bool(ok), final_ratio, float(bound / final_ratio),
                        d_int, balance, norm)


# --- maximum principle ------------------------------------------------------------


@dataclass
class MaxPrincipleReport:
    passed: bool
    initial_sup: float
    max_sup: float
    worst_index: int
    rel_excess: float

    def to_dict(self) -> dict:
        return asdict(self)


def check_maximum_principle(series, rel_tol: float = 1e-6) -> MaxPrincipleReport:
    """``sup_t ||theta(t)||_inf <= ||theta_0||_inf (1 + rel_tol)``.

    ``series`` holds EnergyRecords or plain sup-norm values.
    """
    sups = np.array([getattr(r, "sup", r) for r in series], dtype=float)
    if sups.size == 0:
        raise ValueError("empty series")
    i = int(np.argmax(sups))
    s0 = sups[0]
    excess = float(sups[i] / s0 - 1.0) if s0 > 0 else (0.0 if sups[i] == 0 else math.inf)
    passed = bool(np.all(np.isfinite(sups)) and sups[i] <= s0 * (1 + rel_tol))
    return MaxPrincipleReport(passed, float(s0), float(sups[i]), i, excess)


def extrema_drift(times, snapshots) -> tuple[float, float]:
    """Largest per-unit-time rise of ``max theta`` and fall of ``min theta``, relative to ``||theta_0||_inf``."""
    t = np.asarray(times, dtype=float)
    mx = np.array([np.max(s.values) for s in snapshots])
    mn = np.array([np.min(s.values) for s in snapshots])
    scale = max(float(np.max(np.abs(snapshots[0].values))), np.finfo(float).tiny)
    dt = np.diff(t)
    if dt.size == 0:
        return 0.0, 0.0
    rise = float(np.max(np.maximum(np.diff(mx), 0) / dt)) / scale
    fall = float(np.max(np.maximum(-np.diff(mn), 0) / dt)) / scale
    return rise, fall


# --- Cordoba-Cordoba --------------------------------------------------------------


@dataclass
class CordobaReport:
    violation: float
    margin: float
    scale: float
    passed: bool
    tol: float

    def to_dict(self) -> dict:
        return asdict(self)


def check_cordoba_inequality(theta: Field, tol: float = 1e-6, alpha: float = 1.0) -> CordobaReport:
    """Pointwise ``Lambda^alpha theta^3 <= 3 theta^2 Lambda^alpha theta`` for positive ``theta``.

    ``violation`` is the positive part of ``max(Lambda theta^3 - 3 theta^2
    Lambda theta)``; ``margin`` is the signed maximum.  The check passes when
    the violation is at most ``tol ||theta||_inf^3``.
    """
    v = theta.values
    if not np.min(v) > 0:
        raise ValueError("the convexity inequality needs strictly positive data")
    cube = Field(theta.grid, v**3)
    lhs = fractional_power(cube, alpha).values
    rhs = 3 * v**2 * fractional_power(theta, alpha).values
    margin = float(np.max(lhs - rhs))
    scale = float(np.max(np.abs(v))) ** 3
    violation = max(margin, 0.0)
    return CordobaReport(violation, margin, scale, violation <= tol * scale, tol)


# --- pointwise fractional Sobolev inequality -----------------------------------------


@dataclass
class MazyaReport:
    fitted_constant: float
    argmax: float
    ratios: np.ndarray = field(repr=False)
    lhs: np.ndarray = field(repr=False)
    rhs: np.ndarray = field(repr=False)
    degenerate_nodes: int = 0
    flagged: bool = False

    def to_dict(self) -> dict:
        return {"fitted_constant": self.fitted_constant, "argmax": self.argmax,
                "degenerate_nodes": self.degenerate_nodes, "flagged": self.flagged}


def gagliardo_integrand(theta: Field, s: float, step: int = 1, y_max: float | None = None) -> np.ndarray:
    """``int |theta(x) - theta(y)|^2 / |x-y|^{1+2s} dy`` at every node.

    Quadrature covers ``|x-y| <= y_max`` (default ``0.45 L``); beyond it the
    field is taken as zero, contributing ``theta(x)^2 y_max^{-2s} / s``.
    """
    if not 0 < s < 1:
        raise ValueError(f"s must lie in (0, 1), got {s}")
    g = theta.grid
    v = theta.values
    hstep = step * g.spacing
    y_max = BOUNDARY_FRACTION * g.length if y_max is None else y_max
    n_steps = int(y_max / hstep + 1e-9)
    Y = n_steps * hstep

    def bracket(j):
        shift = j * step
        return (np.roll(v, -shift) - v) ** 2 + (np.roll(v, shift) - v) ** 2

    near = symmetric_singular_integral(bracket, n_steps, hstep, 1 + 2 * s)
    return near + v**2 * Y ** (-2 * s) / s


def oscillation_maximal(theta: Field) -> np.ndarray:
    """``M(|theta - theta(x)|^2)(x)`` over the dyadic centred windows."""
    v = theta.values
    radii = dyadic_cell_radii(v.size)
    m1 = windowed_means(v, radii)
    m2 = windowed_means(v * v, radii)
    osc = m2 - 2 * v * m1 + v * v
    return np.maximum(osc, 0.0).max(axis=0)


def check_pointwise_sobolev_inequality(theta: Field, s: float, p: int = 2, q: int = 2,
                                       step: int = 1, rel_floor: float = 1e-14) -> MazyaReport:
    """Ratio of the Gagliardo-type integral to the maximal-function bound, node by node.

    LHS ``(int |theta(x)-theta(y)|^2 |x-y|^{-1-2s} dy)^{1/2}``; RHS
    ``[M(|theta-theta(x)|^2)(x)]^{(1-s)/2} [M(|theta'|^2)(x)]^{s/2}``.  Only
    ``p = q = 2`` is implemented.  Nodes where both sides vanish (to
    ``rel_floor`` of their maxima) are skipped; a vanishing RHS with a
    nonzero LHS sets ``flagged``.
    """
    if p != 2 or q != 2:
        raise NotImplementedError("only p = q = 2 is implemented")
    lhs = np.sqrt(np.maximum(gagliardo_integrand(theta, s, step), 0.0))
    osc = oscillation_maximal(theta)
    dv = derivative(theta).values
    grad = maximal_function(Field(theta.grid, dv * dv)).values
    rhs = osc ** ((1 - s) / 2) * grad ** (s / 2)
    lmax = float(lhs.max()) if lhs.size else 0.0
    rmax = float(rhs.max()) if rhs.size else 0.0
    tiny_l = lhs <= rel_floor * max(lmax, np.finfo(float).tiny)
    tiny_r = rhs <= rel_floor * max(rmax, np.finfo(float).tiny)
    ratios = np.zeros_like(lhs)
    ok = ~tiny_r
    ratios[ok] = lhs[ok] / rhs[ok]
    flagged = bool(np.any(tiny_r & ~tiny_l))
    degenerate = int(np.count_nonzero(tiny_r & tiny_l))
    if lmax == 0.0:
        return MazyaReport(0.0, float("nan"), ratios, lhs, rhs, degenerate, flagged)
    i = int(np.argmax(ratios))
    return MazyaReport(float(ratios[i]), float(theta.grid.nodes[i]), ratios, lhs, rhs, degenerate, flagged)


# --- supercritical H^2_w monitor -----------------------------------------------------

H2_POWERS = (2.0, 4.0, 16.0 / 3.0)


@dataclass
class H2MonitorReport:
    coefficients: dict
    lhs: list
    x_values: list
    finite: bool

    def to_dict(self) -> dict:
        return asdict(self)


def fit_h2_monitor(records, nu: float, powers=H2_POWERS) -> H2MonitorReport:
    """Fit ``P(X) = sum a_i X^{p_i}`` in ``dY/dt + 2 nu ||Lambda^{2+alpha/2} theta||^2_w <= P(X)``.

    ``Y = ||theta||^2_{H^2_w}`` and ``X = sqrt(Y)``.  Each term is given an
    equal share of the worst interval, ``a_i = max_n LHS_n^+ / (m X_n^{p_i})``
    with ``m`` the number of terms, so every single term alone closes the
    inequality up to the factor ``m``.
    """
    recs = list(records)
    if len(recs) < 2:
        raise ValueError("need at least two records")
    t = np.array([r.time for r in recs])
    Y = np.array([r.h2w for r in recs])
    D = np.array([r.dissipation_h2 for r in recs])
    dt = np.diff(t)
    lhs = np.diff(Y) / dt + 2 * nu * 0.5 * (D[1:] + D[:-1])
    X = np.sqrt(0.5 * (Y[1:] + Y[:-1]))
    m = len(powers)
    coeffs = {}
    for pw in powers:
        coeffs[f"{pw:.6g}"] = float(np.max(np.maximum(lhs, 0.0) / (m * X**pw)))
    finite = all(math.isfinite(c) for c in coeffs.values())
    return H2MonitorReport(coeffs, lhs.tolist(), X.tolist(), finite)
