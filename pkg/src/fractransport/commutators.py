"""The commutator ``[Lambda^{alpha/2}, w] f`` and the bound ``|Lambda^alpha w| <= C w``.

The commutator is applied by two FFT multiplier passes and a pointwise
product; :func:`commutator_kernel` evaluates the same operator as the
singular integral ``C int (w(x) - w(y)) f(y) / |x-y|^{1+alpha/2} dy`` and is
kept as a slow independent oracle.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import integrate, special

from .spectral import (BOUNDARY_FRACTION, Field, Grid, check_boundary_decay, fractional_power,
                       periodic_image_kernel, power_weighted_integral, pv_constant,
                       symmetric_singular_integral)


def commutator_hypothesis(alpha: float, lam: float) -> bool:
    """Parameter range on which the weighted commutator is claimed continuous."""
    if 0 < alpha < 1:
        return 0 < lam < alpha / 2
    return 1 < alpha < 2 and 0 < lam < 1


def kernel_branches_integrable(alpha: float, lam: float) -> tuple[bool, bool]:
    """Integrability of ``min(|z|^{-alpha/2}, |z|^{-(1-lam+alpha/2)})`` near 0 and at infinity."""
    near = alpha / 2 < 1
    far = 1 - lam + alpha / 2 > 1
    return near, far


def _check_params(w, alpha):
    if not 0 < alpha < 2:
        raise ValueError(f"alpha must lie in (0, 2), got {alpha}")
    lam = getattr(w, "lam", 0.0)
    if lam > 0 and not commutator_hypothesis(alpha, lam):
        raise ValueError(
            f"(alpha={alpha}, lambda={lam}) outside the commutator hypothesis: "
            "supercritical alpha needs lambda < alpha/2, critical alpha=1 is excluded")


def commutator_apply(f: Field, w, alpha: float, check_decay: bool = True) -> Field:
    """``Lambda^{alpha/2}(w f) - w Lambda^{alpha/2} f`` by the multiplier route."""
    if not 0 < alpha < 2:
        raise ValueError(f"alpha must lie in (0, 2), got {alpha}")
    if check_decay:
        check_boundary_decay(f)
    wv = w(f.grid.nodes)
    beta = alpha / 2
    wf = Field(f.grid, wv * f.values)
    return Field(f.grid, fractional_power(wf, beta).values - wv * fractional_power(f, beta).values)


def commutator_kernel(f: Field, w, alpha: float, step: int = 1, kernel: str = "periodic",
                      y_max: float | None = None) -> Field:
    """Singular-integral evaluation ``C int (w(x) - w(y)) f(y) K(x - y) dy``.

    ``kernel="periodic"`` uses the periodised kernel over one period with the
    grid-sampled weight: the torus operator the multiplier route computes.
    ``kernel="free"`` uses ``|z|^{-1-alpha/2}`` on the real line, ``f``
    zero-extended and ``w`` evaluated in closed form at ``x +- z``.
    """
    check_boundary_decay(f)
    g = f.grid
    n = g.n_points
    beta = alpha / 2
    hq = step * g.spacing
    x = g.nodes
    wx = w(x)
    v = f.values
    if kernel == "periodic":
        if n % (2 * step):
            raise ValueError("step must divide N/2")
        m = n // (2 * step)

        def bracket(j):
            s = j * step
            return ((wx - np.roll(wx, -s)) * np.roll(v, -s) + (wx - np.roll(wx, s)) * np.roll(v, s))

        out = symmetric_singular_integral(bracket, m, hq, 1 + beta,
                                          smooth_kernel=periodic_image_kernel(beta, g.length))
    elif kernel == "free":
        y_max = BOUNDARY_FRACTION * g.length if y_max is None else y_max
        m = int(y_max // hq)
        pad = m * step
        fp = np.concatenate([np.zeros(pad), v, np.zeros(pad)])

        def bracket(j):
            z = j * hq
            s = j * step
            return ((wx - w(x + z)) * fp[pad + s:pad + s + n]
                    + (wx - w(x - z)) * fp[pad - s:pad - s + n])

        out = symmetric_singular_integral(bracket, m, hq, 1 + beta)
    else:
        raise ValueError(f"unknown kernel {kernel!r}")
    return Field(g, pv_constant(beta) * out)


# --- Rayleigh quotients -----------------------------------------------------------


def rayleigh_quotient(f: Field, w, alpha: float) -> float:
    """``||T_w f||_{L^2(1/w)} / ||f||_{L^2(w)}``."""
    wv = w(f.grid.nodes)
    t = commutator_apply(f, w, alpha, check_decay=False).values
    num = np.sum(t**2 / wv)
    den = np.sum(f.values**2 * wv)
    return float(np.sqrt(num / den))


@dataclass(frozen=True)
class Packet:
    """``amp * exp(-(x-c)^2 / (2 sigma^2)) * cos(k x + phase)``."""

    amp: float
    center: float
    sigma: float
    k: float = 0.0
    phase: float = 0.0

    def __call__(self, x):
        return self.amp * np.exp(-0.5 * ((x - self.center) / self.sigma) ** 2) * np.cos(self.k * x + self.phase)


@dataclass(frozen=True)
class Trial:
    kind: str
    packets: tuple

    def __call__(self, x):
        return sum(p(x) for p in self.packets)


def trial_plan(length: float, k_cap: float, n_random: int = 100, seed: int = 0) -> list[Trial]:
    """Random multi-packet trials plus adversarial translated bumps and wave packets.

    Every trial is analytic in ``x`` so the same function can be sampled at
    several resolutions; supports stay inside ``0.45 L`` up to ``1e-8``.
    """
    rng = np.random.default_rng(seed)
    reach = BOUNDARY_FRACTION * length
    trials = []
    for _ in range(n_random):
        packets = []
        for _ in range(rng.integers(1, 6)):
            sigma = float(np.exp(rng.uniform(np.log(0.3), np.log(0.04 * length))))
            c = float(rng.uniform(-1, 1) * max(reach - 6.5 * sigma, 0.0) * 0.6)
            k = float(rng.uniform(0, min(k_cap, 3.0 / sigma)))
            packets.append(Packet(float(rng.standard_normal()), c, sigma, k, float(rng.uniform(0, 2 * np.pi))))
        trials.append(Trial("random", tuple(packets)))
    for sigma in (0.5, 1.0, 3.0):
        for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
            c = frac * (reach - 6.5 * sigma)
            trials.append(Trial("bump", (Packet(1.0, c, sigma),)))
    for k in (0.5, 1.0, 2.0, 4.0, 8.0):
        if k > k_cap:
            continue
        for c in (0.0, 0.2 * length):
            trials.append(Trial("packet", (Packet(1.0, c, 2.0, k),)))
    return trials


@dataclass
class CommutatorReport:
    alpha: float
    lam: float
    kappa: int
    rayleigh_quotients: list = field(repr=False)
    sup_estimate: float = 0.0
    argmax_kind: str = ""
    refinement_trace: list = field(default_factory=list)

    @property
    def refinement_drift(self) -> float:
        vals = [t[2] for t in self.refinement_trace]
        return abs(vals[-1] - vals[0]) / abs(vals[0]) if len(vals) > 1 and vals[0] else 0.0

    def to_json(self) -> str:
        d = asdict(self)
        d["refinement_drift"] = self.refinement_drift
        return json.dumps(d)


def commutator_norm_estimate(w, alpha: float, grids=(Grid(2048, 200.0), Grid(4096, 200.0)),
                             n_random: int = 100, seed: int = 0) -> CommutatorReport:
    """Empirical ``L^2(w) -> L^2(1/w)`` norm of the commutator.

    The first grid is the reporting resolution; every grid in ``grids`` adds
    a ``(N, L, sup)`` row to the refinement trace.
    """
    _check_params(w, alpha)
    grids = list(grids)
    k_cap = min(g.nyquist for g in grids) / 8
    plan = trial_plan(min(g.length for g in grids), k_cap, n_random, seed)
    trace = []
    quotients = None
    kinds = None
    for g in grids:
        q = []
        for trial in plan:
            f = g.sample(trial)
            check_boundary_decay(f)
            q.append(rayleigh_quotient(f, w, alpha))
        trace.append((g.n_points, g.length, max(q)))
        if quotients is None:
            quotients = q
            kinds = [t.kind for t in plan]
    i = int(np.argmax(quotients))
    return CommutatorReport(alpha, float(getattr(w, "lam", 0.0)), int(getattr(w, "kappa", 0)),
                            quotients, float(quotients[i]), kinds[i], trace)


def kernel_bound_constant(f: Field, w, alpha: float, samples: int = 64) -> float:
    """Fit ``C`` in ``|T_w f|(x) <= C sqrt(w(x)) (chi * (sqrt(w)|f|))(x)`` on sampled nodes."""
    lam = getattr(w, "lam", 0.0)
    g = f.grid
    x = g.nodes
    central = np.flatnonzero(np.abs(x) <= 0.25 * g.length)
    idx = central[:: max(1, central.size // samples)]
    t = np.abs(commutator_apply(f, w, alpha).values)[idx]
    src = np.sqrt(w(x)) * np.abs(f.values)
    n = g.n_points
    h = g.spacing
    m = int(BOUNDARY_FRACTION * g.length // h)
    pad = np.concatenate([np.zeros(m), src, np.zeros(m)])
    near_exp = alpha / 2
    far_exp = 1 - lam + alpha / 2
    xi = idx + m

    def q(j):
        z = j * h
        # chi(z) * z^{near_exp}: 1 inside the unit ball, z^{near-far} beyond
        factor = 1.0 if z <= 1 else z ** (near_exp - far_exp)
        return factor * (pad[xi + j] + pad[xi - j])

    conv = power_weighted_integral(q, m, h, -near_exp)
    bound = np.sqrt(w(x[idx])) * conv
    ok = bound > 0
    return float(np.max(t[ok] / bound[ok]))


# --- Lambda^alpha applied to the weight itself ---------------------------------------


def lambda_alpha_weight(x, w, alpha: float, n_gauss: int = 48):
    """``Lambda^alpha w`` at the points ``x`` by adaptive quadrature on the real line.

    Near part ``|y| <= 1`` in second-order form ``2w(x) - w(x+y) - w(x-y)``
    (Gauss-Jacobi with weight ``y^{1-alpha}``); far part ``|y| > 1`` by
    adaptive quadrature.  Returns values and the largest error estimate.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    t, wt = special.roots_jacobi(n_gauss, 0.0, 1.0 - alpha)
    y = 0.5 * (1 + t)
    wt = wt * 0.5 ** (2 - alpha)
    d = 2 * w(x)[:, None] - w(x[:, None] + y) - w(x[:, None] - y)
    near = (d / y**2) @ wt
    far = np.empty_like(x)
    err = 0.0
    for i, xi in enumerate(x):
        wx = float(w(xi))

        def integrand(s):
            return (2 * wx - float(w(xi + s)) - float(w(xi - s))) * s ** (-1 - alpha)

        knee = abs(xi)
        parts = [(1.0, knee), (knee, knee + 50.0)] if knee > 1.0 else [(1.0, 50.0)]
        parts.append((parts[-1][1], np.inf))
        total = 0.0
        for a, b in parts:
            val, e = integrate.quad(integrand, a, b, limit=400, epsabs=1e-13, epsrel=1e-11)
            total += val
            err = max(err, e)
        far[i] = total
    return pv_constant(alpha) * (near + far), pv_constant(alpha) * err


@dataclass
class WeightBoundReport:
    alpha: float
    lam: float
    kappa: int
    sup_ratio: float
    ratio_at_origin: float
    trace: list
    quadrature_error: float
    converged: bool

    @property
    def drift(self) -> float:
        vals = [t[1] for t in self.trace]
        return abs(vals[-1] - vals[0]) / vals[0] if len(vals) > 1 else 0.0


def verify_lambda_alpha_weight_bound(w, alpha: float, grid: Grid, lengths=None,
                                     max_samples: int = 257, tol: float = 1e-7) -> WeightBoundReport:
    """``sup_x |Lambda^alpha w|(x) / w(x)`` over nodes of grids of growing length.

    ``lengths`` defaults to ``(L, 2L)``; each adds an ``(L, sup)`` row to the
    trace.  Nodes are thinned to at most ``max_samples`` points, always
    keeping the origin.
    """
    if not 0 < alpha < 2:
        raise ValueError(f"alpha must lie in (0, 2), got {alpha}")
    lengths = (grid.length, 2 * grid.length) if lengths is None else lengths
    trace = []
    err = 0.0
    origin = None
    for L in lengths:
        g = Grid(grid.n_points, L)
        x = g.nodes
        x = x[np.abs(x) <= BOUNDARY_FRACTION * L]
        stride = max(1, x.size // max_samples)
        x = np.union1d(x[::stride], [0.0])
        lw, e = lambda_alpha_weight(x, w, alpha)
        err = max(err, e)
        ratio = np.abs(lw) / w(x)
        trace.append((L, float(ratio.max())))
        if origin is None:
            origin = float(ratio[np.argmin(np.abs(x))])
    scale = max(t[1] for t in trace)
    return WeightBoundReport(alpha, float(w.lam), int(w.kappa), trace[0][1], origin, trace, err,
                             err <= tol * max(scale, 1.0))
