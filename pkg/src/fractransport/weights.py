"""The power-type Muckenhoupt weights ``w(x) = (1 + |x|^kappa)^(-lambda/kappa)``.

Also: the pointwise two-point comparison ``|w(x) - w(y)| <= C min(|x-y|,
|x-y|^{lambda/2}) sqrt(w(x) w(y))`` and a lower-bound estimator of the
``A_p`` constant over a dyadic family of centred intervals.
"""

from __future__ import annotations

import enum
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .spectral import Grid


class Regime(enum.Enum):
    SUBCRITICAL = "subcritical"
    SUPERCRITICAL = "supercritical"


@dataclass(frozen=True)
class Weight:
    """Weight with ``0 < lam < 1`` and even ``kappa >= 2``.

    Passing ``alpha < 1`` selects the supercritical regime, which further
    requires ``lam < alpha / 2``.
    """

    lam: float
    kappa: int = 2
    alpha: float | None = None

    def __post_init__(self):
        if not 0 < self.lam < 1:
            raise ValueError(f"lambda must lie in (0, 1), got {self.lam}")
        if int(self.kappa) != self.kappa or self.kappa < 2 or self.kappa % 2:
            raise ValueError(f"kappa must be an even integer >= 2, got {self.kappa}")
        object.__setattr__(self, "kappa", int(self.kappa))
        if self.alpha is not None:
            if not 0 < self.alpha < 2:
                raise ValueError(f"alpha must lie in (0, 2), got {self.alpha}")
            if self.alpha < 1 and not self.lam < self.alpha / 2:
                raise ValueError(
                    f"supercritical alpha={self.alpha} requires lambda < alpha/2 = {self.alpha / 2}, "
                    f"got {self.lam}")

    @property
    def regime(self) -> Regime | None:
        if self.alpha is None:
            return None
        return Regime.SUPERCRITICAL if self.alpha < 1 else Regime.SUBCRITICAL

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return (1.0 + np.abs(x) ** self.kappa) ** (-self.lam / self.kappa)

    def log(self, x):
        x = np.asarray(x, dtype=float)
        return -self.lam / self.kappa * np.log1p(np.abs(x) ** self.kappa)

    def deriv(self, x, order: int = 1):
        """Analytic first or second derivative."""
        x = np.asarray(x, dtype=float)
        lam, kap = self.lam, self.kappa
        u = 1.0 + x**kap
        w = u ** (-lam / kap)
        if order == 1:
            return -lam * x ** (kap - 1) / u * w
        if order == 2:
            # d/dx [g w] with g = -lam x^{k-1} / u
            g = -lam * x ** (kap - 1) / u
            dg = -lam * ((kap - 1) * x ** (kap - 2) * u - kap * x ** (2 * kap - 2)) / u**2
            return (dg + g * g) * w
        raise ValueError(f"order must be 1 or 2, got {order}")


class UnitWeight:
    """The constant weight ``w = 1``; bypasses parameter validation for tests."""

    lam = 0.0
    kappa = 0
    alpha = None
    regime = None

    def __call__(self, x):
        return np.ones_like(np.asarray(x, dtype=float))

    def log(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def deriv(self, x, order: int = 1):
        if order not in (1, 2):
            raise ValueError(f"order must be 1 or 2, got {order}")
        return np.zeros_like(np.asarray(x, dtype=float))


UNIT_WEIGHT = UnitWeight()


def weight_eval(x, w: Weight):
    return w(x)


def weight_deriv(x, w: Weight, order: int = 1):
    return w.deriv(x, order)


# --- two-point comparison ---------------------------------------------------------


def comparison_ratio(x, y, w: Weight) -> np.ndarray:
    """``|w(x)-w(y)| / (min(d, d^{lam/2}) sqrt(w(x) w(y)))``, 0 on the diagonal."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = np.abs(x - y)
    num = np.abs(w(x) - w(y))
    den = np.minimum(d, d ** (w.lam / 2)) * np.exp(0.5 * (w.log(x) + w.log(y)))
    out = np.zeros_like(d)
    np.divide(num, den, out=out, where=d > 0)
    return out


def stratified_pairs(n_pairs: int, half_width: float, rng: np.random.Generator):
    """Pairs in ``[-a, a]^2`` split evenly over the three distance regimes.

    Stratum 0: ``|x-y| <= 1``.  Stratum 1: ``1 < |x-y| <= |x|/2`` (comparable
    weights).  Stratum 2: ``|x-y| > max(1, |x|/2, |y|/2)``.
    """
    a = half_width
    n0 = n_pairs // 3
    n1 = n_pairs // 3
    n2 = n_pairs - n0 - n1

    x0 = rng.uniform(-a, a, n0)
    y0 = np.clip(x0 + rng.uniform(-1, 1, n0), -a, a)

    # |x| > 2 so the interval (1, |x|/2] is non-empty
    x1 = rng.uniform(2, a, n1) * rng.choice([-1.0, 1.0], n1)
    d1 = 1.0 + rng.uniform(0, 1, n1) * (np.abs(x1) / 2 - 1)
    y1 = x1 + d1 * rng.choice([-1.0, 1.0], n1)
    outside = np.abs(y1) > a
    y1[outside] = 2 * x1[outside] - y1[outside]

    xs, ys = [], []
    need = n2
    while need > 0:
        x = rng.uniform(-a, a, 2 * need + 16)
        y = rng.uniform(-a, a, 2 * need + 16)
        d = np.abs(x - y)
        ok = (d > 1) & (d > np.abs(x) / 2) & (d > np.abs(y) / 2)
        xs.append(x[ok][:need])
        ys.append(y[ok][:need])
        need -= xs[-1].size
    x2 = np.concatenate(xs)
    y2 = np.concatenate(ys)
    return np.concatenate([x0, x1, x2]), np.concatenate([y0, y1, y2])


@dataclass
class ComparisonReport:
    fitted_constant: float
    max_ratio_location: tuple
    n_pairs: int
    violations: int
    check_factor: float
    per_stratum: list = field(default_factory=list)


def check_pointwise_weight_inequality(w: Weight, n_pairs: int = 10**6, half_width: float = 100.0,
                                      seed: int = 0, check_factor: float = 1.01) -> ComparisonReport:
    """Fit the two-point comparison constant on one sample, test it on a fresh one."""
    rng = np.random.default_rng(seed)
    x, y = stratified_pairs(n_pairs, half_width, rng)
    r = comparison_ratio(x, y, w)
    i = int(np.argmax(r))
    c = float(r[i])
    thirds = np.array_split(r, [n_pairs // 3, 2 * (n_pairs // 3)])
    xv, yv = stratified_pairs(n_pairs, half_width, rng)
    violations = int(np.count_nonzero(comparison_ratio(xv, yv, w) > check_factor * c))
    return ComparisonReport(c, (float(x[i]), float(y[i])), n_pairs, violations, check_factor,
                            [float(t.max()) for t in thirds])


# --- Muckenhoupt A_p ------------------------------------------------------------


@dataclass
class ApReport:
    p: float
    constant: float
    interval_family_size: int
    refinement_trace: list
    lam: float = 0.0
    kappa: int = 0

    def to_json(self) -> str:
        d = asdict(self)
        return json.dumps({"constant": d["constant"], "p": d["p"], "lambda": d["lam"],
                           "kappa": d["kappa"], "trace": d["refinement_trace"],
                           "interval_family_size": d["interval_family_size"]})


def dyadic_half_lengths(grid: Grid, max_fraction: float = 0.5) -> list[int]:
    """Half-lengths (in cells) of centred intervals up to ``max_fraction * L``."""
    out = []
    m = 1
    while 2 * m * grid.spacing <= max_fraction * grid.length + 1e-12:
        out.append(m)
        m *= 2
    return out


def estimate_ap_constant(grid: Grid, log_w: np.ndarray, p: float = 2.0,
                         half_lengths=None) -> ApReport:
    """Supremum of the ``A_p`` product over centred intervals inside the grid.

    ``log_w`` holds ``log w`` at the grid nodes.  Averages use the
    trapezoidal rule; ``w^{1/(1-p)}`` is summed after shifting its exponent
    so nothing overflows.  The sup over this finite family is a lower bound
    for the true ``A_p`` constant.  The trace lists, for each half-length
    added to the family, the running maximum.
    """
    if not p > 1:
        raise ValueError(f"p must exceed 1, got {p}")
    log_w = np.asarray(log_w, dtype=float)
    if half_lengths is None:
        half_lengths = dyadic_half_lengths(grid)
    half_lengths = list(half_lengths)
    if not half_lengths:
        raise ValueError("empty interval family")
    n = grid.n_points

    def prefix(logv):
        shift = logv.max()
        return np.concatenate([[0.0], np.cumsum(np.exp(logv - shift))]), np.exp(logv - shift), shift

    cw, vw, sw = prefix(log_w)
    dual = log_w / (1.0 - p)
    cd, vd, sd = prefix(dual)

    best = 0.0
    count = 0
    trace = []
    for m in half_lengths:
        i = np.arange(m, n - m)
        if i.size == 0:
            continue
        lo, hi = i - m, i + m
        # trapezoid over nodes lo..hi, divided by the length 2m h
        tiny = np.finfo(float).tiny
        # windows far below the global maximum can cancel to <= 0; clamping keeps a lower bound
        sum_w = np.maximum(cw[hi + 1] - cw[lo] - 0.5 * (vw[lo] + vw[hi]), tiny)
        sum_d = np.maximum(cd[hi + 1] - cd[lo] - 0.5 * (vd[lo] + vd[hi]), tiny)
        log_avg_w = np.log(sum_w / (2 * m)) + sw
        log_avg_d = np.log(sum_d / (2 * m)) + sd
        prod = np.exp(log_avg_w + (p - 1) * log_avg_d)
        best = max(best, float(prod.max()))
        count += i.size
        trace.append((2 * m * grid.spacing, best))
    if count == 0:
        raise ValueError("no interval of the family fits inside the grid")
    return ApReport(p, best, count, trace)


def ap_constant_for_weight(w, grid: Grid, p: float = 2.0, half_lengths=None) -> ApReport:
    report = estimate_ap_constant(grid, w.log(grid.nodes), p, half_lengths)
    report.lam = float(w.lam)
    report.kappa = int(w.kappa)
    return report
