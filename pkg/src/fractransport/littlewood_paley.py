"""Dyadic Littlewood-Paley filter bank on the periodic grid.

``phi0`` equals 1 on ``|xi| <= 1/2`` and 0 on ``|xi| >= 1`` with a quintic
smoothstep in between; ``psi0(xi) = phi0(xi/2) - phi0(xi)``.  The frequency
variable is the angular wavenumber ``k``, so the band ``Delta_j`` lives on
``2^{j-1} <= |k| <= 2^{j+1}``.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from math import ceil, log2, pi

import numpy as np

from .spectral import Field, Grid, apply_multiplier, fractional_power

RECONSTRUCTION_TOL = 1e-12


class NyquistError(ValueError):
    pass


def smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    return t**3 * (10 - 15 * t + 6 * t**2)


def phi0(xi):
    return 1.0 - smoothstep(2 * np.abs(xi) - 1)


def psi0(xi):
    return phi0(np.asarray(xi) / 2) - phi0(xi)


@dataclass(frozen=True)
class FilterBank:
    grid: Grid
    j_min: int
    j_max: int
    low: dict = field(repr=False)
    band: dict = field(repr=False)

    @property
    def bands(self) -> range:
        return range(self.j_min, self.j_max + 1)

    def low_symbol(self, j: int) -> np.ndarray:
        """Symbol of ``S_j`` on rfft wavenumbers, ``j_min <= j <= j_max + 1``."""
        if j not in self.low:
            raise IndexError(f"S_{j} outside bank range [{self.j_min}, {self.j_max + 1}]")
        return self.low[j]

    def band_symbol(self, j: int) -> np.ndarray:
        if j not in self.band:
            raise IndexError(f"Delta_{j} outside bank range [{self.j_min}, {self.j_max}]")
        return self.band[j]


def default_band_range(grid: Grid) -> tuple[int, int]:
    """``2^{j_min}`` near four fundamental wavenumbers; ``2^{j_max}`` reaches Nyquist."""
    j_min = int(round(log2(4 * 2 * pi / grid.length)))
    j_max = int(ceil(log2(grid.nyquist)))
    return j_min, j_max


def build_filter_bank(grid: Grid, j_min: int | None = None, j_max: int | None = None) -> FilterBank:
    d_min, d_max = default_band_range(grid)
    j_min = d_min if j_min is None else int(j_min)
    j_max = d_max if j_max is None else int(j_max)
    if j_max < j_min:
        raise ValueError("j_max must be >= j_min")
    if 2.0 ** (j_max - 1) >= grid.nyquist:
        raise NyquistError(f"band {j_max} lies entirely above the Nyquist wavenumber {grid.nyquist:.4g}")
    k = grid.rwavenumbers
    low = {j: phi0(k / 2.0**j) for j in range(j_min, j_max + 2)}
    band = {j: psi0(k / 2.0**j) for j in range(j_min, j_max + 1)}
    bank = FilterBank(grid, j_min, j_max, low, band)
    resid = partition_residual(bank)
    if resid > RECONSTRUCTION_TOL:
        raise AssertionError(f"partition of unity fails: residual {resid:.3e}")
    return bank


def partition_residual(bank: FilterBank, K: int | None = None) -> float:
    """``max |phi0(2^-K k) + sum_{j>=K} psi0(2^-j k) - 1|`` over ``|k| < 2^{j_max}``."""
    K = bank.j_min if K is None else K
    total = bank.low_symbol(K) + sum(bank.band_symbol(j) for j in range(K, bank.j_max + 1))
    k = bank.grid.rwavenumbers
    sel = k < 2.0**bank.j_max
    return float(np.max(np.abs(total[sel] - 1.0)))


def lp_project(f: Field, bank: FilterBank, j: int, kind: str = "band") -> Field:
    if kind == "band":
        return apply_multiplier(f, bank.band_symbol(j))
    if kind == "low":
        return apply_multiplier(f, bank.low_symbol(j))
    raise ValueError(f"kind must be 'band' or 'low', got {kind!r}")


def lp_blocks(f: Field, bank: FilterBank) -> tuple[Field, dict]:
    """Low-pass block ``S_{j_min} f`` and all bands ``Delta_j f``."""
    return (lp_project(f, bank, bank.j_min, "low"),
            {j: lp_project(f, bank, j) for j in bank.bands})


def reconstruct(f: Field, bank: FilterBank, K: int | None = None) -> Field:
    K = bank.j_min if K is None else K
    out = lp_project(f, bank, K, "low").values.copy()
    for j in range(K, bank.j_max + 1):
        out += lp_project(f, bank, j).values
    return Field(f.grid, out)


# --- weighted norms -----------------------------------------------------------------


def weighted_l2(values, weight_values, h) -> float:
    return float(np.sqrt(h * np.sum(weight_values * values**2)))


@dataclass
class NormResult:
    value: float
    route: str
    homogeneous: bool
    s: float
    outside_weighted_range: bool = False

    def __float__(self):
        return self.value


def _lp_homogeneous(f, bank, s, wv, h, keep_mean):
    low, bands = lp_blocks(f, bank)
    lowv = low.values if keep_mean else low.values - f.values.mean()
    total = 2.0 ** (2 * (bank.j_min - 1) * s) * weighted_l2(lowv, wv, h) ** 2
    for j, b in bands.items():
        total += 2.0 ** (2 * j * s) * weighted_l2(b.values, wv, h) ** 2
    return float(np.sqrt(total))


def weighted_sobolev_norm(f: Field, s: float, w, route: str = "multiplier",
                          homogeneous: bool = True, bank: FilterBank | None = None) -> NormResult:
    """Weighted ``H^s`` norm by the multiplier route or the dyadic sum.

    Inhomogeneous norms are ``||f||_{L^2_w} + ||Lambda^s f||_{L^2_w}``; the
    dyadic route evaluates both terms from the filter bank (bands below
    ``j_min`` are lumped into the low-pass block, weighted with
    ``2^{(j_min-1)s}``).  A weighted norm with ``|s| >= 1/2`` is computed but
    flagged.
    """
    g = f.grid
    h = g.spacing
    wv = w(g.nodes)
    flag = (not hasattr(w, "lam") or w.lam > 0) and abs(s) >= 0.5
    if flag:
        warnings.warn(f"weighted Sobolev norm requested outside |s| < 1/2 (s={s})", stacklevel=2)
    if route == "multiplier":
        val = weighted_l2(fractional_power(f, s).values, wv, h)
        if not homogeneous:
            val += weighted_l2(f.values, wv, h)
    elif route == "lp_sum":
        bank = bank or build_filter_bank(g)
        val = _lp_homogeneous(f, bank, s, wv, h, keep_mean=False)
        if not homogeneous:
            val += _lp_homogeneous(f, bank, 0.0, wv, h, keep_mean=True)
    else:
        raise ValueError(f"unknown route {route!r}")
    return NormResult(float(val), route, homogeneous, s, flag)


# --- Bernstein ------------------------------------------------------------------


@dataclass
class BernsteinReport:
    s: float
    ratios: dict
    envelope: tuple
    empty: bool

    @property
    def active_bands(self) -> int:
        return len(self.ratios)


def bernstein_check(bank: FilterBank, f: Field, s: float, w, floor_tol: float = 1e-10) -> BernsteinReport:
    """Per-band ratio ``||Lambda^s Delta_j f||_w / (2^{js} ||Delta_j f||_w)``."""
    g = f.grid
    wv = w(g.nodes)
    h = g.spacing
    scale = max(weighted_l2(f.values, wv, h), np.finfo(float).tiny)
    ratios = {}
    for j in bank.bands:
        b = lp_project(f, bank, j)
        nb = weighted_l2(b.values, wv, h)
        if nb <= floor_tol * scale:
            continue
        ratios[j] = weighted_l2(fractional_power(b, s).values, wv, h) / (2.0 ** (j * s) * nb)
    if not ratios:
        return BernsteinReport(s, {}, (float("nan"), float("nan")), True)
    vals = list(ratios.values())
    return BernsteinReport(s, ratios, (min(vals), max(vals)), False)


# --- paraproduct ------------------------------------------------------------------


def paraproduct_split(f: Field, g: Field, bank: FilterBank) -> tuple[Field, Field]:
    """Split ``fg = sum_q S_{q+1} f Delta_q g + sum_j Delta_j f S_j g``.

    On the finite bank the low-pass block ``S_{j_min}`` plays the role of
    ``Delta_{j_min - 1}``; both spectra must lie below ``2^{j_max}``.
    """
    grid = f.grid
    limit = 2.0**bank.j_max
    k = grid.rwavenumbers
    for name, fld in (("f", f), ("g", g)):
        spec = np.abs(np.fft.rfft(fld.values))
        active = spec > 1e-13 * max(spec.max(), 1e-300)
        if np.any(active & (k >= limit)):
            raise ValueError(f"spectrum of {name} exceeds the bank range 2^{bank.j_max}")
    K = bank.j_min
    idx = list(range(K - 1, bank.j_max + 1))

    def blocks(u):
        low, bands = lp_blocks(u, bank)
        out = {K - 1: low.values}
        out.update({j: b.values for j, b in bands.items()})
        return out

    bf, bg = blocks(f), blocks(g)
    # partial sums P_m = sum_{i<=m} B_i, so S_{m+1} = P_m and S_m = P_{m-1}
    pf, pg = {}, {}
    accf = np.zeros(grid.n_points)
    accg = np.zeros(grid.n_points)
    for m in idx:
        accf = accf + bf[m]
        accg = accg + bg[m]
        pf[m] = accf
        pg[m] = accg
    first = sum(pf[q] * bg[q] for q in idx)
    second = sum(bf[j] * (pg[j - 1] if j - 1 in pg else 0.0) for j in idx)
    return Field(grid, first), Field(grid, second)


def write_band_energies(path, f: Field, bank: FilterBank, w) -> None:
    wv = w(f.grid.nodes)
    h = f.grid.spacing
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["j", "energy", "weighted_energy"])
        for j in bank.bands:
            b = lp_project(f, bank, j).values
            out.writerow([j, repr(h * float(np.sum(b**2))), repr(weighted_l2(b, wv, h) ** 2)])
