"""Periodic grid, Fourier multipliers and singular-integral quadrature.

The torus ``[-L/2, L/2)`` of adjustable length stands in for the real line.
Coefficients use the Fourier-series normalisation ``f(x) = sum_j F_j e^{i k_j x}``
so a constant field maps to a single zero-mode coefficient equal to itself.

Multiplier conventions::

    H       ->  +i sgn(k)      (kernel 1/(pi (y - x)), so d/dx H = -Lambda)
    Lambda^a ->  |k|^a          (zero mode annihilated, including a = 0)
    d/dx    ->  i k            (Nyquist mode zeroed for real output)
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import gamma, pi, sqrt

import numpy as np
from scipy import special


class PoisonedFieldError(ValueError):
    """Raised when a field carries NaN or Inf values."""


class DomainTooSmallError(ValueError):
    """Raised when data does not decay before the edge of the torus."""


#: fraction of the half-domain treated as the "central" region
BOUNDARY_FRACTION = 0.45
#: allowed boundary magnitude, relative to the sup norm
BOUNDARY_TOL = 1e-8


@dataclass(frozen=True)
class Grid:
    n_points: int
    length: float

    def __post_init__(self):
        n = int(self.n_points)
        if n < 16 or n & (n - 1):
            raise ValueError(f"n_points must be a power of two >= 16, got {self.n_points}")
        if not self.length > 0:
            raise ValueError(f"length must be positive, got {self.length}")
        object.__setattr__(self, "n_points", n)
        object.__setattr__(self, "length", float(self.length))

    @property
    def spacing(self) -> float:
        return self.length / self.n_points

    @property
    def nodes(self) -> np.ndarray:
        return -0.5 * self.length + self.spacing * np.arange(self.n_points)

    @property
    def mode_index(self) -> np.ndarray:
        """Integer mode numbers in FFT order, covering ``[-N/2, N/2)``."""
        return np.fft.fftfreq(self.n_points, d=1.0 / self.n_points).astype(int)

    @property
    def wavenumbers(self) -> np.ndarray:
        return 2 * pi / self.length * self.mode_index

    @property
    def rwavenumbers(self) -> np.ndarray:
        """Non-negative wavenumbers matching :func:`numpy.fft.rfft` output."""
        return 2 * pi / self.length * np.arange(self.n_points // 2 + 1)

    @property
    def nyquist(self) -> float:
        return pi * self.n_points / self.length

    def sample(self, func) -> "Field":
        return Field(self, func(self.nodes))


@dataclass(frozen=True)
class Field:
    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.n_points,):
            raise ValueError(f"expected {self.grid.n_points} values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise PoisonedFieldError("field contains non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __add__(self, other):
        return Field(self.grid, self.values + _values(other))

    def __sub__(self, other):
        return Field(self.grid, self.values - _values(other))

    def __mul__(self, other):
        return Field(self.grid, self.values * _values(other))

    __rmul__ = __mul__

    def __neg__(self):
        return Field(self.grid, -self.values)

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    def l2(self) -> float:
        return float(np.sqrt(self.grid.spacing * np.sum(self.values**2)))


def _values(obj):
    return obj.values if isinstance(obj, Field) else obj


@dataclass(frozen=True)
class SpectralField:
    grid: Grid
    coefficients: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.array(self.coefficients, dtype=complex)
        if c.shape != (self.grid.n_points,):
            raise ValueError("coefficient count does not match grid")
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)

    def hermitian_defect(self) -> float:
        c = self.coefficients
        mirrored = np.conj(c[(-np.arange(c.size)) % c.size])
        return float(np.max(np.abs(c - mirrored)))

    def energy(self) -> float:
        """L2 norm squared via Parseval (Fourier-series normalisation)."""
        return float(self.grid.length * np.sum(np.abs(self.coefficients) ** 2))


# --- transforms ----------------------------------------------------------------


def forward_transform(f: Field) -> SpectralField:
    if not np.all(np.isfinite(f.values)):
        raise PoisonedFieldError("cannot transform a poisoned field")
    return SpectralField(f.grid, np.fft.fft(f.values, norm="forward"))


def inverse_transform(F: SpectralField) -> Field:
    return Field(F.grid, np.fft.ifft(F.coefficients, norm="forward").real)


def apply_multiplier(f: Field, symbol: np.ndarray) -> Field:
    """Apply a real-space-real multiplier given on the rfft wavenumbers."""
    return Field(f.grid, np.fft.irfft(symbol * np.fft.rfft(f.values), n=f.grid.n_points))


def hilbert_symbol(grid: Grid) -> np.ndarray:
    s = 1j * np.sign(grid.rwavenumbers)
    s[-1] = 0.0
    return s


def derivative_symbol(grid: Grid, order: int = 1) -> np.ndarray:
    s = (1j * grid.rwavenumbers) ** order
    if order % 2:
        s[-1] = 0.0
    return s


def fractional_symbol(grid: Grid, alpha: float) -> np.ndarray:
    k = grid.rwavenumbers
    s = np.zeros_like(k)
    s[1:] = k[1:] ** alpha
    return s


def hilbert_transform(f: Field) -> Field:
    return apply_multiplier(f, hilbert_symbol(f.grid))


def derivative(f: Field, order: int = 1) -> Field:
    return apply_multiplier(f, derivative_symbol(f.grid, order))


def fractional_laplacian(f: Field, alpha: float) -> Field:
    """``Lambda^alpha f`` by the multiplier ``|k|^alpha``; ``alpha`` in ``[0, 2)``."""
    if not 0 <= alpha < 2:
        raise ValueError(f"alpha must lie in [0, 2), got {alpha}")
    return apply_multiplier(f, fractional_symbol(f.grid, alpha))


def fractional_power(f: Field, s: float) -> Field:
    """``Lambda^s f`` for any real ``s``; zero mode annihilated."""
    return apply_multiplier(f, fractional_symbol(f.grid, s))


def dealias(F: SpectralField) -> SpectralField:
    """Two-thirds rule: zero every mode with ``|j| > N/3``."""
    mask = np.abs(F.grid.mode_index) <= F.grid.n_points / 3
    return SpectralField(F.grid, np.where(mask, F.coefficients, 0.0))


def dealias_mask(grid: Grid) -> np.ndarray:
    """Two-thirds mask on the rfft index range."""
    return np.arange(grid.n_points // 2 + 1) <= grid.n_points / 3


def check_boundary_decay(f: Field, tol: float = BOUNDARY_TOL) -> float:
    """Return the relative edge magnitude; raise if it exceeds ``tol``."""
    x = f.grid.nodes
    scale = f.sup()
    if scale == 0.0:
        return 0.0
    edge = np.max(np.abs(f.values[np.abs(x) > BOUNDARY_FRACTION * f.grid.length]), initial=0.0)
    ratio = edge / scale
    if ratio > tol:
        raise DomainTooSmallError(
            f"boundary magnitude {ratio:.3e} (relative) exceeds {tol:.1e}; enlarge the domain")
    return float(ratio)


# --- singular-integral quadrature ------------------------------------------------


def pv_constant(alpha: float) -> float:
    """Normalisation making ``C int (f(x)-f(x-y))/|y|^{1+alpha} dy`` equal ``|k|^alpha``."""
    return alpha * 2 ** (alpha - 1) * gamma((1 + alpha) / 2) / (sqrt(pi) * gamma(1 - alpha / 2))


def _power_diff(j: np.ndarray, c: float) -> np.ndarray:
    """``(j+1)^c - j^c`` without catastrophic cancellation for large ``j``."""
    out = np.empty_like(j, dtype=float)
    zero = j == 0
    out[zero] = 1.0
    jj = j[~zero].astype(float)
    out[~zero] = jj**c * np.expm1(c * np.log1p(1.0 / jj))
    return out


def product_weights(n_cells: int, beta: float) -> np.ndarray:
    """Weights for ``int_0^{n} q(t) t^beta dt`` with ``q`` piecewise linear on integers.

    Exact for piecewise-linear ``q``; ``beta > -1``.  Returns ``n_cells + 1``
    weights on the nodes ``t = 0..n``.
    """
    if beta <= -1:
        raise ValueError("kernel exponent not integrable at the origin")
    j = np.arange(n_cells)
    m0 = _power_diff(j, beta + 1) / (beta + 1)
    m1 = _power_diff(j, beta + 2) / (beta + 2)
    w = np.zeros(n_cells + 1)
    w[:-1] += (j + 1) * m0 - m1
    w[1:] += m1 - j * m0
    return w


def power_weighted_integral(q, n_steps: int, spacing: float, beta: float):
    """``int_0^{n h} q(y) y^beta dy`` with ``q(j)`` given at ``y = j h``, ``j >= 0``."""
    w = product_weights(n_steps, beta) * spacing ** (beta + 1)
    total = 0.0
    for j in range(n_steps + 1):
        total = total + w[j] * q(j)
    return total


def symmetric_singular_integral(bracket, n_steps: int, spacing: float, exponent: float,
                                smooth_kernel=None):
    """Evaluate ``int_0^{Y} B(y) / y^exponent dy`` for an even bracket ``B = O(y^2)``.

    ``bracket(j)`` returns the bracket at ``y = j * spacing`` for ``j >= 1``
    (an array over evaluation points).  The smooth factor ``B / y^2`` is
    interpolated linearly and integrated exactly against ``y^{2-exponent}``;
    its value at the origin is extrapolated from the first two nodes using
    evenness.  ``smooth_kernel``, if given, is an extra bounded kernel
    integrated against ``B`` by the trapezoidal rule.
    """
    beta = 2.0 - exponent
    w = product_weights(n_steps, beta) * spacing ** (beta + 1)
    # fold the extrapolated origin value onto nodes 1 and 2
    w[1] += 4.0 / 3.0 * w[0]
    w[2] -= 1.0 / 3.0 * w[0]
    total = 0.0
    for j in range(1, n_steps + 1):
        b = bracket(j)
        y = j * spacing
        term = w[j] * b / y**2
        if smooth_kernel is not None:
            trap = spacing * (0.5 if j == n_steps else 1.0)
            term = term + trap * smooth_kernel(y) * b
        total = total + term
    return total


def periodic_image_kernel(alpha: float, length: float):
    """Image sum ``sum_{n != 0} |y + nL|^{-1-alpha}`` for ``0 <= y <= L/2``."""
    s = 1.0 + alpha

    def kernel(y):
        return length**-s * (special.zeta(s, 1.0 + y / length) + special.zeta(s, 1.0 - y / length))

    return kernel


def fractional_laplacian_pv(f: Field, alpha: float, step: int = 1, kernel: str = "periodic",
                            y_max: float | None = None) -> Field:
    """``Lambda^alpha f`` by direct quadrature of the singular integral.

    Independent of the FFT route.  ``step`` sets the quadrature spacing in
    grid cells (``step=1`` is the finest).

    ``kernel="periodic"`` integrates over one period against the periodised
    kernel ``sum_n |y + nL|^{-1-alpha}``: the exact torus operator.
    ``kernel="free"`` uses the real-line kernel truncated at ``y_max``
    (default ``0.45 L``) with the ``2 f(x) Y^{-alpha} / alpha`` tail added
    analytically; the data must decay before the domain edge.
    """
    if not 0 < alpha < 2:
        raise ValueError(f"alpha must lie in (0, 2), got {alpha}")
    g = f.grid
    n = g.n_points
    if n % (2 * step):
        raise ValueError("step must divide N/2")
    v = f.values
    hq = step * g.spacing
    c = pv_constant(alpha)
    if kernel == "periodic":
        m = n // (2 * step)

        def bracket(j):
            shift = j * step
            return 2 * v - np.roll(v, -shift) - np.roll(v, shift)

        out = symmetric_singular_integral(bracket, m, hq, 1 + alpha,
                                          smooth_kernel=periodic_image_kernel(alpha, g.length))
        return Field(g, c * out)
    if kernel == "free":
        check_boundary_decay(f)
        if y_max is None:
            y_max = BOUNDARY_FRACTION * g.length
        m = int(y_max // hq)
        pad = m * step
        vp = np.concatenate([np.zeros(pad), v, np.zeros(pad)])

        def bracket(j):
            shift = j * step
            return 2 * v - vp[pad + shift:pad + shift + n] - vp[pad - shift:pad - shift + n]

        out = symmetric_singular_integral(bracket, m, hq, 1 + alpha)
        out = out + 2 * v * (m * hq) ** -alpha / alpha
        return Field(g, c * out)
    raise ValueError(f"unknown kernel {kernel!r}")


# --- maximal function ------------------------------------------------------------


def dyadic_cell_radii(n_points: int) -> np.ndarray:
    """Half-widths ``m`` (in cells) of centred windows of ``2m+1`` cells."""
    radii = [0]
    m = 1
    while 2 * m + 1 <= n_points:
        radii.append(m)
        m *= 2
    # the widest window is the whole period
    if radii[-1] < n_points // 2:
        radii.append(n_points // 2)
    return np.array(radii)


def windowed_means(values: np.ndarray, radii) -> np.ndarray:
    """Periodic centred means over ``2m+1`` cells for each ``m`` in ``radii``.

    A window of ``2m+1 > N`` cells is read as the full period.
    """
    n = values.size
    tiled = np.concatenate([values, values, values])
    csum = np.concatenate([[0.0], np.cumsum(tiled)])
    i = np.arange(n) + n
    out = np.empty((len(radii), n))
    for r, m in enumerate(radii):
        if m == 0:
            out[r] = values
        elif 2 * m + 1 > n:
            out[r] = values.mean()
        else:
            out[r] = (csum[i + m + 1] - csum[i - m]) / (2 * m + 1)
    return out


def maximal_function(f: Field) -> Field:
    """Centred Hardy-Littlewood maximal function over dyadic windows.

    Samples are treated as cell averages; the window of half-width ``m``
    covers ``2m+1`` cells, i.e. radius ``(m + 1/2) h``.  ``m = 0`` reproduces
    ``|f|`` so ``Mf >= |f|`` holds exactly.
    """
    means = windowed_means(np.abs(f.values), dyadic_cell_radii(f.grid.n_points))
    return Field(f.grid, means.max(axis=0))
