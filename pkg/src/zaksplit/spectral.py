"""
Fourier collocation on the torus T^d = (R / 2piZ)^d.

A trigonometric polynomial of degree K is stored through its coefficients
v_j, j in {-K, ..., K-1}^d, in lexicographic order: array index i along an
axis holds mode j = i - K. Node values use the same layout, index i holding
the collocation point x = (i - K) * pi / K.

The forward transform (node values -> coefficients) carries the 1/(2K)^d
normalization, so that sampling e^{ij.x} and transforming gives exactly one
unit coefficient.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from pathlib import Path
from typing import Callable

import numpy as np

from zaksplit.errors import DimensionError, GridMismatchError, NumericError

# Below this modulus phi and sinc switch to their Taylor polynomials.
SERIES_THRESHOLD = 1e-4


@dataclass(frozen=True)
class Grid:
    """Mode set {-K, ..., K-1}^d and the matching collocation nodes."""

    d: int
    K: int

    def __post_init__(self):
        if not (isinstance(self.d, (int, np.integer)) and 1 <= self.d <= 3):
            raise ValueError(f"dimension d must be 1, 2 or 3, got {self.d!r}")
        if not (isinstance(self.K, (int, np.integer)) and self.K >= 1):
            raise ValueError(f"degree K must be a positive integer, got {self.K!r}")

    @property
    def shape(self) -> tuple[int, ...]:
        return (2 * self.K,) * self.d

    @property
    def size(self) -> int:
        return (2 * self.K) ** self.d

    @cached_property
    def mode_axis(self) -> np.ndarray:
        return np.arange(-self.K, self.K)

    @cached_property
    def modes(self) -> tuple[np.ndarray, ...]:
        """Integer mode components, one array of ``shape`` per axis."""
        return tuple(np.meshgrid(*([self.mode_axis] * self.d), indexing="ij"))

    @cached_property
    def nodes(self) -> tuple[np.ndarray, ...]:
        """Collocation coordinates x_k = k*pi/K, one array per axis."""
        return tuple(m * (np.pi / self.K) for m in self.modes)

    @cached_property
    def omega_sq(self) -> np.ndarray:
        """|j|^2 on the mode array (the symbol of -Laplace)."""
        return sum(m.astype(float) ** 2 for m in self.modes)

    @cached_property
    def omega(self) -> np.ndarray:
        """|j| on the mode array."""
        return np.sqrt(self.omega_sq)

    @cached_property
    def weight(self) -> np.ndarray:
        """max(|j|, 1), the base of the Sobolev weights."""
        return np.maximum(self.omega, 1.0)

    def index_of(self, j) -> tuple[int, ...]:
        """Array index of mode ``j`` (an int for d=1, or a tuple)."""
        j = (j,) if np.isscalar(j) else tuple(j)
        if len(j) != self.d:
            raise DimensionError(f"mode {j} has {len(j)} components, grid has d={self.d}")
        if any(not -self.K <= c < self.K for c in j):
            raise DimensionError(f"mode {j} outside {{-K..K-1}}^d for K={self.K}")
        return tuple(c + self.K for c in j)

    def mode_of(self, index) -> tuple[int, ...]:
        return tuple(int(i) - self.K for i in index)


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Fourier coefficients of a degree-K trigonometric polynomial.

    Instances are immutable; the coefficient array is copied and frozen.
    """

    grid: Grid
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex)
        if c.shape != self.grid.shape:
            if c.size != self.grid.size:
                raise DimensionError(
                    f"expected {self.grid.size} coefficients for {self.grid}, got {c.size}"
                )
            c = c.reshape(self.grid.shape)
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zeros(cls, grid: Grid) -> SpectralField:
        return cls(grid, np.zeros(grid.shape, dtype=complex))

    @classmethod
    def constant(cls, grid: Grid, value: complex) -> SpectralField:
        c = np.zeros(grid.shape, dtype=complex)
        c[(grid.K,) * grid.d] = value
        return cls(grid, c)

    @classmethod
    def single_mode(cls, grid: Grid, j, value: complex = 1.0) -> SpectralField:
        c = np.zeros(grid.shape, dtype=complex)
        c[grid.index_of(j)] = value
        return cls(grid, c)

    def coefficient(self, j) -> complex:
        return complex(self.coeffs[self.grid.index_of(j)])

    def _other(self, other) -> np.ndarray:
        if isinstance(other, SpectralField):
            _check_same_grid(self, other)
            return other.coeffs
        return other

    def __add__(self, other):
        return SpectralField(self.grid, self.coeffs + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return SpectralField(self.grid, self.coeffs - self._other(other))

    def __rsub__(self, other):
        return SpectralField(self.grid, self._other(other) - self.coeffs)

    def __mul__(self, scalar):
        if isinstance(scalar, SpectralField):
            raise TypeError("use pointwise_product for the collocation product of two fields")
        return SpectralField(self.grid, self.coeffs * scalar)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return SpectralField(self.grid, self.coeffs / scalar)

    def __neg__(self):
        return SpectralField(self.grid, -self.coeffs)

    def allclose(self, other: SpectralField, rtol=0.0, atol=0.0) -> bool:
        _check_same_grid(self, other)
        return bool(np.allclose(self.coeffs, other.coeffs, rtol=rtol, atol=atol))


def _check_same_grid(*fields: SpectralField):
    grid = fields[0].grid
    for f in fields[1:]:
        if f.grid != grid:
            raise GridMismatchError(f"fields live on different grids: {grid} vs {f.grid}")


# --- transforms -----------------------------------------------------------


@lru_cache(maxsize=32)
def _modulation(shape: tuple[int, ...]) -> tuple[np.ndarray, np.ndarray]:
    # With k = m - K and j = p - K, e^{-ijk pi/K} = e^{-2 pi i pm/N} (-1)^{p+m+K} per axis,
    # so the lexicographic transform is a plain FFT between (-1)^index modulations,
    # with the constant (-1)^{Kd} absorbed into the outer one.
    sign = np.ones(shape)
    for axis, n in enumerate(shape):
        s = (-1.0) ** np.arange(n)
        sign = sign * s.reshape([-1 if a == axis else 1 for a in range(len(shape))])
    outer = -sign if sum(n // 2 for n in shape) % 2 else sign.copy()
    sign.flags.writeable = False
    outer.flags.writeable = False
    return sign, outer


def values_to_coeffs(values: np.ndarray, ndim: int | None = None) -> np.ndarray:
    """Array-level forward transform over the trailing ``ndim`` axes (default: all)."""
    ndim = values.ndim if ndim is None else ndim
    shape = values.shape[values.ndim - ndim :]
    inner, outer = _modulation(shape)
    n = math.prod(shape)
    if ndim == 1:
        return outer * np.fft.fft(inner * values) / n
    return outer * np.fft.fftn(inner * values, axes=range(-ndim, 0)) / n


def coeffs_to_values(coeffs: np.ndarray, ndim: int | None = None) -> np.ndarray:
    """Array-level inverse of :func:`values_to_coeffs`."""
    ndim = coeffs.ndim if ndim is None else ndim
    shape = coeffs.shape[coeffs.ndim - ndim :]
    inner, outer = _modulation(shape)
    n = math.prod(shape)
    if ndim == 1:
        return outer * np.fft.ifft(inner * coeffs) * n
    return outer * np.fft.ifftn(inner * coeffs, axes=range(-ndim, 0)) * n


def dft_forward(node_values: np.ndarray, grid: Grid) -> SpectralField:
    """Coefficients of the unique degree-K trigonometric polynomial through ``node_values``."""
    values = np.asarray(node_values, dtype=complex)
    if values.size != grid.size:
        raise DimensionError(f"expected {grid.size} node values for {grid}, got {values.size}")
    return SpectralField(grid, values_to_coeffs(values.reshape(grid.shape)))


def evaluate_nodes(f: SpectralField) -> np.ndarray:
    """Values sum_j v_j e^{ij.x_k} at all collocation nodes."""
    return coeffs_to_values(f.coeffs)


def interpolate_function(f: Callable[..., np.ndarray], grid: Grid) -> SpectralField:
    """Trigonometric interpolant of ``f``; ``f`` receives one coordinate array per axis."""
    values = np.broadcast_to(np.asarray(f(*grid.nodes), dtype=complex), grid.shape)
    return dft_forward(values, grid)


def pointwise_product(a: SpectralField, b: SpectralField) -> SpectralField:
    """Collocation product I(a*b), aliasing included."""
    _check_same_grid(a, b)
    prod = coeffs_to_values(a.coeffs) * coeffs_to_values(b.coeffs)
    return SpectralField(a.grid, values_to_coeffs(prod))


def abs_squared(f: SpectralField) -> SpectralField:
    """I(|f|^2), formed from |value|^2 at the nodes."""
    vals = coeffs_to_values(f.coeffs)
    return SpectralField(f.grid, values_to_coeffs(vals.real**2 + vals.imag**2))


# --- functions of Omega ---------------------------------------------------


@dataclass(frozen=True)
class OmegaSymbol:
    """Diagonal operator g(Omega): mode j is multiplied by ``eval(|j|)``.

    ``eval`` must accept an array of nonnegative reals and return an array
    of multipliers of the same shape. Step parameters are captured in the
    callable.
    """

    eval: Callable[[np.ndarray], np.ndarray]
    name: str = "symbol"

    def multipliers(self, grid: Grid) -> np.ndarray:
        with np.errstate(all="ignore"):
            m = np.broadcast_to(np.asarray(self.eval(grid.omega)), grid.shape)
        bad = ~np.isfinite(m)
        if bad.any():
            mode = grid.mode_of(np.argwhere(bad)[0])
            raise NumericError(f"{self.name} is not finite at mode {mode}", mode=mode)
        return m

    def __call__(self, f: SpectralField) -> SpectralField:
        return apply_symbol(self, f)


def apply_symbol(sym: OmegaSymbol, f: SpectralField) -> SpectralField:
    return SpectralField(f.grid, sym.multipliers(f.grid) * f.coeffs)


def sinc(x):
    """sin(x)/x with sinc(0) = 1 (unnormalized, unlike ``np.sinc``)."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < SERIES_THRESHOLD
    safe = np.where(small, 1.0, x)
    x2 = x * x
    return np.where(small, 1.0 - x2 / 6.0 + x2 * x2 / 120.0, np.sin(safe) / safe)


def phi_complex(xi):
    """phi(xi) = (e^xi - 1)/xi, the first exponential-integrator function.

    Accepts scalars or arrays; a 4-term Taylor polynomial is used for
    |xi| < 1e-4.
    """
    z = np.asarray(xi, dtype=complex)
    small = np.abs(z) < SERIES_THRESHOLD
    safe = np.where(small, 1.0, z)
    series = 1.0 + z * (0.5 + z * (1.0 / 6.0 + z / 24.0))
    out = np.where(small, series, np.expm1(safe) / safe)
    return complex(out) if out.ndim == 0 else out


def phi_field(v: SpectralField, scale: complex) -> SpectralField:
    """I(phi(scale * v)), phi applied at the collocation nodes."""
    vals = coeffs_to_values(v.coeffs)
    return SpectralField(v.grid, values_to_coeffs(phi_complex(scale * vals)))


# --- norms ----------------------------------------------------------------


def sobolev_norm(f: SpectralField, s: float) -> float:
    """(sum_j max(|j|,1)^{2s} |v_j|^2)^{1/2}."""
    w = f.grid.weight ** (2.0 * s)
    return float(math.sqrt(np.sum(w * (f.coeffs.real**2 + f.coeffs.imag**2))))


def pair_norm(v: SpectralField, vdot: SpectralField, s: float) -> float:
    """Product norm on H^{s+1} x H^s."""
    _check_same_grid(v, vdot)
    return math.hypot(sobolev_norm(v, s + 1), sobolev_norm(vdot, s))


# --- spectrum dump --------------------------------------------------------


def spectrum_rows(f: SpectralField):
    """Yield (j components..., re, im, abs) rows in lexicographic mode order."""
    grid = f.grid
    for index in np.ndindex(*grid.shape):
        c = complex(f.coeffs[index])
        yield (*grid.mode_of(index), c.real, c.imag, abs(c))


def spectrum_header(grid: Grid) -> list[str]:
    jcols = ["j"] if grid.d == 1 else [f"j{i + 1}" for i in range(grid.d)]
    return [*jcols, "re", "im", "abs"]


def write_spectrum_csv(f: SpectralField, path) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(spectrum_header(f.grid))
            for row in spectrum_rows(f):
                writer.writerow([repr(x) if isinstance(x, float) else x for x in row])
    except OSError as exc:
        raise OSError(f"cannot write spectrum to {path}: {exc}") from exc
    return path
