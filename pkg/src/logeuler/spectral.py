"""Periodic pseudo-spectral representation of scalar fields on [-l, l)^2.

The plane is truncated to a periodic square box.  Transforms follow the
convention f^(k) = int f(x) exp(-ik.x) dx, discretized with the uniform
h^2 weight; wavenumbers are k_j = (pi/l) * j for j in [-n/2, n/2).

The regularizing multiplier acts diagonally in Fourier space:

    log_laplacian :  m(k) = ln(e + |k|^2)^(-gamma)
    log_gradient  :  m(k) = ln(e + |k|)^(-gamma)
    identity      :  m(k) = 1          (the plain 2D Euler case)

m is real, even, radially non-increasing, with m(0) = 1, so every kind
preserves the mean mode and contracts every L^p norm (the kernel is a
positive superposition of Gaussians of unit mass).
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import GridMismatch, NegativeOrderOnMean, NonZeroMean, ValidationError

MEAN_MODE_RTOL = 1e-12


class RegKind(enum.Enum):
    LOG_LAPLACIAN = "log_laplacian"
    LOG_GRADIENT = "log_gradient"
    IDENTITY = "identity"

    @classmethod
    def parse(cls, name: str) -> "RegKind":
        try:
            return cls(name.strip().lower())
        except ValueError:
            raise ValidationError(f"unknown multiplier kind {name!r}") from None


@dataclass(frozen=True)
class Gamma:
    """Regularization exponent; the theorems concern 0 < gamma <= 1/2."""

    value: float

    def __post_init__(self):
        if not self.value > 0:
            raise ValidationError(f"gamma must be positive, got {self.value}")
        if self.value > 0.5:
            warnings.warn(
                f"gamma = {self.value} is outside the regime gamma <= 1/2; "
                "kernels remain well defined",
                stacklevel=2,
            )


@dataclass(frozen=True)
class Grid:
    """Uniform n x n grid on the box [-box_half, box_half)^2."""

    n: int
    box_half: float

    def __post_init__(self):
        if self.n < 16 or self.n & (self.n - 1) != 0:
            raise ValidationError(f"n must be a power of two >= 16, got {self.n}")
        if not self.box_half > 0:
            raise ValidationError("box_half must be positive")

    @property
    def h(self) -> float:
        return 2.0 * self.box_half / self.n

    @property
    def x(self) -> np.ndarray:
        return _axis_coords(self.n, self.box_half)

    @property
    def k(self) -> np.ndarray:
        return _axis_wavenumbers(self.n, self.box_half)

    def meshes(self):
        return _meshes(self.n, self.box_half)

    def wavenumber_meshes(self):
        return _wavenumber_meshes(self.n, self.box_half)

    @property
    def origin_index(self) -> int:
        return self.n // 2


@lru_cache(maxsize=32)
def _axis_coords(n: int, box_half: float) -> np.ndarray:
    x = -box_half + (2.0 * box_half / n) * np.arange(n)
    x.setflags(write=False)
    return x


@lru_cache(maxsize=32)
def _axis_wavenumbers(n: int, box_half: float) -> np.ndarray:
    k = 2.0 * np.pi * np.fft.fftfreq(n, d=2.0 * box_half / n)
    k.setflags(write=False)
    return k


@lru_cache(maxsize=32)
def _meshes(n: int, box_half: float):
    X, Y = np.meshgrid(_axis_coords(n, box_half), _axis_coords(n, box_half), indexing="ij")
    X.setflags(write=False)
    Y.setflags(write=False)
    return X, Y


@lru_cache(maxsize=32)
def _wavenumber_meshes(n: int, box_half: float):
    k = _axis_wavenumbers(n, box_half)
    KX, KY = np.meshgrid(k, k, indexing="ij")
    K2 = KX * KX + KY * KY
    for a in (KX, KY, K2):
        a.setflags(write=False)
    return KX, KY, K2


# parity flags: +1 even, -1 odd, 0 undeclared; one flag per axis
Parity = tuple


class Field:
    """Immutable real scalar on a Grid with lazily cached spectral data.

    ``spectral`` holds the plain DFT of ``values`` (numpy convention); the
    continuum transform is h^2 times that, up to the phase from the -l grid
    offset.  ``parity`` declares symmetry under x_i -> -x_i at grid points.
    """

    __slots__ = ("grid", "values", "parity", "_spectral")

    def __init__(self, grid: Grid, values: np.ndarray, parity: Parity = (0, 0), spectral=None):
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (grid.n, grid.n):
            raise ValidationError(f"values shape {values.shape} != grid {(grid.n, grid.n)}")
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "parity", tuple(parity))
        object.__setattr__(self, "_spectral", spectral)

    def __setattr__(self, name, value):
        raise AttributeError("Field is immutable")

    @classmethod
    def from_values(cls, grid: Grid, values, parity: Parity = (0, 0)) -> "Field":
        return cls(grid, values, parity)

    @classmethod
    def from_spectral(cls, grid: Grid, spectral: np.ndarray, parity: Parity = (0, 0)) -> "Field":
        values = np.fft.ifft2(spectral).real
        f = cls(grid, values, parity)
        spec = np.asarray(spectral, dtype=np.complex128).copy()
        spec.setflags(write=False)
        object.__setattr__(f, "_spectral", spec)
        return f

    @property
    def spectral(self) -> np.ndarray:
        if self._spectral is None:
            spec = np.fft.fft2(self.values)
            spec.setflags(write=False)
            object.__setattr__(self, "_spectral", spec)
        return self._spectral

    def mean_mode(self) -> float:
        """Continuum zero mode f^(0) = int f dx."""
        return float(self.values.sum()) * self.grid.h**2

    def parity_defect(self) -> tuple:
        """Max deviation from the declared parity, per axis (absolute)."""
        out = []
        for axis, s in enumerate(self.parity):
            if s == 0:
                out.append(0.0)
                continue
            refl = _reflect(self.values, axis)
            out.append(float(np.abs(refl - s * self.values).max()))
        return tuple(out)


def _reflect(values: np.ndarray, axis: int) -> np.ndarray:
    # grid point x_j = -l + j h maps to -x_j at index (n - j) mod n
    return np.roll(np.flip(values, axis=axis), 1, axis=axis)


def same_grid(a: Field, b: Field) -> Grid:
    if a.grid != b.grid:
        raise GridMismatch(f"grids differ: {a.grid} vs {b.grid}")
    return a.grid


@lru_cache(maxsize=64)
def multiplier_symbol(n: int, box_half: float, kind: RegKind, gamma: float) -> np.ndarray:
    """m(k) on the FFT-ordered wavenumber lattice, m(0) forced to 1 exactly.

    The Nyquist row/column carries the true symbol value: m is real and even,
    so the asymmetric mode needs no tie-breaking, and keeping it preserves the
    exact positive-kernel contraction on every L^p.
    """
    _, _, K2 = _wavenumber_meshes(n, box_half)
    if kind is RegKind.IDENTITY:
        m = np.ones((n, n))
    elif kind is RegKind.LOG_LAPLACIAN:
        m = np.log(np.e + K2) ** (-gamma)
    elif kind is RegKind.LOG_GRADIENT:
        m = np.log(np.e + np.sqrt(K2)) ** (-gamma)
    else:  # pragma: no cover
        raise ValidationError(f"unhandled kind {kind}")
    m[0, 0] = 1.0
    m.setflags(write=False)
    return m


def _zero_nyquist(symbol: np.ndarray) -> np.ndarray:
    n = symbol.shape[0]
    symbol[n // 2, :] = 0.0
    symbol[:, n // 2] = 0.0
    return symbol


@lru_cache(maxsize=64)
def inverse_laplacian_symbol(n: int, box_half: float) -> np.ndarray:
    _, _, K2 = _wavenumber_meshes(n, box_half)
    with np.errstate(divide="ignore"):
        inv = np.where(K2 > 0.0, 1.0 / np.where(K2 > 0.0, K2, 1.0), 0.0)
    inv.setflags(write=False)
    return inv


@lru_cache(maxsize=64)
def velocity_symbols(n: int, box_half: float, kind: RegKind, gamma: float):
    """Spectral symbols of u = grad^perp Lap^-1 T_gamma: (u1, u2) factors.

    u1^ = +i k2 m(k) w^ / |k|^2,   u2^ = -i k1 m(k) w^ / |k|^2.
    Nyquist zeroed (odd symbols have no symmetric partner mode).
    """
    KX, KY, _ = _wavenumber_meshes(n, box_half)
    m = multiplier_symbol(n, box_half, kind, gamma)
    inv = inverse_laplacian_symbol(n, box_half)
    s1 = _zero_nyquist(1j * KY * m * inv)
    s2 = _zero_nyquist(-1j * KX * m * inv)
    s1.setflags(write=False)
    s2.setflags(write=False)
    return s1, s2


@lru_cache(maxsize=64)
def riesz_second_symbol(n: int, box_half: float, i: int, j: int, kind: RegKind, gamma: float):
    """Symbol -k_i k_j m(k) / |k|^2 (i, j in {1, 2}); Nyquist zeroed."""
    KX, KY, _ = _wavenumber_meshes(n, box_half)
    comp = {1: KX, 2: KY}
    m = multiplier_symbol(n, box_half, kind, gamma)
    inv = inverse_laplacian_symbol(n, box_half)
    s = _zero_nyquist(-comp[i] * comp[j] * m * inv)
    s.setflags(write=False)
    return s


@lru_cache(maxsize=64)
def gradient_symbols(n: int, box_half: float):
    KX, KY, _ = _wavenumber_meshes(n, box_half)
    dx = _zero_nyquist(1j * KX.copy())
    dy = _zero_nyquist(1j * KY.copy())
    dx.setflags(write=False)
    dy.setflags(write=False)
    return dx, dy


def _symbol_parity_map(parity: Parity, sym_parity: Parity) -> Parity:
    return tuple(p * s for p, s in zip(parity, sym_parity))


def require_zero_mean(f: Field, what: str = "field") -> None:
    tol = MEAN_MODE_RTOL * max(lebesgue_norm(f, 2), np.finfo(float).tiny)
    if abs(f.mean_mode()) > tol:
        raise NonZeroMean(
            f"{what} has mean mode {f.mean_mode():.3e} above tolerance {tol:.3e}"
        )


def apply_multiplier(f: Field, kind: RegKind, gamma: Gamma) -> Field:
    """T_gamma f. The identity kind returns the input unchanged."""
    if kind is RegKind.IDENTITY:
        return f
    m = multiplier_symbol(f.grid.n, f.grid.box_half, kind, gamma.value)
    return Field.from_spectral(f.grid, m * f.spectral, parity=f.parity)


def biot_savart(w: Field, kind: RegKind, gamma: Gamma) -> tuple:
    """Velocity u = grad^perp Lap^-1 T_gamma w; requires a zero mean mode."""
    require_zero_mean(w, "vorticity")
    s1, s2 = velocity_symbols(w.grid.n, w.grid.box_half, kind, gamma.value)
    wh = w.spectral
    u1 = Field.from_spectral(w.grid, s1 * wh, parity=_symbol_parity_map(w.parity, (1, -1)))
    u2 = Field.from_spectral(w.grid, s2 * wh, parity=_symbol_parity_map(w.parity, (-1, 1)))
    return u1, u2


def riesz_second(w: Field, i: int, j: int, kind: RegKind, gamma: Gamma) -> Field:
    """Field of -d_i d_j Lap^-1 T_gamma w (e.g. lambda(x) for i, j = 1, 2)."""
    if i not in (1, 2) or j not in (1, 2):
        raise ValidationError("axes must be 1 or 2")
    require_zero_mean(w, "vorticity")
    s = riesz_second_symbol(w.grid.n, w.grid.box_half, i, j, kind, gamma.value)
    sym_par = [1, 1]
    for axis in (i, j):
        sym_par[axis - 1] *= -1
    return Field.from_spectral(w.grid, s * w.spectral, parity=_symbol_parity_map(w.parity, tuple(sym_par)))


def sobolev_norm(f: Field, s: float) -> float:
    """Discrete homogeneous H^s norm, normalized so that s = 0 is the L2 norm.

    ||f||^2 = (2 pi)^-2 sum_k |k|^(2s) |f^(k)|^2 (pi/l)^2 with f^ = h^2 DFT,
    which collapses to (h/n)^2 sum |k|^(2s) |DFT|^2.
    """
    grid = f.grid
    _, _, K2 = grid.wavenumber_meshes()
    spec2 = np.abs(f.spectral) ** 2
    if s == 0:
        total = spec2.sum()
    else:
        if s < 0:
            if abs(f.mean_mode()) > MEAN_MODE_RTOL * max(lebesgue_norm(f, 2), np.finfo(float).tiny):
                raise NegativeOrderOnMean(
                    f"H^{s} norm undefined: mean mode {f.mean_mode():.3e}"
                )
        with np.errstate(divide="ignore"):
            weight = np.where(K2 > 0.0, K2**s, 0.0)
        total = (weight * spec2).sum()
    return float(np.sqrt(total)) * grid.h / grid.n


def lebesgue_norm(f: Field, p) -> float:
    """Grid L^p norm for p in {1, 2, 4, inf}."""
    v = f.values
    if p == np.inf or p == "inf":
        return float(np.abs(v).max())
    if p not in (1, 2, 4):
        raise ValidationError(f"unsupported p = {p}")
    return float((np.abs(v) ** p).sum() * f.grid.h**2) ** (1.0 / p)


def gradient(f: Field) -> tuple:
    dx, dy = gradient_symbols(f.grid.n, f.grid.box_half)
    fh = f.spectral
    gx = Field.from_spectral(f.grid, dx * fh, parity=_symbol_parity_map(f.parity, (-1, 1)))
    gy = Field.from_spectral(f.grid, dy * fh, parity=_symbol_parity_map(f.parity, (1, -1)))
    return gx, gy


def divergence_residual(u1: Field, u2: Field) -> float:
    """max_k |k . u^(k)| / ||u^||_2, the spectral divergence-free defect."""
    grid = same_grid(u1, u2)
    KX, KY, _ = grid.wavenumber_meshes()
    div = KX * u1.spectral + KY * u2.spectral
    scale = np.sqrt((np.abs(u1.spectral) ** 2 + np.abs(u2.spectral) ** 2).sum())
    if scale == 0.0:
        return 0.0
    return float(np.abs(div).max() / scale)
