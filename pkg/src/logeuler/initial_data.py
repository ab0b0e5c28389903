"""Constructors for the explicit initial-data families.

All fields are built by direct evaluation of closed-form expressions on the
grid, so parities hold exactly at grid points.  The four-fold odd bump rho,
the dyadic families g_A, and the oscillatory perturbation eta0 follow the
source constructions; scale parameters are desk-scale choices (the nominal
2^-100 bump scale is symbolic and unrepresentable on any grid).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import (
    BadRange,
    NegativeOnQuadrant,
    OutOfBox,
    OverlapWarning,
    Unresolvable,
    ValidationError,
)
from .spectral import Field, Gamma, Grid, RegKind

E_SQUARED = float(np.e**2)
E_CUBED_TOWER = float(np.exp(np.e))  # A must exceed e^e for ln ln ln A > 0


def bump_profile(r):
    """Radial C^inf cutoff: 1 on [0, 1/2], 0 on [1, inf), smooth blend between."""
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    out[r <= 0.5] = 1.0
    ring = (r > 0.5) & (r < 1.0)
    t = 2.0 * r[ring] - 1.0
    out[ring] = np.exp(1.0 - 1.0 / (1.0 - t * t))
    return out


def single_bump(grid: Grid, center, radius: float, amplitude: float = 1.0) -> Field:
    """One compactly supported lobe amplitude * phi(|x - c| / radius)."""
    if radius < 4.0 * grid.h:
        raise Unresolvable(f"bump radius {radius} below 4h = {4 * grid.h}")
    if max(abs(center[0]), abs(center[1])) + radius >= grid.box_half:
        raise OutOfBox("bump does not fit in the box")
    X, Y = grid.meshes()
    vals = amplitude * bump_profile(np.hypot(X - center[0], Y - center[1]) / radius)
    return Field(grid, vals, parity=infer_parity_values(vals))


def infer_parity_values(values: np.ndarray) -> tuple:
    scale = np.abs(values).max()
    if scale == 0.0:
        return (-1, -1)  # the zero field is trivially odd (and even)
    out = []
    for axis in range(2):
        refl = np.roll(np.flip(values, axis=axis), 1, axis=axis)
        if np.abs(refl - values).max() <= 1e-12 * scale:
            out.append(1)
        elif np.abs(refl + values).max() <= 1e-12 * scale:
            out.append(-1)
        else:
            out.append(0)
    return tuple(out)


@dataclass(frozen=True)
class RhoSpec:
    """Four-fold odd bump: sum over a1, a2 = +-1 of a1 a2 phi((x - (a1, a2)) / sigma)."""

    sigma: float = 0.125

    def __post_init__(self):
        if not 0.0 < self.sigma <= 0.25:
            raise ValidationError(f"sigma must lie in (0, 1/4], got {self.sigma}")


def _rho_values(X, Y, sigma: float) -> np.ndarray:
    out = np.zeros_like(X)
    for a1 in (-1.0, 1.0):
        for a2 in (-1.0, 1.0):
            r = np.hypot(X - a1, Y - a2) / sigma
            out += a1 * a2 * bump_profile(r)
    return out


def make_rho(spec: RhoSpec, grid: Grid) -> Field:
    if spec.sigma < 4.0 * grid.h:
        raise Unresolvable(f"sigma = {spec.sigma} below 4h = {4 * grid.h}")
    if 1.0 + spec.sigma >= grid.box_half:
        raise OutOfBox("rho lobes at (+-1, +-1) do not fit in the box")
    X, Y = grid.meshes()
    return Field(grid, _rho_values(X, Y, spec.sigma), parity=(-1, -1))


@dataclass(frozen=True)
class GASpec:
    """Dyadic family g_A = amp * sum_j j^-gamma rho(2^j x) over an A-driven range.

    section3:  amp = (ln A)^-1/2 (ln ln A)^-1,
               gamma < 1/2: j in [A^(1/(1-2g)), (A + ln A)^(1/(1-2g)))
               gamma = 1/2: j in [ln A, A + ln A)
    section7:  amp = (ln ln ln A)^-1 (ln ln A)^-1/2, j in [A, A ln A), weights j^-1/2
    """

    gamma: Gamma
    A: float
    variant: str = "section3"
    sigma: float = 0.125
    j_cap: int | None = None
    amplitude: float = 1.0  # desk-scale rescaling knob; 1.0 is the literal family

    def __post_init__(self):
        if self.variant not in ("section3", "section7"):
            raise ValidationError(f"unknown g_A variant {self.variant!r}")
        if self.A < E_SQUARED:
            raise ValidationError(f"A must be at least e^2, got {self.A}")
        if self.variant == "section7" and self.A <= E_CUBED_TOWER:
            raise ValidationError(
                f"section7 amplitude needs ln ln ln A > 0, i.e. A > e^e = {E_CUBED_TOWER:.3f}"
            )
        if not 0.0 < self.sigma <= 0.25:
            raise ValidationError(f"sigma must lie in (0, 1/4], got {self.sigma}")

    def level_range(self) -> tuple:
        g, A = self.gamma.value, self.A
        if self.variant == "section7":
            a, b = A, A * np.log(A)
        elif g == 0.5:
            a, b = np.log(A), A + np.log(A)
        elif g < 0.5:
            p = 1.0 / (1.0 - 2.0 * g)
            a, b = A**p, (A + np.log(A)) ** p
        else:
            raise ValidationError("section3 range is defined for gamma <= 1/2")
        return a, b

    def base_amplitude(self) -> float:
        A = self.A
        if self.variant == "section7":
            return 1.0 / (np.log(np.log(np.log(A))) * np.sqrt(np.log(np.log(A))))
        return 1.0 / (np.sqrt(np.log(A)) * np.log(np.log(A)))

    def levels(self, grid: Grid | None = None) -> list:
        a, b = self.level_range()
        js = [j for j in range(int(np.ceil(a)), int(np.ceil(b))) if j >= 1]
        if not js:
            raise BadRange(f"empty dyadic range [{a}, {b})")
        cap = self.j_cap
        if grid is not None:
            grid_cap = int(np.floor(np.log2(self.sigma / (4.0 * grid.h))))
            cap = grid_cap if cap is None else min(cap, grid_cap)
        if cap is not None:
            js = [j for j in js if j <= cap]
        if len(js) < 3:
            raise Unresolvable(
                f"only {len(js)} dyadic level(s) remain after capping; need >= 3"
            )
        return js

    def weights(self, js) -> np.ndarray:
        g = 0.5 if self.variant == "section7" else self.gamma.value
        return self.amplitude * self.base_amplitude() * np.asarray(js, dtype=float) ** (-g)

    def support_radius(self, grid: Grid | None = None) -> float:
        return 2.0 * 2.0 ** (-min(self.levels(grid)))


def make_gA(spec: GASpec, grid: Grid) -> Field:
    js = spec.levels(grid)
    if spec.support_radius(grid) >= grid.box_half:
        raise OutOfBox("g_A support does not fit in the box")
    ws = spec.weights(js)
    X, Y = grid.meshes()
    out = np.zeros((grid.n, grid.n))
    for j, w in zip(js, ws):
        s = 2.0**j
        out += w * _rho_values(X * s, Y * s, spec.sigma)
    return Field(grid, out, parity=(-1, -1))


def functional_G(g: Field, gamma: Gamma) -> float:
    """First-quadrant moment int g(x) x1 x2 |x|^-4 ln^-gamma(e + 1/|x|) e^-|x|^4 dx.

    Positive for the odd-odd families; drives the deformation growth bound.
    """
    grid = g.grid
    X, Y = grid.meshes()
    quad = (X > 0) & (Y > 0)
    vals = g.values[quad]
    if vals.size and vals.min() < -1e-12:
        raise NegativeOnQuadrant(f"g reaches {vals.min():.3e} on the open first quadrant")
    x, y = X[quad], Y[quad]
    r = np.hypot(x, y)
    w = x * y / r**4 * np.log(np.e + 1.0 / r) ** (-gamma.value) * np.exp(-(r**4))
    return float((vals * w).sum() * grid.h**2)


@dataclass(frozen=True)
class Eta0Spec:
    """Oscillatory perturbation eta0 = (20 k sqrt(L))^-1 cos(k x_axis) b(x).

    b is the double-odd extension of (1/delta) Psi((x - x_L)/delta) with Psi
    the standard bump profile; x_L sits in the open first quadrant.  axis
    selects the oscillation direction (1 pairs with the d2 phi_2 entry of the
    deformation, 2 with the d1 column).
    """

    center: tuple
    delta: float
    k: float
    L: float
    axis: int = 1
    amplitude_scale: float = 1.0  # 0 gives the null perturbation

    def __post_init__(self):
        x1, x2 = self.center
        if x1 <= 0 or x2 <= 0:
            raise ValidationError("eta0 center must lie in the open first quadrant")
        if self.delta > min(x1, x2) / 2.0:
            raise ValidationError("delta must be well below min(x_L); ball must clear the axes")
        if self.k <= 0 or self.L <= 0:
            raise ValidationError("k and L must be positive")
        if self.axis not in (1, 2):
            raise ValidationError("axis must be 1 or 2")


def make_eta0(spec: Eta0Spec, grid: Grid) -> Field:
    if spec.delta < 4.0 * grid.h:
        raise Unresolvable(f"delta = {spec.delta} below 4h = {4 * grid.h}")
    if spec.k * grid.h > np.pi / 4.0:
        raise Unresolvable(f"oscillation k = {spec.k} violates k h <= pi/4")
    cx, cy = spec.center
    if max(abs(cx) + spec.delta, abs(cy) + spec.delta) >= grid.box_half:
        raise OutOfBox("eta0 lobes do not fit in the box")
    X, Y = grid.meshes()
    b = np.zeros((grid.n, grid.n))
    for a1 in (-1.0, 1.0):
        for a2 in (-1.0, 1.0):
            r = np.hypot(X - a1 * cx, Y - a2 * cy) / spec.delta
            b += a1 * a2 * bump_profile(r) / spec.delta
    osc = np.cos(spec.k * (X if spec.axis == 1 else Y))
    amp = spec.amplitude_scale / (20.0 * spec.k * np.sqrt(spec.L))
    return Field(grid, amp * osc * b, parity=(-1, -1))


def eta0_gradient(spec: Eta0Spec, grid: Grid) -> tuple:
    """Closed-form grad eta0 sampled on the grid (avoids spectral ringing)."""
    X, Y = grid.meshes()
    return eta0_gradient_at(spec, X, Y)


def eta0_gradient_at(spec: Eta0Spec, X, Y) -> tuple:
    cx, cy = spec.center
    d = spec.delta
    b = np.zeros_like(X)
    bx = np.zeros_like(X)
    by = np.zeros_like(X)
    for a1 in (-1.0, 1.0):
        for a2 in (-1.0, 1.0):
            dx = X - a1 * cx
            dy = Y - a2 * cy
            r = np.hypot(dx, dy) / d
            b += a1 * a2 * bump_profile(r) / d
            dphi = _bump_profile_deriv(r)
            with np.errstate(invalid="ignore", divide="ignore"):
                rad = np.where(r > 0, dphi / np.where(r > 0, r, 1.0), 0.0)
            bx += a1 * a2 * rad * dx / d**3
            by += a1 * a2 * rad * dy / d**3
    amp = spec.amplitude_scale / (20.0 * spec.k * np.sqrt(spec.L))
    u = spec.k * (X if spec.axis == 1 else Y)
    osc, dosc = np.cos(u), -spec.k * np.sin(u)
    gx = amp * (dosc * b + osc * bx) if spec.axis == 1 else amp * osc * bx
    gy = amp * osc * by if spec.axis == 1 else amp * (dosc * b + osc * by)
    return gx, gy


def _bump_profile_deriv(r):
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    ring = (r > 0.5) & (r < 1.0)
    t = 2.0 * r[ring] - 1.0
    out[ring] = np.exp(1.0 - 1.0 / (1.0 - t * t)) * (-4.0 * t / (1.0 - t * t) ** 2)
    return out


def _rho_gradient_at(X, Y, sigma: float):
    gx = np.zeros_like(X)
    gy = np.zeros_like(X)
    for a1 in (-1.0, 1.0):
        for a2 in (-1.0, 1.0):
            dx = X - a1
            dy = Y - a2
            r = np.hypot(dx, dy) / sigma
            dphi = _bump_profile_deriv(r)
            with np.errstate(invalid="ignore", divide="ignore"):
                rad = np.where(r > 0, dphi / np.where(r > 0, r, 1.0), 0.0)
            gx += a1 * a2 * rad * dx / sigma**2
            gy += a1 * a2 * rad * dy / sigma**2
    return gx, gy


def gA_gradient_at(spec: GASpec, X, Y, grid: Grid | None = None):
    """Closed-form grad g_A at arbitrary points (per-level chain rule)."""
    js = spec.levels(grid)
    ws = spec.weights(js)
    gx = np.zeros_like(X)
    gy = np.zeros_like(X)
    for j, w in zip(js, ws):
        s = 2.0**j
        lx, ly = _rho_gradient_at(X * s, Y * s, spec.sigma)
        gx += w * s * lx
        gy += w * s * ly
    return gx, gy


def _support_interval(values: np.ndarray, axis: int) -> tuple:
    mask = np.any(values != 0.0, axis=1 - axis)
    idx = np.nonzero(mask)[0]
    if idx.size == 0:
        return None
    return int(idx[0]), int(idx[-1])


def translate_sum(parts) -> Field:
    """Pointwise sum of integer-shifted fields.

    Offsets must be grid aligned; each translated support must stay inside
    [-l, l) without wrapping (OutOfBox).  Intersecting supports trigger a
    non-fatal OverlapWarning.
    """
    if not parts:
        raise ValidationError("translate_sum needs at least one part")
    grid = parts[0][0].grid
    shifted = []
    for f, offset in parts:
        if f.grid != grid:
            raise ValidationError("all parts must share a grid")
        sx, sy = (offset[0] / grid.h, offset[1] / grid.h)
        ix, iy = round(sx), round(sy)
        if abs(sx - ix) > 1e-9 or abs(sy - iy) > 1e-9:
            raise ValidationError(f"offset {offset} is not grid aligned (h = {grid.h})")
        vals = f.values
        for axis, shift in ((0, ix), (1, iy)):
            span = _support_interval(vals, axis)
            if span is None:
                continue
            lo, hi = span
            if lo + shift < 0 or hi + shift > grid.n - 1:
                raise OutOfBox(
                    f"translated support [{lo + shift}, {hi + shift}] leaves the box "
                    f"(axis {axis}, n = {grid.n})"
                )
        shifted.append(np.roll(vals, (ix, iy), axis=(0, 1)))
    for i in range(len(shifted)):
        for j in range(i + 1, len(shifted)):
            if np.any((shifted[i] != 0.0) & (shifted[j] != 0.0)):
                warnings.warn("translated supports intersect", OverlapWarning, stacklevel=2)
    total = np.zeros((grid.n, grid.n))
    for s in shifted:
        total += s
    return Field(grid, total, parity=infer_parity_values(total))


def gaussian_field(grid: Grid, center, width: float, amplitude: float = 1.0,
                   mean_zero: bool = False) -> Field:
    """Radial Gaussian; with mean_zero, the (1 - u) e^-u ring of zero integral."""
    X, Y = grid.meshes()
    u = ((X - center[0]) ** 2 + (Y - center[1]) ** 2) / (2.0 * width**2)
    vals = amplitude * ((1.0 - u) * np.exp(-u) if mean_zero else np.exp(-u))
    return Field(grid, vals, parity=infer_parity_values(vals))


def data_from_spec(spec: dict, grid: Grid, gamma: Gamma | None = None) -> Field:
    """Build a Field from a declarative description (scenario [data] block)."""
    kind = spec.get("type")
    if kind == "rho":
        return make_rho(RhoSpec(sigma=spec.get("sigma", 0.125)), grid)
    if kind == "gA":
        g = Gamma(spec["gamma"]) if "gamma" in spec else gamma
        if g is None:
            raise ValidationError("gA data needs a gamma")
        ga = GASpec(
            gamma=g,
            A=float(spec["A"]),
            variant=spec.get("variant", "section3"),
            sigma=spec.get("sigma", 0.125),
            j_cap=spec.get("j_cap"),
            amplitude=spec.get("amplitude", 1.0),
        )
        return make_gA(ga, grid)
    if kind == "eta0":
        return make_eta0(eta0_spec_from_dict(spec), grid)
    if kind == "sum":
        parts = []
        for part in spec["parts"]:
            f = data_from_spec(part, grid, gamma)
            parts.append((f, tuple(part.get("offset", (0.0, 0.0)))))
        return translate_sum(parts)
    if kind == "gaussian":
        return gaussian_field(grid, tuple(spec.get("center", (0.0, 0.0))),
                              float(spec["width"]), float(spec.get("amplitude", 1.0)),
                              bool(spec.get("mean_zero", False)))
    if kind == "bump":
        return single_bump(grid, tuple(spec.get("center", (0.0, 0.0))),
                           float(spec["radius"]), float(spec.get("amplitude", 1.0)))
    if kind == "file":
        raw = np.fromfile(spec["path"], dtype="<f8")
        if raw.size != grid.n * grid.n:
            raise ValidationError(
                f"file holds {raw.size} float64 values, expected {grid.n * grid.n}"
            )
        vals = raw.reshape(grid.n, grid.n)
        return Field(grid, vals, parity=infer_parity_values(vals))
    raise ValidationError(f"unknown data type {kind!r}")


def eta0_spec_from_dict(spec: dict) -> Eta0Spec:
    return Eta0Spec(
        center=tuple(spec["center"]),
        delta=float(spec["delta"]),
        k=float(spec["k"]),
        L=float(spec["L"]),
        axis=int(spec.get("axis", 1)),
        amplitude_scale=float(spec.get("amplitude_scale", 1.0)),
    )
