"""Time integration of the transport equation with spectrally computed velocity.

The vorticity advances by classical RK4 on the dealiased pseudo-spectral
right-hand side -u . grad w; the 2/3 rule is applied to the state at start
and to every stage product, so the quadratic invariant is conserved to time
discretization error only.  Tracked particles and their 2x2 deformation
matrices integrate in the same RK4 sweep, with velocity and its gradient
evaluated at particle positions by direct Fourier summation over the modes
that carry mass (exact trigonometric interpolation of the truncated state).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import (
    CflViolation,
    GridMismatch,
    InsufficientData,
    NanDetected,
    ParticleEscaped,
    ValidationError,
)
from .spectral import (
    Field,
    Gamma,
    Grid,
    RegKind,
    multiplier_symbol,
    inverse_laplacian_symbol,
    _wavenumber_meshes,
    _axis_wavenumbers,
)

CFL_NUMBER = 0.5
VELOCITY_FLOOR = 1e-14


@dataclass(frozen=True)
class SimState:
    t: float
    w: Field
    kind: RegKind
    gamma: Gamma
    step_count: int = 0

    @property
    def grid(self) -> Grid:
        return self.w.grid


@dataclass
class FlowState:
    """Particle positions phi(x_i, t) and deformation matrices Dphi(x_i, t)."""

    seeds: np.ndarray        # (P, 2) initial points
    positions: np.ndarray    # (P, 2)
    deforms: np.ndarray      # (P, 2, 2), deforms[p, i, j] = d_j phi_i

    @classmethod
    def at_seeds(cls, seeds) -> "FlowState":
        seeds = np.atleast_2d(np.asarray(seeds, dtype=float))
        P = seeds.shape[0]
        D = np.broadcast_to(np.eye(2), (P, 2, 2)).copy()
        return cls(seeds=seeds.copy(), positions=seeds.copy(), deforms=D)

    def copy(self) -> "FlowState":
        return FlowState(self.seeds.copy(), self.positions.copy(), self.deforms.copy())

    def det(self) -> np.ndarray:
        d = self.deforms
        return d[:, 0, 0] * d[:, 1, 1] - d[:, 0, 1] * d[:, 1, 0]

    def sup_norm(self) -> float:
        """max over particles of the spectral norm of Dphi."""
        return float(np.max(matrix_norms(self.deforms)))


def matrix_norms(deforms: np.ndarray) -> np.ndarray:
    return np.linalg.norm(deforms, ord=2, axis=(1, 2))


class Operators:
    """Cached spectral symbols and dealiasing mask per (grid, kind, gamma)."""

    def __init__(self, grid: Grid, kind: RegKind, gamma: Gamma):
        self.grid = grid
        self.kind = kind
        self.gamma = gamma
        n, l = grid.n, grid.box_half
        KX, KY, _ = _wavenumber_meshes(n, l)
        m = multiplier_symbol(n, l, kind, gamma.value)
        inv = inverse_laplacian_symbol(n, l)
        ny = n // 2

        def z(sym):
            sym[ny, :] = 0.0
            sym[:, ny] = 0.0
            return sym

        self.u1 = z(1j * KY * m * inv)
        self.u2 = z(-1j * KX * m * inv)
        self.dx = z(1j * KX.astype(complex))
        self.dy = z(1j * KY.astype(complex))
        self.lam = z(-KX * KY * m * inv)
        # Du rows: [d1 u1, d2 u1; d1 u2, d2 u2]; d2 u2 = -d1 u1 by div-free
        self.du11 = self.dx * self.u1
        self.du12 = self.dy * self.u1
        self.du21 = self.dx * self.u2
        keep = np.abs(np.fft.fftfreq(n) * n) < n / 3.0
        self.mask = keep[:, None] & keep[None, :]
        k1 = _axis_wavenumbers(n, l)
        self.phase_x = np.exp(1j * k1 * l)  # e^{i k l}: origin evaluation phases
        self.k1 = k1
        j = np.abs(np.fft.fftfreq(n) * n).astype(int)
        ring = np.maximum(j[:, None], j[None, :])
        self._ring_order = np.argsort(ring, axis=None, kind="stable")
        self._ring_sorted = ring.ravel()[self._ring_order]

    def origin_value(self, symbol: np.ndarray, wh: np.ndarray) -> float:
        v = self.phase_x @ (symbol * wh) @ self.phase_x
        return float(v.real) / self.grid.n**2

    def rhs(self, wh: np.ndarray):
        """(-u . grad w)^ dealiased, plus the stage sup velocity."""
        u1 = np.fft.ifft2(self.u1 * wh).real
        u2 = np.fft.ifft2(self.u2 * wh).real
        wx = np.fft.ifft2(self.dx * wh).real
        wy = np.fft.ifft2(self.dy * wh).real
        nl = np.fft.fft2(u1 * wx + u2 * wy)
        nl *= self.mask
        np.negative(nl, out=nl)
        umax = max(np.abs(u1).max(), np.abs(u2).max())
        return nl, umax

    def mode_box(self, wh: np.ndarray, rel_tol: float = 1e-12) -> int:
        """Smallest half-width m so modes outside |j|<=m carry <= rel_tol l1 mass."""
        n = self.grid.n
        mags = np.abs(wh).ravel()[self._ring_order]
        total = mags.sum()
        if total == 0.0:
            return 8
        tail = np.cumsum(mags[::-1])[::-1]
        ok = tail <= rel_tol * total
        if not ok.any():
            return n // 3
        m = int(self._ring_sorted[np.argmax(ok)])
        return int(min(max(m, 8), n // 3))

    def eval_at(self, spectra, wh: np.ndarray, pts: np.ndarray, m: int) -> np.ndarray:
        """Fourier-sum the given symbol-filtered fields at arbitrary points.

        Returns (len(spectra), P).  The symmetric mode box |j| <= m keeps the
        parity cancellations exact at reflected points and at the origin.
        """
        n, l = self.grid.n, self.grid.box_half
        idx = np.concatenate([np.arange(m + 1), np.arange(n - m, n)])
        k = self.k1[idx]
        C = np.stack([(s * wh)[np.ix_(idx, idx)] for s in spectra])
        Ex = np.exp(1j * k[:, None] * (pts[:, 0] + l)[None, :])
        Ey = np.exp(1j * k[:, None] * (pts[:, 1] + l)[None, :])
        T = C @ Ey
        return np.einsum("xp,fxp->fp", Ex, T).real / n**2

    def velocity_and_grad_at(self, wh: np.ndarray, pts: np.ndarray, m: int):
        out = self.eval_at((self.u1, self.u2, self.du11, self.du12, self.du21),
                           wh, pts, m)
        u = out[:2].T.copy()
        P = pts.shape[0]
        Du = np.empty((P, 2, 2))
        Du[:, 0, 0] = out[2]
        Du[:, 0, 1] = out[3]
        Du[:, 1, 0] = out[4]
        Du[:, 1, 1] = -out[2]
        return u, Du


@lru_cache(maxsize=16)
def _operators(n: int, box_half: float, kind: RegKind, gamma: float) -> Operators:
    return Operators(Grid(n, box_half), kind, Gamma(gamma))


def operators_for(state: SimState) -> Operators:
    return _operators(state.grid.n, state.grid.box_half, state.kind, state.gamma.value)


def prepare_state(w: Field, kind: RegKind, gamma: Gamma, t: float = 0.0) -> SimState:
    """Dealias the initial data and wrap it as the simulation state."""
    op = _operators(w.grid.n, w.grid.box_half, kind, gamma.value)
    wh = np.fft.fft2(w.values) * op.mask
    return SimState(t=t, w=Field.from_spectral(w.grid, wh, parity=w.parity),
                    kind=kind, gamma=gamma, step_count=0)


def _check_finite(wh: np.ndarray, t: float):
    if not np.isfinite(wh.real).all():
        raise NanDetected(f"non-finite vorticity at t = {t}")


def _stage_spectra(op: Operators, wh: np.ndarray, dt: float, cfl: float, h: float):
    k1, umax = op.rhs(wh)
    if dt > cfl * h / max(umax, VELOCITY_FLOOR):
        raise CflViolation(
            f"dt = {dt} exceeds CFL limit {cfl * h / max(umax, VELOCITY_FLOOR):.3e} "
            f"(|u|_inf = {umax:.3e})"
        )
    wh2 = wh + 0.5 * dt * k1
    k2, _ = op.rhs(wh2)
    wh3 = wh + 0.5 * dt * k2
    k3, _ = op.rhs(wh3)
    wh4 = wh + dt * k3
    k4, _ = op.rhs(wh4)
    new = wh + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return new, (wh, wh2, wh3, wh4), umax


def step(state: SimState, dt: float, cfl: float = CFL_NUMBER) -> SimState:
    """One RK4 step of the vorticity alone."""
    return step_with_flow(state, None, dt, cfl)[0]


def step_with_flow(state: SimState, flow: FlowState | None, dt: float,
                   cfl: float = CFL_NUMBER):
    """One coupled RK4 step of (w, phi, Dphi); returns (state, flow)."""
    op = operators_for(state)
    wh = state.w.spectral
    new_wh, stages, _ = _stage_spectra(op, wh, dt, cfl, state.grid.h)
    _check_finite(new_wh, state.t + dt)
    new_flow = advect_flow(stages, flow, dt, op) if flow is not None else None
    new_state = SimState(
        t=state.t + dt,
        w=Field.from_spectral(state.grid, new_wh, parity=state.w.parity),
        kind=state.kind,
        gamma=state.gamma,
        step_count=state.step_count + 1,
    )
    return new_state, new_flow


def advect_flow(stage_spectra, flow: FlowState, dt: float, op: Operators) -> FlowState:
    """RK4 update of particles and deformation from the four stage spectra.

    d phi / dt = u(phi, t);  d Dphi / dt = Du(phi, t) Dphi.
    """
    wh1, wh2, wh3, wh4 = stage_spectra
    m = op.mode_box(wh1)
    pos, D = flow.positions, flow.deforms

    def f(whs, p, Dm):
        u, Du = op.velocity_and_grad_at(whs, p, m)
        return u, np.einsum("pij,pjk->pik", Du, Dm)

    a1, b1 = f(wh1, pos, D)
    a2, b2 = f(wh2, pos + 0.5 * dt * a1, D + 0.5 * dt * b1)
    a3, b3 = f(wh3, pos + 0.5 * dt * a2, D + 0.5 * dt * b2)
    a4, b4 = f(wh4, pos + dt * a3, D + dt * b3)
    new_pos = pos + (dt / 6.0) * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
    new_D = D + (dt / 6.0) * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
    half = op.grid.box_half / 2.0
    if np.abs(new_pos).max() > half:
        worst = np.abs(new_pos).max()
        raise ParticleEscaped(f"particle reached |x| = {worst:.3f} > l/2 = {half:.3f}")
    return FlowState(seeds=flow.seeds, positions=new_pos, deforms=new_D)


def lambda_at_origin(state: SimState) -> float:
    """lambda(t) = -d1 d2 Lap^-1 T_gamma w evaluated at the origin.

    Defined for odd-odd vorticity, where Du(0) = diag(lambda, -lambda)."""
    if state.w.parity != (-1, -1):
        raise ValidationError("lambda at the origin requires odd-odd vorticity")
    op = operators_for(state)
    return op.origin_value(op.lam, state.w.spectral)


def velocity_fields(state: SimState) -> tuple:
    op = operators_for(state)
    wh = state.w.spectral
    u1 = np.fft.ifft2(op.u1 * wh).real
    u2 = np.fft.ifft2(op.u2 * wh).real
    return u1, u2


def velocity_gradient_sup(state: SimState) -> float:
    op = operators_for(state)
    wh = state.w.spectral
    g11 = np.fft.ifft2(op.du11 * wh).real
    g12 = np.fft.ifft2(op.du12 * wh).real
    g21 = np.fft.ifft2(op.du21 * wh).real
    # exact pointwise spectral norm of Du = [[g11, g12], [g21, -g11]]:
    # smax^2 = (|Du|_F^2 + sqrt(|Du|_F^4 - 4 det^2)) / 2
    fro2 = 2.0 * g11**2 + g12**2 + g21**2
    det = -(g11**2) - g12 * g21
    disc = np.sqrt(np.maximum(fro2**2 - 4.0 * det**2, 0.0))
    smax2 = 0.5 * (fro2 + disc)
    return float(np.sqrt(smax2.max()))


def cfl_timestep(state: SimState, cfl: float = CFL_NUMBER, dt_cap: float = 5e-3) -> float:
    u1, u2 = velocity_fields(state)
    umax = max(np.abs(u1).max(), np.abs(u2).max())
    return min(cfl * state.grid.h / max(umax, VELOCITY_FLOOR), dt_cap)


def gronwall_report(times, dphi_sup, G: float) -> dict:
    """Empirical constants for the deformation growth inequality.

    lhs(t) = int_0^t exp(-|Dphi|_inf^4) dtau must stay below
    (C G)^-1 ln(1 + C G t); the report returns the largest such C (bisection
    on log C) together with both curves and the deformation floor
    ln^(1/4)(C G t / ln(1 + C G t)).
    """
    times = np.asarray(times, dtype=float)
    dphi_sup = np.asarray(dphi_sup, dtype=float)
    if times.size < 2 or times.size != dphi_sup.size:
        raise InsufficientData("need matching time and |Dphi| series of length >= 2")
    if not G > 0:
        raise InsufficientData("G must be positive")
    integrand = np.exp(-dphi_sup**4)
    lhs = np.concatenate([[0.0], np.cumsum(
        0.5 * (integrand[1:] + integrand[:-1]) * np.diff(times))])

    def feasible(C):
        s = C * G
        with np.errstate(invalid="ignore"):
            rhs = np.where(times > 0, np.log1p(s * times) / s, 0.0)
        return bool(np.all(lhs[1:] <= rhs[1:] * (1.0 + 1e-12) + 1e-300))

    lo, hi = 1e-10, 1e10
    if not feasible(lo):
        C_emp = 0.0
    else:
        for _ in range(200):
            mid = np.sqrt(lo * hi)
            if feasible(mid):
                lo = mid
            else:
                hi = mid
        C_emp = lo
    s = C_emp * G if C_emp > 0 else np.nan
    with np.errstate(invalid="ignore", divide="ignore"):
        rhs = np.where(times > 0, np.log1p(s * times) / s, 0.0) if C_emp > 0 else np.full_like(times, np.nan)
        ratio = np.where(rhs > 0, s * times / np.log1p(s * times), np.nan) if C_emp > 0 else np.full_like(times, np.nan)
        floor = np.where(ratio > 1.0, np.log(ratio) ** 0.25, 0.0) if C_emp > 0 else np.full_like(times, np.nan)
    running_max = np.maximum.accumulate(dphi_sup)
    return {
        "G": G,
        "C_emp": C_emp,
        "t": times.tolist(),
        "lhs": lhs.tolist(),
        "rhs": rhs.tolist(),
        "max_dphi": running_max.tolist(),
        "deformation_floor": floor.tolist(),
    }


def flow_perturbation_check(times, base_flow_series, pert_flow_series,
                            v_w1inf_series, dv_inf_series) -> dict:
    """Stability of characteristics under a velocity perturbation v.

    lhs = max_t (|phi~ - phi|_inf + |Dphi~ - Dphi|_inf) against the bound
    shape |v|_W1inf * exp(C1 |Dv|_inf); the ratio with C1 = 1 is reported.
    """
    times = np.asarray(times, dtype=float)
    if not (len(base_flow_series) == len(pert_flow_series) == times.size):
        raise InsufficientData("series length mismatch")
    diffs = []
    for fb, fp in zip(base_flow_series, pert_flow_series):
        if fb.seeds.shape != fp.seeds.shape or not np.allclose(fb.seeds, fp.seeds):
            raise GridMismatch("flow series track different seeds")
        dpos = np.abs(fp.positions - fb.positions).max()
        ddef = np.abs(fp.deforms - fb.deforms).max()
        diffs.append(dpos + ddef)
    lhs = float(np.max(diffs))
    v_w = float(np.max(v_w1inf_series))
    dv = float(np.max(dv_inf_series))
    bound_shape = v_w * np.exp(dv)
    return {
        "t": times.tolist(),
        "flow_diff": [float(d) for d in diffs],
        "lhs": lhs,
        "v_w1inf": v_w,
        "dv_inf": dv,
        "bound_shape": bound_shape,
        "empirical_ratio": lhs / bound_shape if bound_shape > 0 else 0.0,
    }


SNAPSHOT_MAGIC = b"LOGEULER1"
_KIND_CODE = {RegKind.LOG_LAPLACIAN: 1, RegKind.LOG_GRADIENT: 2, RegKind.IDENTITY: 0}
_CODE_KIND = {v: k for k, v in _KIND_CODE.items()}


def write_snapshot(path, state: SimState) -> None:
    """Binary snapshot: magic, n, l, t, gamma, kind code, little-endian values."""
    with open(path, "wb") as fh:
        fh.write(SNAPSHOT_MAGIC)
        fh.write(struct.pack("<Iddd B", state.grid.n, state.grid.box_half,
                             state.t, state.gamma.value, _KIND_CODE[state.kind]))
        fh.write(state.w.values.astype("<f8").tobytes(order="C"))


def read_snapshot(path) -> SimState:
    with open(path, "rb") as fh:
        magic = fh.read(len(SNAPSHOT_MAGIC))
        if magic != SNAPSHOT_MAGIC:
            raise ValidationError(f"{path} is not a snapshot file")
        n, l, t, gamma, code = struct.unpack("<Iddd B", fh.read(struct.calcsize("<Iddd B")))
        vals = np.frombuffer(fh.read(8 * n * n), dtype="<f8").reshape(n, n)
    from .initial_data import infer_parity_values

    return SimState(t=t, w=Field(Grid(n, l), vals, parity=infer_parity_values(vals)),
                    kind=_CODE_KIND[code], gamma=Gamma(gamma), step_count=0)
