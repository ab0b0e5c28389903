"""Run records, norm series, support tracking, and interaction measurements.

The CSV schema is fixed (bit-exact column order):
    t, l1, l2, linf, h1, hneg1, w14, uinf, duinf, lambda0, supp_r,
    dphi_norm_seed_{i} ...
The negative-order row is NaN (with a flag in the JSON meta) whenever the
mean mode is not numerically zero; it is never silently zeroed.  Floats are
written with shortest round-trip formatting, so reruns are byte-identical.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import dynamics as dyn
from .errors import (
    EmptySupport,
    GridMismatch,
    InsufficientData,
    OutOfBox,
    ValidationError,
)
from .initial_data import bump_profile
from .spectral import (
    Field,
    Gamma,
    Grid,
    RegKind,
    gradient,
    lebesgue_norm,
    sobolev_norm,
)

BASE_COLUMNS = ["t", "l1", "l2", "linf", "h1", "hneg1", "w14", "uinf", "duinf",
                "lambda0", "supp_r"]


@dataclass
class RunRecord:
    scenario: str
    seed_count: int
    rows: list = dc_field(default_factory=list)
    lam_times: list = dc_field(default_factory=list)
    lam_values: list = dc_field(default_factory=list)
    meta: dict = dc_field(default_factory=dict)

    @property
    def columns(self) -> list:
        return BASE_COLUMNS + [f"dphi_norm_seed_{i}" for i in range(self.seed_count)]

    def column(self, name: str) -> np.ndarray:
        idx = self.columns.index(name)
        return np.array([r[idx] for r in self.rows])

    def append(self, row) -> None:
        if self.rows and row[0] <= self.rows[-1][0]:
            raise ValidationError("snapshot times must be strictly increasing")
        if len(row) != len(self.columns):
            raise ValidationError("row width does not match the schema")
        self.rows.append([float(v) for v in row])

    def validate(self) -> None:
        for r in self.rows:
            for name, v in zip(self.columns, r):
                if name in ("hneg1", "lambda0"):
                    continue
                if not np.isfinite(v) or (name != "t" and v < 0 and name.startswith(("l", "h", "w", "u", "d", "s"))):
                    raise ValidationError(f"non-finite or negative {name} = {v}")

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(",".join(self.columns) + "\n")
            for r in self.rows:
                fh.write(",".join(repr(float(v)) for v in r) + "\n")

    @classmethod
    def read_csv(cls, path, scenario: str = "") -> "RunRecord":
        with open(path) as fh:
            header = fh.readline().strip().split(",")
            rows = [[float(v) for v in line.strip().split(",")] for line in fh if line.strip()]
        n_seed = sum(1 for c in header if c.startswith("dphi_norm_seed_"))
        rec = cls(scenario=scenario or str(path), seed_count=n_seed)
        if header != rec.columns:
            raise ValidationError(f"CSV header does not match schema: {header}")
        rec.rows = rows
        return rec

    def to_json(self) -> dict:
        return {
            "scenario": self.scenario,
            "columns": self.columns,
            "rows": self.rows,
            "lambda_series": {"t": self.lam_times, "value": self.lam_values},
            "meta": self.meta,
        }

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=1, sort_keys=False)


class C0Tracker:
    """Running empirical constant of |u|_inf <= C0 (|w|_1 + |w|_inf)."""

    def __init__(self):
        self.c0 = 0.0

    def update(self, uinf: float, l1: float, linf: float) -> float:
        denom = l1 + linf
        if denom > 0:
            self.c0 = max(self.c0, uinf / denom)
        return self.c0


def velocity_bound_check(w: Field, u1: Field | np.ndarray, u2: Field | np.ndarray):
    """(|u|_inf, |w|_1 + |w|_inf, ratio); ratio is 0 for the zero field."""
    ua = u1.values if isinstance(u1, Field) else u1
    ub = u2.values if isinstance(u2, Field) else u2
    lhs = float(max(np.abs(ua).max(), np.abs(ub).max()))
    rhs = lebesgue_norm(w, 1) + lebesgue_norm(w, np.inf)
    return lhs, rhs, (lhs / rhs if rhs > 0 else 0.0)


def support_radius(w: Field, threshold: float | None = None, centers=None):
    """Radius of the smallest origin-centered ball holding all |w| > threshold.

    With blob centers given, also returns per-blob radii (max distance from
    each sample to its nearest center).
    """
    if threshold is None:
        threshold = 1e-8 * np.abs(w.values).max()
    if threshold <= 0 and np.abs(w.values).max() == 0.0:
        raise EmptySupport("field is identically zero")
    X, Y = w.grid.meshes()
    mask = np.abs(w.values) > threshold
    if not mask.any():
        raise EmptySupport(f"no samples above threshold {threshold}")
    xs, ys = X[mask], Y[mask]
    radius = float(np.hypot(xs, ys).max())
    if centers is None:
        return radius
    centers = np.asarray(centers, dtype=float)
    d = np.hypot(xs[:, None] - centers[None, :, 0], ys[:, None] - centers[None, :, 1])
    nearest = np.argmin(d, axis=1)
    per_blob = [float(d[nearest == i, i].max()) if (nearest == i).any() else 0.0
                for i in range(len(centers))]
    return radius, per_blob


def grad_l4(w: Field) -> float:
    gx, gy = gradient(w)
    mag = np.sqrt(gx.values**2 + gy.values**2)
    return float((mag**4).sum() * w.grid.h**2) ** 0.25


def snapshot_row(state: dyn.SimState, flow: dyn.FlowState | None,
                 tracker: C0Tracker | None = None, meta: dict | None = None):
    """One RunRecord row from the current state (norms, bounds, flow norms)."""
    w = state.w
    l1 = lebesgue_norm(w, 1)
    l2 = lebesgue_norm(w, 2)
    linf = lebesgue_norm(w, np.inf)
    h1 = sobolev_norm(w, 1)
    mean_ok = abs(w.mean_mode()) <= 1e-12 * max(l2, np.finfo(float).tiny)
    if mean_ok:
        hneg1 = sobolev_norm(w, -1)
    else:
        hneg1 = np.nan
        if meta is not None:
            meta["hneg1_flag"] = "mean mode nonzero; hneg1 undefined"
    w14 = grad_l4(w)
    u1, u2 = dyn.velocity_fields(state)
    uinf = float(max(np.abs(u1).max(), np.abs(u2).max()))
    duinf = dyn.velocity_gradient_sup(state)
    lam = dyn.lambda_at_origin(state) if w.parity == (-1, -1) else np.nan
    try:
        supp = support_radius(w)
        if isinstance(supp, tuple):
            supp = supp[0]
    except EmptySupport:
        supp = 0.0
    if tracker is not None:
        tracker.update(uinf, l1, linf)
    row = [state.t, l1, l2, linf, h1, hneg1, w14, uinf, duinf, lam, supp]
    if flow is not None:
        row.extend(dyn.matrix_norms(flow.deforms).tolist())
    return row


def interpolation_inequality_ok(rec: RunRecord) -> bool:
    l1, l2, linf = rec.column("l1"), rec.column("l2"), rec.column("linf")
    return bool(np.all(l2**2 <= l1 * linf * (1.0 + 1e-12) + 1e-300))


def fit_power_law(x, y) -> dict:
    """Least-squares log-log fit y ~ a x^p over 3-5 points."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2 or np.any(x <= 0) or np.any(y <= 0):
        raise InsufficientData("power-law fit needs positive data, >= 2 points")
    p, loga = np.polyfit(np.log(x), np.log(y), 1)
    return {"exponent": float(p), "prefactor": float(np.exp(loga)),
            "x": x.tolist(), "y": y.tolist()}


def _coadvect(fields, kind: RegKind, gamma: Gamma, dt: float, n_steps: int,
              snapshot_every: int, on_snapshot):
    """Advance passive scalars sharing the velocity of their sum (RK4).

    fields: list of Field; the transporting velocity comes from sum(fields),
    which is itself the solution by linearity of transport.
    """
    grid = fields[0].grid
    op = dyn._operators(grid.n, grid.box_half, kind, gamma.value)
    whs = [np.fft.fft2(f.values) * op.mask for f in fields]
    parities = [f.parity for f in fields]

    def multi_rhs(whs_now):
        tot = whs_now[0].copy()
        for w in whs_now[1:]:
            tot += w
        u1 = np.fft.ifft2(op.u1 * tot).real
        u2 = np.fft.ifft2(op.u2 * tot).real
        outs = []
        for w in whs_now:
            wx = np.fft.ifft2(op.dx * w).real
            wy = np.fft.ifft2(op.dy * w).real
            outs.append(-np.fft.fft2(u1 * wx + u2 * wy) * op.mask)
        return outs, max(np.abs(u1).max(), np.abs(u2).max())

    t = 0.0
    on_snapshot(t, [Field.from_spectral(grid, w, parity=p) for w, p in zip(whs, parities)])
    for s in range(n_steps):
        k1, umax = multi_rhs(whs)
        if dt > dyn.CFL_NUMBER * grid.h / max(umax, dyn.VELOCITY_FLOOR):
            raise dyn.CflViolation(f"dt = {dt} violates CFL at t = {t}")
        k2, _ = multi_rhs([w + 0.5 * dt * k for w, k in zip(whs, k1)])
        k3, _ = multi_rhs([w + 0.5 * dt * k for w, k in zip(whs, k2)])
        k4, _ = multi_rhs([w + dt * k for w, k in zip(whs, k3)])
        whs = [w + (dt / 6.0) * (a + 2.0 * b + 2.0 * c + d)
               for w, a, b, c, d in zip(whs, k1, k2, k3, k4)]
        for w in whs:
            dyn._check_finite(w, t + dt)
        t = (s + 1) * dt
        if (s + 1) % snapshot_every == 0 or s + 1 == n_steps:
            on_snapshot(t, [Field.from_spectral(grid, w, parity=p)
                            for w, p in zip(whs, parities)])


def windowed_h2_norm(f: Field, center, radius: float) -> float:
    """Nonhomogeneous H^2 norm of f times a smooth window of given radius."""
    X, Y = f.grid.meshes()
    win = bump_profile(np.hypot(X - center[0], Y - center[1]) / radius)
    g = Field(f.grid, f.values * win)
    _, _, K2 = f.grid.wavenumber_meshes()
    spec2 = np.abs(g.spectral) ** 2
    total = ((1.0 + K2) ** 2 * spec2).sum()
    return float(np.sqrt(total)) * f.grid.h / f.grid.n


def interaction_decay(grid: Grid, kind: RegKind, gamma: Gamma,
                      f_field: Field, g_field: Field, separations,
                      horizon: float = 1.0, dt: float | None = None,
                      snapshot_every: int = 10, window_radius: float | None = None) -> dict:
    """Influence of a far blob on a near one, versus separation.

    For each R the pair data is f + g(. - (R, 0)); the solution is decomposed
    into co-advected passive pieces w_f + w_g, and w_f is compared with the
    reference solution of f alone, in L2 and in a windowed H^2 surrogate
    around the f blob.  Decay exponents are least-squares log-log fits.
    """
    from .initial_data import translate_sum

    separations = sorted(float(R) for R in separations)
    # velocity scale and margin validation before any evolution
    M = (lebesgue_norm(f_field, 1) + lebesgue_norm(g_field, 1)
         + max(lebesgue_norm(f_field, np.inf), lebesgue_norm(g_field, np.inf)))
    f_rad = support_radius(f_field)
    try:
        g_rad = support_radius(g_field)
    except EmptySupport:
        g_rad = 0.0
    pairs = {}
    for R in separations:
        try:
            pairs[R] = translate_sum([(f_field, (0.0, 0.0)), (g_field, (R, 0.0))])
        except OutOfBox as e:
            raise OutOfBox(f"separation R = {R}: {e}") from e
    st0 = dyn.prepare_state(pairs[max(separations)], kind, gamma)
    u1, u2 = dyn.velocity_fields(st0)
    c0 = velocity_bound_check(st0.w, u1, u2)[2]
    margin = 2.0 * c0 * M * horizon
    for R in separations:
        if R + g_rad + margin >= grid.box_half or f_rad + margin >= grid.box_half:
            raise OutOfBox(f"separation R = {R} leaves no finite-speed margin")
    if dt is None:
        dt = min(dyn.cfl_timestep(dyn.prepare_state(pairs[R], kind, gamma))
                 for R in separations)
        dt = min(dt, dyn.cfl_timestep(dyn.prepare_state(f_field, kind, gamma)))
        dt *= 0.7  # headroom against |u| growth over the horizon
    n_steps = int(np.ceil(horizon / dt))
    dt = horizon / n_steps

    ref_times, ref_fields = [], []

    def keep_ref(t, fields):
        ref_times.append(t)
        ref_fields.append(fields[0])

    _coadvect([f_field], kind, gamma, dt, n_steps, snapshot_every, keep_ref)

    if window_radius is None:
        # the nominal 3 C0_emp M ball, enlarged if needed to contain the f
        # blob plus its finite-speed excursion
        window_radius = max(3.0 * c0 * M, f_rad + 2.0 * c0 * M * horizon, 4.0 * grid.h)
    results = {}
    for R in separations:
        diffs_l2, diffs_h2 = [], []
        idx = {"i": 0}

        def compare(t, fields, _diffs=(diffs_l2, diffs_h2), _idx=idx):
            ref = ref_fields[_idx["i"]]
            if abs(ref_times[_idx["i"]] - t) > 1e-12:
                raise GridMismatch("snapshot times diverged between runs")
            _idx["i"] += 1
            diff = Field(grid, fields[0].values - ref.values)
            _diffs[0].append(lebesgue_norm(diff, 2))
            _diffs[1].append(windowed_h2_norm(diff, (0.0, 0.0), window_radius))

        gR = translate_sum([(g_field, (R, 0.0))])
        _coadvect([f_field, gR], kind, gamma, dt, n_steps, snapshot_every, compare)
        results[R] = {"max_l2": float(np.max(diffs_l2)),
                      "max_h2": float(np.max(diffs_h2)),
                      "l2_series": diffs_l2, "h2_series": diffs_h2}

    Rs = list(results.keys())

    def safe_fit(vals):
        try:
            return fit_power_law(Rs, vals)
        except InsufficientData:
            return {"exponent": float("nan"), "prefactor": float("nan"),
                    "x": [float(R) for R in Rs], "y": [float(v) for v in vals],
                    "degenerate": True}

    l2_fit = safe_fit([results[R]["max_l2"] for R in Rs])
    h2_fit = safe_fit([results[R]["max_h2"] for R in Rs])
    return {
        "separations": Rs,
        "times": ref_times,
        "per_separation": {str(R): {k: results[R][k] for k in ("max_l2", "max_h2")}
                           for R in Rs},
        "l2_fit": l2_fit,
        "h2_fit": h2_fit,
        "window_radius": window_radius,
        "c0_emp": c0,
        "M": M,
        "dt": dt,
    }


def inflation_report(perturbed: dict, base: dict) -> dict:
    """Ratio of critical norms at the probe time plus the Lagrangian bound.

    Inputs are run bundles: {"times", "h1", "t0", "grid", "reconstruction"}
    for the perturbed run and {"times", "h1", "grid"} for the base.
    """
    if perturbed["grid"] != base["grid"]:
        raise GridMismatch("inflation comparison requires a shared grid")
    tp = np.asarray(perturbed["times"])
    tb = np.asarray(base["times"])
    if tp.size != tb.size or np.abs(tp - tb).max() > 1e-12:
        raise GridMismatch("runs must share snapshot times")
    t0 = perturbed["t0"]
    i0 = int(np.argmin(np.abs(tp - t0)))
    h1_pert = float(perturbed["h1"][i0])
    h1_base = float(base["h1"][i0])
    recon = float(perturbed.get("reconstruction", np.nan))
    report = {
        "t0": float(tp[i0]),
        "h1_perturbed": h1_pert,
        "h1_base": h1_base,
        "ratio": h1_pert / h1_base if h1_base > 0 else np.inf,
        "times": tp.tolist(),
        "h1_perturbed_series": [float(v) for v in perturbed["h1"]],
        "h1_base_series": [float(v) for v in base["h1"]],
        "lagrangian_reconstruction": recon,
        "eulerian_h1_sq": h1_pert**2,
    }
    if np.isfinite(recon):
        report["reconstruction_within_identity"] = bool(recon <= h1_pert**2 * 1.1)
    return report
