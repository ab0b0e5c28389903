"""Scenario configuration and the canonical experiment drivers.

A scenario is a TOML file with [grid], [model], [data], [time], [flow] and
optional experiment-specific tables.  Validation happens before any compute:
unresolvable data, boxes too small, or bad parameters raise ValidationError
(CLI exit code 2) without touching the solver.  Runs are deterministic; the
same configuration reproduces byte-identical CSV output.
"""

from __future__ import annotations

import json
import os
import sys
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import diagnostics as diag
from . import dynamics as dyn
from .errors import (
    NoDeformation,
    NumericalError,
    OutOfBox,
    ValidationError,
)
from .initial_data import (
    Eta0Spec,
    data_from_spec,
    eta0_gradient_at,
    gA_gradient_at,
    make_eta0,
)
from .spectral import Field, Gamma, Grid, RegKind, lebesgue_norm, sobolev_norm


@dataclass
class Scenario:
    name: str
    grid: Grid
    kind: RegKind
    gamma: Gamma
    data_spec: dict
    horizon: float = 1.0
    dt: float = 0.0              # 0 means automatic CFL-capped choice
    dt_cap: float = 5e-3
    cfl: float = dyn.CFL_NUMBER
    snapshot_every: int = 10
    seeds: np.ndarray | None = None
    seed_preset: str = "origin"
    seed_count: int = 16
    write_snapshots: bool = False
    extra: dict = dc_field(default_factory=dict)

    @classmethod
    def from_dict(cls, cfg: dict) -> "Scenario":
        try:
            grid = Grid(int(cfg["grid"]["n"]), float(cfg["grid"]["box_half"]))
            model = cfg["model"]
            kind = RegKind.parse(model["kind"])
            gamma = Gamma(float(model.get("gamma", 0.5)))
            time = cfg.get("time", {})
            flow = cfg.get("flow", {})
            seeds = flow.get("seeds")
            return cls(
                name=cfg.get("name", "scenario"),
                grid=grid,
                kind=kind,
                gamma=gamma,
                data_spec=dict(cfg["data"]),
                horizon=float(time.get("horizon", 1.0)),
                dt=float(time.get("dt", 0.0)),
                dt_cap=float(time.get("dt_cap", 5e-3)),
                cfl=float(time.get("cfl", dyn.CFL_NUMBER)),
                snapshot_every=int(time.get("snapshot_every", 10)),
                seeds=np.asarray(seeds, dtype=float) if seeds else None,
                seed_preset=flow.get("preset", "origin"),
                seed_count=int(flow.get("count", 16)),
                write_snapshots=bool(cfg.get("output", {}).get("snapshots", False)),
                extra={k: v for k, v in cfg.items()
                       if k not in ("name", "grid", "model", "data", "time", "flow", "output")},
            )
        except KeyError as e:
            raise ValidationError(f"missing scenario key: {e}") from None

    @classmethod
    def from_toml(cls, path) -> "Scenario":
        with open(path, "rb") as fh:
            return cls.from_dict(tomllib.load(fh))

    def build_data(self) -> Field:
        return data_from_spec(self.data_spec, self.grid, self.gamma)

    def validate(self) -> Field:
        """Build the data and check geometry; raises before any compute."""
        if self.horizon <= 0:
            raise ValidationError("horizon must be positive")
        if self.snapshot_every < 1:
            raise ValidationError("snapshot_every must be >= 1")
        data = self.build_data()
        if np.abs(data.values).max() > 0:
            supp = diag.support_radius(data)
            if isinstance(supp, tuple):
                supp = supp[0]
            if supp >= 0.95 * self.grid.box_half:
                raise OutOfBox(
                    f"initial support radius {supp:.3f} nearly fills the box")
        if self.seeds is not None and np.abs(self.seeds).max() > self.grid.box_half / 2:
            raise ValidationError("seeds must start inside the inner half of the box")
        return data

    def resolve_seeds(self, data: Field) -> np.ndarray:
        if self.seeds is not None:
            return np.atleast_2d(self.seeds)
        if self.seed_preset == "origin":
            return np.array([[0.0, 0.0]])
        if self.seed_preset == "support_quadrant":
            return support_quadrant_seeds(data, self.seed_count)
        if self.seed_preset == "ga_lobes":
            return ga_lobe_seeds(self)
        raise ValidationError(f"unknown seed preset {self.seed_preset!r}")


def ga_lobe_seeds(scn: "Scenario") -> np.ndarray:
    """Origin plus the first-quadrant dyadic lobe centers (2^-j, 2^-j).

    The centers sit on the flat plateau of each lobe, where the base data's
    gradient vanishes identically; perturbations supported there do not mix
    with the base gradient.
    """
    from .initial_data import GASpec

    spec = scn.data_spec
    if spec.get("type") != "gA":
        raise ValidationError("ga_lobes seeding needs gA data")
    ga = GASpec(gamma=Gamma(spec.get("gamma", scn.gamma.value)), A=float(spec["A"]),
                variant=spec.get("variant", "section3"), sigma=spec.get("sigma", 0.125),
                j_cap=spec.get("j_cap"), amplitude=spec.get("amplitude", 1.0))
    pts = [[0.0, 0.0]]
    pts.extend([[2.0**-j, 2.0**-j] for j in ga.levels(scn.grid)])
    return np.asarray(pts)


def support_quadrant_seeds(data: Field, count: int) -> np.ndarray:
    """Origin plus deterministic high-amplitude points in the open quadrant."""
    X, Y = data.grid.meshes()
    vals = np.abs(data.values)
    vmax = vals.max()
    if vmax == 0.0:
        return np.array([[0.0, 0.0]])
    mask = (X > 0) & (Y > 0) & (vals >= 0.3 * vmax)
    pts = np.column_stack([X[mask], Y[mask]])
    mags = vals[mask]
    order = np.lexsort((pts[:, 1], pts[:, 0], -mags))
    pts = pts[order]
    chosen = [np.array([0.0, 0.0])]
    min_dist = max(diag.support_radius(data) / 16.0, 2.0 * data.grid.h)
    for p in pts:
        if len(chosen) >= count + 1:
            break
        if all(np.hypot(*(p - q)) >= min_dist for q in chosen[1:]):
            chosen.append(p)
    return np.array(chosen)


@dataclass
class RunResult:
    scenario: Scenario
    record: diag.RunRecord
    flow_series: list
    flow_times: list
    final_state: dyn.SimState
    out_dir: Path | None = None


def pick_timestep(scn: Scenario, state: dyn.SimState) -> float:
    """Fixed step from the initial CFL limit, with headroom for |u| growth."""
    if scn.dt > 0:
        return scn.dt
    dt = 0.7 * dyn.cfl_timestep(state, cfl=scn.cfl, dt_cap=scn.dt_cap / 0.7)
    n_steps = max(int(np.ceil(scn.horizon / dt)), 1)
    return scn.horizon / n_steps


def run_scenario(scn: Scenario, out_dir=None, initial: Field | None = None,
                 dt_override: float | None = None) -> RunResult:
    """Deterministic run: RunRecord rows at snapshot cadence, flow tracked.

    The per-step lambda(0, t) series is recorded whenever the data is odd-odd
    (it feeds the exp(int lambda) cross-check and the Gronwall report).
    """
    data = initial if initial is not None else scn.validate()
    seeds = scn.resolve_seeds(data)
    state = dyn.prepare_state(data, scn.kind, scn.gamma)
    flow = dyn.FlowState.at_seeds(seeds)
    dt = dt_override if dt_override is not None else pick_timestep(scn, state)
    n_steps = max(int(round(scn.horizon / dt)), 1)
    record = diag.RunRecord(scenario=scn.name, seed_count=seeds.shape[0])
    tracker = diag.C0Tracker()
    record.meta["grid"] = {"n": scn.grid.n, "box_half": scn.grid.box_half}
    record.meta["model"] = {"kind": scn.kind.value, "gamma": scn.gamma.value}
    record.meta["dt"] = dt
    record.meta["n_steps"] = n_steps
    record.meta["seeds"] = seeds.tolist()

    odd_odd = data.parity == (-1, -1)
    out_path = Path(out_dir) if out_dir is not None else None
    if out_path is not None:
        out_path.mkdir(parents=True, exist_ok=True)

    record.append(diag.snapshot_row(state, flow, tracker, record.meta))
    flow_series = [flow.copy()]
    flow_times = [0.0]
    if odd_odd:
        record.lam_times.append(0.0)
        record.lam_values.append(dyn.lambda_at_origin(state))
    if out_path is not None and scn.write_snapshots:
        dyn.write_snapshot(out_path / "snap_000000.bin", state)

    for s in range(n_steps):
        state, flow = dyn.step_with_flow(state, flow, dt, cfl=scn.cfl)
        if odd_odd:
            record.lam_times.append(state.t)
            record.lam_values.append(dyn.lambda_at_origin(state))
        if (s + 1) % scn.snapshot_every == 0 or s + 1 == n_steps:
            record.append(diag.snapshot_row(state, flow, tracker, record.meta))
            flow_series.append(flow.copy())
            flow_times.append(state.t)
            if out_path is not None and scn.write_snapshots:
                dyn.write_snapshot(out_path / f"snap_{state.step_count:06d}.bin", state)

    record.meta["c0_emp"] = tracker.c0
    record.meta["parity_defect"] = list(state.w.parity_defect())
    record.validate()
    if out_path is not None:
        record.write_csv(out_path / "runrecord.csv")
        record.write_json(out_path / "report.json")
    return RunResult(scn, record, flow_series, flow_times, state, out_path)


# ----------------------------------------------------------------------------
# canonical experiment drivers


def cmd_lld(cfg: dict, out_dir=None) -> dict:
    """Deformation growth across a list of A values; Gronwall tables."""
    from .initial_data import GASpec, make_gA
    from .initial_data import functional_G

    base = Scenario.from_dict(cfg)
    A_list = cfg.get("lld", {}).get("A_list", [8.0, 16.0, 32.0])
    out = {"A": [], "G": [], "C_emp": [], "max_dphi": [], "lambda0": []}
    tables = {}
    for A in A_list:
        scn_cfg = json.loads(json.dumps(cfg))  # deep copy
        scn_cfg["data"]["A"] = A
        scn_cfg["name"] = f"{base.name}-A{A:g}"
        scn = Scenario.from_dict(scn_cfg)
        if scn.seeds is None and scn.seed_preset == "origin":
            scn.seed_preset = "support_quadrant"
        data = scn.validate()
        G = functional_G(data, scn.gamma)
        sub = None if out_dir is None else Path(out_dir) / f"A{A:g}"
        res = run_scenario(scn, out_dir=sub, initial=data)
        dphi = [max(r[len(diag.BASE_COLUMNS):]) for r in res.record.rows]
        times = res.record.column("t")
        rep = dyn.gronwall_report(times, dphi, G)
        rep["lambda0_initial"] = res.record.lam_values[0]
        tables[f"A{A:g}"] = rep
        out["A"].append(A)
        out["G"].append(G)
        out["C_emp"].append(rep["C_emp"])
        out["max_dphi"].append(max(dphi))
        out["lambda0"].append(res.record.lam_values[0])
    report = {"growth_curve": out, "gronwall": tables}
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        with open(Path(out_dir) / "lld_report.json", "w") as fh:
            json.dump(report, fh, indent=1)
        with open(Path(out_dir) / "growth_curve.csv", "w") as fh:
            fh.write("A,G,C_emp,max_dphi,lambda0\n")
            for i in range(len(out["A"])):
                fh.write(",".join(repr(float(out[k][i]))
                                  for k in ("A", "G", "C_emp", "max_dphi", "lambda0")) + "\n")
    return report


def _deformation_candidates(res: RunResult, t_cap: float):
    """Per-seed largest |Dphi entry| over snapshot times <= t_cap, sorted."""
    best = {}
    for t, fl in zip(res.flow_times, res.flow_series):
        if t > t_cap + 1e-12 or t == 0.0:
            continue
        for p in range(fl.seeds.shape[0]):
            x1, x2 = fl.seeds[p]
            if x1 * x2 == 0.0:
                continue
            D = fl.deforms[p]
            for i in (0, 1):
                for j in (0, 1):
                    mag = abs(D[i, j])
                    key = (float(x1), float(x2))
                    if key not in best or mag > best[key]["L"]:
                        best[key] = {"L": float(mag), "t0": float(t), "seed": key,
                                     "entry": (i + 1, j + 1)}
    if not best:
        raise NoDeformation("no off-axis seeds tracked")
    return sorted(best.values(), key=lambda b: -b["L"])


def _lobe_quadrature_seeds(center, delta: float, order: int = 10):
    """Tensor Gauss-Legendre nodes and weights on [c - d, c + d]^2."""
    xg, wg = np.polynomial.legendre.leggauss(order)
    xs = center[0] + delta * xg
    ys = center[1] + delta * xg
    PX, PY = np.meshgrid(xs, ys, indexing="ij")
    W = np.outer(wg, wg) * delta * delta
    return np.column_stack([PX.ravel(), PY.ravel()]), W.ravel()


def cmd_inflate(cfg: dict, out_dir=None) -> dict:
    """Critical-norm inflation from a deformation-adapted perturbation.

    Runs the base scenario, places eta0 where the tracked deformation is
    largest (argmax entry; its column fixes the oscillation axis), then
    reruns with the perturbed data for probe windows of increasing length.
    """
    base_scn = Scenario.from_dict(cfg)
    icfg = cfg.get("inflate", {})
    k_osc = float(icfg.get("k", 64.0))
    probe_fractions = icfg.get("probe_fractions", [1.0 / 3.0, 2.0 / 3.0, 1.0])
    amplitude_scale = float(icfg.get("amplitude_scale", 1.0))
    quad_order = int(icfg.get("lobe_quadrature_order", 10))
    if base_scn.seeds is None and base_scn.seed_preset == "origin":
        base_scn.seed_preset = "support_quadrant"
    data = base_scn.validate()
    if data.parity != (-1, -1):
        raise ValidationError("inflation scenario needs odd-odd data")
    if k_osc * base_scn.grid.h > np.pi / 4.0:
        raise ValidationError("oscillation k unresolvable on this grid")

    state0 = dyn.prepare_state(data, base_scn.kind, base_scn.gamma)
    dt = pick_timestep(base_scn, state0)
    base_res = run_scenario(base_scn, initial=data, dt_override=dt,
                            out_dir=None if out_dir is None else Path(out_dir) / "base")
    base_bundle = {
        "times": base_res.record.column("t").tolist(),
        "h1": base_res.record.column("h1").tolist(),
        "grid": (base_scn.grid.n, base_scn.grid.box_half),
    }

    settings = []
    for frac in probe_fractions:
        t_cap = frac * base_scn.horizon
        candidates = _deformation_candidates(base_res, t_cap)
        if candidates[0]["L"] < 1.05:
            raise NoDeformation(
                f"max |Dphi entry| = {candidates[0]['L']:.4f} < 1.05 by t = {t_cap:.3f}; "
                "perturbation placement undefined")
        sel = delta = None
        for cand in candidates:
            x_L = cand["seed"]
            d = min(abs(x_L[0]), abs(x_L[1])) / 4.0
            plateau = _ga_plateau_clearance(base_scn, x_L)
            if plateau is not None:
                # keep the perturbation inside the flat top of the data lobe
                # so grad(base) vanishes identically on its support
                d = min(d, 0.45 * plateau)
            if d >= 4.0 * base_scn.grid.h and cand["L"] > 1.0:
                sel, delta = cand, d
                break
        if sel is None:
            raise NoDeformation(
                f"no strongly deformed seed admits a resolvable lobe at h = "
                f"{base_scn.grid.h:.2e}")
        x_L = sel["seed"]
        axis = 1 if sel["entry"][1] == 2 else 2
        row = sel["entry"][0]
        spec = Eta0Spec(center=x_L, delta=delta, k=k_osc, L=sel["L"], axis=axis,
                        amplitude_scale=amplitude_scale)
        eta = make_eta0(spec, base_scn.grid)
        perturbed = Field(base_scn.grid, data.values + eta.values, parity=(-1, -1))

        nodes, weights = _lobe_quadrature_seeds(x_L, delta, quad_order)
        pert_scn = Scenario(**{**base_scn.__dict__,
                               "name": f"{base_scn.name}-eta-t{t_cap:g}",
                               "seeds": nodes, "extra": dict(base_scn.extra)})
        pert_res = run_scenario(pert_scn, initial=perturbed, dt_override=dt,
                                out_dir=None if out_dir is None
                                else Path(out_dir) / f"pert_f{frac:g}")
        # Lagrangian lower-bound reconstruction on the eta0 lobes at t0:
        # 4 * sum_w |grad w~_0 . grad^perp phi~_row|^2 over the (+,+) lobe
        i0 = int(np.argmin(np.abs(np.array(pert_res.flow_times) - sel["t0"])))
        fl = pert_res.flow_series[i0]
        PX, PY = nodes[:, 0], nodes[:, 1]
        ex, ey = eta0_gradient_at(spec, PX, PY)
        gx, gy = gA_gradient_at_dispatch(base_scn, PX, PY)
        wx, wy = ex + gx, ey + gy
        D = fl.deforms
        if row == 2:
            perp = np.column_stack([-D[:, 1, 1], D[:, 1, 0]])
        else:
            perp = np.column_stack([-D[:, 0, 1], D[:, 0, 0]])
        integrand = (wx * perp[:, 0] + wy * perp[:, 1]) ** 2
        recon = 4.0 * float((integrand * weights).sum())

        pert_bundle = {
            "times": pert_res.record.column("t").tolist(),
            "h1": pert_res.record.column("h1").tolist(),
            "grid": (base_scn.grid.n, base_scn.grid.box_half),
            "t0": sel["t0"],
            "reconstruction": recon,
        }
        report = diag.inflation_report(pert_bundle, base_bundle)
        report.update({"L": sel["L"], "x_L": x_L, "delta": delta, "k": k_osc,
                       "axis": axis, "entry": sel["entry"], "probe_fraction": frac,
                       "eta0_h1": sobolev_norm(eta, 1),
                       "eta0_linf": lebesgue_norm(eta, np.inf)})
        settings.append(report)

    result = {
        "settings": settings,
        "L_values": [s["L"] for s in settings],
        "ratios": [s["ratio"] for s in settings],
        "dt": dt,
    }
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        with open(Path(out_dir) / "inflate_report.json", "w") as fh:
            json.dump(result, fh, indent=1)
    return result


def _ga_plateau_clearance(scn: Scenario, x_L) -> float | None:
    """Lobe radius sigma 2^-j when x_L sits on a gA lobe center, else None."""
    spec = scn.data_spec
    if spec.get("type") != "gA":
        return None
    from .initial_data import GASpec

    ga = GASpec(gamma=Gamma(spec.get("gamma", scn.gamma.value)), A=float(spec["A"]),
                variant=spec.get("variant", "section3"), sigma=spec.get("sigma", 0.125),
                j_cap=spec.get("j_cap"), amplitude=spec.get("amplitude", 1.0))
    for j in ga.levels(scn.grid):
        c = 2.0**-j
        if np.hypot(x_L[0] - c, x_L[1] - c) <= scn.grid.h:
            return ga.sigma * c
    return None


def gA_gradient_at_dispatch(scn: Scenario, X, Y):
    """Analytic gradient of the scenario's base data at arbitrary points."""
    spec = scn.data_spec
    if spec.get("type") != "gA":
        raise ValidationError("inflation driver expects gA base data")
    from .initial_data import GASpec

    ga = GASpec(gamma=Gamma(spec.get("gamma", scn.gamma.value)), A=float(spec["A"]),
                variant=spec.get("variant", "section3"), sigma=spec.get("sigma", 0.125),
                j_cap=spec.get("j_cap"), amplitude=spec.get("amplitude", 1.0))
    return gA_gradient_at(ga, np.asarray(X, dtype=float), np.asarray(Y, dtype=float),
                          grid=scn.grid)


def cmd_patch(cfg: dict, out_dir=None) -> dict:
    """Two-blob interaction decay over a geometric separation schedule."""
    scn = Scenario.from_dict(cfg)
    pcfg = cfg.get("patch", {})
    separations = pcfg.get("separations", [4.0, 8.0, 16.0])
    f_spec = pcfg.get("f", {"type": "sum", "parts": [
        {"type": "bump", "center": [0.0, 0.8], "radius": 0.75, "amplitude": 0.5},
        {"type": "bump", "center": [0.0, -0.8], "radius": 0.75, "amplitude": -0.5},
    ]})
    g_spec = pcfg.get("g", f_spec)
    f_field = data_from_spec(f_spec, scn.grid, scn.gamma)
    g_field = data_from_spec(g_spec, scn.grid, scn.gamma)
    report = diag.interaction_decay(
        scn.grid, scn.kind, scn.gamma, f_field, g_field, separations,
        horizon=scn.horizon, dt=scn.dt if scn.dt > 0 else None,
        snapshot_every=scn.snapshot_every)
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        with open(Path(out_dir) / "patch_report.json", "w") as fh:
            json.dump(report, fh, indent=1)
        with open(Path(out_dir) / "decay.csv", "w") as fh:
            fh.write("R,max_l2,max_h2\n")
            for R in report["separations"]:
                row = report["per_separation"][str(R)]
                fh.write(f"{R!r},{row['max_l2']!r},{row['max_h2']!r}\n")
    return report


def _set_dotted(cfg: dict, dotted: str, value):
    parts = dotted.split(".")
    node = cfg
    for p in parts[:-1]:
        node = node.setdefault(p, {})
    node[parts[-1]] = value


def cmd_sweep(cfg: dict, out_dir) -> dict:
    """Cartesian product over [sweep.parameters]; one subdirectory per point.

    Failures are isolated: a point that raises records status=failed in the
    index and the sweep continues.
    """
    sweep = cfg.get("sweep", {})
    params = sweep.get("parameters", {})
    keys = sorted(params.keys())
    if out_dir is None:
        raise ValidationError("sweep needs an output directory")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    def points(i, chosen):
        if i == len(keys):
            yield dict(chosen)
            return
        for v in params[keys[i]]:
            chosen[keys[i]] = v
            yield from points(i + 1, chosen)
        chosen.pop(keys[i], None)

    index = {"parameters": keys, "points": []}
    jobs = list(points(0, {})) if keys else [{}]
    workers = int(os.environ.get("LOGEULER_THREADS", "1"))

    def run_point(assign):
        sub_cfg = json.loads(json.dumps(cfg))
        sub_cfg.pop("sweep", None)
        for k, v in assign.items():
            _set_dotted(sub_cfg, k, v)
        tag = "point" if not assign else "_".join(
            f"{k.split('.')[-1]}={v:g}" if isinstance(v, float) else f"{k.split('.')[-1]}={v}"
            for k, v in sorted(assign.items()))
        sub_dir = out_dir / tag
        entry = {"point": assign, "dir": tag}
        try:
            scn = Scenario.from_dict(sub_cfg)
            res = run_scenario(scn, out_dir=sub_dir)
            last = res.record.rows[-1]
            entry["status"] = "ok"
            entry["final"] = dict(zip(res.record.columns[:11], last[:11]))
        except (ValidationError, NumericalError) as e:
            entry["status"] = "failed"
            entry["error"] = f"{type(e).__name__}: {e}"
        return entry

    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as ex:
            entries = list(ex.map(run_point, jobs))
    else:
        entries = [run_point(j) for j in jobs]
    index["points"] = entries
    with open(out_dir / "index.json", "w") as fh:
        json.dump(index, fh, indent=1, sort_keys=True)
    return index
