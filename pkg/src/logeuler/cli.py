"""Command line interface.

    logeuler simulate --config FILE [--out DIR]
    logeuler kernels table --gamma G --kind K --points FILE --out CSV
    logeuler lld|inflate|patch --config FILE [--out DIR]
    logeuler sweep --config FILE --out DIR
    logeuler report --out DIR

Exit codes: 0 ok, 2 validation error, 3 numerical failure.
LOGEULER_THREADS caps sweep worker count (default 1).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import NumericalError, ValidationError


def _load_cfg(path):
    if sys.version_info >= (3, 11):
        import tomllib
    else:
        import tomli as tomllib
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def _cmd_simulate(args) -> int:
    from .experiments import Scenario, run_scenario

    scn = Scenario.from_toml(args.config)
    res = run_scenario(scn, out_dir=args.out)
    last = res.record.rows[-1]
    print(f"{scn.name}: {res.record.meta['n_steps']} steps, "
          f"t = {last[0]:g}, |w|_2 = {last[2]:.6g}, |w|_inf = {last[3]:.6g}")
    if args.out:
        print(f"wrote {Path(args.out) / 'runrecord.csv'}")
    return 0


def _cmd_kernels(args) -> int:
    import numpy as np

    from .kernels import KernelQuery, QuadratureBudget, eval_K12_any
    from .spectral import Gamma, RegKind

    if args.mode != "table":
        raise ValidationError(f"unknown kernels mode {args.mode!r}")
    gamma = Gamma(args.gamma)
    kind = RegKind.parse(args.kind)
    budget = QuadratureBudget()
    pts = []
    with open(args.points) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            x1, x2 = (float(v) for v in line.replace(",", " ").split()[:2])
            pts.append((x1, x2))
    out = args.out or "kernel_table.csv"
    with open(out, "w") as fh:
        fh.write("x1,x2,value,err_est,flag\n")
        for x1, x2 in pts:
            kv = eval_K12_any(KernelQuery((x1, x2), gamma, kind), budget)
            fh.write(f"{x1!r},{x2!r},{float(kv.value)!r},{float(kv.err_est)!r},"
                     f"{(kv.note or 'ok') if kv.flagged else 'ok'}\n")
    print(f"wrote {out} ({len(pts)} points)")
    return 0


def _cmd_driver(name):
    def run(args) -> int:
        from . import experiments

        cfg = _load_cfg(args.config)
        fn = getattr(experiments, f"cmd_{name}")
        report = fn(cfg, args.out)
        if name == "lld":
            curve = report["growth_curve"]
            for A, d in zip(curve["A"], curve["max_dphi"]):
                print(f"A = {A:g}: max |Dphi| = {d:.6g}")
        elif name == "inflate":
            for s in report["settings"]:
                print(f"t0 = {s['t0']:g}: L = {s['L']:.4g}, ratio = {s['ratio']:.8g}")
        elif name == "patch":
            print(f"L2 decay exponent {report['l2_fit']['exponent']:.3f}, "
                  f"H2 {report['h2_fit']['exponent']:.3f}")
        elif name == "sweep":
            ok = sum(1 for p in report["points"] if p["status"] == "ok")
            print(f"sweep: {ok}/{len(report['points'])} points ok")
        return 0

    return run


def _cmd_report(args) -> int:
    from .diagnostics import RunRecord, fit_power_law  # noqa: F401

    run_dir = Path(args.out)
    rec = RunRecord.read_csv(run_dir / "runrecord.csv")
    meta_path = run_dir / "report.json"
    if meta_path.exists():
        with open(meta_path) as fh:
            rec.meta = json.load(fh).get("meta", {})
    rec.write_json(run_dir / "report.json")
    t = rec.column("t")
    print(f"{len(rec.rows)} snapshots over t in [{t[0]:g}, {t[-1]:g}]")
    for name in ("l2", "linf", "h1"):
        col = rec.column(name)
        print(f"  {name}: start {col[0]:.6g} end {col[-1]:.6g}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="logeuler", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run one scenario")
    s.add_argument("--config", required=True)
    s.add_argument("--out", default=None)
    s.set_defaults(fn=_cmd_simulate)

    k = sub.add_parser("kernels", help="kernel tables by direct quadrature")
    k.add_argument("mode", choices=["table"])
    k.add_argument("--gamma", type=float, required=True)
    k.add_argument("--kind", required=True)
    k.add_argument("--points", required=True)
    k.add_argument("--out", default=None)
    k.set_defaults(fn=_cmd_kernels)

    for name, help_text in (("lld", "deformation growth over A"),
                            ("inflate", "critical norm inflation"),
                            ("patch", "blob interaction decay"),
                            ("sweep", "cartesian parameter sweep")):
        d = sub.add_parser(name, help=help_text)
        d.add_argument("--config", required=True)
        d.add_argument("--out", default=None, required=(name == "sweep"))
        d.set_defaults(fn=_cmd_driver(name))

    r = sub.add_parser("report", help="regenerate reports from a run directory")
    r.add_argument("--out", required=True)
    r.set_defaults(fn=_cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ValidationError as e:
        print(f"validation error: {e}", file=sys.stderr)
        return 2
    except NumericalError as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
