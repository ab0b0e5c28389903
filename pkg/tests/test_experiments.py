import json
import subprocess
import sys

import numpy as np
import pytest

from logeuler.errors import OutOfBox, Unresolvable, ValidationError
from logeuler.experiments import Scenario, cmd_sweep, run_scenario
from logeuler.spectral import Gamma, Grid, RegKind

BASE_CFG = {
    "name": "tiny",
    "grid": {"n": 128, "box_half": 4.0},
    "model": {"kind": "log_laplacian", "gamma": 0.5},
    "data": {"type": "rho", "sigma": 0.25},
    "time": {"horizon": 0.05, "dt_cap": 5e-3, "snapshot_every": 5},
    "flow": {"preset": "support_quadrant", "count": 4},
}


def cfg_copy(**overrides):
    cfg = json.loads(json.dumps(BASE_CFG))
    for key, val in overrides.items():
        node = cfg
        parts = key.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        node[parts[-1]] = val
    return cfg


class TestScenario:
    def test_from_dict_and_validate(self):
        scn = Scenario.from_dict(cfg_copy())
        assert scn.grid == Grid(128, 4.0)
        assert scn.kind is RegKind.LOG_LAPLACIAN
        assert scn.gamma == Gamma(0.5)
        data = scn.validate()
        assert data.parity == (-1, -1)

    def test_toml_round_trip(self, tmp_path):
        text = """
name = "t"
[grid]
n = 128
box_half = 4.0
[model]
kind = "log_gradient"
gamma = 0.25
[data]
type = "rho"
sigma = 0.25
[time]
horizon = 0.05
"""
        path = tmp_path / "scn.toml"
        path.write_text(text)
        scn = Scenario.from_toml(path)
        assert scn.kind is RegKind.LOG_GRADIENT
        assert scn.gamma.value == 0.25

    def test_validation_rejects_unresolvable_before_compute(self):
        scn = Scenario.from_dict(cfg_copy(**{"data.sigma": 0.01}))
        with pytest.raises(Unresolvable):
            scn.validate()

    def test_validation_rejects_oversized_support(self):
        scn = Scenario.from_dict(cfg_copy(**{"grid.box_half": 1.5, "data.sigma": 0.25}))
        with pytest.raises(OutOfBox):
            scn.validate()

    def test_missing_key_is_validation_error(self):
        with pytest.raises(ValidationError):
            Scenario.from_dict({"grid": {"n": 128, "box_half": 1.0}})


class TestRunScenario:
    def test_zero_data_all_norm_rows_zero(self):
        cfg = cfg_copy(**{"data": {"type": "gaussian", "width": 0.5, "amplitude": 0.0},
                          "time.horizon": 0.02})
        res = run_scenario(Scenario.from_dict(cfg))
        for row in res.record.rows:
            for name in ("l1", "l2", "linf", "h1", "w14", "uinf", "duinf", "lambda0"):
                idx = res.record.columns.index(name)
                assert row[idx] == 0.0

    def test_rerun_byte_identical(self, tmp_path):
        scn = Scenario.from_dict(cfg_copy())
        run_scenario(scn, out_dir=tmp_path / "a")
        run_scenario(scn, out_dir=tmp_path / "b")
        assert (tmp_path / "a" / "runrecord.csv").read_bytes() == \
            (tmp_path / "b" / "runrecord.csv").read_bytes()

    def test_identity_vs_regularized_deformation(self):
        # gamma = 0 (identity) versus gamma = 1/2 on the same data: the
        # regularized run is expected to deform no more; reported, not hard
        reports = {}
        for kind in ("identity", "log_laplacian"):
            cfg = cfg_copy(**{"model.kind": kind, "time.horizon": 0.1})
            res = run_scenario(Scenario.from_dict(cfg))
            reports[kind] = max(max(r[11:]) for r in res.record.rows)
        print(f"max |Dphi|: identity {reports['identity']:.8f} "
              f"vs log_laplacian {reports['log_laplacian']:.8f}")
        assert reports["identity"] > 0 and reports["log_laplacian"] > 0

    def test_snapshots_written(self, tmp_path):
        cfg = cfg_copy()
        cfg["output"] = {"snapshots": True}
        res = run_scenario(Scenario.from_dict(cfg), out_dir=tmp_path)
        snaps = sorted(tmp_path.glob("snap_*.bin"))
        assert len(snaps) >= 2
        from logeuler.dynamics import read_snapshot

        st = read_snapshot(snaps[0])
        assert st.grid == res.scenario.grid


class TestSweep:
    def test_grid_of_points_and_index(self, tmp_path):
        cfg = cfg_copy()
        cfg["sweep"] = {"parameters": {"model.gamma": [0.25, 0.5],
                                       "model.kind": ["identity", "log_laplacian"]}}
        index = cmd_sweep(cfg, tmp_path)
        assert len(index["points"]) == 4
        assert all(p["status"] == "ok" for p in index["points"])
        dirs = [p for p in tmp_path.iterdir() if p.is_dir()]
        assert len(dirs) == 4
        assert (tmp_path / "index.json").exists()

    def test_single_point_equals_direct_run(self, tmp_path):
        cfg = cfg_copy()
        cfg["sweep"] = {"parameters": {}}
        cmd_sweep(cfg, tmp_path / "sweep")
        run_scenario(Scenario.from_dict(cfg_copy()), out_dir=tmp_path / "direct")
        sweep_csv = (tmp_path / "sweep" / "point" / "runrecord.csv").read_bytes()
        direct_csv = (tmp_path / "direct" / "runrecord.csv").read_bytes()
        assert sweep_csv == direct_csv

    def test_failure_isolation(self, tmp_path):
        cfg = cfg_copy()
        cfg["sweep"] = {"parameters": {"data.sigma": [0.25, 0.001]}}
        index = cmd_sweep(cfg, tmp_path)
        by_status = {p["point"]["data.sigma"]: p["status"] for p in index["points"]}
        assert by_status[0.25] == "ok"
        assert by_status[0.001] == "failed"

    def test_rerun_index_stable(self, tmp_path):
        cfg = cfg_copy()
        cfg["sweep"] = {"parameters": {"model.gamma": [0.5]}}
        cmd_sweep(cfg, tmp_path / "one")
        cmd_sweep(cfg, tmp_path / "two")
        assert (tmp_path / "one" / "index.json").read_bytes() == \
            (tmp_path / "two" / "index.json").read_bytes()


class TestCli:
    def run_cli(self, *args):
        return subprocess.run([sys.executable, "-m", "logeuler.cli", *args],
                              capture_output=True, text=True)

    def test_simulate_and_exit_codes(self, tmp_path):
        cfg_path = tmp_path / "scn.toml"
        cfg_path.write_text("""
name = "cli-t"
[grid]
n = 128
box_half = 4.0
[model]
kind = "log_laplacian"
gamma = 0.5
[data]
type = "rho"
sigma = 0.25
[time]
horizon = 0.02
snapshot_every = 2
""")
        out = self.run_cli("simulate", "--config", str(cfg_path), "--out",
                           str(tmp_path / "run"))
        assert out.returncode == 0, out.stderr
        assert (tmp_path / "run" / "runrecord.csv").exists()
        rep = self.run_cli("report", "--out", str(tmp_path / "run"))
        assert rep.returncode == 0, rep.stderr

    def test_validation_exit_code(self, tmp_path):
        cfg_path = tmp_path / "bad.toml"
        cfg_path.write_text("""
name = "bad"
[grid]
n = 128
box_half = 4.0
[model]
kind = "log_laplacian"
gamma = 0.5
[data]
type = "rho"
sigma = 0.0001
[time]
horizon = 0.02
""")
        out = self.run_cli("simulate", "--config", str(cfg_path))
        assert out.returncode == 2
        assert "validation" in out.stderr

    def test_kernels_table(self, tmp_path):
        pts = tmp_path / "pts.txt"
        pts.write_text("0.5 0.5\n1.0 0.25\n")
        out_csv = tmp_path / "table.csv"
        out = self.run_cli("kernels", "table", "--gamma", "0.5", "--kind",
                           "log_laplacian", "--points", str(pts), "--out", str(out_csv))
        assert out.returncode == 0, out.stderr
        lines = out_csv.read_text().strip().splitlines()
        assert lines[0] == "x1,x2,value,err_est,flag"
        assert len(lines) == 3
        val = float(lines[1].split(",")[2])
        assert val > 0.0
