import json
import math
import os
from pathlib import Path

import numpy as np
import pytest

from plateau_h.cli import main
from plateau_h.config import (
    ConfigError,
    RunConfig,
    parse_config,
    serialize_config,
)
from plateau_h.domain import DomainSpec
from plateau_h.reports import run_verify, export_solution, worker_count
from plateau_h.solver import continuation_solve


class TestParseConfig:
    def test_defaults_filled(self):
        cfg = parse_config('{"mode":"solve","domain":{"shape":"ball","radius":1.0}}')
        assert cfg.sigma == 0.6
        assert cfg.grid_resolution == 64
        assert cfg.eps_schedule == (0.1, 0.03, 0.01, 0.003, 0.001)
        assert cfg.N_constant == pytest.approx(3 + 2 * math.sqrt(3))
        assert cfg.domain.shape == "ball"

    def test_sigma_range_rejected(self):
        with pytest.raises(ConfigError, match=r"sigma.*\(0,1\)"):
            parse_config('{"mode":"solve","domain":{"shape":"ball","radius":1},"sigma":1.2}')

    def test_annulus_without_override_rejected(self):
        with pytest.raises(ConfigError, match="mean-convex"):
            parse_config(
                '{"mode":"solve","domain":{"shape":"annulus","r_inner":0.4,"r_outer":1.0}}'
            )

    def test_bad_json_has_path(self):
        with pytest.raises(ConfigError, match=r"\$"):
            parse_config("{not json")

    def test_eps_schedule_validation(self):
        with pytest.raises(ConfigError, match="decreasing"):
            parse_config(
                '{"mode":"verify","eps_schedule":[0.1,0.2]}'
            )
        with pytest.raises(ConfigError, match=r"\(0, 0.5\)"):
            parse_config('{"mode":"verify","eps_schedule":[0.6,0.1]}')

    def test_resolution_bounds(self):
        with pytest.raises(ConfigError, match="grid_resolution"):
            parse_config('{"mode":"verify","grid_resolution":8}')

    def test_round_trip(self):
        cfg = RunConfig(mode="solve", domain=DomainSpec.ellipse((1.0, 0.7)),
                        sigma=0.45, seed=7, n_samples=1000)
        assert parse_config(serialize_config(cfg)) == cfg

    def test_round_trip_annulus(self):
        cfg = RunConfig(mode="solve",
                        domain=DomainSpec.annulus(0.4, 1.0, allow_nonconvex=True))
        assert parse_config(serialize_config(cfg)) == cfg


@pytest.fixture(scope="module")
def small_report():
    cfg = RunConfig(mode="verify", seed=99, n_samples=4000,
                    dims_to_sweep=(2, 3, 4))
    return run_verify(cfg)


@pytest.fixture(scope="module")
def export_run(tmp_path_factory):
    spec = DomainSpec.ball(1.0)
    sol, reports = continuation_solve(spec, 0.6, [0.1, 0.03], resolution=16)
    out = tmp_path_factory.mktemp("run")
    cfg = {"mode": "solve", "sigma": 0.6}
    export_solution(sol, reports[-1], out, config_echo=cfg, stages=reports)
    return sol, reports, out


class TestRunVerify:
    def test_low_dims_all_pass(self, small_report):
        assert small_report.all_pass

    def test_constants_table(self, small_report):
        assert small_report.constants["4"]["alpha"] == 2.0 / 9.0
        assert small_report.constants["4"]["beta"] == 0.5

    def test_determinism(self):
        cfg = RunConfig(mode="verify", seed=4242, n_samples=2000,
                        dims_to_sweep=(2, 5))
        a = run_verify(cfg).to_json()
        b = run_verify(cfg).to_json()
        assert a == b

    def test_determinism_across_worker_counts(self, monkeypatch):
        cfg = RunConfig(mode="verify", seed=11, n_samples=2000, dims_to_sweep=(3,))
        monkeypatch.setenv("PLATEAU_H_THREADS", "1")
        a = run_verify(cfg).to_json()
        monkeypatch.setenv("PLATEAU_H_THREADS", "4")
        b = run_verify(cfg).to_json()
        assert a == b

    def test_worker_count_env(self, monkeypatch):
        monkeypatch.setenv("PLATEAU_H_THREADS", "3")
        assert worker_count() == 3
        monkeypatch.setenv("PLATEAU_H_THREADS", "0")
        assert worker_count() >= 1

    def test_high_dims_report_counterexamples(self):
        # the quadratic-form certificate genuinely fails near the cone
        # boundary for n >= 5; the report must carry a replayable witness
        cfg = RunConfig(mode="verify", seed=5, n_samples=20000, dims_to_sweep=(5,))
        rep = run_verify(cfg)
        qrec = next(r for r in rep.records if r.name == "qform-min-eigenvalue")
        assert not qrec.passed
        assert qrec.worst is not None
        kappa = np.array(qrec.worst["kappa"])
        assert kappa[-1] < 0
        # replay: the serialized sample really violates the form
        from plateau_h.inequality_lab import qform_min_eigenvalue
        lam = qform_min_eigenvalue(kappa, qrec.worst["i"], qrec.worst["delta"])
        assert lam == pytest.approx(qrec.worst["value"], rel=1e-9)
        assert lam < 0

    def test_fault_injection_flags_qform(self):
        cfg = RunConfig(mode="verify", seed=31, n_samples=30000,
                        dims_to_sweep=(4,), eps_j_scale=1.5)
        rep = run_verify(cfg)
        base = RunConfig(mode="verify", seed=31, n_samples=30000, dims_to_sweep=(4,))
        rep0 = run_verify(base)
        get = lambda r, name: next(x for x in r.records if x.name == name)
        # the faulted margin is strictly worse than the certified one
        assert (get(rep, "qform-min-eigenvalue").min_margin
                < get(rep0, "qform-min-eigenvalue").min_margin)


class TestExportSolution:
    def test_files_exist(self, export_run):
        _, _, out = export_run
        for name in ("solution.csv", "report.json", "meta.json", "stages.csv"):
            assert (out / name).exists()

    def test_csv_schema_and_precision(self, export_run):
        sol, _, out = export_run
        lines = (out / "solution.csv").read_text().splitlines()
        assert lines[0] == "x1,x2,u,kappa_min,kappa_max,S1,nu_up"
        assert len(lines) - 1 == sol.disc.m_int
        first = lines[1].split(",")
        assert all("e" in f for f in first)          # scientific notation
        mantissa = first[2].split("e")[0]
        assert len(mantissa.replace("-", "").replace(".", "")) >= 12

    def test_min_nu_column_close_to_sigma(self, export_run):
        _, reports, out = export_run
        rows = (out / "solution.csv").read_text().splitlines()[1:]
        nu = np.array([float(r.split(",")[-1]) for r in rows])
        assert nu.min() == pytest.approx(reports[-1].min_nu_up, rel=1e-12)
        assert nu.min() >= 0.6 - 1e-3

    def test_report_json_deterministic(self, export_run, tmp_path):
        sol, reports, out = export_run
        export_solution(sol, reports[-1], tmp_path, config_echo={"mode": "solve",
                                                                 "sigma": 0.6},
                        stages=reports)
        assert (tmp_path / "report.json").read_bytes() == (out / "report.json").read_bytes()


class TestCli:
    def test_cap_command(self, capsys):
        code = main(["cap", "--radius", "1", "--sigma", "0.6"])
        out = capsys.readouterr().out
        assert code == 0
        assert "1.25" in out and "0.75" in out

    def test_cap_profile_file(self, tmp_path, capsys):
        path = tmp_path / "cap.csv"
        code = main(["cap", "--radius", "1", "--sigma", "0.6", "--out", str(path)])
        assert code == 0
        lines = path.read_text().splitlines()
        assert lines[0] == "r,u,nu_up"
        assert len(lines) == 130

    def test_config_error_exit_code(self, tmp_path):
        cfg = tmp_path / "bad.json"
        cfg.write_text('{"mode":"solve","domain":{"shape":"ball","radius":1},"sigma":2}')
        assert main(["solve", "-c", str(cfg)]) == 2

    def test_solve_then_report_renders_figures(self, tmp_path, capsys):
        out_dir = tmp_path / "run"
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({
            "mode": "solve",
            "domain": {"shape": "ball", "radius": 1.0},
            "sigma": 0.6,
            "eps_schedule": [0.1, 0.03],
            "grid_resolution": 16,
            "output_dir": str(out_dir),
        }))
        assert main(["solve", "-c", str(cfg)]) == 0
        assert main(["report", str(out_dir)]) == 0
        capsys.readouterr()
        figs = sorted((out_dir / "figures").glob("*.png"))
        assert {f.name for f in figs} >= {"fields.png", "stage_trends.png"}
        assert all(f.stat().st_size > 2000 for f in figs)

    def test_verify_cli_exit_codes(self, tmp_path):
        ok_cfg = tmp_path / "ok.json"
        ok_cfg.write_text(json.dumps({
            "mode": "verify", "n_samples": 2000, "dims_to_sweep": [2, 3],
            "seed": 3, "output_dir": str(tmp_path / "v1"),
        }))
        assert main(["verify", "-c", str(ok_cfg)]) == 0
        assert (tmp_path / "v1" / "verify.json").exists()

        bad_cfg = tmp_path / "bad.json"
        bad_cfg.write_text(json.dumps({
            "mode": "verify", "n_samples": 20000, "dims_to_sweep": [5],
            "seed": 3, "output_dir": str(tmp_path / "v2"),
        }))
        assert main(["verify", "-c", str(bad_cfg)]) == 4
        doc = json.loads((tmp_path / "v2" / "verify.json").read_text())
        failing = [r for r in doc["certificates"] if not r["pass"]]
        assert failing and any("worst" in r for r in failing)

    def test_report_missing_dir(self):
        assert main(["report", "/nonexistent/run"]) == 2
