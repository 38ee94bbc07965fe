import json
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from platepml import cli, studies
from platepml.config import ConfigError, ScenarioConfig
from platepml.solve import SolverError


def run_cli(*args):
    return cli.main([str(a) for a in args])


def write_config(tmp_path, **disc):
    cfg = ScenarioConfig()
    for k, v in disc.items():
        setattr(cfg.discretization, k, v)
    path = tmp_path / "cfg.json"
    path.write_text(cfg.to_json())
    return path


@settings(max_examples=40, deadline=None)
@given(kappa=st.floats(0.5, 10.0), angle=st.floats(-1.2, 1.2), h=st.floats(0.01, 0.2),
       s1=st.floats(0.0, 40.0), m=st.integers(1, 8), cavity=st.sampled_from(["circle", "kite"]),
       methods=st.lists(st.sampled_from(["qp", "uq", "decoupled"]), min_size=1, unique=True))
def test_config_round_trip(kappa, angle, h, s1, m, cavity, methods):
    cfg = ScenarioConfig()
    cfg.wave.kappa, cfg.wave.theta = kappa, angle
    cfg.discretization.h = h
    cfg.pml.sigma1, cfg.pml.m = s1, m
    cfg.geometry.cavity = cavity
    cfg.methods = methods
    back = ScenarioConfig.from_json(cfg.to_json())
    assert back == cfg
    assert back.to_json() == cfg.to_json()


def test_config_rejects_unknown_keys_and_versions():
    data = ScenarioConfig().to_dict()
    with pytest.raises(ConfigError):
        ScenarioConfig.from_dict({**data, "colour": "red"})
    with pytest.raises(ConfigError):
        ScenarioConfig.from_dict({**data, "schema_version": 99})
    bad = ScenarioConfig().to_dict()
    bad["wave"]["speed"] = 1.0
    with pytest.raises(ConfigError):
        ScenarioConfig.from_dict(bad)
    with pytest.raises(ConfigError):
        ScenarioConfig.from_json("{not json")


def test_config_validation():
    cfg = ScenarioConfig()
    cfg.validate()
    cfg.pml.sigma1 = 1.0
    with pytest.raises(ConfigError, match="admissibility"):
        cfg.validate()
    cfg.allow_invalid_pml = True
    cfg.validate()
    other = ScenarioConfig(methods=["fem"])
    with pytest.raises(ConfigError):
        other.validate()


def test_invalid_pml_exit_code(tmp_path, capsys):
    cfg = ScenarioConfig()
    cfg.pml.sigma1 = 1.0
    path = tmp_path / "bad.json"
    path.write_text(cfg.to_json())
    assert run_cli("modes", "--config", path, "--out", tmp_path) == 2
    assert "admissibility" in capsys.readouterr().err
    assert run_cli("modes", "--config", path, "--out", tmp_path, "--allow-invalid-pml") == 0


def test_solver_failure_exit_code(tmp_path, monkeypatch):
    def boom(*a, **k):
        raise SolverError("forced")
    monkeypatch.setattr(studies, "run_scenario", boom)
    assert run_cli("solve", "--out", tmp_path) == 3


def test_modes_and_lift_outputs(tmp_path):
    assert run_cli("--out", tmp_path, "modes") == 0
    lines = (tmp_path / "modes.csv").read_text().splitlines()
    meta = json.loads(lines[0][2:])
    assert meta["schema_version"] == 1 and "config" in meta
    assert lines[1] == "n,alpha_n,re_beta_n,im_beta_n,gamma_n"
    assert len(lines) == 2 + 41
    assert run_cli("lift-test", "--out", tmp_path, "--n-max", "3") == 0
    rows = (tmp_path / "lift_test.csv").read_text().splitlines()[2:]
    assert len(rows) == 3 * 7
    residuals = np.array([[float(v) for v in r.split(",")[2:6]] for r in rows])
    assert residuals.max() <= 1e-12


def test_mesh_subcommands(tmp_path):
    target = tmp_path / "m.txt"
    assert run_cli("mesh", "generate", target, "--h", "0.1", "--out", tmp_path) == 0
    assert run_cli("mesh", "audit", target, "--out", tmp_path) == 0
    assert run_cli("mesh", "export", "--h", "0.1", "--out", tmp_path) == 0
    assert (tmp_path / "mesh.txt").read_text() == target.read_text()
    broken = tmp_path / "broken.txt"
    broken.write_text(target.read_text().replace("nodes", "nodez", 1))
    assert run_cli("mesh", "audit", broken) == 2
    assert run_cli("mesh", "audit") == 2


def test_solve_outputs_are_deterministic(tmp_path):
    out = tmp_path / "run"
    assert run_cli("solve", "--h", "0.1", "--out", out, "--vtk") == 0
    first = {p.name: p.read_bytes() for p in out.iterdir()}
    assert run_cli("solve", "--h", "0.1", "--out", out, "--threads", "3", "--vtk") == 0
    second = {p.name: p.read_bytes() for p in out.iterdir()}
    assert first == second
    assert {"summary.json", "field_qp.csv", "field_uq.csv", "field_decoupled.csv",
            "field_qp.vtk"} <= set(first)
    summary = json.loads(first["summary.json"])
    assert summary["schema_version"] == 1
    assert summary["config"]["discretization"]["h"] == 0.1
    for name, entry in summary["methods"].items():
        assert entry["residual"] <= 1e-10
        assert entry["cavity_max_abs_u"] <= 1e-13
    header = first["field_uq.csv"].decode().splitlines()[1]
    assert header == "x1,x2,re_u,im_u,re_lap_u,im_lap_u"


def test_compare_and_studies_small(tmp_path):
    cfg_path = write_config(tmp_path, h=0.1)
    assert run_cli("compare", "--config", cfg_path, "--out", tmp_path, "--h", "0.1") == 0
    table = json.loads((tmp_path / "compare.json").read_text())["differences"]
    assert set(table) == {"qp-uq", "qp-decoupled", "uq-decoupled"}
    assert run_cli("converge", "--config", cfg_path, "--out", tmp_path,
                   "--hs", "0.2", "0.15", "--h-ref", "0.1") == 0
    report = json.loads((tmp_path / "convergence.json").read_text())
    assert len(report["err_u"]) == 2
    assert run_cli("pml-study", "--config", cfg_path, "--out", tmp_path,
                   "--values", "1.0", "2.5") == 0
    rows = json.loads((tmp_path / "pml_study.json").read_text())["rows"]
    assert rows[-1]["proxy"] == 0.0 and rows[0]["proxy"] > 0


def test_method_against_itself_is_zero():
    cfg = ScenarioConfig()
    mesh = studies.build_mesh(cfg, 0.1)
    sols = studies.solve_methods(cfg, mesh, ["uq"])
    assert studies.strip_l2(mesh, sols["uq"].u - sols["uq"].u) == 0.0


def test_interpolation_reproduces_linear_field():
    cfg = ScenarioConfig()
    mesh = studies.build_mesh(cfg, 0.1)
    values = 2.0 * mesh.nodes[:, 0] - 3.0 * mesh.nodes[:, 1] + 1j
    pts = np.random.default_rng(0).uniform([0, -0.5], [1, 0.5], (200, 2))
    pts = pts[np.hypot(pts[:, 0] - 0.5, pts[:, 1]) > 0.31]
    got = studies.interpolate_p1(mesh, values, pts)
    assert np.allclose(got, 2 * pts[:, 0] - 3 * pts[:, 1] + 1j, atol=1e-12)


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "platepml", "modes", "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.splitlines()[20].split()[0] == "0"
