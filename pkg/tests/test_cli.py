import json

import numpy as np
import pytest

from nlch.cli import main
from nlch.config import RunConfig, build_problem, default_config, load_config, parse_config
from nlch.errors import ConfigError
from nlch.grid import read_field

FAST = [
    "--set", "grid.cells=64",
    "--set", "model.T=0.01",
    "--set", "model.dt=1e-3",
]


def test_parse_config_basics():
    cfg = parse_config("""
# a comment
model.eps = 0.02   # trailing comment
grid.cells = 64
ic.phi_modes = 1,3
""")
    assert cfg["model.eps"] == 0.02
    assert cfg["grid.cells"] == (64,)
    assert cfg["ic.phi_modes"] == (1, 3)

    with pytest.raises(ConfigError, match="line 2"):
        parse_config("\nnot a pair\n")
    with pytest.raises(ConfigError, match="unknown key"):
        parse_config("model.epz = 0.1\n")
    with pytest.raises(ConfigError, match="bad value"):
        parse_config("model.eps = abc\n")
    with pytest.raises(ConfigError, match="unknown key"):
        parse_config("", overrides=["nope=1"])


def test_resolved_text_roundtrip():
    cfg = default_config()
    text = cfg.resolved_text()
    cfg2 = parse_config(text)
    assert cfg2.entries == cfg.entries


def test_build_problem_default():
    problem = build_problem(default_config())
    assert problem.grid.cells == (256,)
    assert problem.bundle.a_star > 0
    assert problem.params.eps == 0.01


def test_config_rejects_bad_params():
    with pytest.raises(ConfigError):
        build_problem(parse_config("model.B = -1\n"))
    with pytest.raises(ConfigError):
        build_problem(parse_config("model.sigma_s = 2.0\n"))
    with pytest.raises(ConfigError):
        build_problem(parse_config("potential.family = bogus\n"))


def test_cli_audit_default(tmp_path, capsys):
    rc = main(["audit", "--out", str(tmp_path)] + FAST)
    assert rc == 0
    out = capsys.readouterr().out
    assert "verdict: PASS" in out
    assert (tmp_path / "audit.txt").exists()
    assert (tmp_path / "config.resolved").exists()
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["format_version"] == 1


def test_cli_audit_eps_too_large(tmp_path, capsys):
    rc = main(["audit", "--out", str(tmp_path), "--set", "model.eps=0.2"] + FAST)
    assert rc == 1
    out = capsys.readouterr().out
    assert "eps < eps0" in out
    assert "FAIL" in out
    assert "0.2" in out  # offending value reported


def test_cli_audit_ip_chi_violation(tmp_path, capsys):
    rc = main(["audit", "--out", str(tmp_path), "--set", "model.tau=0",
               "--set", "model.chi=10"] + FAST)
    assert rc == 1
    out = capsys.readouterr().out
    assert "ip_chi" in out


def test_cli_unknown_key_is_config_error(tmp_path, capsys):
    rc = main(["audit", "--out", str(tmp_path), "--set", "model.typo=1"])
    assert rc == 2
    assert "unknown key" in capsys.readouterr().err


def test_cli_negative_B_exit_2(tmp_path, capsys):
    rc = main(["verify", "--set", "model.B=-0.5"])
    assert rc == 2
    assert "configuration error" in capsys.readouterr().err


def test_cli_simulate_T0(tmp_path, capsys):
    rc = main(["simulate", "--out", str(tmp_path), "--set", "grid.cells=64",
               "--set", "model.T=0"])
    assert rc == 0
    f = read_field(tmp_path / "phi_00000.nlchf")
    assert f.grid.cells == (64,)
    assert (tmp_path / "diagnostics.csv").exists()
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert "phi_00000.nlchf" in manifest["files"]


def test_cli_simulate_deterministic(tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    for out in (out1, out2):
        rc = main(["simulate", "--out", str(out), "--seed", "3",
                   "--set", "ic.family=random-smoothed"] + FAST)
        assert rc == 0
    assert (out1 / "diagnostics.csv").read_bytes() == (out2 / "diagnostics.csv").read_bytes()
    assert (out1 / "phi_00000.nlchf").read_bytes() == (out2 / "phi_00000.nlchf").read_bytes()
    last1 = sorted(out1.glob("phi_*.nlchf"))[-1]
    last2 = sorted(out2.glob("phi_*.nlchf"))[-1]
    assert last1.read_bytes() == last2.read_bytes()


def test_cli_simulate_gated_on_audit(tmp_path, capsys):
    rc = main(["simulate", "--out", str(tmp_path), "--set", "model.eps=0.2"] + FAST)
    assert rc == 1
    assert (tmp_path / "audit.txt").exists()
    assert not list(tmp_path.glob("*.nlchf"))  # no results without a passing audit


def test_cli_stability_smoke(tmp_path, capsys):
    rc = main([
        "stability", "--out", str(tmp_path),
        "--set", "grid.cells=64",
        "--set", "stability.t=0.02",
        "--set", "stability.taus=0.1,0.05",
        "--set", "model.eta=0",
    ])
    assert rc == 0
    assert (tmp_path / "stability.csv").exists()
    out = capsys.readouterr().out
    assert "lhs/rhs" in out


def test_cli_sweep_smoke(tmp_path, capsys):
    rc = main([
        "sweep-eps", "--out", str(tmp_path),
        "--set", "grid.cells=64",
        "--set", "sweep.values=3e-2,1e-2,3e-3",
        "--set", "sweep.t=0.02",
        "--set", "sweep.dt=1e-3",
        "--set", "model.eta=0",
    ])
    out = capsys.readouterr().out
    assert rc == 0, out
    assert "fitted slope" in out
    assert (tmp_path / "rates.csv").exists()


def test_shipped_configs_audit_clean(tmp_path):
    import pathlib

    cfg_dir = pathlib.Path(__file__).resolve().parents[1] / "configs"
    for cfg in sorted(cfg_dir.glob("*.cfg")):
        rc = main(["audit", "--config", str(cfg), "--out", str(tmp_path / cfg.stem)])
        assert rc == 0, cfg.name


def test_cli_oracle_compare_smoke(tmp_path, capsys):
    rc = main([
        "oracle-compare", "--out", str(tmp_path),
        "--set", "grid.cells=128",
        "--set", "kernel.width=3.0",
        "--set", "kernel.normalization=2.05",
        "--set", "oracle.modes=12",
        "--set", "oracle.t=0.1",
        "--set", "oracle.dt=5e-4",
    ])
    out = capsys.readouterr().out
    assert rc == 0, out
    assert "stepper vs oracle" in out
    assert (tmp_path / "oracle_coefficients.csv").exists()


def test_cli_verify_subcommand(capsys):
    rc = main(["verify", "--set", "grid.cells=64"])
    out = capsys.readouterr().out
    assert rc == 0, out
    assert "all properties hold" in out


def test_cli_file_ic_roundtrip(tmp_path):
    # export snapshots from one run, feed them back as file ICs
    src = tmp_path / "src"
    rc = main(["simulate", "--out", str(src), "--set", "grid.cells=64",
               "--set", "model.T=0"])
    assert rc == 0
    rc = main([
        "audit", "--out", str(tmp_path / "re"),
        "--set", "grid.cells=64",
        "--set", "ic.family=file",
        "--set", f"ic.phi_file={src / 'phi_00000.nlchf'}",
        "--set", f"ic.mu_file={src / 'phi_00000.nlchf'}",
        "--set", f"ic.sigma_file={src / 'sigma_00000.nlchf'}",
    ])
    assert rc == 0
