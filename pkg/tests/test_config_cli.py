import os
import subprocess
import sys

import pytest

from birkhoff_nlw.cli import COMMANDS, exit_code_for, load_config, main
from birkhoff_nlw.config import VALID_KEYS, RunConfig, parse_config, serialize_config
from birkhoff_nlw.errors import (
    BirkhoffError,
    BlowUpError,
    ConfigError,
    IntegrationError,
    NearResonanceError,
)

FAST = {
    "expand": ["K=4", "r=4"],
    "resonance-scan": ["r=3", "scan_N=2,3,4", "scan_conditions=H1,H3"],
    "normal-form": ["K=6", "r=4", "N=2"],
    "verify-nf": ["K=6", "r=3", "N=2", "samples=2", "radii=0.01,0.005"],
    "simulate": ["K=8", "T=0.5", "dt=0.05", "stride=2"],
    "drift-study": ["K=8", "dt=0.05", "epsilons=0.2,0.1,0.05"],
}


def _run(tmp_path, command, sets, name="out"):
    out = tmp_path / name
    argv = [command, "-o", str(out)]
    for s in sets:
        argv += ["--set", s]
    return main(argv), out


def test_defaults():
    cfg = parse_config("")
    assert cfg == RunConfig()
    assert cfg.d == 1 and cfg.K == 16 and cfg.r == 3 and cfg.s == 2.0 and cfg.s0 == 1.0
    assert cfg.threshold(0.5) == pytest.approx(0.5**-3)
    assert cfg.threshold(0.1) == 16
    assert cfg.horizon(0.05) == pytest.approx(20.0)
    assert cfg.replace(long_run=True).horizon(0.1) == pytest.approx(0.1**-1.5)


def test_hypothesis_violations_are_named():
    with pytest.raises(ConfigError, match="s0 > d/2"):
        parse_config("s0 = 0.4")
    with pytest.raises(ConfigError, match="s > s0"):
        parse_config("s = 1.0\ns0 = 1.0")
    with pytest.raises(ConfigError, match="m > 0"):
        parse_config("m = 0")
    with pytest.raises(ConfigError, match="N <= K"):
        parse_config("N = 20")


def test_unknown_key_lists_valid_keys():
    with pytest.raises(ConfigError) as info:
        parse_config("mass = 2")
    for key in VALID_KEYS:
        assert key in str(info.value)


def test_bad_values():
    with pytest.raises(ConfigError):
        parse_config("d = two")
    with pytest.raises(ConfigError):
        parse_config("no equals sign")
    with pytest.raises(ConfigError):
        parse_config("f_coeffs = 2:x")
    with pytest.raises(ConfigError):
        load_config(None, ["K"])


def test_serialize_round_trip():
    text = "d = 2\nm = 0.5\nK = 6\nN = 3\ns = 3\ns0 = 1.5\nf_coeffs = 2:1.0,3:-0.25\nradii = 0.01,0.002\nT = none\n"
    cfg = parse_config(text, seed="7", long_run="yes")
    again = parse_config(serialize_config(cfg))
    assert again == cfg
    assert serialize_config(again) == serialize_config(cfg)
    assert [line.split(" = ")[0] for line in serialize_config(cfg).splitlines()] == list(VALID_KEYS)


def test_comments_and_overrides(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# comment\nK = 8  # trailing\nepsilon = 0.1\n")
    cfg = load_config(str(path), ["epsilon=0.2"])
    assert cfg.K == 8 and cfg.epsilon == 0.2
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "missing.cfg"))


def test_exit_code_mapping():
    assert exit_code_for(ConfigError("x")) == 2
    assert exit_code_for(NearResonanceError("x", key=(), divisor=0.0)) == 3
    assert exit_code_for(IntegrationError("x")) == 4
    assert exit_code_for(BlowUpError("x", time=1.0)) == 5
    assert exit_code_for(BirkhoffError("x")) == 1


@pytest.mark.parametrize("command", COMMANDS)
def test_every_command_runs(tmp_path, command):
    code, out = _run(tmp_path, command, FAST[command])
    assert code == 0
    produced = sorted(os.listdir(out))
    assert produced and all(p.endswith(".meta") or p + ".meta" in produced for p in produced)


@pytest.mark.parametrize("command", COMMANDS)
def test_artifacts_are_deterministic(tmp_path, command):
    c1, out1 = _run(tmp_path, command, FAST[command], "a")
    c2, out2 = _run(tmp_path, command, FAST[command], "b")
    assert c1 == c2 == 0
    names = sorted(p for p in os.listdir(out1) if not p.endswith(".meta"))
    assert names == sorted(p for p in os.listdir(out2) if not p.endswith(".meta"))
    for name in names:
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


def test_sidecar_echoes_config(tmp_path):
    code, out = _run(tmp_path, "normal-form", FAST["normal-form"])
    assert code == 0
    meta = (out / "normal_form.txt.meta").read_text()
    keys = {line.split(" = ")[0] for line in meta.splitlines()}
    assert set(VALID_KEYS) <= keys
    assert {"command", "version", "backend", "started", "finished"} <= keys
    cfg_lines = "\n".join(meta.splitlines()[-len(VALID_KEYS):]) + "\n"
    assert parse_config(cfg_lines).K == 6


def test_config_error_exit(tmp_path, capsys):
    code, _ = _run(tmp_path, "simulate", ["s0=0.4"])
    assert code == 2
    assert "s0 > d/2" in capsys.readouterr().err


def test_near_resonance_exit_from_floor(tmp_path):
    code, _ = _run(tmp_path, "normal-form", ["K=6", "r=3", "N=2", "divisor_floor=10"])
    assert code == 3


def test_near_resonance_exit_from_tiny_mass(tmp_path):
    code, _ = _run(tmp_path, "normal-form", ["K=6", "r=3", "N=2", "m=1e-12"])
    assert code == 3


def test_blow_up_exit(tmp_path):
    code, out = _run(tmp_path, "simulate", ["K=8", "epsilon=0.3", "T=5", "blowup_factor=1.000001"])
    assert code == 5
    assert (out / "diagnostics.csv").exists()


def test_normal_form_needs_cubic_degree(tmp_path):
    code, _ = _run(tmp_path, "normal-form", ["r=2"])
    assert code == 2


def test_expand_zero_nonlinearity(tmp_path):
    code, out = _run(tmp_path, "expand", ["f_coeffs=", "K=4", "r=4"])
    assert code == 0
    assert (out / "expansion.txt").read_text() == ""


def test_expand_file_parses(tmp_path):
    from birkhoff_nlw.polynomial import load_polynomial, taylor_expand_nlw, NonlinearityF

    code, out = _run(tmp_path, "expand", ["K=4", "r=4"])
    assert code == 0
    P = load_polynomial((out / "expansion.txt").read_text())
    ref = taylor_expand_nlw(NonlinearityF({2: 1.0}), 4, 4, 1.0)
    for m in (3, 4):
        assert P[m].terms == ref[m].terms


def test_console_script_help():
    out = subprocess.run(
        [sys.executable, "-m", "birkhoff_nlw.cli", "--help"], capture_output=True, text=True, check=True
    )
    for cmd in COMMANDS:
        assert cmd in out.stdout
