import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from nlsmulti import cli
from nlsmulti.evolve import read_snapshot

LAMBDA0 = 2.9050883778


def run(tmp_path, command, text=None, name="out", extra=()):
    argv = [command, "--out", str(tmp_path / name)]
    if text is not None:
        p = tmp_path / f"{name}.yaml"
        p.write_text(text)
        argv += ["--config", str(p)]
    code = cli.main(argv + list(extra))
    return code, tmp_path / name


def summary(out):
    return (out / "summary.txt").read_text()


def value(out, key):
    for line in summary(out).splitlines():
        if line.startswith(key + " = "):
            return line.split(" = ", 1)[1]
    raise KeyError(key)


def test_spectrum_default_matches_pinned_lambda0(tmp_path):
    code, out = run(tmp_path, "spectrum")
    assert code == 0
    assert abs(float(value(out, "lambda0")) - LAMBDA0) <= 1e-6 * LAMBDA0
    rows = list(csv.reader(open(out / "eigenpair.csv")))
    assert rows[0] == ["x", "re_z1", "im_z1", "re_z2", "im_z2"]
    assert len(rows) == 2049
    meta = json.loads((out / "metadata.json").read_text())
    assert meta["status"] == 0 and "eigenpair.csv" in meta["files"]


def test_spectrum_coarse_grid_fails(tmp_path, capsys):
    code, out = run(tmp_path, "spectrum", "grid: {L: 40, N: 64}\n")
    assert code == 3
    assert "SpectralError" in capsys.readouterr().err
    assert "exit code = 3" in summary(out)


def test_spectrum_wrong_reference_is_verifier_failure(tmp_path):
    code, _ = run(tmp_path, "spectrum", "spectrum: {lambda0_reference: 2.9}\n")
    assert code == 4


def test_simulate_exact_soliton(tmp_path):
    code, out = run(tmp_path, "simulate", "integrator: {dt: 1.0e-4, t_end: 2.0, snapshot_every: 1.0}\n")
    assert code == 0
    rows = np.loadtxt(out / "modulation.csv", delimiter=",", skiprows=1)
    assert np.max(np.abs(rows[:, 5:9])) <= 1e-6
    psi, g, t = read_snapshot(out / "snapshot_00002.bin")
    assert t == pytest.approx(2.0) and g.N == 2048


def test_simulate_two_solitons_conserve_mass(tmp_path):
    text = """grid: {L: 80, N: 2048}
integrator: {dt: 1.0e-3, t_end: 10.0, record_every: 0.5}
solitons:
  - {v: 0.2, y: 20, alpha: 0.5, gamma: 0.0}
  - {v: -0.2, y: -20, alpha: 0.5, gamma: 1.0}
"""
    code, out = run(tmp_path, "simulate", text)
    assert code == 0
    assert float(value(out, "mass drift")) <= 1e-9
    rows = list(csv.reader(open(out / "trajectory.csv")))
    assert float(rows[-1][0]) == 10.0


def test_simulate_unstable_push_blows_up(tmp_path, capsys):
    code, out = run(tmp_path, "simulate", "perturbation: {shape: unstable, amplitude: 1.0e-3}\n"
                                          "integrator: {t_end: 20}\n")
    assert code == 3
    assert "BlowUpError" in capsys.readouterr().err
    line = [s for s in summary(out).splitlines() if s.startswith("blow-up at t = ")][0]
    assert 0 < float(line.split()[4].rstrip(":")) < 20


def test_bad_config_exit_code(tmp_path, capsys):
    code, _ = run(tmp_path, "simulate", "integrator: {dt: -1}\n")
    assert code == 2
    assert "integrator/dt" in capsys.readouterr().err
    assert cli.main(["simulate", "--config", str(tmp_path / "none.yaml")]) == 2
    assert cli.main(["simulate", "--seed", str(2 ** 64), "--out", str(tmp_path / "x")]) == 2
    assert cli.main(["simulate", "--threads", "0", "--out", str(tmp_path / "x")]) == 2


def test_outputs_deterministic(tmp_path):
    text = "seed: 99\nperturbation: {shape: random, amplitude: 1.0e-3}\nintegrator: {t_end: 0.3}\n"
    _, a = run(tmp_path, "simulate", text, "a")
    _, b = run(tmp_path, "simulate", text, "b")
    _, c = run(tmp_path, "simulate", text, "c", ["--seed", "100"])
    for name in ("trajectory.csv", "modulation.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    assert (a / "trajectory.csv").read_bytes() != (c / "trajectory.csv").read_bytes()


def test_written_config_roundtrips(tmp_path):
    code, out = run(tmp_path, "simulate", "integrator: {t_end: 0.1}\nseed: 5\n")
    assert code == 0
    code2, out2 = run(tmp_path, "simulate", (out / "config.yaml").read_text(), "again")
    assert code2 == 0
    text1 = (out / "config.yaml").read_text().replace(str(out), "X")
    text2 = (out2 / "config.yaml").read_text().replace(str(out2), "X")
    assert text1 == text2


def test_verify_lemma_suite_passes(tmp_path):
    code, out = run(tmp_path, "verify")
    assert code == 0
    verdicts = list(csv.reader(open(out / "verdicts.csv")))[1:]
    assert len(verdicts) >= 15 and all(v[1] == "True" for v in verdicts)


def test_verify_tampered_tolerance_fails(tmp_path, capsys):
    code, out = run(tmp_path, "verify", "verify: {tolerances: {interactt_tail_growth: 1.0e-30}}\n")
    assert code == 4
    assert "failed verifiers: interactt" in capsys.readouterr().err
    assert "FAIL interactt" in summary(out)


def test_verify_unknown_tolerance_is_config_error(tmp_path):
    code, _ = run(tmp_path, "verify", "verify: {tolerances: {bogus: 1.0}}\n")
    assert code == 2


def test_verify_interaction_rate(tmp_path):
    code, out = run(tmp_path, "verify", "verify: {verifiers: [interaction]}\n")
    assert code == 0
    assert "PASS interaction_scan" in summary(out)


@pytest.mark.slow
def test_shoot_zero_data(tmp_path):
    code, out = run(tmp_path, "shoot", "shooting: {T: 6.0}\n")
    assert code == 0
    # r0 = 0: h* is the O(dt^2) offset of the time-discrete wave, not exactly 0
    h = float(value(out, "h*").strip("[]"))
    assert abs(h) < 1e-4
    assert value(out, "success") == "True"
    assert (out / "shot_history.csv").exists()


def test_console_script_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "nlsmulti.cli", "spectrum", "--out", str(tmp_path / "s"),
                          "--config", str(tmp_path / "missing.yaml")], capture_output=True, text=True)
    assert res.returncode == 2
