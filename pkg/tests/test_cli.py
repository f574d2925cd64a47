import json
import subprocess
import sys

import numpy as np
import pytest
from conftest import random_model

from qseg.cli import _int_list, main


@pytest.fixture
def small_model(tmp_path):
    path = tmp_path / "model.json"
    path.write_text(random_model(3, u=2.0, seed=60, half_filled=True).to_json())
    return str(path)


def test_int_list_forms():
    assert _int_list("7") == [7]
    assert _int_list("0,5,10") == [0, 5, 10]
    assert _int_list("0:6:3") == [0, 3, 6]


def test_depth_prints_maximum(tmp_path, capsys):
    rc = main(["depth", "--N", "8", "--nup", "4", "--ndown", "4", "--nl", "0", "--ntl", "1", "--out", str(tmp_path)])
    assert rc == 0
    assert capsys.readouterr().out.strip() == "254"
    rep = json.loads((tmp_path / "depth.json").read_text())
    assert rep["d_v"] == rep["d_v_synth"] == 36


def test_usage_errors_exit_2(tmp_path):
    assert main(["depth", "--N", "1", "--out", str(tmp_path)]) == 2
    assert main(["greens", "--bogus"]) == 2
    assert main(["oracle", "--nup", "9", "--out", str(tmp_path)]) == 2


def test_unavailable_reference_is_a_usage_error(tmp_path):
    path = tmp_path / "m4.json"
    path.write_text(random_model(4, seed=61, half_filled=True).to_json())
    # (2, 2) on four sites leaves no admissible reference for Krylov brackets carrying both spins
    argv = ["greens", "--model", str(path), "--nl", "0", "--nk", "0", "--ntl", "0", "--mode", "fidelity",
            "--nw", "3", "--out", str(tmp_path)]
    assert main(argv) == 2


def test_gs_converge_sweep(tmp_path, small_model):
    rc = main(["gs-converge", "--model", small_model, "--nl", "0:2", "--nk", "1", "--dt", "0.3",
               "--nup", "1", "--ndown", "2", "--out", str(tmp_path)])
    assert rc == 0
    rows = (tmp_path / "gs_convergence.csv").read_text().strip().splitlines()
    assert len(rows) == 4
    errs = [float(r.split(",")[7]) for r in rows[1:]]
    assert all(e > -1e-10 for e in errs) and errs[-1] <= errs[0]


def test_greens_matches_oracle(tmp_path, small_model):
    common = ["--model", small_model, "--nup", "1", "--ndown", "2", "--nw", "41", "--wmin", "-4", "--wmax", "4"]
    assert main(["greens", *common, "--dt", "0.3", "--nl", "8", "--nk", "1", "--dtt", "0.3", "--ntl", "12",
                 "--out", str(tmp_path / "q")]) == 0
    assert main(["oracle", *common, "--out", str(tmp_path / "e")]) == 0
    q = np.loadtxt(tmp_path / "q" / "dos.csv", delimiter=",", skiprows=1)
    e = np.loadtxt(tmp_path / "e" / "dos_exact.csv", delimiter=",", skiprows=1)
    assert np.abs(q[:, 1] - e[:, 1]).max() < 1e-6
    kry = json.loads((tmp_path / "q" / "krylov.json").read_text())
    assert kry["trotter_steps"] == 2 * (9 + 12)


def test_manifest_replay_reproduces_outputs(tmp_path, small_model):
    a, b = tmp_path / "a", tmp_path / "b"
    argv = ["gs-converge", "--model", small_model, "--nl", "1", "--nk", "1", "--mode", "shots", "--shots", "200",
            "--seed", "4", "--nup", "1", "--ndown", "2"]
    assert main([*argv, "--out", str(a)]) == 0
    assert main(["gs-converge", "--config", str(a / "manifest.json"), "--out", str(b)]) == 0
    ma = json.loads((a / "manifest.json").read_text())
    mb = json.loads((b / "manifest.json").read_text())
    assert ma["outputs"] == mb["outputs"]
    assert (a / "gs_convergence.csv").read_bytes() == (b / "gs_convergence.csv").read_bytes()


def test_module_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "qseg", "depth", "--N", "4", "--nl", "0", "--ntl", "1",
                          "--out", str(tmp_path)], capture_output=True, text=True, check=True)
    assert out.stdout.strip() == str(2 * ((2 * 4 + 2 - 1) + 3 * 20))
