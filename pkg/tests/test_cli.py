import subprocess
import sys as _sys
from pathlib import Path

import numpy as np
import pytest

from spinsim.cli import main, read_state_file
from spinsim.hamiltonian import alanine, render_system
from spinsim.measure import read_fid

DATA = Path(__file__).resolve().parents[1] / "demos" / "data"


@pytest.fixture
def alanine_file(tmp_path):
    path = tmp_path / "alanine.sys"
    path.write_text(render_system(alanine()))
    return path


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_simulate_then_spectrum(tmp_path, alanine_file, capsys):
    prog = write(tmp_path, "fid.pp", "pulse all 90 y\nacquire 131072 3.0517578125e-05\n")
    out = tmp_path / "run"
    assert main(["simulate", str(alanine_file), str(prog), "-o", str(out)]) == 0
    printed = capsys.readouterr().out.split()
    assert printed == [str(tmp_path / "run.fid1.csv"), str(tmp_path / "run.state.txt")]
    first = (tmp_path / "run.fid1.csv").read_bytes()
    assert main(["simulate", str(alanine_file), str(prog), "-o", str(out)]) == 0
    assert (tmp_path / "run.fid1.csv").read_bytes() == first  # deterministic
    capsys.readouterr()
    assert main(["spectrum", str(tmp_path / "run.fid1.csv"), "--zerofill", "262144", "--lb", "0.5", "--threshold", "0.3", "-o", str(tmp_path / "spec.csv")]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 12
    assert (tmp_path / "spec.csv").exists()


def test_simulate_writes_final_state(tmp_path, alanine_file, capsys):
    prog = write(tmp_path, "p.pp", "pulse a 90 y\n")
    assert main(["simulate", str(alanine_file), str(prog), "--epsilon", "0.001"]) == 0
    state = read_state_file(tmp_path / "p.state.txt", 3)
    assert state[0, 0] == pytest.approx(1 / 8 + 0.002)  # b and c still along z
    from spinsim.core import expand_product_basis

    terms = expand_product_basis(state)
    assert terms["X11"] == pytest.approx(0.001)


def test_simulate_with_kite_and_crusher(tmp_path, alanine_file):
    prog = write(tmp_path, "p.pp", "pulse all 90 y\ncrush\nacquire 16 1e-4\n")
    assert main(["simulate", str(alanine_file), str(prog), "--kite-rate", "2", "--crusher", "0.5,1e-3,2e-9,0.01"]) == 0
    fid = read_fid(tmp_path / "p.fid1.csv")
    assert len(fid) == 16


def test_pseudo_pure_initial_state(tmp_path, alanine_file):
    prog = write(tmp_path, "p.pp", "delay 0.001\n")
    assert main(["simulate", str(alanine_file), str(prog), "--state", "pseudo-pure:001", "--epsilon", "0.1"]) == 0
    state = read_state_file(tmp_path / "p.state.txt", 3)
    assert state[1, 1].real == pytest.approx(0.9 / 8 + 0.1)


def test_state_file_input(tmp_path, alanine_file):
    st = write(tmp_path, "in.txt", "# string re im\n111 0.125\nX11 0.01 0\n")
    prog = write(tmp_path, "p.pp", "pulse a 180 x\n")
    assert main(["simulate", str(alanine_file), str(prog), "--state", str(st)]) == 0
    from spinsim.core import expand_product_basis

    terms = expand_product_basis(read_state_file(tmp_path / "p.state.txt", 3))
    assert terms["X11"] == pytest.approx(0.01)
    np.save(tmp_path / "rho.npy", np.eye(8) / 8)
    assert main(["simulate", str(alanine_file), str(prog), "--state", str(tmp_path / "rho.npy")]) == 0


def test_aht_command(tmp_path, capsys):
    csv_path = tmp_path / "r.csv"
    assert main(["aht", str(DATA / "alanine.sys"), str(DATA / "decouple.pp"), "--csv", str(csv_path)]) == 0
    out = capsys.readouterr().out
    assert "cyclic: yes" in out and "ZZ1" in out
    assert csv_path.read_text().startswith("block,duration_s,term,coefficient")
    assert main(["aht", str(DATA / "proton_pair.sys"), str(DATA / "wahuha.pp"), "--order", "0"]) == 0
    assert "ZZ" in capsys.readouterr().out


def test_tomo_command(tmp_path, alanine_file, capsys):
    out = tmp_path / "rho.txt"
    assert main(["tomo", str(alanine_file), "--state", "thermal", "--epsilon", "0.01", "-o", str(out)]) == 0
    lines = dict(line.split() for line in capsys.readouterr().out.strip().splitlines())
    assert set(lines) == {"111", "Z11", "1Z1", "11Z"}
    assert float(lines["Z11"]) == pytest.approx(0.01, abs=1e-9)
    assert out.exists()


def test_seq_export(tmp_path, capsys):
    assert main(["seq", "export", "noop"]) == 0
    text = capsys.readouterr().out
    assert text.count("pulse") == 4
    assert main(["seq", "export", "cnot", "-o", str(tmp_path / "c.pp")]) == 0
    assert "zrot a -90.0" in (tmp_path / "c.pp").read_text()


def test_verify_exit_codes(capsys):
    assert main(["verify", "--only", "kite", "cnot"]) == 0
    out = capsys.readouterr().out
    assert "PASS" in out and "2/2 passed" in out
    assert main(["verify", "--only", "cnot", "--perturb-j", "2"]) == 1
    assert "FAIL" in capsys.readouterr().out


@pytest.mark.parametrize(
    "files, args, fragment",
    [
        ({"m.sys": "[j]\na b 1\n"}, ["simulate", "m.sys", "p.pp"], "m.sys: missing [spins] section"),
        ({"m.sys": "[spins]\na 13C x\n"}, ["simulate", "m.sys", "p.pp"], "m.sys:2: malformed number"),
        ({"q.pp": "pulse a 90 w\n"}, ["simulate", "ALA", "q.pp"], "q.pp:1:12: axis"),
        ({"q.pp": "pulse z 90 x\n"}, ["simulate", "ALA", "q.pp"], "unresolved label 'z'"),
        ({}, ["simulate", "ALA", "p.pp", "--state", "pseudo-pure:01"], "3 bits"),
        ({}, ["simulate", "ALA", "missing.pp"], "cannot read file"),
        ({"s.txt": "XX 1\n"}, ["simulate", "ALA", "p.pp", "--state", "s.txt"], "s.txt:1:"),
        ({}, ["simulate", "ALA", "p.pp", "--crusher", "1,2"], "--crusher"),
    ],
)
def test_bad_input_exit_2(tmp_path, alanine_file, capsys, monkeypatch, files, args, fragment):
    monkeypatch.chdir(tmp_path)
    write(tmp_path, "p.pp", "delay 0.001\n")
    for name, text in files.items():
        write(tmp_path, name, text)
    args = [str(alanine_file) if a == "ALA" else a for a in args]
    assert main(args) == 2
    err = capsys.readouterr().err
    assert err.startswith("spinsim: error: ")
    assert fragment in err


def test_module_entry_point():
    res = subprocess.run([_sys.executable, "-m", "spinsim", "seq", "export", "wahuha"], capture_output=True, text=True)
    assert res.returncode == 0
    assert res.stdout.count("delay") == 5
