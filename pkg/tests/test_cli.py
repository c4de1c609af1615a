import json
import shutil
import subprocess

import pytest

from balllab.cli import run


def write(path, obj):
    path.write_text(obj if isinstance(obj, str) else json.dumps(obj))
    return str(path)


def test_reproducing_identity_passes(capsys):
    assert run(["ops", "verify", "--identity", "reproducing", "--trials", "50", "--seed", "7"]) == 0
    assert json.loads(capsys.readouterr().out)["passed"] is True


@pytest.mark.parametrize("argv", [
    ["--corrupt", "eigenvalue", "ops", "verify", "--identity", "semigroup"],
    ["ops", "verify", "--identity", "bijective", "--corrupt", "coefficient"],
])
def test_corruption_fails_verification(argv, capsys):
    assert run(argv) == 1


def test_malformed_measure_exits_2(tmp_path):
    assert run(["potentials", "wolff", "--measure", write(tmp_path / "m.json", "{not json")]) == 2
    assert run(["potentials", "wolff", "--measure", write(tmp_path / "m2.json", {"atoms": 3})]) == 2
    assert run(["potentials", "wolff", "--measure", str(tmp_path / "missing.json")]) == 2


def test_bad_parameters_exit_2(tmp_path):
    m = write(tmp_path / "m.json", {"atoms": [{"point": [1, 0, 0, 0], "mass": 1}]})
    assert run(["potentials", "wolff", "--measure", m, "--p", "0.5"]) == 2
    assert run(["suite", "nonsense"]) == 2
    assert run(["no-such-command"]) == 2
    assert run(["multiplier", "certify", "--g", write(tmp_path / "g.json", {"n": 2}), "--family", "0:2"]) == 2


def test_reports_are_deterministic(tmp_path):
    m = write(tmp_path / "m.json", {"atoms": [{"point": [1, 0, 0, 0], "mass": 1},
                                              {"point": [0, 0, 0.6, 0.8], "mass": 0.5}]})
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for out in (a, b):
        assert run(["--seed", "3", "potentials", "wolff", "--measure", m, "--out", str(out)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_capacity_solve_then_verify(tmp_path):
    E = write(tmp_path / "E.json", {"caps": [{"center": [1, 0, 0, 0], "radius": 0.5}]})
    params = write(tmp_path / "p.json", {"s": 0.5, "p": 2})
    sol = tmp_path / "sol.json"
    assert run(["capacity", "solve", "--set", E, "--params", params, "--order", "8", "--out", str(sol)]) == 0
    data = json.loads(sol.read_text())
    assert data["duality_gap"] <= 1e-2
    assert run(["capacity", "verify", "--solution", str(sol)]) == 0
    broken = write(tmp_path / "bad.json", {"params": {}})
    assert run(["capacity", "verify", "--solution", broken]) == 2


def test_capacity_rejects_bad_set(tmp_path):
    assert run(["capacity", "solve", "--set", write(tmp_path / "E.json", {"oops": 1}), "--order", "8"]) == 2


def test_multiplier_certify_polynomial(tmp_path, capsys):
    g = write(tmp_path / "g.json", {"n": 2, "terms": [{"alpha": [0, 0], "re": "1"}]})
    assert run(["multiplier", "certify", "--g", g, "--family", "0:3"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["multiplier"]["sup"] == pytest.approx(1.0)


def test_exact_suite_small_scale(capsys):
    assert run(["suite", "exact", "--scale", "0.1"]) == 0


@pytest.mark.skipif(shutil.which("balllab") is None, reason="console script not installed")
def test_console_script():
    proc = subprocess.run(["balllab", "ops", "verify", "--identity", "semigroup"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["passed"] is True
