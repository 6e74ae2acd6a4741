import json
import os
import subprocess
import sys

import pytest

from sglab import cli

KINK = {"n": 1, "waves": [{"theta": 0.0}], "phases": [0.0]}
SADDLE = {"n": 2, "waves": [{"p": 0.7071067811865476, "q": 0.7071067811865476},
                            {"p": 0.7071067811865476, "q": -0.7071067811865476}], "phases": [0.0, 0.0]}
CHEAP = "20,0.25;25,0.2"


@pytest.fixture
def write(tmp_path):
    def _write(doc, name="cfg.json"):
        p = tmp_path / name
        p.write_text(doc if isinstance(doc, str) else json.dumps(doc))
        return str(p)
    return _write


def report(capsys):
    return json.loads(capsys.readouterr().out)["report"]


def test_parse_examples(write):
    k, digest = cli.parse_config(write(KINK))
    assert k.n == 1 and k.waves[0].p == 1.0 and len(digest) == 64
    s, _ = cli.parse_config(write(SADDLE))
    assert s.n == 2 and s.phases == (0.0, 0.0)


@pytest.mark.parametrize("doc,code", [
    ({"n": 2, "waves": [{"theta": 0.3}, {"theta": 0.3}], "phases": [0, 0]}, 3),
    ({"n": 1, "waves": [{"p": 0.6, "q": 0.7}], "phases": [0]}, 3),
    ({"n": 2, "waves": [{"theta": 0.3}], "phases": [0]}, 2),
    ({"n": 1, "waves": [{"theta": "x"}], "phases": [0]}, 2),
    ({"n": 1, "waves": [{"theta": 0.1, "p": 1}], "phases": [0]}, 2),
    ({"n": 1, "waves": [{"theta": 0.1}]}, 2),
    ("{not json", 2),
])
def test_config_errors_map_to_exit_codes(write, doc, code):
    assert cli.run_command(["residual", "--config", write(doc), "--points", "10"]) == code


def test_usage_errors():
    assert cli.run_command(["eval"]) == 2
    assert cli.run_command(["frobnicate", "--config", "x"]) == 2
    assert cli.run_command(["eval", "--config", "/nonexistent.json"]) == 2


def test_eval_is_deterministic(write, tmp_path):
    cfg = write(KINK)
    a, b = str(tmp_path / "a.csv"), str(tmp_path / "b.csv")
    assert cli.run_command(["eval", "--config", cfg, "--window", "10", "--h", "0.5", "--out", a]) == 0
    assert cli.run_command(["eval", "--config", cfg, "--window", "10", "--h", "0.5", "--out", b]) == 0
    assert open(a, "rb").read() == open(b, "rb").read()
    lines = open(a).read().splitlines()
    assert lines[0] == "x,y,u" and len(lines) == 1 + 41 * 41
    assert lines[1].startswith("-10,-10,")
    man = json.load(open(a + ".manifest.json"))
    assert man["command"] == "eval" and man["outputs"] == [a]
    assert man["parameters"] == {"window": 10.0, "h": 0.5}


def test_deterministic_reports_are_identical(write, capsys):
    cfg = write(SADDLE)
    outs = []
    for _ in range(2):
        assert cli.run_command(["residual", "--config", cfg, "--points", "200", "--deterministic"]) == 0
        outs.append(capsys.readouterr().out)
    assert outs[0] == outs[1]
    assert json.loads(outs[0])["manifest"]["wall_clock"] is None


def test_scatter_kink(write, capsys):
    assert cli.run_command(["scatter", "--config", write(KINK), "--lambda", "0.5"]) == 0
    rep = report(capsys)
    assert rep["rows"][0]["abs_b"] < 1e-6


def test_scatter_truncation_is_numerical(write):
    assert cli.run_command(["scatter", "--config", write(KINK), "--lambda", "0.5", "--X", "5"]) == 4


def test_residual_failure_exit(write):
    assert cli.run_command(["residual", "--config", write(SADDLE), "--points", "50", "--tol", "1e-30"]) == 1


def test_morse_saddle(write, capsys):
    assert cli.run_command(["morse", "--config", write(SADDLE), "--schedule", CHEAP, "--deterministic"]) == 0
    rep = report(capsys)
    assert rep["morse_index"] == 1 and rep["expected"] == 1


def test_morse_unstable_exit(write, capsys):
    code = cli.run_command(["morse", "--config", write(SADDLE), "--schedule", CHEAP, "--delta", "0.6",
                            "--no-independent"])
    assert code == 4
    assert report(capsys)["morse_index"] == "Unstable"


def test_ends_and_backlund(write, capsys):
    assert cli.run_command(["ends", "--config", write(SADDLE)]) == 0
    assert len(report(capsys)["ends"]) == 4
    assert cli.run_command(["backlund", "--config", write(SADDLE), "--points", "30",
                            "--rapidities", "0.5,-0.3"]) == 0
    rep = report(capsys)
    assert rep["elliptic_max"] <= 1e-8 and rep["hyperbolic_max"] <= 1e-8


def test_kernel_command(write, capsys):
    assert cli.run_command(["kernel", "--config", write(KINK), "--schedule", "20,0.25;20,0.125"]) == 0
    rep = report(capsys)
    assert rep["observed_orders"][0][0] == pytest.approx(2.0, abs=0.2)


def test_verify_all(write, capsys):
    assert cli.run_command(["verify-all", "--config", write(KINK), "--skip-morse", "--deterministic"]) == 0
    rep = report(capsys)
    assert set(rep) == {"residual", "kernel", "backlund", "scatter", "ends"}
    assert all(v["status"] == "pass" for v in rep.values())


def test_threads_env(write, monkeypatch):
    monkeypatch.setenv("SGLAB_THREADS", "1")
    assert cli.run_command(["residual", "--config", write(KINK), "--points", "10"]) == 0
    monkeypatch.setenv("SGLAB_THREADS", "many")
    assert cli.run_command(["residual", "--config", write(KINK), "--points", "10"]) == 2


def test_module_entry_point(write):
    r = subprocess.run([sys.executable, "-m", "sglab", "residual", "--config", write(KINK), "--points", "10"],
                       capture_output=True, text=True)
    assert r.returncode == 0
    assert json.loads(r.stdout)["report"]["passed"]


def test_numpy_backend_flag():
    env = dict(os.environ, SGLAB_DISABLE_NUMBA="1")
    code = "from sglab import kernels; print(kernels.backend())"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True).stdout.strip()
    assert out == "numpy"
