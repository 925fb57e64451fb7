import io
import json
import subprocess
import sys

import pytest

from ftsafra.cli import main


def run(*argv):
    out = io.StringIO()
    code = main(list(argv), out=out)
    return code, out.getvalue()


def test_run_example1():
    code, text = run("run", "example1-fig1")
    assert code == 0
    assert "announce node=1 (terminated)" in text


def test_run_example2():
    code, text = run("run", "example2-fig2", "-q")
    assert code == 0
    assert "announce node=2" in text


def test_run_buggy_fixture_fails():
    code, text = run("run", "kff21-bug-n2")
    assert code == 1
    assert "VIOLATION active-after-announce at step 6" in text


def test_run_writes_replayable_trace(tmp_path):
    path = tmp_path / "t.jsonl"
    for name, want in (("example2-fig2", 0), ("kff21-bug-n2", 1)):
        assert run("run", name, "--trace", str(path))[0] == want
        code, text = run("replay", str(path))
        assert code == want
        assert "all digests match" in text


def test_replay_divergence_exits_1(tmp_path):
    path = tmp_path / "t.jsonl"
    run("run", "example1-fig1", "--trace", str(path))
    lines = path.read_text().splitlines()
    rec = json.loads(lines[3])
    rec["digest"] = "f" * 16
    lines[3] = json.dumps(rec)
    path.write_text("\n".join(lines))
    code, text = run("replay", str(path))
    assert code == 1 and "diverged at step 3" in text


def test_run_scenario_file(tmp_path):
    sc = {"algorithm": "ft", "n": 3, "m_cap": 3, "mode": "seeded", "seeded": [4, 200], "max_crashes": 1}
    path = tmp_path / "sc.json"
    path.write_text(json.dumps(sc))
    code, text = run("run", str(path), "-q")
    assert code == 0 and "announce node=" in text


@pytest.mark.parametrize(
    "argv, needle",
    [
        (["run", "nope"], "unknown builtin"),
        (["explore", "--alg", "classic", "-n", "1"], "ring size"),
        (["explore", "--alg", "ft", "-n", "2", "--strategy", "highway"], "width"),
    ],
)
def test_input_errors_exit_2(argv, needle, capsys):
    code, _ = run(*argv)
    assert code == 2
    assert needle in capsys.readouterr().err


def test_malformed_and_disabled_scenarios(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert run("run", str(bad))[0] == 2
    assert "not valid JSON" in capsys.readouterr().err
    stuck = tmp_path / "stuck.json"
    stuck.write_text(json.dumps({"algorithm": "classic", "n": 2, "transitions": [{"kind": "fd", "observer": 0, "subject": 1}]}))
    assert run("run", str(stuck))[0] == 2
    assert "step 1" in capsys.readouterr().err


def test_usage_errors_exit_2():
    assert run()[0] == 2
    assert run("explore", "--alg", "quantum", "-n", "2")[0] == 2


def test_explore_fixed_and_buggy(tmp_path):
    code, text = run("explore", "--alg", "ft", "--variant", "fixed", "-n", "2", "-m", "1", "-s", "2", "--crashes", "1")
    assert code == 0 and "no violations" in text
    report = tmp_path / "r.json"
    code, text = run("explore", "--alg", "ft", "--variant", "kff21-buggy", "-n", "2", "-m", "1", "-s", "2",
                     "--crashes", "1", "--report", str(report), "--trace", str(tmp_path / "cex"))
    assert code == 1 and "active-after-announce" in text
    data = json.loads(report.read_text())
    assert data["violation_counts"]["active-after-announce"] > 0
    assert all((tmp_path / "cex").joinpath(p.split("/")[-1]).exists() for p in data["trace_files"])


def test_explore_latency_flag():
    code, text = run("explore", "--alg", "classic", "-n", "3", "--latency")
    assert code == 0 and "detection latency" in text


def test_fixtures_listing():
    code, text = run("fixtures")
    assert code == 0
    assert [ln.split()[0] for ln in text.splitlines()] == ["example1-fig1", "example2-fig2", "kff21-bug-n2"]


def test_module_entry_point():
    p = subprocess.run([sys.executable, "-m", "ftsafra", "run", "example1-fig1", "-q"],
                       capture_output=True, text=True)
    assert p.returncode == 0 and "announce node=1" in p.stdout
