import json
import shutil
import subprocess
import sys

import pytest

from ccsw.cli import Config, main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


class TestConfig:
    def test_defaults(self):
        cfg = Config.load(None)
        assert cfg.maxStates == 20000 and cfg.format == "json"

    def test_file_and_overrides(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"maxStates": 50, "format": "text"}))
        cfg = Config.load(str(path), maxStates=7, format=None)
        assert cfg.maxStates == 7 and cfg.format == "text"

    def test_rejects_unknown_keys(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"colour": "blue"}))
        with pytest.raises(ValueError):
            Config.load(str(path))

    def test_rejects_bad_values(self):
        with pytest.raises(ValueError):
            Config(maxStates=0)
        with pytest.raises(ValueError):
            Config(format="yaml")


class TestParse:
    def test_json(self, capsys):
        code, out, _ = run(capsys, "parse", "corpus:choice_loop")
        assert code == 0
        data = json.loads(out)
        assert data["contexts"]["x"] == ["a", "b"]

    def test_text(self, capsys):
        code, out, _ = run(capsys, "parse", "corpus:omega", "--format", "text")
        assert code == 0 and out.startswith("names a.")

    def test_syntax_error_location(self, capsys, tmp_path):
        bad = tmp_path / "bad.ccs"
        bad.write_text("names a.\n  a!.\n")
        code, _, err = run(capsys, "parse", str(bad))
        assert code == 1
        assert err.startswith(f"{bad}:3:1: expected a process")

    def test_scope_error(self, capsys, tmp_path):
        bad = tmp_path / "bad.ccs"
        bad.write_text("names a. b!.0\n")
        code, _, err = run(capsys, "parse", str(bad))
        assert code == 1 and "unbound" in err

    def test_missing_file(self, capsys):
        code, _, err = run(capsys, "parse", "/nonexistent.ccs")
        assert code == 1 and err.startswith("error:")


class TestTranslate:
    def test_json(self, capsys):
        code, out, _ = run(capsys, "translate", "corpus:omega", "--depth", "3")
        data = json.loads(out)
        assert code == 0 and data["depth"] == 3
        assert data["strategy"]["root"] == "n0"

    def test_modes_agree(self, capsys):
        _, a, _ = run(capsys, "translate", "corpus:choice_loop", "--depth", "4")
        _, b, _ = run(capsys, "translate", "corpus:choice_loop", "--depth", "4", "--mode", "approximant")
        assert json.loads(a)["strategy"] == json.loads(b)["strategy"]

    def test_dot(self, capsys):
        code, out, _ = run(capsys, "translate", "corpus:tick", "--format", "dot")
        assert code == 0 and out.startswith("digraph strategy")


class TestExplore:
    def test_alone(self, capsys):
        code, out, _ = run(capsys, "explore", "corpus:omega")
        assert code == 0 and json.loads(out)["states"]

    def test_with_test_and_dot_file(self, capsys, tmp_path):
        dot = tmp_path / "g.dot"
        code, out, _ = run(capsys, "explore", "corpus:omega_out", "--test", "corpus:test_a_tick",
                           "--dot", str(dot), "--format", "text")
        assert code == 0 and "states" in out
        assert dot.read_text().startswith("digraph world")

    def test_bounds(self, capsys):
        _, out, _ = run(capsys, "explore", "corpus:omega_out", "--test", "corpus:test_a_tick",
                        "--max-states", "2")
        assert json.loads(out)["truncated"] is True


class TestCheck:
    @pytest.mark.parametrize("proc, criterion, code", [
        ("omega", "must", 1),
        ("omega_out", "must", 0),
        ("choice_loop", "fair", 0),
        ("choice_loop", "must", 1),
        ("omega", "fair", 1),
        ("omega_out", "classic-must", 1),
        ("omega_out", "classic-fair", 0),
    ])
    def test_exit_codes(self, capsys, proc, criterion, code):
        got, out, _ = run(capsys, "check", f"corpus:{proc}", "corpus:test_a_tick",
                          "--criterion", criterion)
        assert got == code
        data = json.loads(out)
        assert data["criterion"] == criterion
        assert data["verdict"] == ("pass" if code == 0 else "fail")

    def test_unknown_exit_code(self, capsys):
        got, out, _ = run(capsys, "check", "corpus:fresh_loop", "corpus:test_a_tick", "--max-states", "20")
        assert got == 2 and json.loads(out)["truncated"]

    def test_shared(self, capsys):
        # nothing shared: the test can never fire
        got, _, _ = run(capsys, "check", "corpus:omega_out", "corpus:test_a_tick", "--shared", "")
        assert got == 1


class TestCompare:
    def test_tests_dir(self, capsys, tmp_path):
        (tmp_path / "input.ccs").write_text("names a. a?.tick\n")
        (tmp_path / "silent.ccs").write_text("names a. tick\n")
        code, out, _ = run(capsys, "compare", "corpus:omega", "corpus:omega_out", "--tests", str(tmp_path))
        data = json.loads(out)
        assert code == 0
        assert data["distinguishing"] == ["input"]

    def test_repeated_test_text(self, capsys):
        code, out, _ = run(capsys, "compare", "corpus:omega", "corpus:choice_loop",
                           "--test", "corpus:test_a_tick", "--criterion", "fair", "--format", "text")
        assert code == 0 and "distinguishes" in out

    def test_no_tests(self, capsys):
        code, _, err = run(capsys, "compare", "corpus:omega", "corpus:omega_out")
        assert code == 1 and "no tests" in err


def test_console_script():
    exe = shutil.which("ccsw")
    cmd = [exe] if exe else [sys.executable, "-m", "ccsw.cli"]
    r = subprocess.run(cmd + ["check", "corpus:omega_out", "corpus:test_a_tick"],
                       capture_output=True, text=True)
    assert r.returncode == 0
    assert json.loads(r.stdout)["verdict"] == "pass"
