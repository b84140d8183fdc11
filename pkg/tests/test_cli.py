import json
from pathlib import Path

import pytest

import desk_oracle
from rwtc.checker import check_config
from rwtc.cli import main
from rwtc.ingest import parse_site_file, serialize_config
from rwtc.model import REFERENCE_ENV, RawConfig, to_env_text
from rwtc.schema import load_schema

MAXTASKS = "mapreduce.jobtracker.maxtasks.perjob"


def write(path: Path, values: dict) -> str:
    path.write_text(serialize_config(RawConfig.from_values(values)))
    return str(path)


@pytest.fixture
def defaults_file(tmp_path, schema):
    vals = {n: f.default_raw for n, f in schema.fields.items() if f.default_raw is not None}
    return write(tmp_path / "site.xml", vals)


class TestCheck:
    def test_defaults_pass(self, defaults_file, capsys):
        assert main(["check", defaults_file]) == 0
        assert "PASS" in capsys.readouterr().out

    def test_maxtasks_zero(self, tmp_path, capsys):
        f = write(tmp_path / "mapred-site.xml", {MAXTASKS: "0"})
        assert main(["check", f]) == 1
        lines = capsys.readouterr().out.splitlines()
        assert any(ln.startswith(f"LiftFailure\t{MAXTASKS}") for ln in lines)

    def test_missing_env(self, defaults_file, tmp_path, capsys):
        assert main(["check", defaults_file, "--env", str(tmp_path / "nope.env")]) == 2
        assert "error" in capsys.readouterr().err

    def test_env_file_changes_outcome(self, tmp_path):
        env = tmp_path / "small.env"
        env.write_text(to_env_text(REFERENCE_ENV).replace("max_threads=500", "max_threads=10"))
        f = write(tmp_path / "y.xml", {"yarn.nodemanager.container-manager.thread-count": "20"})
        assert main(["check", f]) == 0
        assert main(["check", f, "--env", str(env)]) == 1

    def test_layering_and_machine_format(self, tmp_path, capsys):
        a = tmp_path / "a.xml"
        a.write_text(
            "<configuration><property><name>io.file.buffer.size</name><value>8192</value>"
            "<final>true</final></property></configuration>"
        )
        b = write(tmp_path / "b.xml", {"io.file.buffer.size": "65537"})
        assert main(["check", str(a), b, "--format", "machine"]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["outcome"] == "pass"
        assert report["counts"]["FinalOverride"] == 1

    def test_malformed_site_file(self, tmp_path):
        p = tmp_path / "bad.xml"
        p.write_text("<configuration>")
        assert main(["check", str(p)]) == 2

    def test_schema_option(self, tmp_path):
        f = write(tmp_path / "d.xml", {"buf": "8192"})
        assert main(["check", f, "--schema", str(desk_oracle.DESK)]) == 0
        assert main(["check", f, "--schema", str(tmp_path / "none.manifest")]) == 2


class TestExplain:
    def test_known(self, capsys):
        assert main(["explain", "io.file.buffer.size"]) == 0
        out = capsys.readouterr().out
        assert "tipe: pos" in out and "property: value mod env.hw_page_size == 0" in out

    @pytest.mark.parametrize("name", ["no.such.field", "io.buffer.size"])
    def test_unknown(self, name, capsys):
        assert main(["explain", name]) == 2
        assert "unknown field" in capsys.readouterr().err

    def test_machine(self, capsys):
        assert main(["explain", MAXTASKS, "--format", "machine"]) == 0
        assert json.loads(capsys.readouterr().out)["none_sentinels"] == ["-1"]


def _snapshot(directory: Path) -> dict[str, bytes]:
    return {p.name: p.read_bytes() for p in sorted(directory.iterdir())}


class TestGenerate:
    def test_byte_identical(self, tmp_path, capsys):
        outs = []
        for run in ("a", "b"):
            assert main(["generate", "--count", "10", "--seed", "7", "--out", str(tmp_path / run)]) == 0
            outs.append((capsys.readouterr().out, _snapshot(tmp_path / run)))
        assert outs[0] == outs[1]
        assert len(outs[0][1]) == 10

    @pytest.mark.parametrize("flag,want", [("--valid-only", True), ("--invalid-only", False)])
    def test_filters(self, tmp_path, schema, flag, want, capsys):
        out = tmp_path / "gen"
        assert main(["generate", "--count", "60", "--seed", "3", "--out", str(out), flag]) == 0
        files = sorted(out.iterdir())
        assert files
        for p in files:
            raw = parse_site_file(p).to_raw_config()
            assert check_config(schema, raw, REFERENCE_ENV).passed is want

    def test_invalid_only_on_desk_grid(self, tmp_path):
        out = tmp_path / "bad"
        argv = ["generate", "--schema", str(desk_oracle.DESK), "--count", "80", "--seed", "1",
                "--out", str(out), "--invalid-only"]
        assert main(argv) == 0
        files = list(out.iterdir())
        assert files
        for p in files:
            assert not desk_oracle.passes(parse_site_file(p).to_raw_config().values())

    def test_set_override_and_bad_usage(self, tmp_path, capsys):
        out = tmp_path / "o"
        assert main(["generate", "--count", "5", "--out", str(out), "--set", f"{MAXTASKS}=0", "--valid-only"]) == 0
        assert "written: 0" in capsys.readouterr().out
        assert main(["generate", "--count", "0", "--out", str(out)]) == 2
        assert main(["generate", "--count", "5", "--out", str(out), "--set", "nonsense"]) == 2
        assert main(["generate", "--count", "5", "--out", str(out), "--set", "no.such=1"]) == 2

    def test_valid_and_invalid_exclusive(self, tmp_path):
        with pytest.raises(SystemExit) as ei:
            main(["generate", "--count", "1", "--out", str(tmp_path), "--valid-only", "--invalid-only"])
        assert ei.value.code == 2


class TestSearch:
    def test_deterministic(self, tmp_path, capsys):
        outs = []
        for run in ("a", "b"):
            argv = ["search", "--count", "120", "--seed", "5", "--profiler", "mock:3", "--out", str(tmp_path / run)]
            assert main(argv) == 0
            outs.append((capsys.readouterr().out, _snapshot(tmp_path / run)))
        assert outs[0] == outs[1]
        assert set(outs[0][1]) == {"summary.txt", "best-site.xml"}

    def test_all_invalid_reports_none(self, tmp_path, capsys):
        argv = ["search", "--count", "5", "--set", f"{MAXTASKS}=0", "--out", str(tmp_path)]
        assert main(argv) == 0
        out = capsys.readouterr().out
        assert "valid: 0" in out and "best_index: none" in out
        assert not (tmp_path / "best-site.xml").exists()

    def test_check_cost_model(self, capsys):
        assert main(["search", "--count", "10", "--check-cost", "0.63"]) == 0
        out = capsys.readouterr().out
        assert "check_time_total_s: 6.300000" in out

    def test_bad_profiler(self):
        assert main(["search", "--count", "1", "--profiler", "hadoop"]) == 2


class TestStats:
    def test_reference(self, capsys):
        argv = ["stats", "--total", "5000", "--invalid", "1293", "--profile-time", "30", "--runs", "3",
                "--check-total", "3150"]
        assert main(argv) == 0
        assert capsys.readouterr().out == "saved_s: 113220\nsaved_fraction: 0.2516\n"

    def test_net_cost(self, capsys):
        argv = ["stats", "--total", "10", "--invalid", "0", "--profile-time", "30", "--runs", "3",
                "--check-total", "5", "--format", "machine"]
        assert main(argv) == 0
        d = json.loads(capsys.readouterr().out)
        assert d["saved_s"] == -5 and d["saved_fraction"] < 0

    def test_all_filtered(self, capsys):
        argv = ["stats", "--total", "100", "--invalid", "100", "--profile-time", "1", "--runs", "1",
                "--check-total", "0"]
        assert main(argv) == 0
        assert capsys.readouterr().out == "saved_s: 100\nsaved_fraction: 1.0000\n"

    def test_zero_total(self):
        argv = ["stats", "--total", "0", "--invalid", "0", "--profile-time", "1", "--runs", "1", "--check-total", "0"]
        assert main(argv) == 2


def test_module_entry_point(defaults_file):
    import subprocess
    import sys

    r = subprocess.run([sys.executable, "-m", "rwtc", "check", defaults_file], capture_output=True, text=True)
    assert r.returncode == 0, r.stderr


def test_schema_env_var(tmp_path, monkeypatch):
    f = write(tmp_path / "d.xml", {"buf": "6144"})
    monkeypatch.setenv("RWTC_SCHEMA", str(desk_oracle.DESK))
    assert main(["check", f]) == 1
    assert load_schema(desk_oracle.DESK).fields["buf"]
