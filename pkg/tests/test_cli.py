import pytest

from twrbf.bench.records import read_results, read_traces
from twrbf.bin.twrbf_cli import build_parser, main

SMALL = ["--pairs", "1", "--antennas", "2", "--trials", "1", "--seed", "7"]


def test_run_writes_results(tmp_path, capsys):
    out = tmp_path / "results.csv.gz"
    argv = ["maxmin", *SMALL, "--schemes", "maxmin,identity", "--out", str(out)]
    assert main(argv) == 0
    records = read_results(out)
    assert {r.scheme for r in records} == {"maxmin", "identity"}
    printed = capsys.readouterr().out
    assert "min_sinr_ratio" in printed
    assert "identity" in printed


def test_no_out_prints_summary_only(tmp_path, capsys, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(["maxmin", *SMALL, "--schemes", "identity"]) == 0
    assert list(tmp_path.iterdir()) == []
    assert "identity" in capsys.readouterr().out


def test_quiet(capsys):
    assert main(["maxmin", *SMALL, "--schemes", "identity", "-q"]) == 0
    assert capsys.readouterr().out == ""


def test_trace_out(tmp_path):
    trace = tmp_path / "trace.csv"
    argv = ["maxmin", *SMALL, "--schemes", "identity", "--trace-out", str(trace)]
    assert main(argv) == 0
    rows = read_traces(trace)
    assert rows and all(r.algorithm == "dinkelbach" for r in rows)


def test_config_file_with_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("pairs = 1\nantennas = 2\ntrials = 4\nschemes = identity\n")
    out = tmp_path / "r.csv"
    argv = ["maxmin", "--config", str(cfg), "--trials", "2", "--out", str(out)]
    assert main(argv) == 0
    assert {r.trial for r in read_results(out)} == {0, 1}


def test_invalid_config_exits_2(capsys):
    assert main(["maxmin", "--trials", "0"]) == 2
    assert "trials" in capsys.readouterr().err


def test_missing_config_file_exits_2(tmp_path):
    assert main(["maxmin", "--config", str(tmp_path / "nope.cfg")]) == 2


def test_unwritable_out_exits_2(tmp_path):
    out = tmp_path / "missing" / "r.csv"
    assert main(["maxmin", *SMALL, "--schemes", "identity", "--out", str(out)]) == 2


def test_unknown_mode_exits_2():
    with pytest.raises(SystemExit) as exc:
        main(["broadcast"])
    assert exc.value.code == 2


def test_every_mode_has_a_subcommand():
    parser = build_parser()
    for mode in ["maxmin", "powermin", "wsr", "utility", "collab", "mimo", "sweep"]:
        assert parser.parse_args([mode]).mode == mode
