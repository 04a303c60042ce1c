import logging

import pandas as pd
import pytest
import yaml

from txreach.cli import main as cli_main
from txreach.cli.commands.bench import BENCH_COLUMNS, bench_size, parse_sizes
from txreach.cli.commands.verify import parse_pairs
from txreach.cli.middleware import timed
from txreach.cli.router import build_parser, commands_metadata
from txreach.common.errors import FormatError
from txreach.common.formats import parse_instance
from txreach.settings import app_settings

from .conftest import FIXTURE_A_TEXT


@pytest.fixture
def run(monkeypatch):
    # leave the logging setup of the test session alone
    monkeypatch.setattr(cli_main, "setup_logging", lambda *args, **kwargs: None)
    return cli_main.main


@pytest.fixture
def instance_file(tmp_path):
    path = tmp_path / "a.txt"
    path.write_text(FIXTURE_A_TEXT)
    return path


def test_parser():
    parser = build_parser()
    args = parser.parse_args(["gen", "3"])
    assert args.command == "gen"
    assert args.handler.__name__ == "run"
    assert [meta["name"] for meta in commands_metadata] == ["gen", "build", "query", "verify", "bench"]
    with pytest.raises(SystemExit):
        parser.parse_args([])


def test_packaged_logging_config():
    config = yaml.safe_load(cli_main.DEFAULT_LOG_CONFIG.read_text())
    assert config["version"] == 1
    assert "txreach.timing" in config["loggers"]


def test_gen(run, tmp_path, capsys):
    out = tmp_path / "gen.txt"
    assert run(["gen", "5", "--seed", "3", "-o", str(out)]) == 0
    assert parse_instance(out.read_text()).n == 5

    assert run(["gen", "4", "--distribution", "bounded-psi(2)"]) == 0
    assert capsys.readouterr().out.splitlines()[0] == "4"


@pytest.mark.parametrize(
    "kind, queries, expected",
    [
        ("discrete", "D 0 2\nD 2 0\n", "0\n1\n"),
        ("grid", "D 0 2\nD 2 0\nD 1 1\n", "0\n1\n1\n"),
        ("continuous", "C 1 2 0\nC 0 3.5 0\nD 2 0\n", "1\n0\n1\n"),
    ],
)
def test_build_and_query(run, tmp_path, instance_file, kind, queries, expected):
    oracle = tmp_path / f"{kind}.txro"
    query_file = tmp_path / "queries.txt"
    query_file.write_text(queries)
    answers = tmp_path / "answers.txt"

    assert run(["build", str(instance_file), "--oracle", kind, "-o", str(oracle)]) == 0
    assert oracle.read_bytes()[:4] == b"TXRO"
    assert run(["query", str(oracle), str(instance_file), str(query_file), "-o", str(answers)]) == 0
    assert answers.read_text() == expected
    assert run(["query", str(oracle), str(instance_file), str(query_file), "--workers", "2", "-o", str(answers)]) == 0
    assert answers.read_text() == expected


def test_verify(run, instance_file, tmp_path, capsys):
    report = tmp_path / "report.csv"
    assert run(["verify", str(instance_file), "--oracle", "continuous", "--report", str(report)]) == 0
    assert capsys.readouterr().out == "0 mismatches\n"
    assert pd.read_csv(report).empty

    generated = tmp_path / "gen.txt"
    assert run(["gen", "80", "--distribution", "thick-adversarial", "-o", str(generated)]) == 0
    assert run(["verify", str(generated), "--pairs", "sample", "200"]) == 0
    assert capsys.readouterr().out == "0 mismatches\n"


def test_parse_pairs():
    assert parse_pairs(["all"]) is None
    assert parse_pairs(["sample", "50"]) == 50
    for bad in (["some"], ["sample"], ["sample", "x"], ["all", "3"]):
        with pytest.raises(FormatError):
            parse_pairs(bad)


def test_bench(run, tmp_path):
    out = tmp_path / "bench.csv"
    assert run(["bench", "--sizes", "20,40", "--queries", "10", "-o", str(out)]) == 0
    df = pd.read_csv(out)
    assert list(df.columns) == BENCH_COLUMNS
    assert df["n"].tolist() == [20, 40]
    assert (df["bytes"] > 0).all()


def test_bench_reports_large_crossing_constant(monkeypatch, caplog):
    monkeypatch.setattr(app_settings, "septree_leaf_size", 2)
    monkeypatch.setattr(app_settings, "crossing_constant_warn", -1.0)
    with caplog.at_level(logging.INFO):
        row = bench_size(80, "grid", distribution="uniform", seed=1, repeats=1, queries=5, k=None)
    assert row["n"] == 80
    fits = [r for r in caplog.records if "crossings fit" in r.getMessage()]
    assert any(r.levelno == logging.WARNING and r.name == "txreach.common.septree" for r in fits)
    assert any(r.levelno == logging.INFO and r.name == "txreach.cli.commands.bench" for r in fits)


def test_parse_sizes():
    assert parse_sizes("10,20, 40") == [10, 20, 40]
    with pytest.raises(FormatError):
        parse_sizes("a,b")
    with pytest.raises(FormatError):
        parse_sizes("")


def test_usage_errors(run, tmp_path, instance_file, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("3\n0 0 1\n")
    assert run(["build", str(bad), "-o", str(tmp_path / "x.txro")]) == 2
    assert capsys.readouterr().err.startswith("txreach build:")

    oracle = tmp_path / "d.txro"
    assert run(["build", str(instance_file), "-o", str(oracle)]) == 0
    queries = tmp_path / "q.txt"
    queries.write_text("C 0 1 1\n")
    assert run(["query", str(oracle), str(instance_file), str(queries)]) == 2

    other = tmp_path / "other.txt"
    other.write_text("2\n0 0 1\n5 0 1\n")
    queries.write_text("D 0 1\n")
    assert run(["query", str(oracle), str(other), str(queries)]) == 2
    assert run(["query", str(tmp_path / "missing.txro"), str(instance_file), str(queries)]) == 2
    assert run(["verify", str(instance_file), "--pairs", "some"]) == 2

    with pytest.raises(SystemExit) as exit_info:
        run(["bench", "--sizes", "a,b"])
    assert exit_info.value.code == 2


def test_timed(caplog):
    def handler(value):
        return value

    caplog.set_level(logging.INFO, logger="txreach.timing")
    wrapped = timed("bench", handler)
    assert wrapped(5) == 5
    assert wrapped.__name__ == "handler"
    records = [r for r in caplog.records if r.name == "txreach.timing"]
    assert records[-1].getMessage() == "done"
    assert records[-1].command == "bench"
    assert float(records[-1].elapsed) >= 0
