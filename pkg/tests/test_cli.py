"""CLI behaviour: sweeps, CSV contract, exit codes."""

import io
import json

import pytest

from qkd_keyrate import cli
from qkd_keyrate.cli import CSV_COLUMNS, main, run_sweep, write_csv
from qkd_keyrate.config import parse_config

FAST = """\
[run]
n_total = 1e12
[sweep]
start_km = 0
stop_km = 20
step_km = 10
[optimizer]
grid_points = 2
seed = 3
workers = 1
"""


@pytest.fixture(scope="module")
def fast_rows():
    return run_sweep(parse_config(FAST))


def test_sweep_rows(fast_rows):
    assert [r["distance_km"] for r in fast_rows] == [0.0, 10.0, 20.0]
    for row in fast_rows:
        assert set(row) == set(CSV_COLUMNS)
        assert row["rate"] > 0.0
        assert row["aborted"] is False
        assert row["abort_reason"] is None
        assert 0.0 < row["p_z"] < 1.0
    rates = [r["rate"] for r in fast_rows]
    assert rates == sorted(rates, reverse=True)


def test_csv_contract(fast_rows):
    buf = io.StringIO()
    write_csv(fast_rows, buf)
    lines = buf.getvalue().split("\n")
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert lines[-1] == ""  # trailing newline, nothing after
    first = lines[1].split(",")
    assert first[0] == format(0.0, ".12e")
    assert first[CSV_COLUMNS.index("aborted")] == "false"
    assert first[CSV_COLUMNS.index("abort_reason")] == ""
    assert first[CSV_COLUMNS.index("ell")].isdigit()
    # every float field carries 13 significant digits
    for col in ("rate", "m0_lower", "p_z"):
        cell = first[CSV_COLUMNS.index(col)]
        mantissa = cell.split("e")[0].replace("-", "").replace(".", "")
        assert len(mantissa) == 13


def test_sweep_deterministic(fast_rows):
    again = run_sweep(parse_config(FAST))
    a, b = io.StringIO(), io.StringIO()
    write_csv(fast_rows, a)
    write_csv(again, b)
    assert a.getvalue() == b.getvalue()


def test_sweep_command_writes_file(tmp_path, capsys):
    ini = tmp_path / "run.ini"
    ini.write_text(FAST)
    out = tmp_path / "rates.csv"
    code = main(["sweep", "--config", str(ini), "--out", str(out)])
    assert code == 0
    text = out.read_text()
    assert text.startswith(",".join(CSV_COLUMNS))
    assert "wrote 3 rows" in capsys.readouterr().out


def test_asymptotic_flag_lifts_rates(tmp_path):
    ini = tmp_path / "run.ini"
    ini.write_text(FAST)
    out_f = tmp_path / "fin.csv"
    out_a = tmp_path / "asym.csv"
    assert main(["sweep", "--config", str(ini), "--out", str(out_f)]) == 0
    assert main(["sweep", "--config", str(ini), "--out", str(out_a),
                 "--asymptotic"]) == 0

    def rates(path):
        lines = path.read_text().splitlines()[1:]
        return [float(line.split(",")[1]) for line in lines]

    for fin, asym in zip(rates(out_f), rates(out_a)):
        assert asym > fin


def test_config_error_exit_code(tmp_path, capsys):
    ini = tmp_path / "bad.ini"
    ini.write_text("[run]\nf_ec = soon\n")
    assert main(["sweep", "--config", str(ini)]) == 1
    assert "f_ec" in capsys.readouterr().err
    assert main(["sweep", "--config", str(tmp_path / "missing.ini")]) == 1
    capsys.readouterr()


def test_validate_exit_codes(tmp_path, capsys, monkeypatch):
    monkeypatch.setattr(
        cli, "run_validation",
        lambda seed=0: {"passed": True, "seed": seed},
    )
    out = tmp_path / "report.json"
    assert main(["validate", "--seed", "5", "--out", str(out)]) == 0
    assert json.loads(out.read_text())["seed"] == 5
    capsys.readouterr()

    monkeypatch.setattr(
        cli, "run_validation", lambda seed=0: {"passed": False}
    )
    assert main(["validate"]) == 2
    assert "FAILED" in capsys.readouterr().err


def test_optimize_command(tmp_path, capsys):
    ini = tmp_path / "run.ini"
    ini.write_text(FAST)
    assert main(["optimize", "--config", str(ini), "--distance", "40"]) == 0
    out = capsys.readouterr().out
    assert "best rate" in out
    assert format(40.0, ".12e") in out
