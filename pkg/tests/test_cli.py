import json
import sqlite3
from pathlib import Path

import numpy as np
import pytest

from qcstats import init_logging_from_env
from qcstats.core import ConfigError
from qcstats_cli.cli import EXIT_INVALID, EXIT_OK, EXIT_USAGE, main, parse_grid


@pytest.fixture(autouse=True)
def _reset_logging(monkeypatch: pytest.MonkeyPatch):
    for var, val in {
        "LOG_FORMAT": "json",
        "LOG_DEST": "stderr",
        "LOG_LEVEL": "WARNING",
        "SERVICE_NAME": "test-service",
    }.items():
        monkeypatch.setenv(var, val)
    for var in ("QCSTATS_SEED", "QCSTATS_THREADS", "QCSTATS_DB_URI", "QCSTATS_CHI_POINTS"):
        monkeypatch.delenv(var, raising=False)
    init_logging_from_env(force=True)
    yield


def read_csv(path: Path):
    lines = path.read_text(encoding="utf-8").splitlines()
    meta = {}
    for line in lines:
        if line.startswith("# "):
            key, _, value = line[2:].partition(": ")
            meta[key] = value
    body = [line for line in lines if not line.startswith("#")]
    columns = body[0].split(",")
    rows = [line.split(",") for line in body[1:]]
    return meta, columns, rows


def test_spectrum_of_dephased_qubit(tmp_path: Path):
    out = tmp_path / "spectrum.csv"
    code = main(
        ["spectrum", "--builder", "exampleC", "--Gamma", "0.2", "--Omega", "1",
         "--omega", "0:6:601", "--output", str(out)]
    )
    assert code == EXIT_OK
    meta, columns, rows = read_csv(out)
    assert columns == ["omega", "S"]
    assert len(rows) == 601
    assert meta["command"].startswith("qcstats spectrum --builder exampleC")
    assert meta["seed"] == "0"
    assert len(meta["model_hash"]) == 16
    values = np.array(rows, dtype=float)
    at_two = values[np.argmin(np.abs(values[:, 0] - 2.0))]
    assert at_two[1] == pytest.approx(5.0, rel=1e-6)


def test_noise_of_symmetric_dot(tmp_path: Path):
    out = tmp_path / "noise.csv"
    code = main(["noise", "--builder", "exampleB", "--symmetric-large-bias", "--output", str(out)])
    assert code == EXIT_OK
    _, columns, rows = read_csv(out)
    assert columns == ["J", "K", "D", "fano"]
    J, K, D, fano = (float(x) for x in rows[0])
    assert abs(J) == pytest.approx(0.5, rel=1e-10)
    assert D == pytest.approx(0.25, rel=1e-10)
    assert abs(fano) == pytest.approx(0.5, rel=1e-10)


def test_fcs_at_zero_time_is_a_delta(tmp_path: Path):
    out = tmp_path / "fcs.csv"
    code = main(["fcs", "--builder", "exampleB", "--t", "0", "--output", str(out)])
    assert code == EXIT_OK
    _, columns, rows = read_csv(out)
    assert columns == ["n", "P"]
    probs = {float(n): float(p) for n, p in rows}
    assert probs[0.0] == pytest.approx(1.0)
    assert sum(probs.values()) == pytest.approx(1.0)


def test_json_output(tmp_path: Path):
    out = tmp_path / "noise.json"
    code = main(
        ["noise", "--builder", "exampleA", "--gamma", "1", "--Omega", "0.5",
         "--seed", "7", "--format", "json", "--output", str(out)]
    )
    assert code == EXIT_OK
    doc = json.loads(out.read_text(encoding="utf-8"))
    assert doc["columns"] == ["J", "K", "D", "fano"]
    assert doc["meta"]["seed"] == 7
    assert len(doc["rows"]) == 1
    assert all(isinstance(v, float) for v in doc["rows"][0])


def test_usage_errors():
    assert main(["--help"]) == EXIT_OK
    assert main(["noise", "--builder", "exampleA", "--no-such-flag"]) == EXIT_USAGE
    assert main(["teleport"]) == EXIT_USAGE
    assert main(["noise", "--builder", "exampleA", "--model", "x.json"]) == EXIT_USAGE


def test_invalid_models_exit_with_invalid(tmp_path: Path, capsys):
    assert main(["noise", "--model", str(tmp_path / "absent.json")]) == EXIT_INVALID
    assert "error:" in capsys.readouterr().err
    assert main(["noise", "--builder", "exampleD", "--kappa", "-1"]) == EXIT_INVALID
    assert main(["noise"]) == EXIT_INVALID
    assert main(["noise", "--builder", "exampleA", "--threads", "0"]) == EXIT_INVALID
    assert main(["spectrum", "--builder", "exampleA", "--omega", "0:1"]) == EXIT_INVALID


def test_runs_are_recorded_in_ledger(tmp_path: Path):
    db_file = tmp_path / "runs.db"
    uri = f"sqlite:///{db_file}"
    out = tmp_path / "noise.csv"
    assert main(["noise", "--builder", "exampleA", "--seed", "3", "--db-uri", uri, "--output", str(out)]) == EXIT_OK
    assert main(["noise", "--builder", "exampleD", "--kappa", "-1", "--db-uri", uri]) == EXIT_INVALID

    with sqlite3.connect(db_file) as conn:
        rows = conn.execute("SELECT command, seed, status, payload FROM runs ORDER BY id ASC").fetchall()
    assert [r[2] for r in rows] == ["ok", "invalid"]
    assert rows[0][:2] == ("noise", 3)
    assert "argv" in json.loads(rows[0][3])
    assert "error" in json.loads(rows[1][3])


def test_oracle_check_subset_passes(tmp_path: Path):
    out = tmp_path / "oracle.csv"
    code = main(["oracle-check", "--only", "exampleB.J,exampleC.S", "--output", str(out)])
    assert code == EXIT_OK
    _, columns, rows = read_csv(out)
    assert columns == ["check", "error", "tolerance", "status", "equation"]
    assert {r[0]: r[4] for r in rows} == {"exampleB.J": "ExampleB_Jss", "exampleC.S": "ExampleC_S"}
    assert all(r[3] == "pass" for r in rows)


def test_parse_grid():
    np.testing.assert_allclose(parse_grid("0:1:5"), [0.0, 0.25, 0.5, 0.75, 1.0])
    np.testing.assert_allclose(parse_grid("1:100:3:log"), [1.0, 10.0, 100.0])
    np.testing.assert_allclose(parse_grid("2.5"), [2.5])


@pytest.mark.parametrize("text", ["0:1", "a:b:3", "0:1:0", "0:1:5:cubic", "0:1:5:log"])
def test_parse_grid_rejects(text):
    with pytest.raises(ConfigError):
        parse_grid(text)
