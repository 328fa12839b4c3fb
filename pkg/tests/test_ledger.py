import json
import sqlite3
from pathlib import Path

import pytest

from qcstats import RunEventLogger, RunLedger, init_logging_from_env, JsonLogFormatter


@pytest.fixture(autouse=True)
def _reset_logging(monkeypatch: pytest.MonkeyPatch):
    for var, val in {
        "LOG_FORMAT": "json",
        "LOG_DEST": "stdout",
        "LOG_LEVEL": "INFO",
        "SERVICE_NAME": "test-service",
    }.items():
        monkeypatch.setenv(var, val)
    init_logging_from_env(force=True)
    yield


def parse_inner_message_from_caplog(caplog) -> dict:
    assert caplog.records, "no log records captured"
    rec = caplog.records[-1]
    formatted = JsonLogFormatter().format(rec)
    outer = json.loads(formatted)
    return json.loads(outer["message"]) if isinstance(outer.get("message"), str) else {}


def test_run_event_logger_emits_when_enabled(caplog):
    events = RunEventLogger(enabled=True, logger_name="qcstats.ledger")
    events.log_event(kind="start", command="noise", model_hash="deadbeef", seed=7, data={"points": 3})

    inner = parse_inner_message_from_caplog(caplog)
    assert inner["event"] == "run_event"
    assert inner["kind"] == "start"
    assert inner["command"] == "noise"
    assert inner["model_hash"] == "deadbeef"
    assert inner["seed"] == 7
    assert inner["data"] == {"points": 3}


def test_run_event_logger_disabled_does_not_log(caplog):
    caplog.clear()
    events = RunEventLogger(enabled=False, logger_name="qcstats.ledger")
    events.log_event(kind="noop", command="steady", model_hash="-")
    assert not any(r.name == "qcstats.ledger" for r in caplog.records)


def test_run_ledger_creates_table_and_inserts(tmp_path: Path):
    db_file = tmp_path / "runs.sqlite"
    ledger = RunLedger(f"sqlite:///{db_file}")
    ledger.record_run(command="spectrum", model_hash="abc", status="ok", seed=3, payload={"argv": ["x"]})
    ledger.record_run(command="noise", model_hash="abc", status="invalid")

    with sqlite3.connect(db_file) as conn:
        rows = conn.execute("SELECT command, model_hash, seed, status, payload FROM runs ORDER BY id ASC").fetchall()
    assert rows[0][:4] == ("spectrum", "abc", 3, "ok")
    assert json.loads(rows[0][4]) == {"argv": ["x"]}
    assert rows[1][:4] == ("noise", "abc", None, "invalid")


def test_run_ledger_declares_portable_schema(tmp_path: Path):
    import sqlalchemy as sa
    from sqlalchemy.dialects import postgresql

    db_file = tmp_path / "schema.sqlite"
    ledger = RunLedger(f"sqlite:///{db_file}")
    ddl = str(sa.schema.CreateTable(ledger.table).compile(dialect=postgresql.dialect()))
    assert "AUTOINCREMENT" not in ddl.upper()
    assert "SERIAL" in ddl.upper()

    ledger.record_run(command="fcs", model_hash="h", status="ok", seed=2**40)
    ledger.record_run(command="fcs", model_hash="h", status="ok")
    columns = {c["name"] for c in sa.inspect(sa.create_engine(f"sqlite:///{db_file}")).get_columns("runs")}
    assert columns == {"id", "command", "model_hash", "seed", "status", "payload"}
    with sqlite3.connect(db_file) as conn:
        rows = conn.execute("SELECT id, seed FROM runs ORDER BY id ASC").fetchall()
    assert rows == [(1, 2**40), (2, None)]
