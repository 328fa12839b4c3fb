import json
from typing import Any

import pytest

from qcstats import (
    ErrorCodes,
    get_logger,
    init_logging_from_env,
    log_exception,
    JsonLogFormatter,
)
from qcstats.core import ContinuationError, ModelError, QCStatsError, UnstableModelError


@pytest.fixture(autouse=True)
def _reset_logging(monkeypatch: pytest.MonkeyPatch):
    # Ensure a clean logging config for each test
    for var, val in {
        "LOG_FORMAT": "json",
        "LOG_DEST": "stdout",
        "LOG_LEVEL": "INFO",
        "SERVICE_NAME": "test-service",
        "RUN_ID": "run-123",
        "CORRELATION_ID": "cid-456",
    }.items():
        monkeypatch.setenv(var, val)

    init_logging_from_env(force=True)
    yield


def formatted_last_record(caplog) -> dict[str, Any]:
    assert caplog.records, "no log records captured"
    rec = caplog.records[-1]
    formatted = JsonLogFormatter().format(rec)
    return json.loads(formatted)


def test_structured_info_log_with_redaction(caplog):
    logger = get_logger("unit.core", component="fcs", model_hash="abc123")
    logger.info("hello", extra={"custom": "x", "db_password": "secret", "points": 257})
    payload = formatted_last_record(caplog)

    assert payload["level"] == "INFO"
    assert payload["name"] == "unit.core"
    assert payload["message"] == "hello"
    assert payload["service"] == "test-service"
    assert payload["run_id"] == "run-123"
    assert payload["correlation_id"] == "cid-456"
    assert payload["component"] == "fcs"
    assert payload["model_hash"] == "abc123"
    assert payload["points"] == 257
    assert payload["custom"] == "x"
    assert payload["db_password"] == "[REDACTED]"


def test_service_override(caplog):
    logger = get_logger("unit.core", service="worker")
    logger.info("hi")
    assert formatted_last_record(caplog)["service"] == "worker"


def test_log_exception_includes_code_and_exc(caplog):
    logger = get_logger("unit.core")
    try:
        raise UnstableModelError("above threshold")
    except QCStatsError as e:  # noqa: PERF203
        log_exception(logger, code=e.code, component="gaussian", exc=e, step="lyapunov")

    payload = formatted_last_record(caplog)
    assert payload["level"] == "ERROR"
    assert payload["event"] == "error"
    assert payload["error_code"] == ErrorCodes.UNSTABLE_MODEL
    assert payload["component"] == "gaussian"
    assert payload["step"] == "lyapunov"
    assert payload["error"].startswith("above threshold")
    assert "exc_info" in payload


def test_error_codes_are_stable():
    assert ModelError("x").code is ErrorCodes.MODEL_INVALID
    assert ModelError("x", code=ErrorCodes.CONFIG_INVALID).code is ErrorCodes.CONFIG_INVALID
    err = ContinuationError("lost branch", chi=1.5j)
    assert err.code is ErrorCodes.CONTINUATION_FAILED
    assert err.chi == 1.5j
    assert ErrorCodes.STEP_SIZE == "STEP_SIZE"


def test_text_format(monkeypatch, caplog):
    monkeypatch.setenv("LOG_FORMAT", "text")
    init_logging_from_env(force=True)
    get_logger("unit.core").warning("plain")
    assert caplog.records[-1].getMessage() == "plain"
