"""Run ledger helpers: JSON event logging and an optional relational store."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

from .core import get_logger

__all__ = ["RunEventLogger", "RunLedger"]


@dataclass
class RunEventLogger:
    """Lightweight event logger for command lifecycle events."""

    enabled: bool = False
    logger_name: str = "qcstats.ledger"
    _logger: Any = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self._logger = get_logger(self.logger_name)

    def log_event(
        self,
        *,
        kind: str,
        command: str,
        model_hash: str,
        seed: Optional[int] = None,
        data: Optional[Dict[str, Any]] = None,
    ) -> None:
        if not self.enabled:
            return

        payload: Dict[str, Any] = {
            "event": "run_event",
            "kind": kind,
            "command": command,
            "model_hash": model_hash,
        }
        if seed is not None:
            payload["seed"] = seed
        if data:
            payload["data"] = data

        try:
            self._logger.info(json.dumps(payload, ensure_ascii=False, default=str))
        except Exception:
            self._logger.info(str(payload))


class RunLedger:
    """Best-effort relational record of CLI runs."""

    table_name = "runs"

    def __init__(self, db_uri: str):
        import sqlalchemy as sa

        self._engine = sa.create_engine(db_uri)
        self._metadata = sa.MetaData()
        self.table = sa.Table(
            self.table_name,
            self._metadata,
            sa.Column("id", sa.Integer, primary_key=True, autoincrement=True),
            sa.Column("command", sa.String(64), nullable=False),
            sa.Column("model_hash", sa.String(64)),
            sa.Column("seed", sa.BigInteger),
            sa.Column("status", sa.String(32), nullable=False),
            sa.Column("payload", sa.Text),
        )
        self._ready = False

    def _ensure_table(self) -> None:
        if self._ready:
            return
        self._metadata.create_all(self._engine, checkfirst=True)
        self._ready = True

    def record_run(
        self,
        *,
        command: str,
        model_hash: str,
        status: str,
        seed: Optional[int] = None,
        payload: Optional[Dict[str, Any]] = None,
    ) -> None:
        self._ensure_table()
        row = {
            "command": command,
            "model_hash": model_hash,
            "seed": seed,
            "status": status,
            "payload": json.dumps(payload or {}, ensure_ascii=False, default=str, sort_keys=True),
        }
        with self._engine.begin() as conn:
            conn.execute(self.table.insert().values(**row))
