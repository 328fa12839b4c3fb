"""Environment-driven settings."""

from __future__ import annotations

import os
from dataclasses import dataclass, replace
from typing import Mapping, Optional

from .core import ConfigError

__all__ = ["Settings", "load_settings"]


@dataclass(frozen=True)
class Settings:
    threads: int = 1
    db_uri: Optional[str] = None
    seed: int = 0
    chi_points: int = 1024

    def override(self, **changes) -> "Settings":
        """Return a copy with the non-``None`` values of ``changes`` applied."""

        return replace(self, **{k: v for k, v in changes.items() if v is not None})


def _int_from(env: Mapping[str, str], key: str, default: int, *, minimum: int) -> int:
    raw = (env.get(key) or "").strip()
    if not raw:
        return default
    try:
        value = int(raw)
    except ValueError as exc:
        raise ConfigError(f"{key} must be an integer, got {raw!r}") from exc
    if value < minimum:
        raise ConfigError(f"{key} must be >= {minimum}, got {value}")
    return value


def load_settings(env: Optional[Mapping[str, str]] = None) -> Settings:
    """Read ``QCSTATS_*`` variables from ``env`` (defaults to ``os.environ``)."""

    env = os.environ if env is None else env
    db_uri = (env.get("QCSTATS_DB_URI") or "").strip() or None
    return Settings(
        threads=_int_from(env, "QCSTATS_THREADS", 1, minimum=1),
        db_uri=db_uri,
        seed=_int_from(env, "QCSTATS_SEED", 0, minimum=0),
        chi_points=_int_from(env, "QCSTATS_CHI_POINTS", 1024, minimum=16),
    )
