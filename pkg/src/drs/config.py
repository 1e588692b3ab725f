"""Runtime settings for the gateway and bot, read from one environment file.

Every knob is a ``DRS_``-prefixed variable; process environment overrides
the file.  A missing file or variable falls back to the documented default.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

_TRUTHY = {"1", "true", "yes", "on"}


def read_env_file(path: str | Path) -> dict[str, str]:
    """Parse a ``KEY=VALUE`` env file: comments and blanks skipped,
    surrounding single/double quotes stripped."""
    values: dict[str, str] = {}
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if not line or line.startswith("#") or "=" not in line:
            continue
        key, _, value = line.partition("=")
        value = value.strip()
        if len(value) >= 2 and value[0] == value[-1] and value[0] in "\"'":
            value = value[1:-1]
        values[key.strip()] = value
    return values


@dataclass(frozen=True)
class Settings:
    """Gateway and bot configuration with deployable defaults."""

    backend_kind: str = "builtin"  # "builtin" | "remote"
    backend_url: str | None = None
    threshold: float = 0.5
    max_diff_bytes: int = 1_000_000
    timeout_ms: int = 30_000
    max_seq_units: int = 22_000
    unit_counter: str = "words"  # "words" | "bytes"
    calibration_path: str | None = None
    model_path: str | None = None
    explain_enabled: bool = False
    github_token: str | None = None
    github_api_url: str = "https://api.github.com"
    batch_cap: int = 64
    history_size: int = 200
    # bot only
    webhook_secret: str | None = None
    gateway_url: str | None = None
    bot_pr_only: bool = True

    @classmethod
    def from_env(
        cls,
        env: Mapping[str, str] | None = None,
        env_file: str | Path | None = None,
    ) -> "Settings":
        merged: dict[str, str] = {}
        if env_file is not None and Path(env_file).exists():
            merged.update(read_env_file(env_file))
        merged.update(os.environ if env is None else env)

        def text(key: str, default: str | None = None) -> str | None:
            return merged.get(key, default)

        def number(key: str, default: float) -> float:
            return float(merged.get(key, default))

        def flag(key: str, default: bool) -> bool:
            raw = merged.get(key)
            return default if raw is None else raw.strip().lower() in _TRUTHY

        return cls(
            backend_kind=text("DRS_BACKEND_KIND", "builtin"),
            backend_url=text("DRS_BACKEND_URL"),
            threshold=number("DRS_THRESHOLD", 0.5),
            max_diff_bytes=int(number("DRS_MAX_DIFF_BYTES", 1_000_000)),
            timeout_ms=int(number("DRS_TIMEOUT_MS", 30_000)),
            max_seq_units=int(number("DRS_MAX_SEQ_UNITS", 22_000)),
            unit_counter=text("DRS_UNIT_COUNTER", "words"),
            calibration_path=text("DRS_CALIBRATION_PATH"),
            model_path=text("DRS_MODEL_PATH"),
            explain_enabled=flag("DRS_EXPLAIN_ENABLED", False),
            github_token=text("DRS_GITHUB_TOKEN"),
            github_api_url=text("DRS_GITHUB_API_URL", "https://api.github.com"),
            batch_cap=int(number("DRS_BATCH_CAP", 64)),
            history_size=int(number("DRS_HISTORY_SIZE", 200)),
            webhook_secret=text("DRS_WEBHOOK_SECRET"),
            gateway_url=text("DRS_GATEWAY_URL"),
            bot_pr_only=flag("DRS_BOT_PR_ONLY", True),
        )
