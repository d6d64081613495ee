"""
Levelled file logging for the charging-game solvers and CLI.

Every level goes to one file, `regcharge.log`, under REGCHARGE_LOG_DIR
(default ~/.regcharge/logs). The file rotates at 1MB and keeps 5 backups.

Usage:
    from utils.logging_helper import log

    log.info("solved N2 at x=0.5", "equilibrium")
    log.error("bracket failed", "best_response", error=e)

Configuration:
    LOG_LEVEL in the environment or ./.env: debug, info, warn, error (default: info)
"""

import os
from datetime import datetime
from pathlib import Path
from typing import Optional

from dotenv import load_dotenv

load_dotenv()

_LEVELS = {"debug": 0, "info": 1, "warn": 2, "error": 3}

_MAX_BYTES = 1_000_000
_BACKUPS = 5


def get_log_path() -> Path:
    """Log file location, re-read from the environment on every call."""
    log_dir = Path(os.getenv("REGCHARGE_LOG_DIR", "~/.regcharge/logs")).expanduser()
    return log_dir / "regcharge.log"


def _get_min_level() -> int:
    return _LEVELS.get(os.getenv("LOG_LEVEL", "info").lower(), 1)


def _should_log(level: str) -> bool:
    """Check if this level passes the LOG_LEVEL threshold."""
    return _LEVELS.get(level, 0) >= _get_min_level()


def _rotate(path: Path, incoming: int) -> None:
    """Shift regcharge.log -> .1 -> .2 ... once the next write would cross the size cap."""
    if not path.exists() or path.stat().st_size + incoming < _MAX_BYTES:
        return
    for i in range(_BACKUPS - 1, 0, -1):
        older = path.with_name(f"{path.name}.{i}")
        if older.exists():
            os.replace(older, path.with_name(f"{path.name}.{i + 1}"))
    os.replace(path, path.with_name(f"{path.name}.1"))


def _write_log(level: str, message: str, component: str, error: Optional[BaseException] = None) -> None:
    if not _should_log(level):
        return

    entry = f"[{datetime.now().isoformat()}] [{level.upper()}] [{component}] {message}"
    if error is not None:
        entry += f" | {type(error).__name__}: {error}"
    entry += "\n"

    try:
        path = get_log_path()
        path.parent.mkdir(parents=True, exist_ok=True)
        _rotate(path, len(entry.encode("utf-8")))
        with open(path, "a", encoding="utf-8") as f:
            f.write(entry)
    except Exception:
        pass  # logging never breaks a computation


class _Logger:
    """Level methods over the shared log file."""

    def debug(self, message: str, component: str) -> None:
        _write_log("debug", message, component)

    def info(self, message: str, component: str) -> None:
        _write_log("info", message, component)

    def warn(self, message: str, component: str, error: Optional[BaseException] = None) -> None:
        _write_log("warn", message, component, error)

    def error(self, message: str, component: str, error: Optional[BaseException] = None) -> None:
        _write_log("error", message, component, error)


log = _Logger()
