#!.venv/bin/python
# pylint: disable=import-outside-toplevel
# Rationale: These tests require dynamic imports with importlib.reload()
# to test different LOG_LEVEL environment variable settings.

"""Tests for logging_helper module."""

import pytest


def _reload(monkeypatch, level):
    monkeypatch.setenv("LOG_LEVEL", level)

    import importlib

    import utils.logging_helper

    return importlib.reload(utils.logging_helper)


def test_log_level_filtering_debug(monkeypatch):
    """DEBUG level logs all levels"""
    helper = _reload(monkeypatch, "debug")

    assert helper._should_log("debug") is True
    assert helper._should_log("info") is True
    assert helper._should_log("warn") is True
    assert helper._should_log("error") is True


def test_log_level_filtering_info(monkeypatch):
    """INFO level filters DEBUG"""
    helper = _reload(monkeypatch, "info")

    assert helper._should_log("debug") is False
    assert helper._should_log("info") is True
    assert helper._should_log("warn") is True
    assert helper._should_log("error") is True


def test_log_level_filtering_error(monkeypatch):
    """ERROR level only logs ERROR"""
    helper = _reload(monkeypatch, "error")

    assert helper._should_log("debug") is False
    assert helper._should_log("info") is False
    assert helper._should_log("warn") is False
    assert helper._should_log("error") is True


def test_log_path_follows_env(isolated_log_dir):
    """REGCHARGE_LOG_DIR picks the log directory"""
    from utils.logging_helper import get_log_path

    assert get_log_path() == isolated_log_dir / "regcharge.log"


def test_entry_format(monkeypatch, isolated_log_dir):
    """Entries carry level, component and the error type"""
    helper = _reload(monkeypatch, "info")

    helper.log.debug("hidden", "equilibrium")
    helper.log.info("solved N2", "equilibrium")
    helper.log.error("bracket failed", "best_response", error=ValueError("no sign change"))

    lines = (isolated_log_dir / "regcharge.log").read_text().splitlines()
    assert len(lines) == 2
    assert "[INFO] [equilibrium] solved N2" in lines[0]
    assert lines[1].endswith("[ERROR] [best_response] bracket failed | ValueError: no sign change")


def test_rotation_keeps_backups(monkeypatch, isolated_log_dir):
    """Crossing the size cap shifts the file to .1"""
    helper = _reload(monkeypatch, "info")
    monkeypatch.setattr(helper, "_MAX_BYTES", 200)

    for i in range(10):
        helper.log.info(f"entry {i} " + "x" * 40, "charge_sim")

    assert (isolated_log_dir / "regcharge.log.1").exists()
    assert (isolated_log_dir / "regcharge.log").stat().st_size < 200
    assert "entry 9" in (isolated_log_dir / "regcharge.log").read_text()


def test_unwritable_log_dir_is_silent(monkeypatch, tmp_path):
    """A log directory that cannot be created never raises"""
    helper = _reload(monkeypatch, "info")
    blocker = tmp_path / "file"
    blocker.write_text("")
    monkeypatch.setenv("REGCHARGE_LOG_DIR", str(blocker / "logs"))

    helper.log.warn("still running", "cli")


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
