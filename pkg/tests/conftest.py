"""Shared scenarios for the charging-game tests."""

import pytest

from game.market_model import MarketEnv, RewardSchedule


@pytest.fixture(autouse=True)
def isolated_log_dir(tmp_path, monkeypatch):
    """Keep every test's log output inside its own tmp dir."""
    log_dir = tmp_path / "logs"
    monkeypatch.setenv("REGCHARGE_LOG_DIR", str(log_dir))
    return log_dir


@pytest.fixture
def env():
    """Reference market: t=0.03, theta_bar=0.3, c_b=50, gamma=0.05, rho=0.48/0.48, p_d=20."""
    return MarketEnv(t=0.03, theta_bar=0.3, c_b=50.0, gamma=0.05, rho_u=0.48, rho_d=0.48, p_d=20.0)


@pytest.fixture
def rw():
    return RewardSchedule(r_u=1.6, r_d=0.4, delta=0.1)


@pytest.fixture
def low_theta_env(env):
    return env.replace(theta_bar=0.1)


@pytest.fixture
def volatile_env():
    """Fixed-power and regulation slots drawn 45% / 45% of the time."""
    return MarketEnv(t=0.03, theta_bar=0.3, c_b=50.0, gamma=0.05, rho_u=0.45, rho_d=0.45, p_d=20.0)
