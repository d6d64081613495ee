#!.venv/bin/python
"""Tests for both stations' best responses."""

import numpy as np
import pytest

from game.best_response import (
    RegBranch,
    Side,
    SimpleBranch,
    er_thresholds,
    reg_best_response,
    reg_bracket,
    reg_revenue_derivative,
    simple_best_response,
    simple_thresholds,
)
from game.equilibrium import interior_simple_price
from game.errors import BracketFailure, PAInvalid
from game.market_model import (
    MarketEnv,
    PriceProfile,
    RewardSchedule,
    derive_power_stats,
    per_kwh_regulation,
    revenues_for,
)


def random_cases(seed, count, max_z=5.0):
    """(env, stats, t_s) draws with a valid P_A and a moderate exponent z = c_b t_s / (theta_bar gap)."""
    rng = np.random.default_rng(seed)
    cases = []
    while len(cases) < count:
        env = MarketEnv(
            t=rng.uniform(0.01, 0.1),
            theta_bar=rng.uniform(0.05, 1.0),
            c_b=rng.uniform(10.0, 100.0),
            gamma=rng.uniform(0.0, 0.2),
            rho_u=rng.uniform(0.05, 0.49),
            rho_d=rng.uniform(0.05, 0.49),
            p_d=rng.uniform(5.0, 50.0),
        )
        try:
            stats = derive_power_stats(env, rng.uniform(0.0, 1.0))
        except PAInvalid:
            continue
        t_s = interior_simple_price(env, stats) * rng.uniform(0.8, 1.5)
        if env.c_b * t_s / (env.theta_bar * (env.p_d - stats.p_a)) <= max_z:
            cases.append((env, stats, t_s))
    return cases


def test_simple_interior_branch(env):
    """Opponent at zero: fixed station takes its interior optimum"""
    stats = derive_power_stats(env, 1.0)
    response = simple_best_response(env, stats, 0.0)
    assert response.branch is SimpleBranch.INTERIOR
    assert response.t_s == pytest.approx(0.0905976, abs=1e-7)


def test_simple_capped_branch(low_theta_env):
    """Expensive opponent: fixed station prices as a monopolist"""
    stats = derive_power_stats(low_theta_env, 0.5)
    response = simple_best_response(low_theta_env, stats, 0.05)
    assert response.branch is SimpleBranch.CAPPED
    assert response.t_s == pytest.approx(0.07, abs=1e-12)


def test_simple_matching_branch(low_theta_env):
    """Intermediate opponent price: fixed station matches the undercut ray"""
    stats = derive_power_stats(low_theta_env, 0.5)
    lower, upper = simple_thresholds(low_theta_env, stats)
    assert lower == pytest.approx(0.024241, abs=1e-6)
    assert lower < 0.027 < upper
    response = simple_best_response(low_theta_env, stats, 0.027)
    assert response.branch is SimpleBranch.MATCHING
    assert response.t_s == pytest.approx(0.056782, abs=1e-6)


def test_er_thresholds_reference(env):
    """Zero-price band for the reference scenario at its interior T_s"""
    stats = derive_power_stats(env, 1.0)
    e_r1, e_r2 = er_thresholds(env, stats, 0.090598)
    assert e_r1 == pytest.approx(0.03778, rel=1e-3)
    assert e_r2 == pytest.approx(0.20965, rel=1e-3)
    assert 0.0 < e_r1 < e_r2


def test_derivative_negative_just_above_reference_root(env, rw):
    """Revenue derivative is already falling at T_r = 0.029"""
    stats = derive_power_stats(env, 1.0)
    e_r = per_kwh_regulation(env, rw, stats)
    slope = reg_revenue_derivative(env, stats, e_r, PriceProfile(t_s=0.090598, t_r=0.029))
    assert slope == pytest.approx(-0.1324, abs=0.01)


def test_reg_interior_root_reference(env, rw):
    """Reference scenario: regulation station's positive interior price"""
    stats = derive_power_stats(env, 1.0)
    e_r = per_kwh_regulation(env, rw, stats)
    response = reg_best_response(env, stats, e_r, 0.0905976)
    assert response.branch is RegBranch.INTERIOR_ROOT
    assert response.t_r == pytest.approx(0.0289, abs=5e-4)
    assert abs(response.foc_residual) < 1e-9 * env.c_b


def test_reg_zero_branch():
    """E_r inside the zero band: price exactly zero"""
    env = MarketEnv(t=0.03, theta_bar=0.3, c_b=50.0, gamma=0.05, rho_u=0.48, rho_d=0.48, p_d=20.0)
    stats = derive_power_stats(env, 0.5)
    e_r = per_kwh_regulation(env, RewardSchedule(r_u=5.0, r_d=0.8), stats)
    assert e_r == pytest.approx(0.03912, abs=1e-6)
    response = reg_best_response(env, stats, e_r, interior_simple_price(env, stats))
    assert response.branch is RegBranch.ZERO
    assert response.t_r == 0.0


def test_reg_negative_root():
    """Very generous rewards: regulation station subsidises charging"""
    env = MarketEnv(t=0.03, theta_bar=0.3, c_b=50.0, gamma=0.05, rho_u=0.48, rho_d=0.48, p_d=20.0)
    stats = derive_power_stats(env, 0.5)
    e_r = per_kwh_regulation(env, RewardSchedule(r_u=20.0, r_d=0.99), stats)
    assert e_r == pytest.approx(0.257856, abs=1e-6)
    response = reg_best_response(env, stats, e_r, interior_simple_price(env, stats))
    assert response.branch is RegBranch.INTERIOR_ROOT
    assert response.t_r == pytest.approx(-0.00798, abs=1e-3)
    assert -e_r < response.t_r < 0.0


def test_reg_exit_branch(low_theta_env):
    """Negative margin everywhere: sit on the undercut ray with zero revenue"""
    stats = derive_power_stats(low_theta_env, 0.5)
    e_r = per_kwh_regulation(low_theta_env, RewardSchedule(r_u=1.0, r_d=0.0), stats)
    t_s = 0.05
    response = reg_best_response(low_theta_env, stats, e_r, t_s)
    assert response.branch is RegBranch.EXIT
    assert response.t_r == pytest.approx(stats.p_a / low_theta_env.p_d * t_s)
    _, r_r = revenues_for(low_theta_env, stats, e_r, PriceProfile(t_s=t_s, t_r=response.t_r))
    assert r_r <= 1e-12


def test_reg_exit_boundary_is_continuous(low_theta_env):
    """Interior revenue just above the exit boundary tends to zero"""
    stats = derive_power_stats(low_theta_env, 0.5)
    e_r = -0.03
    boundary = -e_r * low_theta_env.p_d / stats.p_a
    at_boundary = reg_best_response(low_theta_env, stats, e_r, boundary)
    assert at_boundary.branch is RegBranch.EXIT
    _, r_exit = revenues_for(low_theta_env, stats, e_r, PriceProfile(t_s=boundary, t_r=at_boundary.t_r))
    assert abs(r_exit) < 1e-12

    t_s = boundary * (1.0 + 1e-6)
    above = reg_best_response(low_theta_env, stats, e_r, t_s)
    assert above.branch is RegBranch.INTERIOR_ROOT
    _, r_above = revenues_for(low_theta_env, stats, e_r, PriceProfile(t_s=t_s, t_r=above.t_r))
    assert 0.0 <= r_above < 2e-6


def test_bracket_failure_is_raised(monkeypatch, env):
    """A bracket without a sign change raises and logs"""
    stats = derive_power_stats(env, 1.0)
    monkeypatch.setattr("game.best_response.reg_bracket", lambda *_: (0.05, 0.06))
    with pytest.raises(BracketFailure) as info:
        reg_best_response(env, stats, -0.0133846, 0.0905976)
    assert info.value.f_lo <= 0.0


def test_derivative_decreasing_on_bracket():
    """dR_r/dT_r never increases across the bracket, the jump at zero included"""
    for env, stats, t_s in random_cases(seed=11, count=200):
        e_r = 0.5 * er_thresholds(env, stats, t_s)[0]
        lo, hi = reg_bracket(env, stats, e_r, t_s)
        if hi <= lo:
            continue
        points = np.linspace(lo, hi, 102)[1:-1]
        values = [reg_revenue_derivative(env, stats, e_r, PriceProfile(t_s=t_s, t_r=float(p))) for p in points]
        assert np.all(np.diff(values) <= 1e-12 * env.c_b)
        assert values[0] > values[-1]


def test_er_thresholds_flip_derivative_sign():
    """Derivative at 0+ changes sign at the first threshold, at 0- at the second"""
    for env, stats, t_s in random_cases(seed=5, count=100):
        e_r1, e_r2 = er_thresholds(env, stats, t_s)
        at_zero = PriceProfile(t_s=t_s, t_r=0.0)
        assert reg_revenue_derivative(env, stats, e_r1 - 1e-9, at_zero, Side.PLUS) > 0.0
        assert reg_revenue_derivative(env, stats, e_r1 + 1e-9, at_zero, Side.PLUS) < 0.0
        assert reg_revenue_derivative(env, stats, e_r2 - 1e-9, at_zero, Side.MINUS) > 0.0
        assert reg_revenue_derivative(env, stats, e_r2 + 1e-9, at_zero, Side.MINUS) < 0.0


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
