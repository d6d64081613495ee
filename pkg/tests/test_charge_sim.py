#!.venv/bin/python
"""Tests for the Monte Carlo charging simulator."""

import io
import math

import numpy as np
import pytest

from game.charge_sim import (
    GENERATOR,
    Signal,
    empirical_slot_revenue,
    simulate_charge,
    trace_frame,
    write_trace_csv,
)
from game.errors import InvalidParameter, NeverCompletes
from game.market_model import PowerStats, RewardSchedule, derive_power_stats, slot_revenue


def test_trace_without_regulation_is_deterministic(env, rw):
    """No regulation slots: constant power, ceil(c_b / (delta p_n)) slots"""
    quiet = env.replace(rho_u=0.0, rho_d=0.0)
    stats = derive_power_stats(quiet, 0.8)
    trace = simulate_charge(quiet, rw, stats, seed=1)
    assert trace.n_slots == math.ceil(quiet.c_b / (rw.delta * stats.p_n))
    assert set(trace.signal_codes.tolist()) == {0}
    assert np.all(trace.power == stats.p_n)
    assert trace.total_cost == pytest.approx(quiet.t * quiet.c_b)


def test_trace_conserves_energy(env, rw):
    """Delivered energy equals c_b and grows monotonically"""
    stats = derive_power_stats(env, 0.8)
    for seed in range(20):
        trace = simulate_charge(env, rw, stats, seed)
        assert trace.cum_energy[-1] == pytest.approx(env.c_b, rel=1e-12)
        assert np.all(np.diff(trace.cum_energy) >= 0.0)
        delivered = rw.delta * (np.sum(trace.power[:-1]) + trace.final_fraction * trace.power[-1])
        assert delivered == pytest.approx(env.c_b, rel=1e-9)
        assert 0.0 < trace.final_fraction <= 1.0
        assert trace.power[-1] > 0.0


def test_trace_metadata(env, rw):
    """Trace remembers its seed and generator"""
    trace = simulate_charge(env, rw, derive_power_stats(env, 0.5), seed=42)
    assert trace.seed == 42
    assert trace.generator == GENERATOR
    assert trace.duration_slots == pytest.approx(trace.n_slots - 1 + trace.final_fraction)
    slots = trace.slots()
    assert len(slots) == trace.n_slots
    assert slots[-1].cum_energy_kwh == pytest.approx(env.c_b)
    assert {s.signal for s in slots} <= set(Signal)


def test_regulation_energy(env, rw):
    """At full default power only up slots move energy: p_d * delta each"""
    stats = derive_power_stats(env, 1.0)
    trace = simulate_charge(env, rw, stats, seed=9)
    ups = int(np.sum(trace.signal_codes == 1))
    assert trace.regulation_energy_kwh == pytest.approx(env.p_d * rw.delta * ups)

    quiet = env.replace(rho_u=0.0, rho_d=0.0)
    assert simulate_charge(quiet, rw, derive_power_stats(quiet, 0.5), seed=9).regulation_energy_kwh == 0.0


def test_same_seed_same_trace(env, rw, tmp_path):
    """Seeded traces are bit-identical, CSV included"""
    stats = derive_power_stats(env, 0.8)
    first, second = simulate_charge(env, rw, stats, 7), simulate_charge(env, rw, stats, 7)
    np.testing.assert_array_equal(first.signal_codes, second.signal_codes)
    np.testing.assert_array_equal(first.cost, second.cost)
    write_trace_csv(first, tmp_path / "a.csv")
    write_trace_csv(second, tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_different_seeds_differ(env, rw):
    stats = derive_power_stats(env, 0.8)
    a, b = simulate_charge(env, rw, stats, 1), simulate_charge(env, rw, stats, 2)
    assert a.n_slots != b.n_slots or not np.array_equal(a.signal_codes, b.signal_codes)


def test_slot_costs_by_signal(env):
    """Full rewards: up slots are free, down slots cost only the default power"""
    rw = RewardSchedule(r_u=1.0, r_d=1.0)
    stats = derive_power_stats(env, 0.8)
    trace = simulate_charge(env, rw, stats, seed=3)
    full = -trace.full_slot_revenue
    up = trace.signal_codes == 1
    down = trace.signal_codes == 2
    null = trace.signal_codes == 0
    assert np.all(full[up] == 0.0)
    assert full[down] == pytest.approx(np.full(down.sum(), rw.delta * env.t * stats.p_n))
    assert full[null] == pytest.approx(np.full(null.sum(), rw.delta * env.t * stats.p_n))
    assert trace.total_cost <= env.t * env.c_b + 1e-12
    if down.any():
        assert trace.total_cost < env.t * env.c_b


def test_signal_frequencies(volatile_env, rw):
    """Up and down frequencies match rho_u and rho_d over a long session"""
    stats = derive_power_stats(volatile_env, 0.8)
    long_session = volatile_env.replace(c_b=110_000.0)
    trace = simulate_charge(long_session, rw, stats, seed=11)
    n = trace.n_slots
    assert n >= 100_000
    band = 3.0 * math.sqrt(0.45 * 0.55 / n)
    assert np.mean(trace.signal_codes == 1) == pytest.approx(0.45, abs=band)
    assert np.mean(trace.signal_codes == 2) == pytest.approx(0.45, abs=band)


def test_empirical_slot_revenue_matches_expectation(env, rw):
    """Monte Carlo slot revenue agrees with the closed form within 3 standard errors"""
    stats = derive_power_stats(env, 0.8)
    estimate = empirical_slot_revenue(env, rw, stats, trials=10_000, seed=0)
    expected = slot_revenue(env, rw, stats)
    assert expected == pytest.approx(-0.014592, abs=1e-9)
    assert abs(estimate.mean - expected) <= 3.0 * estimate.std_error
    assert estimate.trials == 10_000
    assert estimate.slots > 10_000


def test_mean_duration_matches_mean_power(volatile_env, rw):
    """Mean charging time is c_b / (delta p_bar) within 2%"""
    stats = derive_power_stats(volatile_env, 0.8)
    estimate = empirical_slot_revenue(volatile_env, rw, stats, trials=10_000, seed=100)
    expected = volatile_env.c_b / (rw.delta * stats.p_bar)
    assert estimate.mean_duration_slots == pytest.approx(expected, rel=0.02)


def test_empirical_slot_revenue_needs_enough_trials(env, rw):
    with pytest.raises(InvalidParameter):
        empirical_slot_revenue(env, rw, derive_power_stats(env, 0.8), trials=99, seed=0)


def test_zero_mean_power_never_completes(env, rw):
    """A charger that never delivers energy is rejected"""
    stats = PowerStats(x=0.0, p_n=0.0, p_bar=0.0, delta_p=0.0, p_a=0.0)
    with pytest.raises(NeverCompletes):
        simulate_charge(env.replace(rho_d=0.0), rw, stats, seed=0)


def test_trace_csv_format(env, rw):
    """CSV columns and signal letters"""
    trace = simulate_charge(env, rw, derive_power_stats(env, 0.8), seed=5)
    out = io.StringIO()
    write_trace_csv(trace, out)
    lines = out.getvalue().splitlines()
    assert lines[0] == "slot,signal,power_kw,cum_energy_kwh,cost_eur"
    assert len(lines) == trace.n_slots + 1
    assert lines[1].split(",")[1] in {"U", "D", "N"}
    assert list(trace_frame(trace)["slot"]) == list(range(trace.n_slots))


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
