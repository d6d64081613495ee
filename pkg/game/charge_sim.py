"""
Monte Carlo charging of a single EV at a regulation-providing station.

Each slot of length delta draws an independent grid signal: regulation-up
(charge at 0 kW), regulation-down (charge at p_d) or none (charge at p_n).
Charging stops when the battery has received c_b; the last slot is prorated.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import TextIO, Union

import numpy as np
import numpy.typing as npt
import pandas as pd

from game.errors import InvalidParameter, NeverCompletes
from game.market_model import MarketEnv, PowerStats, RewardSchedule
from utils.logging_helper import log

_COMPONENT = "charge_sim"

GENERATOR = "PCG64"
MIN_TRIALS = 100
TRACE_COLUMNS = ["slot", "signal", "power_kw", "cum_energy_kwh", "cost_eur"]

_NULL, _UP, _DOWN = 0, 1, 2
_COMPLETION_RTOL = 1e-12


class Signal(str, Enum):
    UP = "U"
    DOWN = "D"
    NULL = "N"


_SIGNALS = {_NULL: Signal.NULL, _UP: Signal.UP, _DOWN: Signal.DOWN}


@dataclass(frozen=True)
class SlotRecord:
    index: int
    signal: Signal
    power_kw: float
    cum_energy_kwh: float
    cost_eur: float


@dataclass(frozen=True, eq=False)
class ChargeTrace:
    """
    Per-slot arrays of one charging session. `cost` holds what the station
    pays in each slot (negative when regulation payments exceed the energy
    bill); the last entry is prorated by `final_fraction`.
    """

    signal_codes: npt.NDArray[np.int8]
    power: npt.NDArray[np.float64]
    cum_energy: npt.NDArray[np.float64]
    cost: npt.NDArray[np.float64]
    full_slot_revenue: npt.NDArray[np.float64]
    final_fraction: float
    seed: int
    generator: str = GENERATOR
    p_n: float = field(default=0.0)
    delta: float = field(default=0.1)

    @property
    def n_slots(self) -> int:
        return int(self.power.size)

    @property
    def total_cost(self) -> float:
        return math.fsum(self.cost)

    @property
    def duration_slots(self) -> float:
        """Full slots plus the delivered fraction of the last one."""
        return (self.n_slots - 1) + self.final_fraction

    @property
    def regulation_energy_kwh(self) -> float:
        """Energy shifted away from the default schedule by regulation slots."""
        weights = np.ones(self.n_slots)
        weights[-1] = self.final_fraction
        regulated = self.signal_codes != _NULL
        return float(np.sum(np.abs(self.power[regulated] - self.p_n) * self.delta * weights[regulated]))

    def slots(self) -> list[SlotRecord]:
        return [
            SlotRecord(
                index=i,
                signal=_SIGNALS[int(self.signal_codes[i])],
                power_kw=float(self.power[i]),
                cum_energy_kwh=float(self.cum_energy[i]),
                cost_eur=float(self.cost[i]),
            )
            for i in range(self.n_slots)
        ]


@dataclass(frozen=True)
class SlotRevenueEstimate:
    mean: float
    std_error: float
    trials: int
    slots: int
    mean_duration_slots: float


def _slot_tables(
    env: MarketEnv, rw: RewardSchedule, stats: PowerStats
) -> tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
    """Power and station cost per full slot, indexed by signal code."""
    power = np.array([stats.p_n, 0.0, env.p_d])
    cost = np.array(
        [
            rw.delta * env.t * stats.p_n,
            rw.delta * env.t * (1.0 - rw.r_u) * stats.p_n,
            rw.delta * (stats.p_n * env.t + (env.p_d - stats.p_n) * env.t * (1.0 - rw.r_d)),
        ]
    )
    return power, cost


def simulate_charge(env: MarketEnv, rw: RewardSchedule, stats: PowerStats, seed: int) -> ChargeTrace:
    """
    Raises:
        NeverCompletes: mean power is zero, so c_b is never reached
    """
    if stats.p_bar <= 0.0:
        raise NeverCompletes(f"mean power {stats.p_bar} kW never delivers {env.c_b} kWh")

    rng = np.random.default_rng(seed)
    power_table, cost_table = _slot_tables(env, rw, stats)
    expected_slots = env.c_b / (rw.delta * stats.p_bar)
    chunk = int(math.ceil(2.0 * expected_slots)) + 16
    target = env.c_b * (1.0 - _COMPLETION_RTOL)

    codes = np.empty(0, dtype=np.int8)
    cum = np.empty(0, dtype=np.float64)
    while cum.size == 0 or cum[-1] < target:
        u = rng.random(chunk)
        drawn = np.where(u < env.rho_u, _UP, np.where(u < env.rho_u + env.rho_d, _DOWN, _NULL)).astype(np.int8)
        start = cum[-1] if cum.size else 0.0
        codes = np.concatenate([codes, drawn])
        cum = np.concatenate([cum, start + np.cumsum(power_table[drawn] * rw.delta)])

    last = int(np.argmax(cum >= target))
    codes = codes[: last + 1]
    power = power_table[codes]
    full_cost = cost_table[codes]

    before = cum[last - 1] if last > 0 else 0.0
    fraction = min(1.0, (env.c_b - before) / (power[last] * rw.delta))
    cum_energy = cum[: last + 1].copy()
    cum_energy[last] = env.c_b
    cost = full_cost.copy()
    cost[last] *= fraction

    return ChargeTrace(
        signal_codes=codes,
        power=power,
        cum_energy=cum_energy,
        cost=cost,
        full_slot_revenue=-full_cost,
        final_fraction=float(fraction),
        seed=seed,
        p_n=stats.p_n,
        delta=rw.delta,
    )


def empirical_slot_revenue(
    env: MarketEnv, rw: RewardSchedule, stats: PowerStats, trials: int, seed: int
) -> SlotRevenueEstimate:
    """
    Mean full-slot station revenue over `trials` traces seeded seed, seed+1, ...

    Every slot counts at its full-slot value, the stopping slot included;
    the standard error treats each trace as one cluster.

    Raises:
        InvalidParameter: fewer than 100 trials
    """
    if trials < MIN_TRIALS:
        raise InvalidParameter(f"trials >= {MIN_TRIALS}", trials)

    sums = np.empty(trials)
    counts = np.empty(trials)
    durations = np.empty(trials)
    for i in range(trials):
        trace = simulate_charge(env, rw, stats, seed + i)
        sums[i] = math.fsum(trace.full_slot_revenue)
        counts[i] = trace.n_slots
        durations[i] = trace.duration_slots

    total_slots = int(counts.sum())
    mean = math.fsum(sums) / total_slots
    residuals = sums - mean * counts
    variance = math.fsum(residuals**2) / (trials * (trials - 1))
    std_error = math.sqrt(variance) / float(np.mean(counts))

    log.info(f"{trials} traces, {total_slots} slots, mean={mean:.6g} se={std_error:.3g}", _COMPONENT)
    return SlotRevenueEstimate(
        mean=mean,
        std_error=std_error,
        trials=trials,
        slots=total_slots,
        mean_duration_slots=float(np.mean(durations)),
    )


def trace_frame(trace: ChargeTrace) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "slot": np.arange(trace.n_slots),
            "signal": [_SIGNALS[int(code)].value for code in trace.signal_codes],
            "power_kw": trace.power,
            "cum_energy_kwh": trace.cum_energy,
            "cost_eur": trace.cost,
        },
        columns=TRACE_COLUMNS,
    )


def write_trace_csv(trace: ChargeTrace, target: Union[str, Path, TextIO]) -> None:
    trace_frame(trace).to_csv(target, index=False, float_format="%.6f", lineterminator="\n")
