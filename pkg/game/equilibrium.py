"""
Nash equilibrium of the pricing game.

Four cases, keyed on the regulation remuneration E_r:

    N1  the regulation station cannot earn a positive margin; both stations sit
        on the undercut ray and the Pareto-dominant point is returned
    N2  the fixed-power station prices at its interior optimum and the
        regulation station answers with a positive interior price
    N3  the regulation station prices at exactly zero
    N4  the regulation station answers with a negative interior price
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np
import numpy.typing as npt

from game.best_response import er_thresholds, reg_best_response
from game.errors import CertificationFailure
from game.market_model import (
    MarketEnv,
    MarketShares,
    PowerStats,
    PriceProfile,
    RewardSchedule,
    derive_power_stats,
    market_shares,
    per_kwh_regulation,
    revenue_arrays,
    revenues_for,
    user_welfare,
)
from utils.logging_helper import log

_COMPONENT = "equilibrium"

CERTIFICATION_TOLERANCE = 1e-6


class EquilibriumCase(str, Enum):
    N1 = "N1"
    N2 = "N2"
    N3 = "N3"
    N4 = "N4"


@dataclass(frozen=True)
class EquilibriumOutcome:
    case_tag: EquilibriumCase
    prices: PriceProfile
    shares: MarketShares
    r_s: float
    r_r: float
    welfare: float
    e_r: float
    x: float

    @property
    def station_revenue(self) -> float:
        return self.r_s + self.r_r

    @property
    def social_welfare(self) -> float:
        return self.r_s + self.r_r + self.welfare


@dataclass(frozen=True)
class CertificationReport:
    certified: bool
    max_improvement_s: float
    max_improvement_r: float
    best_deviation_s: float
    best_deviation_r: float
    grid_step: float


def interior_simple_price(env: MarketEnv, stats: PowerStats) -> float:
    """T_s shared by cases N2-N4."""
    return env.t + (env.p_d - stats.p_a) * env.theta_bar / env.c_b


def n1_threshold(env: MarketEnv, stats: PowerStats) -> float:
    """E_r at or below which the game is in case N1."""
    return -(stats.p_a / env.p_d) * interior_simple_price(env, stats)


def classify_case(env: MarketEnv, stats: PowerStats, e_r: float) -> EquilibriumCase:
    if e_r <= n1_threshold(env, stats):
        return EquilibriumCase.N1
    e_r1, e_r2 = er_thresholds(env, stats, interior_simple_price(env, stats))
    if e_r < e_r1:
        return EquilibriumCase.N2
    if e_r <= e_r2:
        return EquilibriumCase.N3
    return EquilibriumCase.N4


def equilibrium_prices(env: MarketEnv, stats: PowerStats, e_r: float) -> tuple[EquilibriumCase, PriceProfile]:
    case = classify_case(env, stats, e_r)

    if case is EquilibriumCase.N1:
        # Pareto-dominant point of the undercut ray, capped at the monopoly price of the fixed station
        cap = env.t + env.p_d * env.theta_bar / env.c_b
        t_s = min(-e_r * env.p_d / stats.p_a, cap)
        return case, PriceProfile(t_s=t_s, t_r=t_s * stats.p_a / env.p_d)

    t_s = interior_simple_price(env, stats)
    if case is EquilibriumCase.N3:
        return case, PriceProfile(t_s=t_s, t_r=0.0)
    return case, PriceProfile(t_s=t_s, t_r=reg_best_response(env, stats, e_r, t_s).t_r)


def outcome_at(env: MarketEnv, stats: PowerStats, e_r: float) -> EquilibriumOutcome:
    case, prices = equilibrium_prices(env, stats, e_r)
    r_s, r_r = revenues_for(env, stats, e_r, prices)
    shares = market_shares(env, stats, prices)
    welfare = user_welfare(env, stats, prices)
    if case is EquilibriumCase.N1:
        # nobody picks the regulation station on the undercut ray; rounding in k_r - k_m must not leak into R_r
        r_r = 0.0
        shares = MarketShares(alpha_s=shares.alpha_s, alpha_r=0.0, alpha_none=max(0.0, 1.0 - shares.alpha_s))
        welfare = env.theta_bar * shares.alpha_s * env.p_d
    return EquilibriumOutcome(
        case_tag=case,
        prices=prices,
        shares=shares,
        r_s=r_s,
        r_r=r_r,
        welfare=welfare,
        e_r=e_r,
        x=stats.x,
    )


def solve_nash(env: MarketEnv, rw: RewardSchedule, x: float, certify: bool = False) -> EquilibriumOutcome:
    """
    Equilibrium of the game for design x.

    Raises:
        PAInvalid: x gives a fluctuation-adjusted power outside (0, p_d)
        CertificationFailure: only when `certify` is set and a grid deviation pays
    """
    stats = derive_power_stats(env, x)
    outcome = outcome_at(env, stats, per_kwh_regulation(env, rw, stats))
    log.debug(
        f"x={x:.6f} {outcome.case_tag.value} T_s={outcome.prices.t_s:.6f} T_r={outcome.prices.t_r:.6f}", _COMPONENT
    )
    if certify:
        verify_nash(env, rw, stats, outcome)
    return outcome


def deviation_grid(env: MarketEnv, grid_step: float) -> npt.NDArray[np.float64]:
    """Unilateral deviation prices [t - 0.05, t + 3 theta_bar p_d / c_b]."""
    lo = env.t - 0.05
    hi = env.t + 3.0 * env.theta_bar * env.p_d / env.c_b
    count = int(np.floor((hi - lo) / grid_step + 1e-9)) + 1
    return lo + grid_step * np.arange(count, dtype=np.float64)


def verify_nash(
    env: MarketEnv, rw: RewardSchedule, stats: PowerStats, outcome: EquilibriumOutcome, grid_step: float = 1e-4
) -> CertificationReport:
    """
    Scan each station's unilateral deviations on a price grid.

    Raises:
        CertificationFailure: some deviation improves a station's revenue by more than 1e-6
    """
    e_r = per_kwh_regulation(env, rw, stats)
    t_s, t_r = outcome.prices.t_s, outcome.prices.t_r
    r_s, r_r = revenues_for(env, stats, e_r, outcome.prices)

    grid = deviation_grid(env, grid_step)
    grid_s = grid[grid >= 0.0]
    dev_s, _ = revenue_arrays(env, stats, e_r, grid_s, t_r)
    _, dev_r = revenue_arrays(env, stats, e_r, t_s, grid)

    i_s, i_r = int(np.argmax(dev_s)), int(np.argmax(dev_r))
    gain_s, gain_r = float(dev_s[i_s]) - r_s, float(dev_r[i_r]) - r_r

    if gain_s > CERTIFICATION_TOLERANCE:
        error = CertificationFailure("simple", float(grid_s[i_s]), gain_s)
        log.warn(f"equilibrium at x={stats.x:.6f} not certified", _COMPONENT, error=error)
        raise error
    if gain_r > CERTIFICATION_TOLERANCE:
        error = CertificationFailure("reg", float(grid[i_r]), gain_r)
        log.warn(f"equilibrium at x={stats.x:.6f} not certified", _COMPONENT, error=error)
        raise error

    return CertificationReport(
        certified=True,
        max_improvement_s=gain_s,
        max_improvement_r=gain_r,
        best_deviation_s=float(grid_s[i_s]),
        best_deviation_r=float(grid[i_r]),
        grid_step=grid_step,
    )
