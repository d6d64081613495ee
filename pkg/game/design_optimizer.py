"""
Choice of the regulation station's default power and the monopoly benchmark.

`optimize_x` scans x = p_n / p_d for the equilibrium revenue of the
regulation station and polishes the best cell with bounded Brent search.
`solve_monopoly` lets one owner set both prices and x jointly: a vectorised
price grid for every x, then Powell search from the best cell.
"""

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import numpy.typing as npt
from scipy.optimize import minimize, minimize_scalar

from game.equilibrium import EquilibriumOutcome, outcome_at
from game.errors import AllInfeasible, ChargingGameError
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

_COMPONENT = "design_optimizer"

DEFAULT_X_STEP = 1e-3
REFINE_TOL = 1e-6
MONOPOLY_PRICE_STEP = 5e-4
MONOPOLY_X_STEP = 1e-2
MONOPOLY_TR_FLOOR = -0.01
POWELL_RESTARTS = 3
# scipy minimisers need finite values; designs without a valid P_A score this revenue
_INFEASIBLE_REVENUE = -1e6


@dataclass(frozen=True)
class DesignResult:
    x_star: float
    outcome: EquilibriumOutcome
    scan: list[tuple[float, float]] = field(default_factory=list)


@dataclass(frozen=True)
class MonopolyResult:
    prices: PriceProfile
    x_star: float
    total_revenue: float
    shares: MarketShares
    welfare: float
    r_s: float
    r_r: float
    e_r: float

    @property
    def social_welfare(self) -> float:
        return self.total_revenue + self.welfare


@dataclass(frozen=True)
class ComparisonRow:
    theta_bar: float
    equilibrium: EquilibriumOutcome
    monopoly: MonopolyResult


def x_grid(step: float) -> npt.NDArray[np.float64]:
    """{0, step, ..., 1} with both ends included."""
    count = int(round(1.0 / step))
    return np.linspace(0.0, 1.0, count + 1)


def _stats_or_none(env: MarketEnv, x: float) -> Optional[PowerStats]:
    try:
        stats = derive_power_stats(env, x)
    except ChargingGameError:
        return None
    return stats if stats.p_bar > 0.0 else None


def _equilibrium_or_none(env: MarketEnv, rw: RewardSchedule, x: float) -> Optional[EquilibriumOutcome]:
    stats = _stats_or_none(env, x)
    if stats is None:
        return None
    return outcome_at(env, stats, per_kwh_regulation(env, rw, stats))


def optimize_x(
    env: MarketEnv, rw: RewardSchedule, x_step: float = DEFAULT_X_STEP, tol: float = REFINE_TOL
) -> DesignResult:
    """
    Design x maximising the regulation station's equilibrium revenue.

    Raises:
        AllInfeasible: no x gives a positive equilibrium revenue
    """
    scan: list[tuple[float, float]] = []
    outcomes: dict[float, EquilibriumOutcome] = {}
    for x in x_grid(x_step):
        outcome = _equilibrium_or_none(env, rw, float(x))
        if outcome is None:
            continue
        scan.append((float(x), outcome.r_r))
        outcomes[float(x)] = outcome

    best: Optional[tuple[float, float]] = None
    for x, r_r in scan:
        if best is None or r_r >= best[1]:
            best = (x, r_r)
    if best is None or best[1] <= 0.0:
        error = AllInfeasible("no design x yields positive regulation revenue")
        log.warn(f"t={env.t} theta_bar={env.theta_bar} r_u={rw.r_u} r_d={rw.r_d}", _COMPONENT, error=error)
        raise error

    x_best, r_best = best

    def neg_revenue(x: float) -> float:
        outcome = _equilibrium_or_none(env, rw, float(x))
        return -(_INFEASIBLE_REVENUE if outcome is None else outcome.r_r)

    # the bracket ends are grid samples already in `outcomes`, so an edge optimum is kept exactly
    lo, hi = max(0.0, x_best - x_step), min(1.0, x_best + x_step)
    if hi > lo:
        res = minimize_scalar(neg_revenue, bounds=(lo, hi), method="bounded", options={"xatol": tol})
        x_refined, r_refined = float(res.x), -float(res.fun)
        if r_refined > r_best:
            x_best = x_refined
            outcomes[x_best] = outcome_at(env, derive_power_stats(env, x_best), _e_r(env, rw, x_best))

    log.info(f"x*={x_best:.6f} R_r={outcomes[x_best].r_r:.6f} over {len(scan)} samples", _COMPONENT)
    return DesignResult(x_star=x_best, outcome=outcomes[x_best], scan=scan)


def _e_r(env: MarketEnv, rw: RewardSchedule, x: float) -> float:
    return per_kwh_regulation(env, rw, derive_power_stats(env, x))


def _price_axis(lo: float, hi: float, step: float) -> npt.NDArray[np.float64]:
    count = int(np.floor((hi - lo) / step + 1e-9)) + 1
    return lo + step * np.arange(count, dtype=np.float64)


def monopoly_price_box(env: MarketEnv, e_r_max: float) -> tuple[float, float, float]:
    """(T_s upper bound, T_r lower bound, T_r upper bound) of the monopoly search."""
    upper = env.t + 2.0 * env.theta_bar * env.p_d / env.c_b
    return upper, min(MONOPOLY_TR_FLOOR, MONOPOLY_TR_FLOOR - e_r_max), upper


def monopoly_profile(
    env: MarketEnv, rw: RewardSchedule, xs: Sequence[float], price_step: float = MONOPOLY_PRICE_STEP
) -> list[tuple[float, float, float, float]]:
    """
    Best grid point (x, T_s, T_r, R_s + R_r) for every feasible x in `xs`.
    """
    feasible: list[tuple[float, PowerStats, float]] = []
    for x in xs:
        stats = _stats_or_none(env, float(x))
        if stats is not None:
            feasible.append((float(x), stats, per_kwh_regulation(env, rw, stats)))
    if not feasible:
        return []

    ts_hi, tr_lo, tr_hi = monopoly_price_box(env, max(max(e for _, _, e in feasible), 0.0))
    t_s = _price_axis(0.0, ts_hi, price_step)[:, np.newaxis]
    t_r = _price_axis(tr_lo, tr_hi, price_step)[np.newaxis, :]

    profile = []
    for x, stats, e_r in feasible:
        r_s, r_r = revenue_arrays(env, stats, e_r, t_s, t_r)
        total = r_s + r_r
        i, j = np.unravel_index(int(np.argmax(total)), total.shape)
        profile.append((x, float(t_s[i, 0]), float(t_r[0, j]), float(total[i, j])))
    return profile


def solve_monopoly(
    env: MarketEnv,
    rw: RewardSchedule,
    price_step: float = MONOPOLY_PRICE_STEP,
    x_step: float = MONOPOLY_X_STEP,
    tol: float = REFINE_TOL,
) -> MonopolyResult:
    """Joint (T_s, T_r, x) maximiser of total station revenue under a single owner."""
    profile = monopoly_profile(env, rw, x_grid(x_step), price_step)
    if not profile:
        raise AllInfeasible("no design x has a valid fluctuation-adjusted power")

    x0, ts0, tr0, best_grid = profile[0]
    for x, ts, tr, total in profile:
        if total >= best_grid:
            x0, ts0, tr0, best_grid = x, ts, tr, total

    e_r_max = max(0.0, max(_e_r(env, rw, x) for x, _, _, _ in profile))
    ts_hi, tr_lo, tr_hi = monopoly_price_box(env, e_r_max)

    def neg_total(point: npt.NDArray[np.float64]) -> float:
        t_s, t_r, x = (float(v) for v in point)
        stats = _stats_or_none(env, x)
        if stats is None:
            return -_INFEASIBLE_REVENUE
        r_s, r_r = revenue_arrays(env, stats, per_kwh_regulation(env, rw, stats), t_s, t_r)
        return -float(r_s + r_r)

    bounds = [(0.0, ts_hi), (tr_lo, tr_hi), (0.0, 1.0)]
    point, total = np.array([ts0, tr0, x0]), best_grid
    # restart from the previous answer until the total stops improving
    for _ in range(POWELL_RESTARTS):
        res = minimize(
            neg_total, point, method="Powell", bounds=bounds, options={"xtol": tol * 1e-3, "ftol": 1e-14}
        )
        if -float(res.fun) <= total + 1e-15:
            break
        point, total = np.asarray(res.x, dtype=np.float64), -float(res.fun)
    t_s, t_r, x = (float(v) for v in point)
    stats = derive_power_stats(env, x)
    e_r = per_kwh_regulation(env, rw, stats)
    prices = PriceProfile(t_s=t_s, t_r=t_r)
    r_s, r_r = revenues_for(env, stats, e_r, prices)
    log.info(f"monopoly x={x:.6f} T_s={t_s:.6f} T_r={t_r:.6f} total={total:.6f}", _COMPONENT)
    return MonopolyResult(
        prices=prices,
        x_star=x,
        total_revenue=r_s + r_r,
        shares=market_shares(env, stats, prices),
        welfare=user_welfare(env, stats, prices),
        r_s=r_s,
        r_r=r_r,
        e_r=e_r,
    )


def social_welfare(outcome: EquilibriumOutcome) -> float:
    return outcome.social_welfare


def compare_sweep(
    env: MarketEnv,
    rw: RewardSchedule,
    thetas: Sequence[float],
    x_step: float = DEFAULT_X_STEP,
    price_step: float = MONOPOLY_PRICE_STEP,
    monopoly_x_step: float = MONOPOLY_X_STEP,
) -> list[ComparisonRow]:
    """Equilibrium with optimised x against the monopoly benchmark for each theta_bar."""
    rows = []
    for theta in thetas:
        scenario = env.replace(theta_bar=float(theta))
        design = optimize_x(scenario, rw, x_step=x_step)
        monopoly = solve_monopoly(scenario, rw, price_step=price_step, x_step=monopoly_x_step)
        rows.append(ComparisonRow(theta_bar=float(theta), equilibrium=design.outcome, monopoly=monopoly))
    return rows
