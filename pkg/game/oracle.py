"""
Brute-force cross-checks for the analytic solvers.

Nothing here is fast. Grid argmax best responses, grid epsilon-equilibria
and a Simpson quadrature of the welfare integral exist to test the closed
forms against.
"""

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
import numpy.typing as npt
from scipy.integrate import simpson

from game.best_response import reg_best_response, simple_best_response
from game.errors import InvalidParameter
from game.market_model import (
    MarketEnv,
    PowerStats,
    PriceProfile,
    RewardSchedule,
    derive_power_stats,
    per_kwh_regulation,
    revenue_arrays,
)
from utils.logging_helper import log

_COMPONENT = "oracle"

NASH_EPSILON = 1e-4
MIN_QUADRATURE_POINTS = 1_000
_MIN_SEGMENT_POINTS = 101


class Station(str, Enum):
    SIMPLE = "simple"
    REG = "reg"


@dataclass(frozen=True)
class PriceGrid:
    lo: float
    hi: float
    step: float

    def __post_init__(self) -> None:
        if not self.lo < self.hi:
            raise InvalidParameter("grid lo < hi", (self.lo, self.hi))
        if self.step <= 0:
            raise InvalidParameter("grid step > 0", self.step)

    def values(self) -> npt.NDArray[np.float64]:
        count = int(math.floor((self.hi - self.lo) / self.step + 1e-9)) + 1
        return self.lo + self.step * np.arange(count, dtype=np.float64)


@dataclass(frozen=True)
class NashGrid:
    t_s: PriceGrid
    t_r: PriceGrid


def grid_best_response(
    env: MarketEnv,
    stats: PowerStats,
    rw: RewardSchedule,
    station: Station,
    opponent_price: float,
    grid: PriceGrid,
) -> float:
    """Grid argmax of a station's revenue; ties go to the smaller price."""
    e_r = per_kwh_regulation(env, rw, stats)
    prices = grid.values()
    if station is Station.SIMPLE:
        prices = prices[prices >= 0.0]
        revenue, _ = revenue_arrays(env, stats, e_r, prices, opponent_price)
    else:
        _, revenue = revenue_arrays(env, stats, e_r, opponent_price, prices)
    return float(prices[int(np.argmax(revenue))])


def _integrand(
    env: MarketEnv, stats: PowerStats, prices: PriceProfile, theta: npt.NDArray[np.float64]
) -> npt.NDArray[np.float64]:
    surplus = np.maximum.reduce(
        [
            np.zeros_like(theta),
            theta * stats.p_a - prices.t_r * env.c_b,
            theta * env.p_d - prices.t_s * env.c_b,
        ]
    )
    return surplus * np.exp(-theta / env.theta_bar) / env.theta_bar


def welfare_quadrature(env: MarketEnv, stats: PowerStats, prices: PriceProfile, n_points: int = 100_000) -> float:
    """
    Average user utility by composite Simpson over [0, L] split at the
    integrand's kinks, plus the exact exponential tail beyond L.
    """
    if n_points < MIN_QUADRATURE_POINTS:
        raise InvalidParameter(f"n_points >= {MIN_QUADRATURE_POINTS}", n_points)

    kinks = [
        prices.t_r * env.c_b / stats.p_a,
        (prices.t_s - prices.t_r) * env.c_b / (env.p_d - stats.p_a),
        prices.t_s * env.c_b / env.p_d,
    ]
    kinks = sorted(k for k in kinks if k > 0.0)
    upper = max(20.0 * env.theta_bar, 2.0 * max(kinks, default=0.0))
    edges = [0.0, *kinks, upper]

    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        if b <= a:
            continue
        count = max(_MIN_SEGMENT_POINTS, int(n_points * (b - a) / upper))
        count += 1 - count % 2
        theta = np.linspace(a, b, count)
        total += float(simpson(_integrand(env, stats, prices, theta), x=theta))

    # beyond every kink the fixed-power option is the best choice
    tail = math.exp(-upper / env.theta_bar) * (env.p_d * (upper + env.theta_bar) - prices.t_s * env.c_b)
    return total + max(tail, 0.0)


def grid_nash(
    env: MarketEnv, rw: RewardSchedule, x: float, grid: NashGrid, epsilon: float = NASH_EPSILON
) -> list[PriceProfile]:
    """All grid profiles from which no station gains more than `epsilon` by a grid deviation."""
    stats = derive_power_stats(env, x)
    e_r = per_kwh_regulation(env, rw, stats)
    t_s = grid.t_s.values()
    t_s = t_s[t_s >= 0.0]
    t_r = grid.t_r.values()

    r_s, r_r = revenue_arrays(env, stats, e_r, t_s[:, np.newaxis], t_r[np.newaxis, :])
    stable_s = r_s >= r_s.max(axis=0, keepdims=True) - epsilon
    stable_r = r_r >= r_r.max(axis=1, keepdims=True) - epsilon
    rows, cols = np.nonzero(stable_s & stable_r)

    found = [PriceProfile(t_s=float(t_s[i]), t_r=float(t_r[j])) for i, j in zip(rows, cols)]
    log.debug(f"grid_nash x={x:.4f}: {len(found)} epsilon-equilibria on {r_s.size} cells", _COMPONENT)
    return found


def best_response_iteration(
    env: MarketEnv,
    rw: RewardSchedule,
    x: float,
    start: PriceProfile,
    iterations: int = 50,
    damping: float = 1.0,
) -> list[PriceProfile]:
    """
    Alternate best responses from `start`, moving each price a `damping`
    fraction of the way to its best response. Returns every visited profile.
    No convergence is claimed.
    """
    if not 0.0 < damping <= 1.0:
        raise InvalidParameter("0 < damping <= 1", damping)
    stats = derive_power_stats(env, x)
    e_r = per_kwh_regulation(env, rw, stats)

    path = [start]
    t_s, t_r = start.t_s, start.t_r
    for _ in range(iterations):
        t_s += damping * (simple_best_response(env, stats, t_r).t_s - t_s)
        t_r += damping * (reg_best_response(env, stats, e_r, t_s).t_r - t_r)
        path.append(PriceProfile(t_s=t_s, t_r=t_r))
    return path
