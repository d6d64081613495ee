"""
Model quantities of the two-station charging market.

Symbols follow the usual notation: t wholesale price, theta_bar mean user
sensitivity, c_b energy demand per EV, gamma aversion to power variation,
rho_u / rho_d regulation-up / -down probabilities per slot, p_d maximum power.
A regulation station charges at p_n = x * p_d outside regulation slots.

Share and revenue evaluators accept numpy arrays for either price and
broadcast, so grid scans and scalar calls share one code path.
"""

import dataclasses
import math
from dataclasses import dataclass
from typing import Union

import numpy as np
import numpy.typing as npt

from game.errors import InvalidParameter, PAInvalid, ZeroMeanPower
from utils.logging_helper import log

ArrayLike = Union[float, npt.NDArray[np.float64]]

_COMPONENT = "market_model"


def _require(condition: bool, invariant: str, value: object = None) -> None:
    if not condition:
        raise InvalidParameter(invariant, value)


def _finite(*values: float) -> bool:
    return all(isinstance(v, (int, float)) and math.isfinite(v) for v in values)


@dataclass(frozen=True)
class MarketEnv:
    t: float
    theta_bar: float
    c_b: float
    gamma: float
    rho_u: float
    rho_d: float
    p_d: float

    def __post_init__(self) -> None:
        _require(
            _finite(self.t, self.theta_bar, self.c_b, self.gamma, self.rho_u, self.rho_d, self.p_d),
            "all MarketEnv fields must be finite numbers",
        )
        _require(self.t > 0, "t > 0", self.t)
        _require(self.theta_bar > 0, "theta_bar > 0", self.theta_bar)
        _require(self.c_b > 0, "c_b > 0", self.c_b)
        _require(self.gamma >= 0, "gamma >= 0", self.gamma)
        _require(self.p_d > 0, "p_d > 0", self.p_d)
        _require(self.rho_u >= 0 and self.rho_d >= 0, "rho_u >= 0 and rho_d >= 0", (self.rho_u, self.rho_d))
        _require(self.rho_u + self.rho_d <= 1, "rho_u + rho_d <= 1", self.rho_u + self.rho_d)

    def replace(self, **changes: float) -> "MarketEnv":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class RewardSchedule:
    """Regulation-up remuneration ratio, regulation-down discount ratio and slot length (hours)."""

    r_u: float
    r_d: float
    delta: float = 0.1

    def __post_init__(self) -> None:
        _require(_finite(self.r_u, self.r_d, self.delta), "all RewardSchedule fields must be finite numbers")
        _require(self.r_u >= 0, "r_u >= 0", self.r_u)
        _require(self.r_d >= 0, "r_d >= 0", self.r_d)
        _require(self.delta > 0, "delta > 0", self.delta)
        if self.discount_above_one:
            log.warn(f"r_d={self.r_d} > 1 is outside the normal range [0, 1]", _COMPONENT)

    @property
    def discount_above_one(self) -> bool:
        return self.r_d > 1

    def replace(self, **changes: float) -> "RewardSchedule":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class PowerStats:
    x: float
    p_n: float
    p_bar: float
    delta_p: float
    p_a: float


@dataclass(frozen=True)
class PriceProfile:
    t_s: float
    t_r: float

    def __post_init__(self) -> None:
        _require(_finite(self.t_s, self.t_r), "prices must be finite", (self.t_s, self.t_r))
        _require(self.t_s >= 0, "t_s >= 0", self.t_s)


@dataclass(frozen=True)
class MarketShares:
    alpha_s: float
    alpha_r: float
    alpha_none: float


def power_stat_arrays(
    env: MarketEnv, xs: ArrayLike
) -> tuple[npt.NDArray[np.float64], npt.NDArray[np.float64], npt.NDArray[np.float64], npt.NDArray[np.float64]]:
    """(p_n, p_bar, delta_p, p_a) for an array of designs; no validity checks."""
    xs = np.asarray(xs, dtype=np.float64)
    rho_n = 1.0 - env.rho_u - env.rho_d
    p_n = xs * env.p_d
    p_bar = env.rho_d * env.p_d + rho_n * p_n
    variance = env.rho_u * p_bar**2 + env.rho_d * (env.p_d - p_bar) ** 2 + rho_n * (p_n - p_bar) ** 2
    delta_p = np.sqrt(np.maximum(variance, 0.0))
    return p_n, p_bar, delta_p, p_bar - env.gamma * delta_p


def derive_power_stats(env: MarketEnv, x: float) -> PowerStats:
    """
    Mean power, its standard deviation and the fluctuation-adjusted power P_A
    for a regulation station with default power x * p_d.

    Raises:
        InvalidParameter: x outside [0, 1]
        PAInvalid: P_A <= 0 or P_A >= p_d
    """
    _require(_finite(x) and 0.0 <= x <= 1.0, "0 <= x <= 1", x)
    p_n, p_bar, delta_p, p_a = (float(v) for v in power_stat_arrays(env, x))
    if not 0.0 < p_a < env.p_d:
        raise PAInvalid(x, p_a, env.p_d)
    return PowerStats(x=x, p_n=p_n, p_bar=p_bar, delta_p=delta_p, p_a=p_a)


def slot_revenue(env: MarketEnv, rw: RewardSchedule, stats: PowerStats) -> float:
    """Expected net station revenue per slot (EUR, usually negative)."""
    bracket = (
        env.rho_u * rw.r_u * stats.p_n - env.rho_d * (1.0 - rw.r_d) * (env.p_d - stats.p_n) - stats.p_n
    )
    return env.t * rw.delta * bracket


def per_kwh_regulation(env: MarketEnv, rw: RewardSchedule, stats: PowerStats) -> float:
    """
    Net regulation remuneration E_r per delivered kWh.

    Raises:
        ZeroMeanPower: mean power is zero (rho_d = 0 and x = 0)
    """
    if stats.p_bar <= 0.0:
        raise ZeroMeanPower(f"mean power is zero at x={stats.x}")
    x = stats.x
    bracket = env.rho_u * rw.r_u * x - env.rho_d * (1.0 - rw.r_d) * (1.0 - x) - x
    return env.t * bracket * env.p_d / stats.p_bar


def share_arrays(
    env: MarketEnv, stats: PowerStats, t_s: ArrayLike, t_r: ArrayLike
) -> tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
    """
    (alpha_s, alpha_r) for broadcastable price arrays.

    Users with sensitivity theta ~ Exp(mean theta_bar) pick the option with
    the highest theta * power - price * c_b, or abstain if that is negative.
    """
    t_s = np.asarray(t_s, dtype=np.float64)
    t_r = np.asarray(t_r, dtype=np.float64)
    scale = env.c_b / env.theta_bar
    gap = env.p_d - stats.p_a

    with np.errstate(over="ignore", invalid="ignore"):
        k_r = np.exp(-scale * t_r / stats.p_a)
        k_m = np.exp(-scale * (t_s - t_r) / gap)
        k_s = np.exp(-scale * t_s / env.p_d)

        undercut = t_r * env.p_d <= stats.p_a * t_s
        alpha_r = np.where(t_r < 0.0, 1.0 - k_m, np.where(undercut, k_r - k_m, 0.0))
        alpha_s = np.where(undercut, k_m, k_s)

    alpha_r = np.clip(alpha_r, 0.0, 1.0)
    alpha_s = np.clip(alpha_s, 0.0, 1.0 - alpha_r)
    return alpha_s, alpha_r


def revenue_arrays(
    env: MarketEnv, stats: PowerStats, e_r: float, t_s: ArrayLike, t_r: ArrayLike
) -> tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
    """(R_s, R_r) per EV for broadcastable price arrays, given E_r."""
    alpha_s, alpha_r = share_arrays(env, stats, t_s, t_r)
    r_s = env.c_b * (np.asarray(t_s, dtype=np.float64) - env.t) * alpha_s
    r_r = env.c_b * (np.asarray(t_r, dtype=np.float64) + e_r) * alpha_r
    return r_s, r_r


def welfare_array(env: MarketEnv, stats: PowerStats, t_s: ArrayLike, t_r: ArrayLike) -> npt.NDArray[np.float64]:
    """Average user utility per EV; the T_r < 0 branch clamps the lowest sensitivity at zero."""
    alpha_s, alpha_r = share_arrays(env, stats, t_s, t_r)
    t_r = np.asarray(t_r, dtype=np.float64)
    utility = env.theta_bar * (alpha_r * stats.p_a + alpha_s * env.p_d)
    return utility - np.minimum(t_r, 0.0) * env.c_b


def market_shares(env: MarketEnv, stats: PowerStats, prices: PriceProfile) -> MarketShares:
    alpha_s, alpha_r = share_arrays(env, stats, prices.t_s, prices.t_r)
    a_s, a_r = float(alpha_s), float(alpha_r)
    return MarketShares(alpha_s=a_s, alpha_r=a_r, alpha_none=max(0.0, 1.0 - a_s - a_r))


def revenues_for(env: MarketEnv, stats: PowerStats, e_r: float, prices: PriceProfile) -> tuple[float, float]:
    r_s, r_r = revenue_arrays(env, stats, e_r, prices.t_s, prices.t_r)
    return float(r_s), float(r_r)


def station_revenues(
    env: MarketEnv, stats: PowerStats, rw: RewardSchedule, prices: PriceProfile
) -> tuple[float, float]:
    """(R_s, R_r) in EUR per EV at the given prices."""
    return revenues_for(env, stats, per_kwh_regulation(env, rw, stats), prices)


def user_welfare(env: MarketEnv, stats: PowerStats, prices: PriceProfile) -> float:
    return float(welfare_array(env, stats, prices.t_s, prices.t_r))
