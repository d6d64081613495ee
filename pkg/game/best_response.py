"""
Best-response prices of both stations.

The fixed-power station's best response is closed form and has three
branches. The regulation station's response is one of three: exit at the
undercut boundary, price exactly zero, or the root of its strictly
decreasing revenue derivative, found by bisection.
"""

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

from scipy.optimize import bisect

from game.errors import BracketFailure
from game.market_model import MarketEnv, PowerStats, PriceProfile
from utils.logging_helper import log

_COMPONENT = "best_response"

XTOL = 1e-12
MAX_ITER = 200
_SHRINK = 1e-15
_EXP_CAP = 700.0


class SimpleBranch(str, Enum):
    INTERIOR = "interior"
    CAPPED = "capped"
    MATCHING = "matching"


class RegBranch(str, Enum):
    EXIT = "exit"
    ZERO = "zero"
    INTERIOR_ROOT = "interior_root"


class Side(str, Enum):
    """Which one-sided limit to take when T_r is exactly zero."""

    MINUS = "-"
    PLUS = "+"


@dataclass(frozen=True)
class SimpleBestResponse:
    t_s: float
    branch: SimpleBranch


@dataclass(frozen=True)
class RegBestResponse:
    t_r: float
    branch: RegBranch
    foc_residual: Optional[float] = None


def _exp(arg: float) -> float:
    return math.exp(min(arg, _EXP_CAP))


def simple_thresholds(env: MarketEnv, stats: PowerStats) -> tuple[float, float]:
    """Opponent prices at which the fixed-power response switches branch."""
    ratio = stats.p_a / env.p_d
    lower = (env.t + (env.p_d - stats.p_a) * env.theta_bar / env.c_b) * ratio
    upper = (env.t + env.p_d * env.theta_bar / env.c_b) * ratio
    return lower, upper


def simple_best_response(env: MarketEnv, stats: PowerStats, t_r: float) -> SimpleBestResponse:
    lower, upper = simple_thresholds(env, stats)
    if t_r < lower:
        return SimpleBestResponse(env.t + (env.p_d - stats.p_a) * env.theta_bar / env.c_b, SimpleBranch.INTERIOR)
    if t_r > upper:
        return SimpleBestResponse(env.t + env.p_d * env.theta_bar / env.c_b, SimpleBranch.CAPPED)
    return SimpleBestResponse(t_r * env.p_d / stats.p_a, SimpleBranch.MATCHING)


def er_thresholds(env: MarketEnv, stats: PowerStats, t_s: float) -> tuple[float, float]:
    """
    E_r values at which the regulation station's derivative vanishes at
    T_r = 0+ (first) and T_r = 0- (second). Between them the best response is 0.
    """
    gap = env.p_d - stats.p_a
    z = env.c_b * t_s / (env.theta_bar * gap)
    q = env.p_d / stats.p_a - 1.0
    decay = math.exp(-z)
    e_r1 = env.theta_bar * gap * (-math.expm1(-z)) / (env.c_b * (q + decay))
    e_r2 = env.theta_bar * gap * math.expm1(min(z, _EXP_CAP)) / env.c_b
    return e_r1, e_r2


def _derivative(env: MarketEnv, stats: PowerStats, e_r: float, t_s: float, t_r: float, side: Side) -> float:
    scale = env.c_b / env.theta_bar
    gap = env.p_d - stats.p_a
    margin = scale * (t_r + e_r)
    k_m = _exp(-scale * (t_s - t_r) / gap)
    if t_r < 0.0 or (t_r == 0.0 and side is Side.MINUS):
        return env.c_b * (1.0 - k_m * (1.0 + margin / gap))
    k_r = _exp(-scale * t_r / stats.p_a)
    return env.c_b * (k_r * (1.0 - margin / stats.p_a) - k_m * (1.0 + margin / gap))


def reg_revenue_derivative(
    env: MarketEnv, stats: PowerStats, e_r: float, prices: PriceProfile, side: Side = Side.PLUS
) -> float:
    """dR_r/dT_r at `prices`. `side` only matters at T_r == 0."""
    return _derivative(env, stats, e_r, prices.t_s, prices.t_r, side)


def reg_bracket(env: MarketEnv, stats: PowerStats, e_r: float, t_s: float) -> tuple[float, float]:
    lo = min(0.0, -e_r)
    hi = max(0.0, min(env.theta_bar * stats.p_a / env.c_b - e_r, stats.p_a / env.p_d * t_s))
    return lo, hi


def reg_best_response(env: MarketEnv, stats: PowerStats, e_r: float, t_s: float) -> RegBestResponse:
    """
    Raises:
        BracketFailure: derivative does not change sign on the interior bracket
    """
    if t_s <= -e_r * env.p_d / stats.p_a:
        return RegBestResponse(stats.p_a / env.p_d * t_s, RegBranch.EXIT)

    e_r1, e_r2 = er_thresholds(env, stats, t_s)
    if e_r1 <= e_r <= e_r2:
        return RegBestResponse(0.0, RegBranch.ZERO)

    lo, hi = reg_bracket(env, stats, e_r, t_s)
    shrink = _SHRINK * max(abs(lo), abs(hi), env.theta_bar * stats.p_a / env.c_b)
    lo, hi = lo + shrink, hi - shrink

    def foc(t_r: float) -> float:
        return _derivative(env, stats, e_r, t_s, t_r, Side.PLUS)

    f_lo, f_hi = foc(lo), foc(hi)
    if not (lo < hi and f_lo > 0.0 > f_hi):
        error = BracketFailure(lo, hi, f_lo, f_hi)
        log.error(f"interior bracket failed at e_r={e_r:.6g}, t_s={t_s:.6g}", _COMPONENT, error=error)
        raise error

    root = float(bisect(foc, lo, hi, xtol=XTOL, maxiter=MAX_ITER))
    residual = foc(root)
    log.debug(f"interior root t_r={root:.9f} residual={residual:.3g}", _COMPONENT)
    return RegBestResponse(root, RegBranch.INTERIOR_ROOT, residual)
