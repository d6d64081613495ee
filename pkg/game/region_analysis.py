"""
Viability and optimal design over the (r_u, r_d) reward plane.

A reward pair is viable for competition when some design x lets the
regulation station earn a positive equilibrium revenue, and viable for a
monopoly when some x makes regulation charging profitable for a single
owner. Viable cells are further labelled by where the optimal x lies.
"""

import io
import math
import re
from dataclasses import dataclass, field
from enum import Enum
from functools import partial
from pathlib import Path
from typing import Optional, TextIO, Union

import numpy as np
import numpy.typing as npt
import pandas as pd
from joblib import Parallel, delayed

from game.design_optimizer import monopoly_profile, optimize_x, x_grid
from game.errors import AllInfeasible, InvalidParameter, ParseError
from game.market_model import MarketEnv, RewardSchedule, power_stat_arrays
from utils.logging_helper import log

_COMPONENT = "region_analysis"

VIABILITY_X_STEP = 1e-3
SCAN_X_STEP = 1e-2
SCAN_PRICE_STEP = 2e-3
_EDGE_TOL = 1e-6

CSV_FLOAT_FORMAT = "%.6f"
REGION_COLUMNS = ["r_u", "r_d", "mode", "status", "x_star"]
OVERLAY_COLUMNS = ["label", *REGION_COLUMNS]
REWARD_COLUMNS = ["r_u", "r_d", "label"]


class Mode(str, Enum):
    COMPETITION = "competition"
    MONOPOLY = "monopoly"


class CellStatus(str, Enum):
    INFEASIBLE = "infeasible"
    OPTX_ZERO = "optx_zero"
    OPTX_ONE = "optx_one"
    OPTX_INTERIOR = "optx_interior"


class MonopolySign(str, Enum):
    """Sign of the mean-power term in the monopoly viability inequality."""

    CORRECTED = "corrected"
    LITERAL = "literal"


@dataclass(frozen=True)
class RegionCell:
    r_u: float
    r_d: float
    mode: Mode
    status: CellStatus
    x_star: float = math.nan


@dataclass(frozen=True)
class RewardSample:
    r_u: float
    r_d: float
    label: str = ""


@dataclass(frozen=True)
class RegionGrid:
    ru_lo: float = 0.0
    ru_hi: float = 2.5
    ru_step: float = 0.05
    rd_lo: float = 0.0
    rd_hi: float = 1.0
    rd_step: float = 0.02

    def __post_init__(self) -> None:
        if self.ru_step <= 0 or self.rd_step <= 0:
            raise InvalidParameter("grid steps must be positive", (self.ru_step, self.rd_step))
        if self.ru_hi < self.ru_lo or self.rd_hi < self.rd_lo:
            raise InvalidParameter("grid ranges must satisfy lo <= hi")


@dataclass(frozen=True)
class RegionScan:
    cells: list[RegionCell]
    metadata: dict[str, str] = field(default_factory=dict)


def inclusive_range(lo: float, hi: float, step: float) -> list[float]:
    """lo, lo+step, ... up to hi; hi is included when (hi-lo)/step is integral within 1e-9."""
    if step <= 0:
        raise InvalidParameter("range step > 0", step)
    if hi < lo:
        raise InvalidParameter("range lo <= hi", (lo, hi))
    ratio = (hi - lo) / step
    count = int(math.floor(ratio + 1e-9)) + 1
    return [round(lo + i * step, 12) for i in range(count)]


def _design_arrays(
    env: MarketEnv, xs: npt.NDArray[np.float64]
) -> tuple[npt.NDArray[np.float64], npt.NDArray[np.float64], npt.NDArray[np.bool_]]:
    """(p_bar, p_a, valid) over an x grid; valid matches the checks of derive_power_stats."""
    _, p_bar, _, p_a = power_stat_arrays(env, xs)
    valid = (p_a > 0.0) & (p_a < env.p_d) & (p_bar > 0.0)
    return p_bar, p_a, valid


def _reward_bracket(env: MarketEnv, rw: RewardSchedule, xs: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
    return env.rho_u * rw.r_u * xs - env.rho_d * (1.0 - rw.r_d) * (1.0 - xs) - xs


def competition_margin(
    env: MarketEnv, rw: RewardSchedule, xs: npt.NDArray[np.float64]
) -> npt.NDArray[np.float64]:
    """E_r(x) minus the N1 threshold; -inf where x is not a valid design."""
    p_bar, p_a, valid = _design_arrays(env, xs)
    with np.errstate(divide="ignore", invalid="ignore"):
        e_r = env.t * _reward_bracket(env, rw, xs) * env.p_d / p_bar
        threshold = -(p_a / env.p_d) * (env.t + (env.p_d - p_a) * env.theta_bar / env.c_b)
        margin = e_r - threshold
    return np.where(valid, margin, -np.inf)


def monopoly_margin(
    env: MarketEnv, rw: RewardSchedule, xs: npt.NDArray[np.float64], sign: MonopolySign = MonopolySign.CORRECTED
) -> npt.NDArray[np.float64]:
    p_bar, p_a, valid = _design_arrays(env, xs)
    direction = 1.0 if sign is MonopolySign.CORRECTED else -1.0
    margin = _reward_bracket(env, rw, xs) + direction * p_bar * p_a / env.p_d**2
    return np.where(valid, margin, -np.inf)


def _viable(margin: npt.NDArray[np.float64], xs: npt.NDArray[np.float64]) -> tuple[bool, Optional[float]]:
    i = int(np.argmax(margin))
    if margin[i] > 0.0:
        return True, float(xs[i])
    return False, None


def competition_viable(
    env: MarketEnv, rw: RewardSchedule, x_step: float = VIABILITY_X_STEP
) -> tuple[bool, Optional[float]]:
    """(viable, first maximising x of the margin) under competition."""
    xs = x_grid(x_step)
    return _viable(competition_margin(env, rw, xs), xs)


def monopoly_viable(
    env: MarketEnv,
    rw: RewardSchedule,
    x_step: float = VIABILITY_X_STEP,
    sign: MonopolySign = MonopolySign.CORRECTED,
) -> tuple[bool, Optional[float]]:
    xs = x_grid(x_step)
    return _viable(monopoly_margin(env, rw, xs, sign), xs)


def _status_for(x_star: float) -> CellStatus:
    if x_star <= _EDGE_TOL:
        return CellStatus.OPTX_ZERO
    if x_star >= 1.0 - _EDGE_TOL:
        return CellStatus.OPTX_ONE
    return CellStatus.OPTX_INTERIOR


def _monopoly_x_star(env: MarketEnv, rw: RewardSchedule, x_step: float, price_step: float) -> Optional[float]:
    best: Optional[tuple[float, float]] = None
    for x, _, _, total in monopoly_profile(env, rw, x_grid(x_step), price_step):
        if best is None or total >= best[1]:
            best = (x, total)
    return None if best is None else best[0]


def classify_cell(
    env: MarketEnv,
    rw: RewardSchedule,
    mode: Mode,
    x_step: float = SCAN_X_STEP,
    price_step: float = SCAN_PRICE_STEP,
    sign: MonopolySign = MonopolySign.CORRECTED,
) -> RegionCell:
    if mode is Mode.COMPETITION:
        viable, witness = competition_viable(env, rw)
    else:
        viable, witness = monopoly_viable(env, rw, sign=sign)
    if not viable or witness is None:
        return RegionCell(rw.r_u, rw.r_d, mode, CellStatus.INFEASIBLE)

    x_star: Optional[float]
    if mode is Mode.COMPETITION:
        try:
            x_star = optimize_x(env, rw, x_step=x_step).x_star
        except AllInfeasible:
            # viable only between coarse grid points
            x_star = witness
    else:
        x_star = _monopoly_x_star(env, rw, x_step, price_step)
        if x_star is None:
            x_star = witness
    return RegionCell(rw.r_u, rw.r_d, mode, _status_for(x_star), x_star)


def _classify_pair(
    pair: tuple[float, float],
    env: MarketEnv,
    delta: float,
    mode: Mode,
    x_step: float,
    price_step: float,
    sign: MonopolySign,
) -> RegionCell:
    r_u, r_d = pair
    return classify_cell(env, RewardSchedule(r_u=r_u, r_d=r_d, delta=delta), mode, x_step, price_step, sign)


def scan_region(
    env: MarketEnv,
    grid: RegionGrid,
    mode: Mode,
    delta: float = 0.1,
    x_step: float = SCAN_X_STEP,
    price_step: float = SCAN_PRICE_STEP,
    sign: MonopolySign = MonopolySign.CORRECTED,
    workers: int = 1,
) -> RegionScan:
    """Classify every cell; output is row-major with r_d outer and r_u inner."""
    pairs = [
        (r_u, r_d)
        for r_d in inclusive_range(grid.rd_lo, grid.rd_hi, grid.rd_step)
        for r_u in inclusive_range(grid.ru_lo, grid.ru_hi, grid.ru_step)
    ]
    task = partial(
        _classify_pair, env=env, delta=delta, mode=mode, x_step=x_step, price_step=price_step, sign=sign
    )
    log.info(f"scanning {len(pairs)} cells mode={mode.value} workers={workers}", _COMPONENT)
    if workers > 1:
        cells: list[RegionCell] = Parallel(n_jobs=workers)(delayed(task)(pair) for pair in pairs)
    else:
        cells = [task(pair) for pair in pairs]

    metadata = {"mode": mode.value, "x_step": f"{x_step:g}"}
    if mode is Mode.MONOPOLY:
        metadata["monopoly_condition_sign"] = sign.value
        log.info(f"monopoly viability evaluated with {sign.value} sign", _COMPONENT)
    return RegionScan(cells=cells, metadata=metadata)


def overlay_samples(
    env: MarketEnv,
    samples: list[RewardSample],
    mode: Mode,
    delta: float = 0.1,
    x_step: float = SCAN_X_STEP,
    price_step: float = SCAN_PRICE_STEP,
    sign: MonopolySign = MonopolySign.CORRECTED,
) -> list[tuple[RewardSample, RegionCell]]:
    return [
        (sample, _classify_pair((sample.r_u, sample.r_d), env, delta, mode, x_step, price_step, sign))
        for sample in samples
    ]


def cells_frame(cells: list[RegionCell]) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "r_u": [c.r_u for c in cells],
            "r_d": [c.r_d for c in cells],
            "mode": [c.mode.value for c in cells],
            "status": [c.status.value for c in cells],
            "x_star": [c.x_star for c in cells],
        },
        columns=REGION_COLUMNS,
    )


def write_region_csv(cells: list[RegionCell], target: Union[str, Path, TextIO]) -> None:
    cells_frame(cells).to_csv(target, index=False, float_format=CSV_FLOAT_FORMAT, na_rep="nan", lineterminator="\n")


def write_overlay_csv(rows: list[tuple[RewardSample, RegionCell]], target: Union[str, Path, TextIO]) -> None:
    frame = cells_frame([cell for _, cell in rows])
    frame.insert(0, "label", [sample.label for sample, _ in rows])
    frame.to_csv(target, index=False, float_format=CSV_FLOAT_FORMAT, na_rep="nan", lineterminator="\n")


def read_region_csv(source: Union[str, Path, TextIO]) -> list[RegionCell]:
    """
    Raises:
        ParseError: header or enum values do not match the region schema
    """
    frame = pd.read_csv(source)
    if list(frame.columns) != REGION_COLUMNS:
        raise ParseError(f"expected header {','.join(REGION_COLUMNS)}", line=1)
    cells = []
    for offset, row in enumerate(frame.itertuples(index=False), start=2):
        try:
            cells.append(
                RegionCell(float(row.r_u), float(row.r_d), Mode(row.mode), CellStatus(row.status), float(row.x_star))
            )
        except ValueError as e:
            raise ParseError(str(e), line=offset) from e
    return cells


def _data_lines(text: str) -> list[tuple[int, str]]:
    """(line number, text) of every line that is neither blank nor a `#` comment."""
    lines = enumerate(text.splitlines(), start=1)
    return [(n, raw) for n, raw in lines if raw.strip() and not raw.lstrip().startswith("#")]


def _tokenizer_line(error: Exception, numbered: list[tuple[int, str]]) -> Optional[int]:
    match = re.search(r"line (\d+)", str(error))
    if match is None or not 0 < int(match.group(1)) <= len(numbered):
        return None
    return numbered[int(match.group(1)) - 1][0]


def load_rewards_csv(source: Union[str, Path, TextIO]) -> list[RewardSample]:
    """
    Read `r_u,r_d[,label]` reward samples in file order.

    Blank lines and `#` comments are skipped. The first remaining line must
    be the header. Labels may be quoted to carry commas.

    Raises:
        ParseError: bad header or malformed numeric field, with its line number
    """
    text = Path(source).read_text(encoding="utf-8") if isinstance(source, (str, Path)) else source.read()
    numbered = _data_lines(text)
    if not numbered:
        raise ParseError("missing header r_u,r_d[,label]")

    try:
        frame = pd.read_csv(
            io.StringIO("\n".join(raw for _, raw in numbered)),
            dtype=str,
            keep_default_na=False,
            skipinitialspace=True,
            index_col=False,
        )
    except pd.errors.ParserError as e:
        raise ParseError(f"malformed reward row: {e}", line=_tokenizer_line(e, numbered)) from e

    columns = [str(c).strip() for c in frame.columns]
    if columns not in (REWARD_COLUMNS[:2], REWARD_COLUMNS):
        raise ParseError("header must be r_u,r_d[,label]", line=numbered[0][0])
    frame.columns = pd.Index(columns)
    lines = [n for n, _ in numbered[1:]]
    if len(lines) != len(frame):
        raise ParseError("quoted labels may not span lines", line=numbered[0][0])

    r_u = pd.to_numeric(frame["r_u"].str.strip(), errors="coerce").to_numpy(dtype=np.float64)
    r_d = pd.to_numeric(frame["r_d"].str.strip(), errors="coerce").to_numpy(dtype=np.float64)
    bad = ~np.isfinite(r_u) | ~np.isfinite(r_d) | (r_u < 0) | (r_d < 0)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        row = f"{frame['r_u'].iloc[i]},{frame['r_d'].iloc[i]}"
        raise ParseError(f"rewards must be finite nonnegative numbers, got {row!r}", line=lines[i])

    labels = frame["label"].fillna("").str.strip() if "label" in frame else pd.Series([""] * len(frame), dtype=str)
    samples = [RewardSample(r_u=float(a), r_d=float(b), label=str(c)) for a, b, c in zip(r_u, r_d, labels)]
    log.debug(f"loaded {len(samples)} reward samples", _COMPONENT)
    return samples
