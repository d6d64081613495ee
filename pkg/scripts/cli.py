#!/usr/bin/env python3
"""
regcharge - command-line front end for the charging pricing game.

Usage:
    regcharge derive --config scenario.env --x 0.8
    regcharge best-response reg --config scenario.env --x 1 --opponent 0.0906
    regcharge best-response-curve simple --config scenario.env --x 1 --range 0:0.1:0.001
    regcharge surface --config scenario.env --x 0.8 --ts 0.04:0.12:0.001 --tr=-0.05:0.05:0.001
    regcharge nash --config scenario.env --optimize-x
    regcharge monopoly --config scenario.env
    regcharge compare --config scenario.env --theta-range 0.1:0.5:0.1
    regcharge region --mode monopoly --ru 0:2.5:0.05 --rd 0:1:0.02 --rewards-csv data/rte_daily_2015-07.csv
    regcharge simulate --config scenario.env --x 0.8 --seed 7 --trials 10000

Exit codes: 0 success, 2 invalid configuration or input, 1 computation failure.
Failures print {"error": ..., "reason": ...} on stderr.
"""

import argparse
import json
import os
import sys
from typing import Callable, Optional, TextIO, Union

import numpy as np
import pandas as pd

from game.best_response import er_thresholds, reg_best_response, simple_best_response, simple_thresholds
from game.charge_sim import empirical_slot_revenue, simulate_charge, write_trace_csv
from game.design_optimizer import (
    DEFAULT_X_STEP,
    MONOPOLY_PRICE_STEP,
    MONOPOLY_X_STEP,
    compare_sweep,
    optimize_x,
    solve_monopoly,
)
from game.equilibrium import EquilibriumOutcome, interior_simple_price, solve_nash, verify_nash
from game.errors import VALIDATION_ERRORS, ChargingGameError, InvalidParameter
from game.market_model import derive_power_stats, per_kwh_regulation, revenue_arrays, share_arrays, slot_revenue
from game.region_analysis import (
    SCAN_PRICE_STEP,
    SCAN_X_STEP,
    MonopolySign,
    Mode,
    RegionGrid,
    inclusive_range,
    load_rewards_csv,
    overlay_samples,
    scan_region,
    write_overlay_csv,
    write_region_csv,
)
from scripts.scenario import ScenarioConfig, load_scenario
from utils.logging_helper import log

_COMPONENT = "cli"

FLOAT_FORMAT = "%.6f"
NASH_COLUMNS = ["case", "Ts", "Tr", "alpha_s", "alpha_r", "Rs", "Rr", "U", "E_r", "x"]
MONOPOLY_COLUMNS = ["Ts", "Tr", "x", "alpha_s", "alpha_r", "Rs", "Rr", "total", "U"]
COMPARE_COLUMNS = [
    "theta_bar",
    "Ts_E",
    "Tr_E",
    "alpha_s_E",
    "alpha_r_E",
    "Rs_E",
    "Rr_E",
    "U_E",
    "Ts_M",
    "Tr_M",
    "alpha_s_M",
    "alpha_r_M",
    "Rs_M",
    "Rr_M",
    "U_M",
]
CURVE_COLUMNS = ["opponent", "price", "branch"]
SURFACE_COLUMNS = ["Ts", "Tr", "alpha_s", "alpha_r", "Rs", "Rr"]
STATS_COLUMNS = [
    "trials",
    "slots",
    "mean_slot_revenue",
    "std_error",
    "expected_slot_revenue",
    "mean_duration_slots",
    "expected_duration_slots",
]


def fmt(value: float) -> str:
    return FLOAT_FORMAT % value


def parse_range(text: str) -> tuple[float, float, float]:
    """`a:b:s` -> (a, b, s)."""
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected a:b:s, got {text!r}")
    try:
        lo, hi, step = (float(p) for p in parts)
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"non-numeric range {text!r}") from e
    if step <= 0 or hi < lo:
        raise argparse.ArgumentTypeError(f"range {text!r} needs step > 0 and a <= b")
    return lo, hi, step


def _write_frame(frame: pd.DataFrame, out: Union[str, TextIO]) -> None:
    frame.to_csv(out, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")


def _scenario(args: argparse.Namespace) -> ScenarioConfig:
    return load_scenario(args.config)


def _resolve_x(args: argparse.Namespace, scenario: ScenarioConfig) -> float:
    x = args.x if getattr(args, "x", None) is not None else scenario.x
    if x is None:
        raise InvalidParameter("x is required (--x or `x =` in the scenario file)")
    return float(x)


def _workers(args: argparse.Namespace) -> int:
    """--workers, else REGCHARGE_WORKERS, else 1."""
    raw = args.workers if args.workers is not None else os.getenv("REGCHARGE_WORKERS", "1")
    try:
        workers = int(raw)
    except ValueError as e:
        raise InvalidParameter("REGCHARGE_WORKERS must be an integer", raw) from e
    if workers < 1:
        raise InvalidParameter("workers >= 1", workers)
    return workers


def _nash_row(outcome: EquilibriumOutcome) -> dict[str, object]:
    return {
        "case": outcome.case_tag.value,
        "Ts": outcome.prices.t_s,
        "Tr": outcome.prices.t_r,
        "alpha_s": outcome.shares.alpha_s,
        "alpha_r": outcome.shares.alpha_r,
        "Rs": outcome.r_s,
        "Rr": outcome.r_r,
        "U": outcome.welfare,
        "E_r": outcome.e_r,
        "x": outcome.x,
    }


def cmd_derive(args: argparse.Namespace, out: TextIO) -> int:
    scenario = _scenario(args)
    env, rw = scenario.env, scenario.rw
    stats = derive_power_stats(env, _resolve_x(args, scenario))
    lower, upper = simple_thresholds(env, stats)
    t_star = interior_simple_price(env, stats)
    lines = {
        "x": stats.x,
        "P_n": stats.p_n,
        "P_bar": stats.p_bar,
        "delta_P": stats.delta_p,
        "P_A": stats.p_a,
        "E_delta": slot_revenue(env, rw, stats),
    }
    if stats.p_bar > 0.0:
        lines["E_r"] = per_kwh_regulation(env, rw, stats)
    lines["Tr_lower"] = lower
    lines["Tr_upper"] = upper
    e_r1, e_r2 = er_thresholds(env, stats, t_star)
    lines["E_r1"] = e_r1
    lines["E_r2"] = e_r2
    for key, value in lines.items():
        out.write(f"{key}={fmt(value)}\n")
    return 0


def cmd_best_response(args: argparse.Namespace, out: TextIO) -> int:
    scenario = _scenario(args)
    env, rw = scenario.env, scenario.rw
    stats = derive_power_stats(env, _resolve_x(args, scenario))
    if args.station == "simple":
        simple = simple_best_response(env, stats, args.opponent)
        row = {"station": "simple", "branch": simple.branch.value, "price": simple.t_s}
    else:
        reg = reg_best_response(env, stats, per_kwh_regulation(env, rw, stats), args.opponent)
        row = {"station": "reg", "branch": reg.branch.value, "price": reg.t_r}
    _write_frame(pd.DataFrame([row]), out)
    return 0


def cmd_best_response_curve(args: argparse.Namespace, out: TextIO) -> int:
    """Sweep the opponent's price and print the best response with its branch."""
    scenario = _scenario(args)
    env, rw = scenario.env, scenario.rw
    stats = derive_power_stats(env, _resolve_x(args, scenario))
    rows: list[list[object]] = []
    if args.station == "simple":
        for t_r in inclusive_range(*args.range):
            simple = simple_best_response(env, stats, t_r)
            rows.append([t_r, simple.t_s, simple.branch.value])
    else:
        e_r = per_kwh_regulation(env, rw, stats)
        for t_s in inclusive_range(*args.range):
            reg = reg_best_response(env, stats, e_r, t_s)
            rows.append([t_s, reg.t_r, reg.branch.value])
    _write_frame(pd.DataFrame(rows, columns=CURVE_COLUMNS), args.out or out)
    return 0


def cmd_surface(args: argparse.Namespace, out: TextIO) -> int:
    """Shares and both revenues over a (T_s, T_r) grid, T_r varying fastest."""
    scenario = _scenario(args)
    env, rw = scenario.env, scenario.rw
    stats = derive_power_stats(env, _resolve_x(args, scenario))
    t_s, t_r = np.meshgrid(inclusive_range(*args.ts), inclusive_range(*args.tr), indexing="ij")
    if np.any(t_s < 0.0):
        raise InvalidParameter("T_s range must be nonnegative", args.ts)
    alpha_s, alpha_r = share_arrays(env, stats, t_s, t_r)
    r_s, r_r = revenue_arrays(env, stats, per_kwh_regulation(env, rw, stats), t_s, t_r)
    frame = pd.DataFrame(
        {
            "Ts": t_s.ravel(),
            "Tr": t_r.ravel(),
            "alpha_s": alpha_s.ravel(),
            "alpha_r": alpha_r.ravel(),
            "Rs": r_s.ravel(),
            "Rr": r_r.ravel(),
        },
        columns=SURFACE_COLUMNS,
    )
    _write_frame(frame, args.out or out)
    return 0


def cmd_nash(args: argparse.Namespace, out: TextIO) -> int:
    scenario = _scenario(args)
    env, rw = scenario.env, scenario.rw
    if args.optimize_x:
        outcome = optimize_x(env, rw, x_step=args.x_step).outcome
    else:
        outcome = solve_nash(env, rw, _resolve_x(args, scenario))
    if args.certify:
        verify_nash(env, rw, derive_power_stats(env, outcome.x), outcome)
    _write_frame(pd.DataFrame([_nash_row(outcome)], columns=NASH_COLUMNS), out)
    return 0


def cmd_optimize_x(args: argparse.Namespace, out: TextIO) -> int:
    scenario = _scenario(args)
    result = optimize_x(scenario.env, scenario.rw, x_step=args.x_step)
    _write_frame(pd.DataFrame([_nash_row(result.outcome)], columns=NASH_COLUMNS), out)
    if args.scan_out:
        _write_frame(pd.DataFrame(result.scan, columns=["x", "Rr"]), args.scan_out)
    return 0


def cmd_monopoly(args: argparse.Namespace, out: TextIO) -> int:
    scenario = _scenario(args)
    result = solve_monopoly(scenario.env, scenario.rw, price_step=args.price_step, x_step=args.x_step)
    row = {
        "Ts": result.prices.t_s,
        "Tr": result.prices.t_r,
        "x": result.x_star,
        "alpha_s": result.shares.alpha_s,
        "alpha_r": result.shares.alpha_r,
        "Rs": result.r_s,
        "Rr": result.r_r,
        "total": result.total_revenue,
        "U": result.welfare,
    }
    _write_frame(pd.DataFrame([row], columns=MONOPOLY_COLUMNS), out)
    return 0


def cmd_compare(args: argparse.Namespace, out: TextIO) -> int:
    scenario = _scenario(args)
    thetas = inclusive_range(*args.theta_range)
    rows = []
    for row in compare_sweep(
        scenario.env,
        scenario.rw,
        thetas,
        x_step=args.x_step,
        price_step=args.price_step,
        monopoly_x_step=args.monopoly_x_step,
    ):
        e, m = row.equilibrium, row.monopoly
        rows.append(
            [
                row.theta_bar,
                e.prices.t_s,
                e.prices.t_r,
                e.shares.alpha_s,
                e.shares.alpha_r,
                e.r_s,
                e.r_r,
                e.welfare,
                m.prices.t_s,
                m.prices.t_r,
                m.shares.alpha_s,
                m.shares.alpha_r,
                m.r_s,
                m.r_r,
                m.welfare,
            ]
        )
    _write_frame(pd.DataFrame(rows, columns=COMPARE_COLUMNS), out)
    return 0


def cmd_region(args: argparse.Namespace, out: TextIO) -> int:
    scenario = _scenario(args)
    mode = Mode.COMPETITION if args.mode == "nash" else Mode.MONOPOLY
    sign = MonopolySign(args.monopoly_condition_sign)
    (ru_lo, ru_hi, ru_step), (rd_lo, rd_hi, rd_step) = args.ru, args.rd
    grid = RegionGrid(ru_lo, ru_hi, ru_step, rd_lo, rd_hi, rd_step)
    samples = load_rewards_csv(args.rewards_csv) if args.rewards_csv else []

    scan = scan_region(
        scenario.env,
        grid,
        mode,
        delta=scenario.rw.delta,
        x_step=args.x_step,
        price_step=args.price_step,
        sign=sign,
        workers=_workers(args),
    )
    log.info(f"region metadata {scan.metadata}", _COMPONENT)

    if args.out:
        write_region_csv(scan.cells, args.out)
    else:
        write_region_csv(scan.cells, out)

    if samples:
        overlay = overlay_samples(
            scenario.env,
            samples,
            mode,
            delta=scenario.rw.delta,
            x_step=args.x_step,
            price_step=args.price_step,
            sign=sign,
        )
        if args.overlay_out:
            write_overlay_csv(overlay, args.overlay_out)
        else:
            out.write("\n")
            write_overlay_csv(overlay, out)
    return 0


def cmd_simulate(args: argparse.Namespace, out: TextIO) -> int:
    scenario = _scenario(args)
    env, rw = scenario.env, scenario.rw
    stats = derive_power_stats(env, _resolve_x(args, scenario))
    if args.trials is None:
        write_trace_csv(simulate_charge(env, rw, stats, args.seed), args.out or out)
        return 0

    estimate = empirical_slot_revenue(env, rw, stats, args.trials, args.seed)
    row = {
        "trials": estimate.trials,
        "slots": estimate.slots,
        "mean_slot_revenue": estimate.mean,
        "std_error": estimate.std_error,
        "expected_slot_revenue": slot_revenue(env, rw, stats),
        "mean_duration_slots": estimate.mean_duration_slots,
        "expected_duration_slots": env.c_b / (rw.delta * stats.p_bar),
    }
    _write_frame(pd.DataFrame([row], columns=STATS_COLUMNS), args.out or out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="regcharge", description="Two-station EV charging pricing game")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, handler: Callable[[argparse.Namespace, TextIO], int], help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="scenario file (key = value); reference scenario if omitted")
        p.set_defaults(handler=handler)
        return p

    p = add("derive", cmd_derive, "power statistics and per-kWh quantities for a design x")
    p.add_argument("--x", type=float)

    p = add("best-response", cmd_best_response, "one station's best response to the other's price")
    p.add_argument("station", choices=["simple", "reg"])
    p.add_argument("--x", type=float)
    p.add_argument("--opponent", type=float, required=True)

    p = add("best-response-curve", cmd_best_response_curve, "best response swept over the opponent's price")
    p.add_argument("station", choices=["simple", "reg"])
    p.add_argument("--x", type=float)
    p.add_argument("--range", type=parse_range, required=True, metavar="A:B:S", help="opponent prices")
    p.add_argument("--out", help="CSV path (stdout if omitted)")

    p = add("surface", cmd_surface, "shares and revenues over a (T_s, T_r) price grid")
    p.add_argument("--x", type=float)
    p.add_argument("--ts", type=parse_range, required=True, metavar="A:B:S")
    p.add_argument("--tr", type=parse_range, required=True, metavar="A:B:S", help="use --tr=-a:b:s for negative starts")
    p.add_argument("--out", help="CSV path (stdout if omitted)")

    p = add("nash", cmd_nash, "equilibrium prices, shares and revenues")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--x", type=float)
    group.add_argument("--optimize-x", action="store_true")
    p.add_argument("--x-step", type=float, default=DEFAULT_X_STEP)
    p.add_argument("--certify", action="store_true", help="scan unilateral deviations before printing")

    p = add("optimize-x", cmd_optimize_x, "design x maximising the regulation station's revenue")
    p.add_argument("--x-step", type=float, default=DEFAULT_X_STEP)
    p.add_argument("--scan-out", help="write the (x, Rr) scan as CSV")

    p = add("monopoly", cmd_monopoly, "joint price and design optimum under one owner")
    p.add_argument("--price-step", type=float, default=MONOPOLY_PRICE_STEP)
    p.add_argument("--x-step", type=float, default=MONOPOLY_X_STEP)

    p = add("compare", cmd_compare, "equilibrium vs monopoly across theta_bar")
    p.add_argument("--theta-range", type=parse_range, required=True, metavar="A:B:S")
    p.add_argument("--x-step", type=float, default=DEFAULT_X_STEP)
    p.add_argument("--price-step", type=float, default=MONOPOLY_PRICE_STEP)
    p.add_argument("--monopoly-x-step", type=float, default=MONOPOLY_X_STEP)

    p = add("region", cmd_region, "viability and optimal design over the (r_u, r_d) plane")
    p.add_argument("--mode", choices=["nash", "monopoly"], default="nash")
    p.add_argument("--ru", type=parse_range, default=(0.0, 2.5, 0.05), metavar="A:B:S")
    p.add_argument("--rd", type=parse_range, default=(0.0, 1.0, 0.02), metavar="A:B:S")
    p.add_argument("--rewards-csv", help="reward samples r_u,r_d[,label] to classify")
    p.add_argument("--out", help="region CSV path (stdout if omitted)")
    p.add_argument("--overlay-out", help="classified samples CSV path (appended to stdout if omitted)")
    p.add_argument("--x-step", type=float, default=SCAN_X_STEP)
    p.add_argument("--price-step", type=float, default=SCAN_PRICE_STEP)
    p.add_argument("--workers", type=int, help="worker processes (REGCHARGE_WORKERS, default 1)")
    p.add_argument(
        "--monopoly-condition-sign", choices=[s.value for s in MonopolySign], default=MonopolySign.CORRECTED.value
    )

    p = add("simulate", cmd_simulate, "Monte Carlo charging trace or slot-revenue statistics")
    p.add_argument("--x", type=float)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int)
    p.add_argument("--out", help="CSV path (stdout if omitted)")

    return parser


def _fail(error: Exception, code: int) -> int:
    log.error(f"exit {code}", _COMPONENT, error=error)
    sys.stderr.write(json.dumps({"error": type(error).__name__, "reason": str(error)}) + "\n")
    return code


def main(argv: Optional[list[str]] = None, out: Optional[TextIO] = None) -> int:
    args = build_parser().parse_args(argv)
    log.info(f"command {args.command}", _COMPONENT)
    try:
        return int(args.handler(args, out or sys.stdout))
    except VALIDATION_ERRORS as e:
        return _fail(e, 2)
    except OSError as e:
        return _fail(e, 2)
    except ChargingGameError as e:
        return _fail(e, 1)


if __name__ == "__main__":
    sys.exit(main())
