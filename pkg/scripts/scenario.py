"""
Scenario files: plain `key = value` lines, `#` comments.

    t = 0.03
    theta_bar = 0.3   # mean user sensitivity
    r_u = 1.6

Keys left out fall back to the reference scenario below. Parsing goes
through python-dotenv's statement parser so line numbers survive into
error messages.
"""

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, TextIO, Union

from dotenv.parser import parse_stream

from game.errors import ConfigError
from game.market_model import MarketEnv, RewardSchedule
from utils.logging_helper import log

_COMPONENT = "scenario"

ENV_KEYS = ("t", "theta_bar", "c_b", "gamma", "rho_u", "rho_d", "p_d")
REWARD_KEYS = ("r_u", "r_d", "delta")
KNOWN_KEYS = frozenset((*ENV_KEYS, *REWARD_KEYS, "x"))

REFERENCE = {
    "t": 0.03,
    "theta_bar": 0.3,
    "c_b": 50.0,
    "gamma": 0.05,
    "rho_u": 0.48,
    "rho_d": 0.48,
    "p_d": 20.0,
    "r_u": 1.6,
    "r_d": 0.4,
    "delta": 0.1,
}


@dataclass(frozen=True)
class ScenarioConfig:
    env: MarketEnv
    rw: RewardSchedule
    x: Optional[float] = None


def _statement_line(text: str, first_line: int) -> int:
    # a statement's span starts with any blank lines before it
    return first_line + text[: len(text) - len(text.lstrip())].count("\n")


def parse_values(stream: TextIO) -> dict[str, float]:
    """
    Raises:
        ConfigError: unparsable line, unknown key, missing or non-numeric value, duplicate key
    """
    values: dict[str, float] = {}
    for binding in parse_stream(stream):
        line = _statement_line(binding.original.string, binding.original.line)
        if binding.error:
            raise ConfigError(f"cannot parse {binding.original.string.strip()!r}", line=line)
        if binding.key is None:
            continue
        key = binding.key.strip()
        if key not in KNOWN_KEYS:
            raise ConfigError(f"unknown key {key!r}", line=line)
        if key in values:
            raise ConfigError(f"duplicate key {key!r}", line=line)
        if binding.value is None or not binding.value.strip():
            raise ConfigError(f"key {key!r} has no value", line=line)
        try:
            number = float(binding.value)
        except ValueError as e:
            raise ConfigError(f"{key} = {binding.value!r} is not a number", line=line) from e
        if not math.isfinite(number):
            raise ConfigError(f"{key} = {binding.value!r} is not finite", line=line)
        values[key] = number
    return values


def build_scenario(values: dict[str, float]) -> ScenarioConfig:
    """Construct validated types; InvalidParameter surfaces unchanged."""
    merged = {**REFERENCE, **values}
    env = MarketEnv(**{k: merged[k] for k in ENV_KEYS})
    rw = RewardSchedule(**{k: merged[k] for k in REWARD_KEYS})
    return ScenarioConfig(env=env, rw=rw, x=values.get("x"))


def load_scenario(source: Union[str, Path, TextIO, None] = None) -> ScenarioConfig:
    """Read a scenario file (or stream); None gives the reference scenario."""
    if source is None:
        return build_scenario({})
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8") as f:
            values = parse_values(f)
    else:
        values = parse_values(source)
    log.debug(f"scenario keys: {sorted(values)}", _COMPONENT)
    return build_scenario(values)
