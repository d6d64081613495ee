"""Exception hierarchy for the charging game.

Validation errors (bad parameters, bad input files) and computation errors
(no viable design, failed certification) are kept apart so the CLI can map
them to different exit codes.
"""

from typing import Optional


class ChargingGameError(Exception):
    """Base class for every error raised by this package."""


class InvalidParameter(ChargingGameError, ValueError):
    """A value violates a type invariant. The message names the invariant."""

    def __init__(self, invariant: str, value: object = None) -> None:
        self.invariant = invariant
        self.value = value
        suffix = "" if value is None else f" (got {value!r})"
        super().__init__(f"{invariant}{suffix}")


class PAInvalid(ChargingGameError):
    """Fluctuation-adjusted power P_A is outside the open interval (0, P_d)."""

    def __init__(self, x: float, p_a: float, p_d: float) -> None:
        self.x = x
        self.p_a = p_a
        self.p_d = p_d
        super().__init__(f"P_A={p_a:.6g} outside (0, {p_d:.6g}) at x={x:.6g}")


class ZeroMeanPower(ChargingGameError):
    """Mean charging power is zero, so per-kWh quantities are undefined."""


class BracketFailure(ChargingGameError):
    """Derivative signs at the bracket ends do not straddle zero."""

    def __init__(self, lo: float, hi: float, f_lo: float, f_hi: float) -> None:
        self.lo = lo
        self.hi = hi
        self.f_lo = f_lo
        self.f_hi = f_hi
        super().__init__(f"no sign change on [{lo:.6g}, {hi:.6g}]: f(lo)={f_lo:.3g}, f(hi)={f_hi:.3g}")


class CertificationFailure(ChargingGameError):
    """A unilateral deviation beats the candidate equilibrium."""

    def __init__(self, station: str, price: float, improvement: float) -> None:
        self.station = station
        self.price = price
        self.improvement = improvement
        super().__init__(f"{station} station gains {improvement:.3g} by deviating to {price:.6f}")


class AllInfeasible(ChargingGameError):
    """Every design x leaves the regulation station with zero revenue."""


class NeverCompletes(ChargingGameError):
    """The simulated EV can never reach its energy demand."""


class ParseError(ChargingGameError):
    """Malformed input file. `line` is 1-based when known."""

    def __init__(self, message: str, line: Optional[int] = None) -> None:
        self.line = line
        prefix = "" if line is None else f"line {line}: "
        super().__init__(f"{prefix}{message}")


class ConfigError(ParseError):
    """Scenario file with unknown, missing or non-numeric keys."""


VALIDATION_ERRORS = (InvalidParameter, PAInvalid, ParseError)
