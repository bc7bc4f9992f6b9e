"""Discount curves, fixed-leg schedules and annuities.

Times are year fractions measured from the valuation date; no calendar logic.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DomainError, InvalidInputError

_TIME_TOL = 1e-9


@dataclass(frozen=True)
class DiscountCurve:
    """Discount factors on pillars, log-linear in between.

    Beyond the last pillar the curve extrapolates with the forward rate of the
    last segment. A pillar at ``t = 0`` with ``D = 1`` is inserted when the
    input does not start at zero.
    """

    times: tuple[float, ...]
    dfs: tuple[float, ...]
    extrapolate: bool = True
    _log_dfs: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        t = [float(x) for x in self.times]
        d = [float(x) for x in self.dfs]
        if len(t) != len(d):
            raise InvalidInputError("times and discount factors differ in length")
        if not t:
            raise InvalidInputError("curve needs at least one pillar")
        if t[0] < 0:
            raise InvalidInputError(f"first pillar time {t[0]} is negative")
        if t[0] > 0:
            t.insert(0, 0.0)
            d.insert(0, 1.0)
        if abs(d[0] - 1.0) > 1e-14:
            raise InvalidInputError(f"D(0) must be 1, got {d[0]}")
        if len(t) < 2:
            raise InvalidInputError("curve needs a pillar beyond t=0")
        if any(b <= a for a, b in zip(t, t[1:])):
            raise InvalidInputError("pillar times must be strictly increasing")
        if any(not (x > 0 and math.isfinite(x)) for x in d):
            raise InvalidInputError("discount factors must be positive and finite")
        object.__setattr__(self, "times", tuple(t))
        object.__setattr__(self, "dfs", tuple(d))
        object.__setattr__(self, "_log_dfs", np.log(np.array(d)))

    @classmethod
    def flat(cls, rate: float, horizon: float = 60.0) -> "DiscountCurve":
        """Flat continuously-compounded zero rate."""
        return cls((0.0, horizon), (1.0, math.exp(-rate * horizon)))

    @classmethod
    def from_file(cls, path: str | Path) -> "DiscountCurve":
        """Read a ``t,df`` text file (header line required)."""
        path = Path(path)
        if not path.is_file():
            raise InvalidInputError(f"curve file not found: {path}")
        with path.open(newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
        if not rows or [c.strip().lower() for c in rows[0]] != ["t", "df"]:
            raise InvalidInputError(f"{path}: expected header 't,df'")
        try:
            pairs = [(float(a), float(b)) for a, b in rows[1:]]
        except ValueError as exc:
            raise InvalidInputError(f"{path}: {exc}") from exc
        return cls(tuple(p[0] for p in pairs), tuple(p[1] for p in pairs))

    @property
    def last_time(self) -> float:
        return self.times[-1]

    def df(self, t):
        """Discount factor D(t0, t); accepts scalars or arrays."""
        arr = np.asarray(t, dtype=float)
        if np.any(arr < 0) or not np.all(np.isfinite(arr)):
            raise DomainError(f"time outside curve domain: {t}")
        if not self.extrapolate and np.any(arr > self.last_time + _TIME_TOL):
            raise DomainError(f"time beyond last pillar {self.last_time}: {t}")
        times = np.asarray(self.times)
        logd = np.interp(arr, times, self._log_dfs)
        beyond = arr > times[-1]
        if np.any(beyond):
            fwd = (self._log_dfs[-2] - self._log_dfs[-1]) / (times[-1] - times[-2])
            logd = np.where(beyond, self._log_dfs[-1] - fwd * (arr - times[-1]), logd)
        out = np.exp(logd)
        return float(out) if out.ndim == 0 else out

    def __call__(self, t):
        return self.df(t)

    def scaled(self, factor: float) -> "ScaledCurve":
        return ScaledCurve(self, factor)


@dataclass(frozen=True)
class ScaledCurve:
    """``factor * D(t)``; used for linearity checks, not a valid discount curve."""

    base: DiscountCurve
    factor: float

    def df(self, t):
        return self.factor * self.base.df(t)


@dataclass(frozen=True)
class SwapSchedule:
    """Fixed leg of a swap starting at ``T_s`` seen from option expiry ``T_x``."""

    T_x: float
    T_s: float
    T_e: float
    payment_times: tuple[float, ...]
    accruals: tuple[float, ...]

    def __post_init__(self) -> None:
        if not (0 < self.T_x <= self.T_s < self.T_e):
            raise InvalidInputError(
                f"need 0 < T_x <= T_s < T_e, got {self.T_x}, {self.T_s}, {self.T_e}"
            )
        _check_leg(self.payment_times, self.accruals)
        if abs(self.payment_times[-1] - self.T_e) > _TIME_TOL:
            raise InvalidInputError("last payment time must equal T_e")
        if self.payment_times[0] <= self.T_s:
            raise InvalidInputError("payments must fall after T_s")

    @classmethod
    def regular(cls, T_x: float, T_s: float, T_e: float, frequency: int = 1) -> "SwapSchedule":
        times = _regular_times(T_s, T_e, frequency)
        return cls(T_x, T_s, T_e, tuple(times), tuple(np.diff([T_s, *times])))


@dataclass(frozen=True)
class AnnuityTriple:
    """Today's short (T_x→T_s), long (T_x→T_e) and underlying (T_s→T_e) annuities."""

    A_s0: float
    A_e0: float
    A_u0: float

    def __post_init__(self) -> None:
        if min(self.A_s0, self.A_e0, self.A_u0) <= 0:
            raise InvalidInputError(f"annuities must be positive: {self}")
        if abs(self.A_u0 - (self.A_e0 - self.A_s0)) > 1e-12 * self.A_u0:
            raise InvalidInputError(f"annuity triangle violated: {self}")


def _check_leg(times: Sequence[float], accruals: Sequence[float]) -> None:
    if len(times) == 0:
        raise InvalidInputError("empty schedule")
    if len(times) != len(accruals):
        raise InvalidInputError("payment times and accruals differ in length")
    if any(b <= a for a, b in zip(times, times[1:])):
        raise InvalidInputError("payment times must be strictly increasing")
    if any(not tau > 0 for tau in accruals):
        raise InvalidInputError("accruals must be positive")


def _regular_times(start: float, end: float, frequency: int) -> list[float]:
    if frequency <= 0:
        raise InvalidInputError(f"frequency must be positive, got {frequency}")
    periods = (end - start) * frequency
    n = round(periods)
    if n < 1 or abs(periods - n) > 1e-9:
        raise InvalidInputError(
            f"interval [{start}, {end}] is not a whole number of 1/{frequency}y periods"
        )
    return [start + (i + 1) / frequency for i in range(n)]


def annuity(curve, payment_times: Sequence[float], accruals: Sequence[float]) -> float:
    """Sum of accrual-weighted discount factors."""
    _check_leg(payment_times, accruals)
    value = float(np.dot(np.asarray(accruals, dtype=float), curve.df(np.asarray(payment_times))))
    return value


def forward_swap_rate(curve, schedule: SwapSchedule) -> float:
    """Par rate of the schedule's swap: (D(T_s) - D(T_e)) / annuity."""
    level = annuity(curve, schedule.payment_times, schedule.accruals)
    if level == 0:
        raise ArithmeticError("zero annuity")
    return (curve.df(schedule.T_s) - curve.df(schedule.payment_times[-1])) / level


def annuity_triple(curve, T_x: float, T_s: float, T_e: float, frequency: int = 1) -> AnnuityTriple:
    if not (0 < T_x <= T_s < T_e):
        raise InvalidInputError(f"need 0 < T_x <= T_s < T_e, got {T_x}, {T_s}, {T_e}")
    if T_x == T_s:
        raise InvalidInputError("midcurve needs T_s > T_x")
    _regular_times(T_x, T_s, frequency)  # alignment check
    times = np.array(_regular_times(T_x, T_e, frequency))
    dfs = curve.df(times) / frequency
    short = times <= T_s + _TIME_TOL
    A_s0 = float(np.sum(dfs[short]))
    A_u0 = float(np.sum(dfs[~short]))
    return AnnuityTriple(A_s0, A_s0 + A_u0, A_u0)


def forward_annuities(curve, T_x: float, T_e: float, frequency: int = 1) -> np.ndarray:
    """Annuities A(T_x, T_x, T_j) for every fixed date T_j up to T_e, valued at T_x.

    These are today's annuities divided by D(t0, T_x), i.e. their
    expectations under the T_x-forward measure.
    """
    times = np.array(_regular_times(T_x, T_e, frequency))
    dfs = curve.df(times) / curve.df(T_x) / frequency
    return np.cumsum(dfs)


def forward_swap_rates(curve, T_x: float, T_e: float, frequency: int = 1) -> np.ndarray:
    """Par rates of the swaps T_x → T_j for every fixed date T_j up to T_e."""
    times = np.array(_regular_times(T_x, T_e, frequency))
    levels = forward_annuities(curve, T_x, T_e, frequency) * curve.df(T_x)
    return (curve.df(T_x) - curve.df(times)) / levels
