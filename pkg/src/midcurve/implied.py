"""Normal-model quoting and implied copula correlation."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import optimize, special

from .copula import CopulaSpec, MidcurveTrade, Side, price_quadrature, underlying_forward
from .errors import InvalidInputError, InversionError
from .models import (
    AnnuityModel,
    GridSpec,
    MarketInputs,
    Marginal,
    coefficients,
    natural_marginals,
    tilt_marginal,
    Leg,
)

RHO_EDGE = 1 - 1e-9
# Time value (per unit annuity and notional) below which a price is treated as intrinsic.
MIN_TIME_VALUE = 1e-14
# Largest terminal stdev the vol inversion searches.
MAX_TERMINAL_STD = 1.0

ATM_FACTOR = 1 / math.sqrt(2 * math.pi)


def _side(side) -> Side:
    return side if isinstance(side, Side) else Side.parse(side)


def bachelier_price(fwd, K, sigma_T, annuity=1.0, notional=1.0, side=Side.RECEIVER):
    """Normal-model swaption price for terminal standard deviation ``sigma_T``."""
    sigma_T = np.asarray(sigma_T, dtype=float)
    if np.any(sigma_T <= 0):
        raise InvalidInputError("terminal standard deviation must be positive")
    moneyness = np.asarray(K, dtype=float) - fwd
    d = moneyness / sigma_T
    receiver = moneyness * special.ndtr(d) + sigma_T * np.exp(-0.5 * d * d) * ATM_FACTOR
    if _side(side) is Side.PAYER:
        receiver = receiver - moneyness
    out = annuity * notional * receiver
    return float(out) if np.ndim(out) == 0 else out


def _otm_unit_price(moneyness: float, sigma_T: float) -> float:
    d = -abs(moneyness) / sigma_T
    return sigma_T * (math.exp(-0.5 * d * d) * ATM_FACTOR + d * special.ndtr(d))


def implied_normal_vol(price, fwd, K, annuity=1.0, notional=1.0, side=Side.RECEIVER) -> float:
    """Terminal standard deviation reproducing ``price`` in the normal model.

    Works on the time value, which is the same for receivers and payers, so
    in-the-money quotes keep their precision.
    """
    side = _side(side)
    unit = price / (annuity * notional)
    moneyness = K - fwd
    intrinsic = max(moneyness, 0.0) if side is Side.RECEIVER else max(-moneyness, 0.0)
    time_value = unit - intrinsic
    if not math.isfinite(unit) or time_value <= MIN_TIME_VALUE:
        raise InversionError(
            f"price {price:.6g} is not above intrinsic value "
            f"{intrinsic * annuity * notional:.6g} (lower bound)"
        )
    ceiling = _otm_unit_price(moneyness, MAX_TERMINAL_STD)
    if time_value >= ceiling:
        raise InversionError(
            f"price {price:.6g} exceeds the upper bound at terminal stdev {MAX_TERMINAL_STD}"
        )
    if moneyness == 0:
        return time_value / ATM_FACTOR
    return optimize.brentq(
        lambda s: _otm_unit_price(moneyness, s) - time_value,
        1e-300, MAX_TERMINAL_STD, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500,
    )


@dataclass(frozen=True)
class CorrelationQuote:
    rho: float
    flag: str = ""  # "", "lower" (rho pinned at -1) or "upper" (pinned at +1)


@dataclass(frozen=True)
class SkewPoint:
    strike: float
    price: float
    implied_normal_vol: float
    implied_correlation: float
    flag: str = ""


def reference_marginals(mkt: MarketInputs, grid: GridSpec = GridSpec()) -> tuple[Marginal, Marginal]:
    """Flat-normal marginals of the quoting convention, already in the underlying measure."""
    det = AnnuityModel.deterministic()
    coeffs = coefficients(det, mkt)
    short, long_ = natural_marginals(mkt, grid)
    return (
        tilt_marginal(det, coeffs, mkt, short, Leg.SHORT),
        tilt_marginal(det, coeffs, mkt, long_, Leg.LONG),
    )


def implied_correlation(target_price: float, trade: MidcurveTrade, mkt: MarketInputs,
                        order: int = 64,
                        marginals: tuple[Marginal, Marginal] | None = None) -> CorrelationQuote:
    """Copula correlation at which the deterministic flat-normal model reprices ``target_price``.

    Prices fall as correlation rises, for receivers and payers alike; targets
    outside the attainable range are pinned to the nearer end and flagged.
    """
    det = AnnuityModel.deterministic()
    coeffs = coefficients(det, mkt)
    marginals = reference_marginals(mkt) if marginals is None else marginals

    def price(rho: float) -> float:
        return price_quadrature(trade, mkt, det, CopulaSpec(rho, order=order), marginals,
                                coeffs).price

    at_lower = price(-RHO_EDGE)
    at_upper = price(RHO_EDGE)
    if target_price >= at_lower:
        return CorrelationQuote(-1.0, "lower")
    if target_price <= at_upper:
        return CorrelationQuote(1.0, "upper")
    root = optimize.brentq(lambda r: price(r) - target_price, -RHO_EDGE, RHO_EDGE,
                           xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    return CorrelationQuote(float(root))


def correlation_skew_curve(trade: MidcurveTrade, mkt: MarketInputs, model: AnnuityModel,
                           strikes: Sequence[float], copula: CopulaSpec,
                           marginals: tuple[Marginal, Marginal] | None = None) -> list[SkewPoint]:
    """Price each strike under ``model`` and quote it as an implied correlation."""
    from .models import underlying_marginals

    coeffs = coefficients(model, mkt)
    marginals = underlying_marginals(model, mkt, coeffs=coeffs) if marginals is None else marginals
    reference = reference_marginals(mkt)
    forward = underlying_forward(mkt, model, copula, marginals, coeffs)
    root_t = math.sqrt(trade.T_x)
    points = []
    for K in strikes:
        leg = trade.with_strike(float(K))
        price = price_quadrature(leg, mkt, model, copula, marginals, coeffs).price
        try:
            vol = implied_normal_vol(price, forward, leg.strike, mkt.annuities.A_u0,
                                     leg.notional, leg.side) / root_t
        except InversionError:
            vol = float("nan")
        quote = implied_correlation(price, leg, mkt, copula.order, reference)
        points.append(SkewPoint(leg.strike, price, vol, quote.rho, quote.flag))
    return points
