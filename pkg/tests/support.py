"""Shared market set-up and independent oracles for the test suite."""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate, optimize, stats

from midcurve.curve import DiscountCurve, annuity_triple
from midcurve.models import MarketInputs

FLAT_RATE = 0.0224566
R_S0 = 0.02631
R_E0 = 0.022347
VOL_S = 0.0060
VOL_E = 0.006418
RHO = 0.8
T_X, T_S, T_E = 1.0, 2.0, 3.0
BP = 1e-4


def flat_curve() -> DiscountCurve:
    return DiscountCurve.flat(FLAT_RATE)


def quoted_market(rho: float = RHO, vol_s: float = VOL_S, vol_e: float = VOL_E) -> MarketInputs:
    triple = annuity_triple(flat_curve(), T_X, T_S, T_E)
    return MarketInputs.from_vols(triple, R_S0, R_E0, vol_s, vol_e, rho, T_X)


def gaussian_spread_receiver(mkt: MarketInputs, strike: float, copula_rho: float) -> float:
    """Closed-form deterministic-weight receiver: the spread ``b1 y - b2 x`` is Gaussian."""
    a = mkt.annuities
    b1, b2 = a.A_e0 / a.A_u0, a.A_s0 / a.A_u0
    fwd = b1 * mkt.R_e0 - b2 * mkt.R_s0
    std = math.sqrt(b1**2 * mkt.Sigma_e**2 - 2 * copula_rho * b1 * b2 * mkt.Sigma_e * mkt.Sigma_s
                    + b2**2 * mkt.Sigma_s**2)
    d = (strike - fwd) / std
    return a.A_u0 * ((strike - fwd) * stats.norm.cdf(d) + std * stats.norm.pdf(d))


def nested_quad_receiver(rate_fn, mean_s, Sigma_s, mean_e, Sigma_e, rho, strike,
                         span: float = 11.0) -> float:
    """E[(K - rate_fn(x, y))^+] for a bivariate normal, by iterated adaptive quadrature.

    The inner integral over the long-rate score is split at the exercise
    boundary so the kink never sits inside a panel.
    """
    root = math.sqrt(1 - rho * rho)

    def inner(z1: float) -> float:
        x = mean_s + Sigma_s * z1

        def gap(z2):
            y = mean_e + Sigma_e * (rho * z1 + root * z2)
            return strike - rate_fn(x, y)

        def integrand(z2):
            return max(gap(z2), 0.0) * stats.norm.pdf(z2)

        points = []
        if gap(-span) * gap(span) < 0:
            points = [optimize.brentq(gap, -span, span, xtol=1e-14)]
        cuts = [-span, *points, span]
        return sum(integrate.quad(integrand, a, b, epsabs=1e-15, epsrel=1e-12, limit=200)[0]
                   for a, b in zip(cuts, cuts[1:]))

    value, _ = integrate.quad(lambda z1: inner(z1) * stats.norm.pdf(z1), -span, span,
                              epsabs=1e-15, epsrel=1e-11, limit=200)
    return value


def joint_gaussian_expectation(fn, mean_s, Sigma_s, mean_e, Sigma_e, rho, order: int = 48):
    """Tensor Gauss–Hermite expectation of a smooth ``fn(x, y)`` under a bivariate normal."""
    z, w = np.polynomial.hermite_e.hermegauss(order)
    w = w / w.sum()
    x = mean_s + Sigma_s * z[:, None]
    y = mean_e + Sigma_e * (rho * z[:, None] + math.sqrt(1 - rho * rho) * z[None, :])
    return float(np.sum(np.outer(w, w) * fn(x, y)))
