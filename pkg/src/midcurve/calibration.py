"""Estimating ``(sigma_e, sigma_s)`` from a single-driver annuity mapping.

Every swap rate fixing at expiry is tied to one standard normal driver::

    1 + tau_i R_i(Y) = (1 + tau_i R_i) exp(mu_i + nu_i Y)

The loadings ``nu_i`` come from each rate's vol and its correlation with the
driver's rate; the drifts ``mu_i`` are fixed so the driver-implied annuities
reproduce the curve.  Linearising the annuity ratios in the driver gives the
covariances that pin down ``sigma_e`` (long-rate driver ``Y``) and
``sigma_s`` (short-rate driver ``X``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import optimize

from .curve import annuity_triple, forward_annuities, forward_swap_rates
from .errors import CalibrationError, ConditioningError, InvalidInputError


@dataclass(frozen=True)
class DriverMapping:
    forwards: np.ndarray
    accruals: np.ndarray
    loadings: np.ndarray
    drifts: np.ndarray
    label: str
    short_index: int  # number of periods up to T_s

    @property
    def periods(self) -> int:
        return self.forwards.size


@dataclass(frozen=True)
class CovarianceEstimates:
    cov_e: float
    cov_s: float


@dataclass(frozen=True)
class SigmaEstimate:
    sigma_e: float
    sigma_s: float
    covariances: CovarianceEstimates
    long_driver: DriverMapping
    short_driver: DriverMapping


def loadings(accruals, forwards, correlations, vols) -> np.ndarray:
    tau = np.asarray(accruals, dtype=float)
    R = np.asarray(forwards, dtype=float)
    corr = np.asarray(correlations, dtype=float)
    vol = np.asarray(vols, dtype=float)
    growth = 1 + tau * R
    if np.any(growth <= 0):
        raise InvalidInputError("1 + tau_i R_i must be positive for every period")
    if np.any(np.abs(corr) > 1):
        raise InvalidInputError("correlations must lie in [-1, 1]")
    return tau / growth * corr * vol


def _tail_sums(values: np.ndarray, j: int) -> np.ndarray:
    """``sum_{k=i..j} values_k`` for i = 1..j (1-based j)."""
    return np.cumsum(values[:j][::-1])[::-1]


def expected_annuity(j: int, accruals, forwards, loadings_, drifts) -> float:
    """Driver-averaged annuity of the swap from expiry to the j-th fixed date."""
    tau = np.asarray(accruals, dtype=float)
    disc = np.log1p(tau * np.asarray(forwards, dtype=float))
    mu = _tail_sums(np.asarray(drifts, dtype=float), j)
    nu = _tail_sums(np.asarray(loadings_, dtype=float), j)
    return float(np.sum(tau[:j] * np.exp(-mu + 0.5 * nu**2 - _tail_sums(disc, j))))


def drift_recursion(annuities, forwards, loadings_, accruals=None,
                    bracket: tuple[float, float] = (-1.0, 1.0)) -> np.ndarray:
    """Solve the drifts one period at a time so expected annuities match ``annuities``."""
    A = np.asarray(annuities, dtype=float)
    R = np.asarray(forwards, dtype=float)
    nu = np.asarray(loadings_, dtype=float)
    tau = np.ones_like(R) if accruals is None else np.asarray(accruals, dtype=float)
    if not (A.size == R.size == nu.size == tau.size) or A.size == 0:
        raise InvalidInputError("annuities, forwards, loadings and accruals must align")
    if np.any(np.diff(A) <= 0) or A[0] <= 0:
        raise InvalidInputError("annuities must be positive and strictly increasing")
    mu = np.zeros_like(A)
    for j in range(1, A.size + 1):
        def mismatch(m: float) -> float:
            mu[j - 1] = m
            return expected_annuity(j, tau, R, nu, mu) - A[j - 1]

        lo, hi = bracket
        if mismatch(lo) * mismatch(hi) > 0:
            raise CalibrationError(f"no drift root in [{lo}, {hi}] for period {j}")
        mu[j - 1] = optimize.brentq(mismatch, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=200)
    return mu


def build_mapping(accruals, forwards, correlations, vols, annuities, label: str,
                  short_index: int) -> DriverMapping:
    tau = np.asarray(accruals, dtype=float)
    R = np.asarray(forwards, dtype=float)
    nu = loadings(tau, R, correlations, vols)
    mu = drift_recursion(annuities, R, nu, tau)
    return DriverMapping(R, tau, nu, mu, label, short_index)


def _annuity_terms(mapping: DriverMapping, j: int):
    """Coefficients ``c_i`` and exponents ``s_i`` with ``A_j(Y) = sum c_i exp(-s_i Y)``."""
    disc = np.log1p(mapping.accruals * mapping.forwards)
    c = mapping.accruals[:j] * np.exp(-_tail_sums(mapping.drifts, j) - _tail_sums(disc, j))
    return c, _tail_sums(mapping.loadings, j)


def annuity_of_driver(mapping: DriverMapping, driver, j: int):
    c, s = _annuity_terms(mapping, j)
    return np.exp(-np.multiply.outer(np.asarray(driver, dtype=float), s)) @ c


def annuities_of_driver(mapping: DriverMapping, driver):
    """Short and long annuities at expiry as functions of the driver value."""
    return (annuity_of_driver(mapping, driver, mapping.short_index),
            annuity_of_driver(mapping, driver, mapping.periods))


def _level_and_slope(mapping: DriverMapping, j: int) -> tuple[float, float]:
    c, s = _annuity_terms(mapping, j)
    return float(c.sum()), float(-(c * s).sum())


def ratio_slopes(long_driver: DriverMapping, short_driver: DriverMapping) -> tuple[float, float]:
    """Driver derivatives at zero of ``A_u/A_e`` (long driver) and ``A_u/A_s`` (short driver)."""
    Ae, dAe = _level_and_slope(long_driver, long_driver.periods)
    As, dAs = _level_and_slope(long_driver, long_driver.short_index)
    slope_e = -(dAs * Ae - As * dAe) / Ae**2
    Ae, dAe = _level_and_slope(short_driver, short_driver.periods)
    As, dAs = _level_and_slope(short_driver, short_driver.short_index)
    slope_s = (dAe * As - Ae * dAs) / As**2
    return slope_e, slope_s


def solve_sigmas(cov_e: float, cov_s: float, Sigma_s: float, Sigma_e: float, rho: float,
                 A_s0: float, A_e0: float, A_u0: float) -> tuple[float, float]:
    """Invert the covariance relations for ``(sigma_e, sigma_s)``."""
    rhs = np.array([-cov_e * (A_e0 / A_u0) ** 2, -cov_s * (A_s0 / A_u0) ** 2])
    if not np.any(rhs):
        return 0.0, 0.0
    cross = rho * Sigma_e * Sigma_s
    matrix = np.array([[Sigma_e**2, cross], [cross, Sigma_s**2]])
    det = np.linalg.det(matrix)
    if abs(det) <= 1e-12 * np.linalg.norm(matrix) ** 2:
        raise ConditioningError(
            f"covariance system is singular (det={det:.3g}); |rho| too close to 1"
        )
    sigma_e, sigma_s = np.linalg.solve(matrix, rhs)
    return float(sigma_e), float(sigma_s)


def default_period_inputs(times: Sequence[float], T_s: float, T_e: float, Sigma_s: float,
                          Sigma_e: float, rho_long: float, rho_short: float):
    """Per-period vols and driver correlations when no full vectors are supplied.

    Vols interpolate linearly in the period end date between the short and
    long rates; each driver has correlation 1 with its own rate and the flat
    value with every other rate.
    """
    t = np.asarray(times, dtype=float)
    vols = np.interp(t, [T_s, T_e], [Sigma_s, Sigma_e])
    corr_e = np.full(t.size, float(rho_long))
    corr_s = np.full(t.size, float(rho_short))
    corr_e[np.isclose(t, T_e)] = 1.0
    corr_s[np.isclose(t, T_s)] = 1.0
    return vols, corr_e, corr_s


def estimate_sigmas(curve, T_x: float, T_s: float, T_e: float, *, Sigma_s: float,
                    Sigma_e: float, rho: float, vols=None, corr_e=None, corr_s=None,
                    forwards=None, frequency: int = 1) -> SigmaEstimate:
    """Estimate ``(sigma_e, sigma_s)`` for the midcurve ``T_x -> T_s -> T_e``.

    ``forwards`` are the swap rates from expiry to each fixed date (defaults to
    the curve's); ``vols`` their terminal standard deviations.  Missing
    correlation vectors default to ``rho`` off the driver's own rate.
    """
    triple = annuity_triple(curve, T_x, T_s, T_e, frequency)
    levels = forward_annuities(curve, T_x, T_e, frequency)
    n = levels.size
    times = T_x + np.arange(1, n + 1) / frequency
    short_index = int(np.count_nonzero(times <= T_s + 1e-9))
    tau = np.full(n, 1.0 / frequency)
    R = forward_swap_rates(curve, T_x, T_e, frequency) if forwards is None else np.asarray(forwards, float)
    d_vols, d_e, d_s = default_period_inputs(times, T_s, T_e, Sigma_s, Sigma_e, rho, rho)
    vols = d_vols if vols is None else np.asarray(vols, dtype=float)
    corr_e = d_e if corr_e is None else np.asarray(corr_e, dtype=float)
    corr_s = d_s if corr_s is None else np.asarray(corr_s, dtype=float)
    for name, arr in (("forwards", R), ("vols", vols), ("corr_e", corr_e), ("corr_s", corr_s)):
        if arr.shape != (n,):
            raise InvalidInputError(f"{name} needs one entry per period ({n})")
    if np.any(vols < 0) or Sigma_s < 0 or Sigma_e < 0:
        raise InvalidInputError("vols must be non-negative")
    if not -1 <= rho <= 1:
        raise InvalidInputError(f"correlation {rho} outside [-1, 1]")

    long_driver = build_mapping(tau, R, corr_e, vols, levels, "Y", short_index)
    short_driver = build_mapping(tau, R, corr_s, vols, levels, "X", short_index)
    slope_e, slope_s = ratio_slopes(long_driver, short_driver)
    covs = CovarianceEstimates(cov_e=slope_e * Sigma_e, cov_s=slope_s * Sigma_s)
    sigma_e, sigma_s = solve_sigmas(covs.cov_e, covs.cov_s, Sigma_s, Sigma_e, rho,
                                    triple.A_s0, triple.A_e0, triple.A_u0)
    return SigmaEstimate(sigma_e, sigma_s, covs, long_driver, short_driver)


def driver_expectation(mapping: DriverMapping, j: int, order: int = 64) -> float:
    """Gauss–Hermite average of the j-th annuity over a standard normal driver."""
    z, w = np.polynomial.hermite_e.hermegauss(order)
    return float(annuity_of_driver(mapping, z, j) @ (w / math.sqrt(2 * math.pi)))
