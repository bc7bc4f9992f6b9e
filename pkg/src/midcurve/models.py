"""Annuity-ratio models and the marginals they induce.

Three models of the weights ``w1 = A_e/A_u`` and ``w2 = A_s/A_u`` seen at
expiry are supported:

* deterministic: both weights frozen at today's annuity ratios;
* linear: first-order expansion in the short rate ``x`` and long rate ``y``;
* log-linear: exponential form, positive by construction.

The linear and log-linear weights are spanned by two numbers ``sigma_e`` and
``sigma_s``.  Switching numeraire from the short/long annuity to the
underlying annuity tilts each rate's marginal density; the tilts are closed
forms for Gaussian marginals and are applied as stated to any other input.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import special, stats
from scipy.integrate import cumulative_simpson, trapezoid

from .curve import AnnuityTriple
from .errors import ContractError, DataError, InvalidInputError, InvalidMarginalError

# Nodes whose CDF (or survival) is below this are not used for quantiles.
_CDF_FLOOR = 1e-13


class ModelKind(enum.Enum):
    DETERMINISTIC = "deterministic"
    LINEAR = "linear"
    LOGLINEAR = "loglinear"

    @classmethod
    def parse(cls, text: str) -> "ModelKind":
        key = text.strip().lower().replace("-", "").replace("_", "")
        for kind in cls:
            if kind.value == key:
                return kind
        raise InvalidInputError(f"unknown model kind {text!r}")


class Measure(enum.Enum):
    SHORT_ANNUITY = "short-annuity"
    LONG_ANNUITY = "long-annuity"
    UNDERLYING_ANNUITY = "underlying-annuity"


class Leg(enum.Enum):
    SHORT = "short"
    LONG = "long"

    @property
    def natural_measure(self) -> Measure:
        return Measure.SHORT_ANNUITY if self is Leg.SHORT else Measure.LONG_ANNUITY


@dataclass(frozen=True)
class MarketInputs:
    """Today's annuities, forward swap rates and terminal standard deviations at expiry."""

    annuities: AnnuityTriple
    R_s0: float
    R_e0: float
    Sigma_s: float
    Sigma_e: float
    rho: float

    def __post_init__(self) -> None:
        if not (self.Sigma_s > 0 and self.Sigma_e > 0):
            raise InvalidInputError("terminal standard deviations must be positive")
        if not -1 <= self.rho <= 1:
            raise InvalidInputError(f"correlation {self.rho} outside [-1, 1]")

    @classmethod
    def from_vols(cls, annuities, R_s0, R_e0, vol_s, vol_e, rho, expiry) -> "MarketInputs":
        """Build from annualised normal vols; terminal stdev is ``vol * sqrt(expiry)``."""
        root = math.sqrt(expiry)
        return cls(annuities, R_s0, R_e0, vol_s * root, vol_e * root, rho)

    @property
    def deterministic_forward(self) -> float:
        a = self.annuities
        return (a.A_e0 * self.R_e0 - a.A_s0 * self.R_s0) / a.A_u0

    def scaled_vols(self, factor: float) -> "MarketInputs":
        return replace(self, Sigma_s=self.Sigma_s * factor, Sigma_e=self.Sigma_e * factor)


@dataclass(frozen=True)
class AnnuityModel:
    kind: ModelKind
    sigma_e: float = 0.0
    sigma_s: float = 0.0

    def __post_init__(self) -> None:
        if self.kind is ModelKind.DETERMINISTIC:
            object.__setattr__(self, "sigma_e", 0.0)
            object.__setattr__(self, "sigma_s", 0.0)

    @classmethod
    def deterministic(cls) -> "AnnuityModel":
        return cls(ModelKind.DETERMINISTIC)

    @classmethod
    def linear(cls, sigma_e: float, sigma_s: float) -> "AnnuityModel":
        return cls(ModelKind.LINEAR, sigma_e, sigma_s)

    @classmethod
    def loglinear(cls, sigma_e: float, sigma_s: float) -> "AnnuityModel":
        return cls(ModelKind.LOGLINEAR, sigma_e, sigma_s)

    @property
    def name(self) -> str:
        return self.kind.value


@dataclass(frozen=True)
class ModelCoefficients:
    mu_s: float
    mu_e: float
    nu_s: float
    nu_e: float
    alpha_s: float
    alpha_e: float
    hatR_s: float
    hatR_e: float
    tildeR_s: float
    tildeR_e: float


def coefficients(model: AnnuityModel, mkt: MarketInputs) -> ModelCoefficients:
    """Expansion coefficients, adjusted forwards and martingale constants."""
    a = mkt.annuities
    if min(a.A_s0, a.A_e0, a.A_u0) <= 0:
        raise InvalidInputError("annuities must be positive")
    Ss, Se, rho = mkt.Sigma_s, mkt.Sigma_e, mkt.rho
    mu_s = a.A_u0 / a.A_e0 * model.sigma_s
    mu_e = a.A_u0 / a.A_e0 * model.sigma_e
    nu_s = a.A_u0 / a.A_s0 * model.sigma_s
    nu_e = a.A_u0 / a.A_s0 * model.sigma_e

    hatR_s = mkt.R_s0 - (nu_s * Ss + nu_e * rho * Se) * Ss
    hatR_e = mkt.R_e0 - (mu_e * Se + mu_s * rho * Ss) * Se
    tildeR_s = hatR_s + (mu_s * Ss + mu_e * rho * Se) * Ss
    tildeR_e = hatR_e + (nu_e * Se + nu_s * rho * Ss) * Se

    alpha_s = a.A_u0 / a.A_s0 * math.exp(-0.5 * _quad_form(nu_e, nu_s, mkt))
    alpha_e = a.A_u0 / a.A_e0 * math.exp(-0.5 * _quad_form(mu_e, mu_s, mkt))
    return ModelCoefficients(
        mu_s, mu_e, nu_s, nu_e, alpha_s, alpha_e, hatR_s, hatR_e, tildeR_s, tildeR_e
    )


def _quad_form(c_e: float, c_s: float, mkt: MarketInputs) -> float:
    """Variance of ``c_e * y + c_s * x`` for the terminal rate covariance."""
    Se, Ss = mkt.Sigma_e, mkt.Sigma_s
    return c_e**2 * Se**2 + 2 * mkt.rho * c_e * c_s * Se * Ss + c_s**2 * Ss**2


def weights(model: AnnuityModel, coeffs: ModelCoefficients, mkt: MarketInputs, x, y):
    """Weights ``(w1, w2)`` at short rate ``x`` and long rate ``y`` (broadcasting)."""
    a = mkt.annuities
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    c = coeffs
    base1 = a.A_e0 / a.A_u0
    base2 = a.A_s0 / a.A_u0
    if model.kind is ModelKind.DETERMINISTIC:
        shape = np.broadcast_shapes(x.shape, y.shape)
        return np.full(shape, base1), np.full(shape, base2)
    dy = y - c.hatR_e
    dx = x - c.hatR_s
    if model.kind is ModelKind.LINEAR:
        w1 = base1 * (1 + c.mu_e * dy + c.mu_s * dx)
        w2 = base2 * (1 + c.nu_e * dy + c.nu_s * dx)
        return w1, w2
    w1 = base1 * np.exp(-0.5 * _quad_form(c.mu_e, c.mu_s, mkt) + c.mu_e * dy + c.mu_s * dx)
    w2 = base2 * np.exp(-0.5 * _quad_form(c.nu_e, c.nu_s, mkt) + c.nu_e * dy + c.nu_s * dx)
    return w1, w2


@dataclass(frozen=True)
class Marginal:
    """Density of one swap rate on a grid, tagged with the measure it lives in.

    ``cdf`` is accumulated from the left and ``sf`` from the right so both
    tails keep their relative precision; quantiles are interpolated linearly
    in normal-score space, which is exact for Gaussian densities.
    """

    grid: np.ndarray
    pdf: np.ndarray
    cdf: np.ndarray
    sf: np.ndarray
    measure: Measure
    mean: float
    clipped_mass: float = 0.0
    _scores: np.ndarray = field(init=False, repr=False, compare=False)
    _score_nodes: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        for name in ("grid", "pdf", "cdf", "sf"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        lower = self.cdf < 0.5
        resolved = np.where(lower, self.cdf, self.sf) > _CDF_FLOOR
        scores = np.where(lower, special.ndtri(np.where(lower, self.cdf, 0.5)),
                          -special.ndtri(np.where(lower, 0.5, self.sf)))
        scores = np.maximum.accumulate(scores[resolved])
        nodes = self.grid[resolved]
        # Flat CDF stretches carry no mass; keep the first node of each.
        rising = np.r_[True, np.diff(scores) > 0] if scores.size else np.zeros(0, bool)
        scores, nodes = scores[rising], nodes[rising]
        if scores.size < 2:
            raise InvalidMarginalError("CDF does not resolve at least two distinct quantiles")
        object.__setattr__(self, "_scores", scores)
        object.__setattr__(self, "_score_nodes", nodes)

    @classmethod
    def from_density(cls, grid, pdf, measure: Measure, *, renormalize: bool = False,
                     clipped_mass: float = 0.0) -> "Marginal":
        grid = np.asarray(grid, dtype=float)
        pdf = np.asarray(pdf, dtype=float)
        if grid.ndim != 1 or grid.size < 5 or grid.shape != pdf.shape:
            raise InvalidInputError("grid and density must be matching 1-d arrays of >= 5 nodes")
        if np.any(np.diff(grid) <= 0):
            raise InvalidInputError("grid must be strictly increasing")
        if np.any(pdf < 0) or not np.all(np.isfinite(pdf)):
            raise InvalidInputError("density must be finite and non-negative")
        mass = trapezoid(pdf, grid)
        if renormalize:
            pdf = pdf / mass
            mass = 1.0
        if abs(mass - 1) > 1e-6:
            raise InvalidInputError(f"density integrates to {mass}, not 1")
        cdf = np.maximum.accumulate(np.maximum(cumulative_simpson(pdf, x=grid, initial=0.0), 0))
        sf = np.maximum.accumulate(
            np.maximum(cumulative_simpson(pdf[::-1], x=-grid[::-1], initial=0.0), 0)
        )[::-1]
        cdf = np.clip(cdf / cdf[-1], 0.0, 1.0)
        sf = np.clip(sf / sf[0], 0.0, 1.0)
        mean = trapezoid(grid * pdf, grid) / mass
        return cls(grid, pdf, cdf, sf, measure, float(mean), clipped_mass)

    @property
    def mass(self) -> float:
        return float(trapezoid(self.pdf, self.grid))

    def from_score(self, u):
        """Rate with normal score ``u``: ``cdf^{-1}(Phi(u))``; edges beyond the resolved range."""
        return np.interp(u, self._scores, self._score_nodes,
                         left=self.grid[0], right=self.grid[-1])

    def quantile(self, p):
        return self.from_score(special.ndtri(p))


@dataclass(frozen=True)
class GridSpec:
    nodes: int = 801
    width: float = 8.0  # in standard deviations either side of the forward


def flat_normal_marginal(fwd: float, Sigma: float, measure: Measure,
                         grid: GridSpec = GridSpec()) -> Marginal:
    """Normal density with mean ``fwd`` and stdev ``Sigma`` sampled on a centred grid."""
    if not Sigma > 0:
        raise InvalidInputError("Sigma must be positive")
    coverage = 1 - 2 * stats.norm.sf(grid.width)
    if coverage < 1 - 1e-6 or grid.nodes < 5:
        raise InvalidInputError(f"grid of +/-{grid.width} stdev covers only {coverage:.9f}")
    x = np.linspace(fwd - grid.width * Sigma, fwd + grid.width * Sigma, grid.nodes)
    pdf = stats.norm.pdf(x, loc=fwd, scale=Sigma)
    m = Marginal.from_density(x, pdf, measure)
    return replace(m, mean=float(fwd))


def bachelier_receiver_unit(fwd: float, strikes, terminal_std):
    """Undiscounted receiver payoff expectation ``E[(K - R)^+]`` for ``R ~ N(fwd, s^2)``."""
    d = (np.asarray(strikes) - fwd) / terminal_std
    return (np.asarray(strikes) - fwd) * special.ndtr(d) + terminal_std * stats.norm.pdf(d)


def marginal_from_smile(strikes, normal_vols, fwd: float, T_x: float, measure: Measure,
                        tolerance: float = 1e-6) -> Marginal:
    """Density implied by receiver prices across strikes (unit annuity and notional).

    The density at each interior strike is the non-uniform second difference of
    the receiver price in strike.  The two end strikes only serve as stencil
    points, so the returned grid is ``strikes[1:-1]``.
    """
    K = np.asarray(strikes, dtype=float)
    vols = np.asarray(normal_vols, dtype=float)
    if K.ndim != 1 or K.size < 5 or K.shape != vols.shape:
        raise InvalidInputError("need at least 5 strikes with one vol each")
    if np.any(np.diff(K) <= 0):
        raise InvalidInputError("strikes must be strictly increasing")
    if np.any(vols <= 0):
        raise InvalidInputError("normal vols must be positive")
    receivers = bachelier_receiver_unit(fwd, K, vols * math.sqrt(T_x))
    payers = bachelier_receiver_unit(-fwd, -K, vols * math.sqrt(T_x))
    h_lo = K[1:-1] - K[:-2]
    h_hi = K[2:] - K[1:-1]

    def second_difference(prices):
        return 2 * (h_lo * prices[2:] - (h_lo + h_hi) * prices[1:-1] + h_hi * prices[:-2]) / (
            h_lo * h_hi * (h_lo + h_hi)
        )

    # Each stencil uses the out-of-the-money side (payers by reflecting the
    # rate); deep in-the-money prices would lose the tails to cancellation.
    density = np.where(K[1:-1] <= fwd, second_difference(receivers), second_difference(payers))
    bad = np.flatnonzero(density < -tolerance)
    if bad.size:
        i = bad[0]
        raise DataError(
            f"negative density {density[i]:.3g} at strike {K[i + 1]:.6g} (butterfly arbitrage)"
        )
    return Marginal.from_density(K[1:-1], np.maximum(density, 0.0), measure, renormalize=True)


def _tilt_slope(coeffs: ModelCoefficients, mkt: MarketInputs, leg: Leg) -> tuple[float, float]:
    """Slope ``c`` of the tilt in the leg's rate and the stdev-scaled slope ``c * Sigma``."""
    rho = mkt.rho
    if leg is Leg.SHORT:
        scaled = coeffs.nu_s * mkt.Sigma_s + coeffs.nu_e * rho * mkt.Sigma_e
        return scaled / mkt.Sigma_s, scaled
    scaled = coeffs.mu_e * mkt.Sigma_e + coeffs.mu_s * rho * mkt.Sigma_s
    return scaled / mkt.Sigma_e, scaled


def tilt_marginal(model: AnnuityModel, coeffs: ModelCoefficients, mkt: MarketInputs,
                  marginal: Marginal, leg: Leg) -> Marginal:
    """Move a rate's marginal from its own annuity measure to the underlying-annuity measure."""
    if marginal.measure is not leg.natural_measure:
        raise ContractError(
            f"{leg.value} leg expects a {leg.natural_measure.value} marginal, "
            f"got {marginal.measure.value}"
        )
    if model.kind is ModelKind.DETERMINISTIC:
        return replace(marginal, measure=Measure.UNDERLYING_ANNUITY)

    fwd0 = mkt.R_s0 if leg is Leg.SHORT else mkt.R_e0
    slope, scaled = _tilt_slope(coeffs, mkt, leg)
    x = marginal.grid
    if model.kind is ModelKind.LINEAR:
        factor = 1 - slope * (x - fwd0)
        tilted = marginal.pdf * factor
        negative = tilted < 0
        if np.any(negative):
            clipped = float(-trapezoid(np.where(negative, tilted, 0.0), x))
            if clipped > 1e-6:
                warnings.warn(
                    f"linear tilt of the {leg.value} leg went negative; "
                    f"clipped mass {clipped:.3g} and renormalized",
                    RuntimeWarning, stacklevel=2,
                )
            return Marginal.from_density(x, np.maximum(tilted, 0.0), Measure.UNDERLYING_ANNUITY,
                                         renormalize=True, clipped_mass=clipped)
        return Marginal.from_density(x, tilted, Measure.UNDERLYING_ANNUITY)

    tilted = marginal.pdf * np.exp(-0.5 * scaled**2 - slope * (x - fwd0))
    # The normalisation is exact for Gaussian inputs only.
    renorm = abs(trapezoid(tilted, x) - 1) > 1e-10
    return Marginal.from_density(x, tilted, Measure.UNDERLYING_ANNUITY, renormalize=renorm)


def natural_marginals(mkt: MarketInputs, grid: GridSpec = GridSpec()) -> tuple[Marginal, Marginal]:
    """Flat-smile (Gaussian) marginals of the short and long rates in their own measures."""
    return (
        flat_normal_marginal(mkt.R_s0, mkt.Sigma_s, Measure.SHORT_ANNUITY, grid),
        flat_normal_marginal(mkt.R_e0, mkt.Sigma_e, Measure.LONG_ANNUITY, grid),
    )


def underlying_marginals(model: AnnuityModel, mkt: MarketInputs,
                         natural: tuple[Marginal, Marginal] | None = None,
                         coeffs: ModelCoefficients | None = None,
                         grid: GridSpec = GridSpec()) -> tuple[Marginal, Marginal]:
    """Both marginals moved to the underlying-annuity measure."""
    coeffs = coefficients(model, mkt) if coeffs is None else coeffs
    short, long_ = natural_marginals(mkt, grid) if natural is None else natural
    return (
        tilt_marginal(model, coeffs, mkt, short, Leg.SHORT),
        tilt_marginal(model, coeffs, mkt, long_, Leg.LONG),
    )
