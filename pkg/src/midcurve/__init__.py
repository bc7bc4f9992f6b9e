"""Midcurve swaption pricing with terminal-swap-rate annuity models and a Gaussian copula."""

from .calibration import SigmaEstimate, estimate_sigmas
from .copula import (
    CopulaSpec,
    MidcurveTrade,
    PricingResult,
    Side,
    price_mc,
    price_quadrature,
    underlying_forward,
)
from .curve import (
    AnnuityTriple,
    DiscountCurve,
    SwapSchedule,
    annuity,
    annuity_triple,
    forward_swap_rate,
)
from .errors import (
    CalibrationError,
    ConditioningError,
    ConfigError,
    InvalidInputError,
    MidcurveError,
    NumericalError,
)
from .implied import (
    bachelier_price,
    correlation_skew_curve,
    implied_correlation,
    implied_normal_vol,
)
from .models import (
    AnnuityModel,
    GridSpec,
    Leg,
    Marginal,
    MarketInputs,
    Measure,
    ModelKind,
    coefficients,
    marginal_from_smile,
    natural_marginals,
    tilt_marginal,
    underlying_marginals,
    weights,
)

__version__ = "0.1.0"
