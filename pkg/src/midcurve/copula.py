"""Gaussian-copula pricing of physically settled midcurve swaptions.

The underlying rate at expiry is ``w1(x, y) * y - w2(x, y) * x`` with ``x`` the
short and ``y`` the long swap rate.  Both marginals must already live in the
underlying-annuity measure; they are joined through correlated normal scores.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import optimize, special

from .errors import ContractError, InvalidInputError
from .models import (
    AnnuityModel,
    MarketInputs,
    Marginal,
    Measure,
    ModelCoefficients,
    coefficients,
    weights,
)

MC_CHUNK = 1 << 16
MIN_PATHS = 10_000
MIN_ORDER = 16
# Inner integration range in long-rate score; phi(10) ~ 8e-23.
_INNER_SPAN = 10.0
_PROBES = 81
_BISECTIONS = 56
_PHI_NORM = 1 / math.sqrt(2 * math.pi)


class Side(enum.Enum):
    RECEIVER = "receiver"
    PAYER = "payer"

    @classmethod
    def parse(cls, text: str) -> "Side":
        key = text.strip().lower()
        aliases = {"rec": "receiver", "pay": "payer"}
        try:
            return cls(aliases.get(key, key))
        except ValueError:
            raise InvalidInputError(f"side must be receiver or payer, got {text!r}") from None


@dataclass(frozen=True)
class MidcurveTrade:
    T_x: float
    T_s: float
    T_e: float
    strike: float
    notional: float = 1.0
    side: Side = Side.RECEIVER

    def __post_init__(self) -> None:
        if not self.notional > 0:
            raise InvalidInputError("notional must be positive")
        if not (0 < self.T_x <= self.T_s < self.T_e):
            raise InvalidInputError("need 0 < T_x <= T_s < T_e")

    def with_strike(self, strike: float) -> "MidcurveTrade":
        return MidcurveTrade(self.T_x, self.T_s, self.T_e, strike, self.notional, self.side)


@dataclass(frozen=True)
class CopulaSpec:
    rho: float
    order: int = 64
    paths: int = 1_000_000
    seed: int = 0
    workers: int = 1

    def __post_init__(self) -> None:
        if not -1 < self.rho < 1:
            raise InvalidInputError(f"copula correlation {self.rho} outside (-1, 1)")
        if self.order < MIN_ORDER:
            raise InvalidInputError(f"quadrature order must be >= {MIN_ORDER}")
        if self.workers < 1:
            raise InvalidInputError("workers must be >= 1")


@dataclass(frozen=True)
class PricingResult:
    price: float
    stderr: float
    method: str
    diagnostics: dict[str, float] = field(default_factory=dict)


@lru_cache(maxsize=16)
def gauss_hermite(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Probabilists' Gauss–Hermite nodes with weights summing to one."""
    nodes, w = np.polynomial.hermite_e.hermegauss(order)
    w = w / w.sum()
    nodes.setflags(write=False)
    w.setflags(write=False)
    return nodes, w


def _check_marginals(marginals: tuple[Marginal, Marginal]) -> None:
    for m in marginals:
        if m.measure is not Measure.UNDERLYING_ANNUITY:
            raise ContractError(
                f"copula pricing needs underlying-annuity marginals, got {m.measure.value}"
            )


def joint_transform(marginal_s: Marginal, marginal_e: Marginal, u, v):
    """Map normal scores ``(u, v)`` to rates ``(x, y)`` through the marginal CDFs."""
    _check_marginals((marginal_s, marginal_e))
    return marginal_s.from_score(u), marginal_e.from_score(v)


def _underlying_rate(model, coeffs, mkt, x, y):
    w1, w2 = weights(model, coeffs, mkt, x, y)
    return w1 * y - w2 * x


def _quadrature_rates(mkt, model, copula, marginals, coeffs):
    _check_marginals(marginals)
    z, w = gauss_hermite(copula.order)
    rho = copula.rho
    x = marginals[0].from_score(z)[:, None]
    y = marginals[1].from_score(rho * z[:, None] + math.sqrt(1 - rho * rho) * z[None, :])
    rates = _underlying_rate(model, coeffs, mkt, x, y)
    return rates, np.outer(w, w)


def underlying_forward(mkt: MarketInputs, model: AnnuityModel, copula: CopulaSpec,
                       marginals: tuple[Marginal, Marginal],
                       coeffs: ModelCoefficients | None = None) -> float:
    """Expected underlying swap rate under the underlying-annuity measure."""
    coeffs = coefficients(model, mkt) if coeffs is None else coeffs
    rates, ww = _quadrature_rates(mkt, model, copula, marginals, coeffs)
    return float(np.sum(ww * rates))


def _receiver_by_node(strike, mkt, model, coeffs, copula, marginals):
    """Receiver payoff integrated over the long-rate score, per short-rate node.

    For each outer node ``u`` the inner integrand ``(K - z(u, v))^+ phi(v)`` is
    split at its exercise boundary, located by bracketing on a probe grid and
    bisection; the exercised piece is integrated with Gauss–Legendre.  Nodes
    with no boundary inside ``[-V, V]`` use Gauss–Hermite on the whole line.
    """
    z_out, _ = gauss_hermite(copula.order)
    z_in, w_in = gauss_hermite(copula.order)
    t_gl, w_gl = gauss_legendre(copula.order)
    rho = copula.rho
    rc = math.sqrt(1 - rho * rho)
    n = z_out.size
    x = marginals[0].from_score(z_out)[:, None]
    shift = (rho * z_out)[:, None]

    def gap(v, rows=slice(None)):
        y = marginals[1].from_score(shift[rows] + rc * v)
        return strike - _underlying_rate(model, coeffs, mkt, x[rows], y)

    probe = np.linspace(-_INNER_SPAN, _INNER_SPAN, _PROBES)
    g = gap(probe[None, :])
    positive = g > 0
    flips = np.count_nonzero(positive[:, 1:] != positive[:, :-1], axis=1)

    result = np.empty(n)
    none = flips == 0
    if np.any(none):
        whole = gap(z_in[None, :], none)
        result[none] = np.maximum(whole, 0.0) @ w_in

    single = np.flatnonzero(flips == 1)
    if single.size:
        k = np.argmax(positive[single, 1:] != positive[single, :-1], axis=1)
        lo, hi = probe[k], probe[k + 1]
        left_positive = positive[single, k]
        rows = single
        for _ in range(_BISECTIONS):
            mid = 0.5 * (lo + hi)
            same = (gap(mid[:, None], rows)[:, 0] > 0) == left_positive
            lo = np.where(same, mid, lo)
            hi = np.where(same, hi, mid)
        root = 0.5 * (lo + hi)
        a = np.where(left_positive, -_INNER_SPAN, root)
        b = np.where(left_positive, root, _INNER_SPAN)
        result[single] = _legendre_piece(gap, rows, a, b, t_gl, w_gl)

    for i in np.flatnonzero(flips > 1):
        result[i] = _general_piece(gap, i, probe, t_gl, w_gl)
    return result


def _legendre_piece(gap, rows, a, b, t, w):
    half = 0.5 * (b - a)[:, None]
    v = 0.5 * (a + b)[:, None] + half * t[None, :]
    values = np.maximum(gap(v, rows), 0.0) * _PHI_NORM * np.exp(-0.5 * v * v)
    return (half[:, 0]) * (values @ w)


def _general_piece(gap, i, probe, t, w):
    rows = slice(i, i + 1)
    values = gap(probe[None, :], rows)[0]
    cuts = [probe[0]]
    for j in np.flatnonzero((values[1:] > 0) != (values[:-1] > 0)):
        cuts.append(optimize.brentq(lambda v: gap(np.array([[v]]), rows)[0, 0],
                                    probe[j], probe[j + 1], xtol=1e-15))
    cuts.append(probe[-1])
    total = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        total += float(_legendre_piece(gap, rows, np.array([a]), np.array([b]), t, w)[0])
    return total


@lru_cache(maxsize=16)
def gauss_legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    nodes, w = np.polynomial.legendre.leggauss(order)
    nodes.setflags(write=False)
    w.setflags(write=False)
    return nodes, w


def price_quadrature(trade: MidcurveTrade, mkt: MarketInputs, model: AnnuityModel,
                     copula: CopulaSpec, marginals: tuple[Marginal, Marginal],
                     coeffs: ModelCoefficients | None = None) -> PricingResult:
    """Deterministic evaluation of the copula payoff integral.

    Gauss–Hermite in the short-rate score; in the long-rate score the payoff
    is integrated up to its exercise boundary (see ``_receiver_by_node``).
    Payers follow from receiver-payer parity with the forward computed by
    tensor Gauss–Hermite on the same model.
    """
    _check_marginals(marginals)
    coeffs = coefficients(model, mkt) if coeffs is None else coeffs
    _, w_out = gauss_hermite(copula.order)
    receiver = float(w_out @ _receiver_by_node(trade.strike, mkt, model, coeffs, copula, marginals))
    forward = underlying_forward(mkt, model, copula, marginals, coeffs)
    undiscounted = receiver
    if trade.side is Side.PAYER:
        undiscounted = receiver - (trade.strike - forward)
    scale = mkt.annuities.A_u0 * trade.notional
    return PricingResult(
        price=max(scale * undiscounted, 0.0),
        stderr=0.0,
        method="quadrature",
        diagnostics={"nodes": float(2 * copula.order**2), "forward": forward},
    )


def _mc_chunk(args):
    index, size, seed, rho, strike, sign, marginals, model, coeffs, mkt = args
    stream = np.random.SeedSequence(entropy=seed, spawn_key=(index,))
    rng = np.random.Generator(np.random.Philox(stream))
    uniforms = rng.random((2, size))
    u = special.ndtri(uniforms[0])
    v = rho * u + math.sqrt(1 - rho * rho) * special.ndtri(uniforms[1])
    x = marginals[0].from_score(u)
    y = marginals[1].from_score(v)
    payoff = np.maximum(sign * (strike - _underlying_rate(model, coeffs, mkt, x, y)), 0.0)
    mean = float(payoff.mean())
    return size, mean, float(np.sum((payoff - mean) ** 2))


def price_mc(trade: MidcurveTrade, mkt: MarketInputs, model: AnnuityModel,
             copula: CopulaSpec, marginals: tuple[Marginal, Marginal],
             coeffs: ModelCoefficients | None = None) -> PricingResult:
    """Monte Carlo estimate of the same integral.

    Paths are split into fixed-size chunks, each with its own Philox stream
    keyed by ``(seed, chunk index)``, and chunk statistics are merged in chunk
    order.  The result therefore depends on the seed and path count only.
    """
    if copula.paths < MIN_PATHS:
        raise InvalidInputError(f"path count must be >= {MIN_PATHS}")
    _check_marginals(marginals)
    coeffs = coefficients(model, mkt) if coeffs is None else coeffs
    sign = 1.0 if trade.side is Side.RECEIVER else -1.0
    sizes = [MC_CHUNK] * (copula.paths // MC_CHUNK)
    if copula.paths % MC_CHUNK:
        sizes.append(copula.paths % MC_CHUNK)
    jobs = [
        (i, n, copula.seed, copula.rho, trade.strike, sign, marginals, model, coeffs, mkt)
        for i, n in enumerate(sizes)
    ]
    if copula.workers == 1:
        stats = list(map(_mc_chunk, jobs))
    else:
        with ThreadPoolExecutor(max_workers=copula.workers) as pool:
            stats = list(pool.map(_mc_chunk, jobs))

    count, mean, m2 = 0, 0.0, 0.0
    for n, chunk_mean, chunk_m2 in stats:
        total = count + n
        delta = chunk_mean - mean
        mean += delta * n / total
        m2 += chunk_m2 + delta * delta * count * n / total
        count = total
    scale = mkt.annuities.A_u0 * trade.notional
    return PricingResult(
        price=scale * mean,
        stderr=scale * math.sqrt(m2 / (count - 1) / count),
        method="monte-carlo",
        diagnostics={"paths": float(count), "chunks": float(len(sizes))},
    )
