"""Run configuration: flat ``section.key = value`` text files.

Rates accept a ``%`` or ``bp`` suffix (plain numbers are decimals); vols are
normal vols in bp per year.  Unit conversion happens here and nowhere else.
Relative ``curve.file`` paths resolve against the config file's directory.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .copula import CopulaSpec, MidcurveTrade, Side
from .curve import DiscountCurve, SwapSchedule, annuity_triple, forward_swap_rate
from .errors import ConfigError, InvalidInputError
from .models import AnnuityModel, MarketInputs, ModelKind

KNOWN_KEYS = {
    "curve.file",
    "trade.expiry", "trade.start", "trade.end", "trade.frequency", "trade.notional",
    "trade.side", "trade.strike",
    "market.derive_forwards", "market.short_rate", "market.long_rate",
    "market.short_vol_bp", "market.long_vol_bp", "market.correlation",
    "model.kind", "model.sigma_e", "model.sigma_s",
    "engine.method", "engine.order", "engine.paths", "engine.seed", "engine.workers",
    "strikes",
    "calibration.corr_long", "calibration.corr_short",
}

_ATM_GRID = re.compile(r"^atm\s*(?:±|\+-|\+/-)\s*([^:]+):(.+)$", re.IGNORECASE)
_ATM_POINT = re.compile(r"^atm\s*(?:([+-])\s*(.+))?$", re.IGNORECASE)


def parse_rate(text: str) -> float:
    """``'2.631%'`` -> 0.02631, ``'25bp'`` -> 0.0025, ``'0.01'`` -> 0.01."""
    s = text.strip().lower()
    try:
        if s.endswith("%"):
            return float(s[:-1]) / 100
        if s.endswith("bp"):
            return float(s[:-2]) / 1e4
        return float(s)
    except ValueError:
        raise ConfigError(f"not a rate: {text!r}") from None


def _parse_bool(text: str) -> bool:
    s = text.strip().lower()
    if s in {"1", "true", "yes", "on"}:
        return True
    if s in {"0", "false", "no", "off"}:
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def read_pairs(path: Path) -> dict[str, str]:
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    pairs: dict[str, str] = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in KNOWN_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        pairs[key] = value
    return pairs


@dataclass(frozen=True)
class RunConfig:
    curve_file: Path
    T_x: float
    T_s: float
    T_e: float
    frequency: int
    notional: float
    side: Side
    strike: str
    derive_forwards: bool
    short_rate: float | None
    long_rate: float | None
    short_vol_bp: float
    long_vol_bp: float
    correlation: float
    model: AnnuityModel
    method: str
    order: int
    paths: int
    seed: int
    workers: int
    strikes: str | None
    corr_long: float | None
    corr_short: float | None

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        path = Path(path)
        p = read_pairs(path)

        def need(key: str) -> str:
            if key not in p:
                raise ConfigError(f"missing required key {key!r}")
            return p[key]

        def number(key: str, default=None, cast=float):
            if key not in p:
                if default is None:
                    raise ConfigError(f"missing required key {key!r}")
                return default
            try:
                return cast(p[key])
            except ValueError:
                raise ConfigError(f"{key}: not a number: {p[key]!r}") from None

        curve_file = Path(need("curve.file"))
        if not curve_file.is_absolute():
            curve_file = path.parent / curve_file
        derive = _parse_bool(p.get("market.derive_forwards", "false"))
        kind = ModelKind.parse(p.get("model.kind", "deterministic"))
        return cls(
            curve_file=curve_file,
            T_x=number("trade.expiry"),
            T_s=number("trade.start"),
            T_e=number("trade.end"),
            frequency=number("trade.frequency", 1, int),
            notional=number("trade.notional", 1.0),
            side=Side.parse(p.get("trade.side", "receiver")),
            strike=p.get("trade.strike", "atm"),
            derive_forwards=derive,
            short_rate=None if derive else parse_rate(need("market.short_rate")),
            long_rate=None if derive else parse_rate(need("market.long_rate")),
            short_vol_bp=number("market.short_vol_bp"),
            long_vol_bp=number("market.long_vol_bp"),
            correlation=number("market.correlation"),
            model=AnnuityModel(kind, number("model.sigma_e", 0.0), number("model.sigma_s", 0.0)),
            method=p.get("engine.method", "quadrature").strip().lower(),
            order=number("engine.order", 64, int),
            paths=number("engine.paths", 1_000_000, int),
            seed=number("engine.seed", 0, int),
            workers=number("engine.workers", 1, int),
            strikes=p.get("strikes"),
            corr_long=number("calibration.corr_long", None, float) if "calibration.corr_long" in p else None,
            corr_short=number("calibration.corr_short", None, float) if "calibration.corr_short" in p else None,
        )

    def with_overrides(self, **changes) -> "RunConfig":
        return replace(self, **{k: v for k, v in changes.items() if v is not None})

    def validate(self, *, positive_vols: bool = True) -> None:
        """Check every downstream precondition before any computation starts."""
        if not self.curve_file.is_file():
            raise ConfigError(f"curve file not found: {self.curve_file}")
        if not (0 < self.T_x < self.T_s < self.T_e):
            raise ConfigError("need 0 < trade.expiry < trade.start < trade.end")
        if self.frequency < 1:
            raise ConfigError("trade.frequency must be a positive integer")
        if not self.notional > 0:
            raise ConfigError("trade.notional must be positive")
        if positive_vols and not (self.short_vol_bp > 0 and self.long_vol_bp > 0):
            raise ConfigError("market vols must be positive")
        if self.short_vol_bp < 0 or self.long_vol_bp < 0:
            raise ConfigError("market vols must be non-negative")
        if not -1 <= self.correlation <= 1:
            raise ConfigError("market.correlation must lie in [-1, 1]")
        if self.method not in {"quadrature", "mc"}:
            raise ConfigError("engine.method must be quadrature or mc")
        if self.order < 16:
            raise ConfigError("engine.order must be >= 16")
        if self.method == "mc" and self.paths < 10_000:
            raise ConfigError("engine.paths must be >= 10000")
        if self.workers < 1:
            raise ConfigError("engine.workers must be >= 1")
        for name in ("corr_long", "corr_short"):
            value = getattr(self, name)
            if value is not None and not -1 <= value <= 1:
                raise ConfigError(f"calibration.{name} must lie in [-1, 1]")

    def curve(self) -> DiscountCurve:
        return DiscountCurve.from_file(self.curve_file)

    def market(self, curve: DiscountCurve | None = None) -> MarketInputs:
        curve = self.curve() if curve is None else curve
        triple = annuity_triple(curve, self.T_x, self.T_s, self.T_e, self.frequency)
        R_s0, R_e0 = self.forwards(curve)
        return MarketInputs.from_vols(
            triple, R_s0, R_e0, self.short_vol_bp / 1e4, self.long_vol_bp / 1e4,
            self.correlation, self.T_x,
        )

    def forwards(self, curve: DiscountCurve) -> tuple[float, float]:
        if not self.derive_forwards:
            return self.short_rate, self.long_rate
        short = SwapSchedule.regular(self.T_x, self.T_x, self.T_s, self.frequency)
        long_ = SwapSchedule.regular(self.T_x, self.T_x, self.T_e, self.frequency)
        return forward_swap_rate(curve, short), forward_swap_rate(curve, long_)

    def copula(self) -> CopulaSpec:
        rho = self.correlation
        if abs(rho) >= 1:
            raise ConfigError("copula correlation must lie strictly inside (-1, 1)")
        return CopulaSpec(rho, self.order, self.paths, self.seed, self.workers)

    def trade(self, strike: float) -> MidcurveTrade:
        return MidcurveTrade(self.T_x, self.T_s, self.T_e, strike, self.notional, self.side)


def parse_strike(text: str, atm: float) -> float:
    m = _ATM_POINT.match(text.strip())
    if m:
        if m.group(1) is None:
            return atm
        offset = parse_rate(m.group(2))
        return atm + offset if m.group(1) == "+" else atm - offset
    return parse_rate(text)


def parse_strikes(spec: str, atm: float) -> np.ndarray:
    """Strike grid from ``lo:hi:step`` or ``atm±X:step`` (``atm+-X:step`` also accepted)."""
    text = spec.strip()
    m = _ATM_GRID.match(text)
    if m:
        half = parse_rate(m.group(1))
        step = parse_rate(m.group(2))
        lo, hi = atm - half, atm + half
    else:
        parts = text.split(":")
        if len(parts) == 1:
            return np.array([parse_strike(parts[0], atm)])
        if len(parts) != 3:
            raise ConfigError(f"strike grid must be lo:hi:step or atm±X:step, got {spec!r}")
        lo, hi = parse_strike(parts[0], atm), parse_strike(parts[1], atm)
        step = parse_rate(parts[2])
    if not step > 0 or hi < lo:
        raise ConfigError(f"invalid strike grid {spec!r}")
    count = math.floor((hi - lo) / step * (1 + 1e-12) + 1e-9) + 1
    return lo + step * np.arange(count)


def model_from_flag(text: str, base: AnnuityModel) -> AnnuityModel:
    """``--model loglinear`` keeps the configured sigmas; ``--model linear:2,-1`` sets them."""
    kind_text, _, params = text.partition(":")
    kind = ModelKind.parse(kind_text)
    if not params:
        return AnnuityModel(kind, base.sigma_e, base.sigma_s)
    try:
        sigma_e, sigma_s = (float(v) for v in params.split(","))
    except ValueError:
        raise InvalidInputError(f"--model expects kind[:sigma_e,sigma_s], got {text!r}") from None
    return AnnuityModel(kind, sigma_e, sigma_s)
