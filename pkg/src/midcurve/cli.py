"""Command line entry point: ``midcurve {price,skew,calibrate,marginal-dump}``.

Every command reads a run config, writes CSV to stdout (or ``--output``) and
exits 0 on success, 2 on input errors and 3 on numerical failures.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import calibration, copula as cp, implied, models
from .curve import forward_swap_rates
from .config import RunConfig, model_from_flag, parse_strikes
from .errors import ConfigError, InvalidInputError, NumericalError

EXIT_OK, EXIT_INPUT, EXIT_NUMERICAL = 0, 2, 3


def fmt(value) -> str:
    if isinstance(value, str):
        return value
    value = float(value)
    if math.isnan(value):
        return "nan"
    return format(value + 0.0, ".12g")


def _write(rows: list[list], header: list[str], output: str | None) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows([[fmt(v) for v in row] for row in rows])
    if output:
        Path(output).write_text(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())


def _load(args, *, positive_vols: bool = True) -> RunConfig:
    cfg = RunConfig.load(args.config)
    cfg = cfg.with_overrides(
        method=getattr(args, "method", None),
        paths=getattr(args, "paths", None),
        seed=getattr(args, "seed", None),
        workers=getattr(args, "workers", None),
        strikes=getattr(args, "strikes", None),
    )
    if getattr(args, "model", None):
        cfg = cfg.with_overrides(model=model_from_flag(args.model, cfg.model))
    cfg.validate(positive_vols=positive_vols)
    return cfg


def _price(cfg: RunConfig, trade, mkt, marginals, coeffs):
    engine = cp.price_mc if cfg.method == "mc" else cp.price_quadrature
    return engine(trade, mkt, cfg.model, cfg.copula(), marginals, coeffs)


def cmd_price(args) -> int:
    cfg = _load(args)
    mkt = cfg.market()
    # The config's strike grid is for skew; price uses trade.strike unless --strikes is given.
    spec = args.strikes or cfg.strike
    strikes = parse_strikes(spec, mkt.deterministic_forward)
    if strikes.size != 1:
        raise ConfigError(f"price needs a single strike, got {strikes.size}")
    coeffs = models.coefficients(cfg.model, mkt)
    marginals = models.underlying_marginals(cfg.model, mkt, coeffs=coeffs)
    trade = cfg.trade(float(strikes[0]))
    result = _price(cfg, trade, mkt, marginals, coeffs)
    _write([[trade.strike, trade.side.value, cfg.model.name, result.method, result.price,
             result.stderr]],
           ["strike", "side", "model", "method", "price", "stderr"], args.output)
    return EXIT_OK


def cmd_skew(args) -> int:
    cfg = _load(args)
    mkt = cfg.market()
    atm = mkt.deterministic_forward
    if not cfg.strikes:
        raise ConfigError("skew needs a strike grid (config key 'strikes' or --strikes)")
    strikes = parse_strikes(cfg.strikes, atm)
    if strikes.size < 2:
        raise ConfigError(f"strike grid {cfg.strikes!r} yields a single strike; skew needs >= 2")
    copula = cfg.copula()
    coeffs = models.coefficients(cfg.model, mkt)
    marginals = models.underlying_marginals(cfg.model, mkt, coeffs=coeffs)
    if cfg.method == "mc":
        points = _skew_from_mc(cfg, mkt, strikes, marginals, coeffs)
    else:
        points = implied.correlation_skew_curve(cfg.trade(atm), mkt, cfg.model, strikes, copula,
                                                marginals)
    _write([[p.strike, p.price, p.implied_normal_vol, p.implied_correlation, p.flag]
            for p in points],
           ["strike", "price", "implied_normal_vol", "implied_corr", "flag"], args.output)
    if args.plot:
        from .plotting import plot_skew

        plot_skew(points, args.plot, atm=atm, reference_rho=cfg.correlation,
                  title=f"{cfg.model.name} sigma_e={cfg.model.sigma_e:g} "
                        f"sigma_s={cfg.model.sigma_s:g}")
    return EXIT_OK


def _skew_from_mc(cfg, mkt, strikes, marginals, coeffs):
    copula = cfg.copula()
    reference = implied.reference_marginals(mkt)
    forward = cp.underlying_forward(mkt, cfg.model, copula, marginals, coeffs)
    points = []
    for K in strikes:
        trade = cfg.trade(float(K))
        price = cp.price_mc(trade, mkt, cfg.model, copula, marginals, coeffs).price
        try:
            vol = implied.implied_normal_vol(price, forward, trade.strike, mkt.annuities.A_u0,
                                             trade.notional, trade.side) / math.sqrt(cfg.T_x)
        except NumericalError:
            vol = float("nan")
        quote = implied.implied_correlation(price, trade, mkt, copula.order, reference)
        points.append(implied.SkewPoint(trade.strike, price, vol, quote.rho, quote.flag))
    return points


def cmd_calibrate(args) -> int:
    cfg = _load(args, positive_vols=False)
    curve = cfg.curve()
    root_t = math.sqrt(cfg.T_x)
    Sigma_s = cfg.short_vol_bp / 1e4 * root_t
    Sigma_e = cfg.long_vol_bp / 1e4 * root_t
    forwards = forward_swap_rates(curve, cfg.T_x, cfg.T_e, cfg.frequency)
    times = cfg.T_x + np.arange(1, forwards.size + 1) / cfg.frequency
    short_rate, long_rate = cfg.forwards(curve)
    forwards[np.isclose(times, cfg.T_s)] = short_rate
    forwards[np.isclose(times, cfg.T_e)] = long_rate
    vols, corr_e, corr_s = calibration.default_period_inputs(
        times, cfg.T_s, cfg.T_e, Sigma_s, Sigma_e,
        cfg.correlation if cfg.corr_long is None else cfg.corr_long,
        cfg.correlation if cfg.corr_short is None else cfg.corr_short,
    )
    est = calibration.estimate_sigmas(
        curve, cfg.T_x, cfg.T_s, cfg.T_e, Sigma_s=Sigma_s, Sigma_e=Sigma_e,
        rho=cfg.correlation, vols=vols, corr_e=corr_e, corr_s=corr_s, forwards=forwards,
        frequency=cfg.frequency,
    )
    _write([[est.sigma_e, est.sigma_s, est.covariances.cov_e, est.covariances.cov_s]],
           ["sigma_e", "sigma_s", "cov_e", "cov_s"], args.output)
    return EXIT_OK


def cmd_marginal_dump(args) -> int:
    cfg = _load(args)
    mkt = cfg.market()
    coeffs = models.coefficients(cfg.model, mkt)
    natural = models.natural_marginals(mkt)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        tilted = [models.tilt_marginal(cfg.model, coeffs, mkt, m, leg)
                  for m, leg in zip(natural, models.Leg)]
    rows, legs = [], {}
    for leg, nat, til in zip(models.Leg, natural, tilted):
        for row in zip(nat.grid, nat.pdf, til.pdf, til.cdf):
            rows.append([leg.value, *row])
        legs[leg.value] = {"x": nat.grid, "pdf_natural": nat.pdf, "pdf_tilted": til.pdf}
        print(f"diagnostics: leg={leg.value} clipped_mass={fmt(til.clipped_mass)} "
              f"mean_tilted={fmt(til.mean)}", file=sys.stderr)
    _write(rows, ["leg", "x", "pdf_natural", "pdf_tilted", "cdf_tilted"], args.output)
    if args.plot:
        from .plotting import plot_marginals

        plot_marginals(legs, args.plot, title=f"{cfg.model.name} marginals")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="midcurve", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(name: str, handler, help_text: str, engine: bool = True):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="run config file")
        p.add_argument("--output", help="write CSV here instead of stdout")
        p.add_argument("--model", help="model kind, optionally kind:sigma_e,sigma_s")
        if engine:
            p.add_argument("--method", choices=["quadrature", "mc"])
            p.add_argument("--paths", type=int)
            p.add_argument("--seed", type=int)
            p.add_argument("--workers", type=int)
            p.add_argument("--strikes", help="lo:hi:step, atm±X:step or a single strike")
        p.set_defaults(handler=handler)
        return p

    common("price", cmd_price, "price one midcurve swaption")
    skew = common("skew", cmd_skew, "implied correlation by strike")
    skew.add_argument("--plot", help="also render the skew to this image file")
    common("calibrate", cmd_calibrate, "estimate sigma_e and sigma_s", engine=False)
    dump = common("marginal-dump", cmd_marginal_dump, "dump natural and tilted marginals",
                  engine=False)
    dump.add_argument("--plot", help="also render the densities to this image file")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except InvalidInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
