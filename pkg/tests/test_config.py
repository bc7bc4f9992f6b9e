import numpy as np
import pytest

from midcurve.config import RunConfig, model_from_flag, parse_rate, parse_strike, parse_strikes
from midcurve.errors import ConfigError, InvalidInputError
from midcurve.models import AnnuityModel, ModelKind

from conftest import BASE_CFG


@pytest.mark.parametrize("text,value", [("2.631%", 0.02631), ("25bp", 0.0025), ("0.01", 0.01),
                                        (" -50BP ", -0.005)])
def test_parse_rate(text, value):
    assert parse_rate(text) == pytest.approx(value, abs=1e-16)


def test_parse_rate_rejects_garbage():
    with pytest.raises(ConfigError):
        parse_rate("two percent")


def test_parse_strike_forms():
    assert parse_strike("atm", 0.02) == 0.02
    assert parse_strike("atm+50bp", 0.02) == pytest.approx(0.025)
    assert parse_strike("ATM - 0.5%", 0.02) == pytest.approx(0.015)
    assert parse_strike("0.017", 0.02) == 0.017


@pytest.mark.parametrize("spec", ["atm±150bp:25bp", "atm+-150bp:25bp", "atm-150bp:atm+150bp:25bp"])
def test_atm_grids(spec):
    grid = parse_strikes(spec, 0.018)
    assert grid.size == 13
    np.testing.assert_allclose(grid, 0.018 + np.arange(-150, 151, 25) * 1e-4, atol=1e-15)


def test_decimal_grid_and_single_strike():
    assert parse_strikes("0.01:0.02:0.0025", 0.0).size == 5
    assert parse_strikes("0.01:0.012:0.05", 0.0).size == 1
    assert parse_strikes("atm", 0.02).tolist() == [0.02]
    with pytest.raises(ConfigError):
        parse_strikes("0.02:0.01:0.001", 0.0)
    with pytest.raises(ConfigError):
        parse_strikes("1:2", 0.0)


def test_model_flag():
    base = AnnuityModel.loglinear(2, -1)
    assert model_from_flag("linear", base) == AnnuityModel.linear(2, -1)
    assert model_from_flag("loglinear:1.5,-0.5", base) == AnnuityModel.loglinear(1.5, -0.5)
    assert model_from_flag("deterministic", base).kind is ModelKind.DETERMINISTIC
    with pytest.raises(InvalidInputError):
        model_from_flag("linear:1", base)


def test_load_base_config():
    cfg = RunConfig.load(BASE_CFG)
    cfg.validate()
    assert cfg.curve_file.is_file()
    mkt = cfg.market()
    assert mkt.R_s0 == pytest.approx(0.02631) and mkt.Sigma_e == pytest.approx(0.006418)
    assert mkt.deterministic_forward == pytest.approx(0.0182939977037, abs=1e-12)
    assert cfg.model == AnnuityModel.loglinear(2, -1)


def test_derived_forwards(tmp_path, write_config):
    path = write_config(tmp_path, {"market.derive_forwards": "true"}, drop={"market.short_rate",
                                                                           "market.long_rate"})
    cfg = RunConfig.load(path)
    short, long_ = cfg.forwards(cfg.curve())
    assert short == pytest.approx(np.expm1(0.0224566), rel=1e-12)
    assert long_ == pytest.approx(short, rel=1e-12)


@pytest.mark.parametrize("changes,match", [
    ({"trade.start": "0.5"}, "expiry"),
    ({"market.short_vol_bp": "-1"}, "vols"),
    ({"market.correlation": "1.2"}, "correlation"),
    ({"engine.method": "lattice"}, "method"),
    ({"engine.order": "8"}, "order"),
    ({"curve.file": "nowhere.csv"}, "nowhere.csv"),
])
def test_validation_errors(tmp_path, write_config, changes, match):
    cfg = RunConfig.load(write_config(tmp_path, changes))
    with pytest.raises(ConfigError, match=match):
        cfg.validate()


def test_unknown_key(tmp_path, write_config):
    with pytest.raises(ConfigError, match="unknown key"):
        RunConfig.load(write_config(tmp_path, {"model.sigma": "1"}))


def test_missing_key(tmp_path, write_config):
    with pytest.raises(ConfigError, match="trade.expiry"):
        RunConfig.load(write_config(tmp_path, drop={"trade.expiry"}))
