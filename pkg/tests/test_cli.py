import csv
import io
import subprocess
import sys

import numpy as np
import pytest
from scipy.integrate import trapezoid

from midcurve.cli import fmt, main
from midcurve.models import AnnuityModel, coefficients

from conftest import BASE_CFG
from support import BP, gaussian_spread_receiver, quoted_market


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_fmt():
    assert fmt(-0.0) == "0"
    assert fmt(0.1 + 0.2) == "0.3"
    assert fmt(float("nan")) == "nan"
    assert fmt("x") == "x"


def test_price_deterministic_matches_closed_form(capsys):
    code, out, _ = run(capsys, "price", "--config", str(BASE_CFG), "--model", "deterministic")
    assert code == 0
    (row,) = rows(out)
    assert list(row) == ["strike", "side", "model", "method", "price", "stderr"]
    mkt = quoted_market()
    K = mkt.deterministic_forward
    assert float(row["price"]) == pytest.approx(gaussian_spread_receiver(mkt, K, 0.8), abs=0.05 * BP)
    assert (row["side"], row["model"], row["method"]) == ("receiver", "deterministic", "quadrature")


def test_price_mc_is_reproducible(capsys):
    argv = ["price", "--config", str(BASE_CFG), "--method", "mc", "--seed", "7", "--paths", "50000"]
    first = run(capsys, *argv)
    second = run(capsys, *argv)
    assert first[0] == 0 and first[1] == second[1]
    assert float(rows(first[1])[0]["stderr"]) > 0


def test_price_rejects_grid(capsys):
    code, _, err = run(capsys, "price", "--config", str(BASE_CFG), "--strikes", "atm±50bp:25bp")
    assert code == 2 and "single strike" in err


def test_missing_curve_file(tmp_path, write_config, capsys):
    path = write_config(tmp_path, {"curve.file": "absent_curve.csv"})
    code, out, err = run(capsys, "price", "--config", str(path))
    assert code == 2 and out == ""
    assert "absent_curve.csv" in err


def test_missing_config(capsys):
    code, _, err = run(capsys, "price", "--config", "no_such.cfg")
    assert code == 2 and "no_such.cfg" in err


def test_skew_deterministic_is_flat(capsys):
    code, out, _ = run(capsys, "skew", "--config", str(BASE_CFG), "--model", "deterministic")
    assert code == 0
    table = rows(out)
    assert len(table) == 13
    assert list(table[0]) == ["strike", "price", "implied_normal_vol", "implied_corr", "flag"]
    assert max(abs(float(r["implied_corr"]) - 0.8) for r in table) < 1e-6


def test_skew_loglinear_is_sloped(capsys, tmp_path):
    plot = tmp_path / "skew.png"
    code, out, _ = run(capsys, "skew", "--config", str(BASE_CFG), "--plot", str(plot))
    assert code == 0
    corr = np.array([float(r["implied_corr"]) for r in rows(out)])
    assert np.all(np.diff(corr) < 0)
    # Range from the nested-quadrature oracle of the same model.
    assert np.ptp(corr) == pytest.approx(0.0096215, abs=2e-6)
    assert plot.stat().st_size > 0


def test_skew_single_strike_grid(capsys):
    code, _, err = run(capsys, "skew", "--config", str(BASE_CFG), "--strikes", "0.01:0.012:0.05")
    assert code == 2 and "single strike" in err


def test_skew_boundary_flags(tmp_path, write_config, capsys):
    path = write_config(tmp_path, {"model.sigma_e": "60", "model.sigma_s": "-30",
                                   "strikes": "atm-300bp:atm+300bp:300bp"})
    code, out, _ = run(capsys, "skew", "--config", str(path))
    assert code == 0
    assert any(r["flag"] in {"lower", "upper"} for r in rows(out))


def test_calibrate_quoted_market(capsys):
    code, out, _ = run(capsys, "calibrate", "--config", str(BASE_CFG))
    assert code == 0
    (row,) = rows(out)
    assert 1.5 <= float(row["sigma_e"]) <= 2.5
    assert -1.5 <= float(row["sigma_s"]) <= -0.5


def test_calibrate_zero_vols(tmp_path, write_config, capsys):
    path = write_config(tmp_path, {"market.short_vol_bp": "0", "market.long_vol_bp": "0"})
    code, out, _ = run(capsys, "calibrate", "--config", str(path))
    assert code == 0
    assert out.splitlines()[1] == "0,0,0,0"


def test_calibrate_singular(tmp_path, write_config, capsys):
    path = write_config(tmp_path, {"market.correlation": "1", "market.long_vol_bp": "120"})
    code, _, err = run(capsys, "calibrate", "--config", str(path))
    assert code == 3 and "singular" in err


def _dump(capsys, *extra, config=BASE_CFG):
    code, out, err = run(capsys, "marginal-dump", "--config", str(config), *extra)
    assert code == 0
    table = rows(out)
    legs = {}
    for leg in ("short", "long"):
        sel = [r for r in table if r["leg"] == leg]
        legs[leg] = {k: np.array([float(r[k]) for r in sel])
                     for k in ("x", "pdf_natural", "pdf_tilted", "cdf_tilted")}
    return legs, err


def test_marginal_dump_integrates_and_centres(capsys):
    legs, err = _dump(capsys)
    mkt = quoted_market()
    c = coefficients(AnnuityModel.loglinear(2, -1), mkt)
    for leg, hat in (("short", c.hatR_s), ("long", c.hatR_e)):
        cols = legs[leg]
        for key in ("pdf_natural", "pdf_tilted"):
            assert abs(trapezoid(cols[key], cols["x"]) - 1) < 1e-6
        assert abs(trapezoid(cols["x"] * cols["pdf_tilted"], cols["x"]) - hat) < 1e-6
        assert cols["cdf_tilted"][-1] == pytest.approx(1)
    assert "clipped_mass=0" in err


def test_marginal_dump_zero_sigmas(capsys):
    legs, _ = _dump(capsys, "--model", "loglinear:0,0")
    for cols in legs.values():
        np.testing.assert_allclose(cols["pdf_tilted"], cols["pdf_natural"], rtol=1e-11)


def test_marginal_dump_reports_clipping(tmp_path, write_config, capsys):
    path = write_config(tmp_path, {"model.kind": "linear", "model.sigma_e": "150"})
    _, err = _dump(capsys, config=path)
    masses = [float(part.split("=")[1]) for part in err.split() if part.startswith("clipped_mass=")]
    assert max(masses) > 0


def test_marginal_dump_plot(capsys, tmp_path):
    plot = tmp_path / "m.png"
    _dump(capsys, "--plot", str(plot))
    assert plot.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_output_file_and_byte_stability(tmp_path, capsys):
    target = tmp_path / "out.csv"
    code, out, _ = run(capsys, "skew", "--config", str(BASE_CFG), "--output", str(target))
    assert code == 0 and out == ""
    _, again, _ = run(capsys, "skew", "--config", str(BASE_CFG))
    assert target.read_text() == again


def test_console_script():
    proc = subprocess.run([sys.executable, "-m", "midcurve.cli", "calibrate", "--config",
                           str(BASE_CFG)], capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert proc.stdout.startswith("sigma_e,sigma_s,cov_e,cov_s\n")


def test_argparse_errors_exit_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["price"])
    assert exc.value.code == 2
    capsys.readouterr()
