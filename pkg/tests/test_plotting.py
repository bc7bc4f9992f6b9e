import numpy as np

from midcurve.implied import SkewPoint
from midcurve.plotting import plot_marginals, plot_skew


def _points():
    strikes = 0.018 + np.arange(-3, 4) * 0.0025
    return [SkewPoint(k, 1e-3, 0.0088, 0.804 - 0.3 * (k - 0.018), "upper" if i == 6 else "")
            for i, k in enumerate(strikes)]


def test_skew_figure_is_written_and_reproducible(tmp_path):
    a = plot_skew(_points(), tmp_path / "a.png", atm=0.018, reference_rho=0.8, title="t")
    b = plot_skew(_points(), tmp_path / "sub" / "b.png", atm=0.018, reference_rho=0.8, title="t")
    assert a.read_bytes()[:4] == b"\x89PNG"
    assert a.read_bytes() == b.read_bytes()


def test_marginal_figure(tmp_path):
    x = np.linspace(-1, 1, 50)
    legs = {name: {"x": x, "pdf_natural": np.exp(-x * x), "pdf_tilted": np.exp(-(x - 0.1) ** 2)}
            for name in ("short", "long")}
    path = plot_marginals(legs, tmp_path / "m.svg")
    assert "<svg" in path.read_text()
