import numpy as np
import pytest

from dme_dpd.gain import GainError, GainEstimate, gain_dme, gain_peak, line_fit_rms
from dme_dpd.plant import measure_operating_curve


def line(slope, n=200):
    x = np.linspace(0.0, 1.0, n)
    return np.column_stack([x, slope * x])


def piecewise(n=1001):
    """Convex below 0.3, y = 4x on [0.3, 0.8], saturating above."""
    x = np.linspace(0.0, 1.0, n)
    y = np.where(x < 0.3, 1.2 * (x / 0.3) ** 2, 4.0 * x)
    y = np.where(x > 0.8, 3.2 + 0.8 * np.tanh((x - 0.8) / 0.2), y)
    return np.column_stack([x, y])


def test_peak_linear():
    assert gain_peak(line(5.0)).value == pytest.approx(5.0)


def test_peak_tie_prefers_larger_x():
    est = gain_peak([[0.5, 2.0], [1.0, 2.0], [0.2, 1.0]])
    assert est.value == 2.0


def test_peak_errors():
    with pytest.raises(GainError):
        gain_peak(np.empty((0, 2)))
    with pytest.raises(GainError):
        gain_peak([[0.0, 1.0], [0.5, 0.5]])


def test_peak_on_reference_curve(reference_plant, sfol):
    pts = measure_operating_curve(reference_plant, sfol)
    top = pts[np.argmax(pts[:, 1])]
    assert gain_peak(pts).value == top[1] / top[0]


def test_dme_linear_picks_lowest_window():
    est = gain_dme(line(3.0))
    assert est.value == pytest.approx(3.0, rel=1e-12)
    assert est.region[0] == 0.0
    assert est.region == pytest.approx((0.0, 0.3))


def test_dme_piecewise_finds_linear_region():
    est = gain_dme(piecewise())
    lo, hi = est.region
    assert 0.3 - 1e-12 <= lo and hi <= 0.8 + 1e-12
    assert est.value == pytest.approx(4.0, abs=1e-6)


def test_dme_region_rms_matches_independent_fit():
    pts = piecewise()
    est = gain_dme(pts, 0.4, 0.1)
    lo, hi = est.region
    m = (pts[:, 0] >= lo - 1e-9) & (pts[:, 0] <= hi + 1e-9)
    coef = np.polyfit(pts[m, 0], pts[m, 1], 1)
    rms = np.sqrt(np.mean((pts[m, 1] - np.polyval(coef, pts[m, 0])) ** 2))
    assert abs(est.region_rms - rms) < 1e-12


def test_dme_order_and_duplicates_do_not_matter():
    pts = piecewise(301)
    shuffled = np.random.default_rng(0).permutation(np.vstack([pts, pts[:50]]))
    assert gain_dme(shuffled).value == gain_dme(pts).value


def test_dme_errors():
    with pytest.raises(GainError, match="20"):
        gain_dme(line(1.0, n=10))
    with pytest.raises(GainError):
        gain_dme(line(1.0), window_frac=0.1, step_frac=0.2)
    with pytest.raises(GainError):
        gain_dme(line(1.0), window_frac=1.0)


def test_dme_skips_sparse_windows():
    # Two clusters: windows in the empty middle hold fewer than two points.
    x = np.concatenate([np.linspace(0, 0.1, 15), np.linspace(0.9, 1.0, 15)])
    est = gain_dme(np.column_stack([x, 2 * x]), 0.1, 0.05)
    assert est.value == pytest.approx(2.0)


def test_dme_differs_from_peak_on_reference(reference_plant, sfol):
    pts = measure_operating_curve(reference_plant, sfol)
    assert gain_dme(pts).value != pytest.approx(gain_peak(pts).value, rel=1e-3)


def test_estimate_invariants():
    with pytest.raises(GainError):
        GainEstimate(0.0, "peak")
    with pytest.raises(GainError):
        GainEstimate(1.0, "dme_region")
    with pytest.raises(GainError):
        GainEstimate(1.0, "dme_region", (0.5, 0.5))


def test_line_fit_rms_exact_line():
    x = np.linspace(0, 1, 50)
    assert line_fit_rms(x, 2 * x + 1) < 1e-14
