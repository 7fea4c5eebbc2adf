import numpy as np
import pytest

from conftest import triangle
from dme_dpd.multipath import (
    SPEED_OF_LIGHT,
    MultipathScenario,
    TOAError,
    apply_multipath,
    default_delay_grid,
    range_error_curve,
    toa_estimate,
)


def energy(w):
    return float(np.sum(w.samples**2))


def test_default_grid():
    grid = default_delay_grid()
    assert grid.size == 241
    assert grid[0] == 0.0 and grid[-1] == pytest.approx(6e-6)
    np.testing.assert_allclose(np.diff(grid), 25e-9, rtol=1e-9)


def test_ratio_zero_is_identity(sfol):
    out = apply_multipath(sfol, 1.234e-6, 0.0)
    np.testing.assert_array_equal(out.samples[: len(sfol)], sfol.samples)
    assert not np.any(out.samples[len(sfol):])


def test_zero_delay_scales(sfol):
    out = apply_multipath(sfol, 0.0, 0.3)
    np.testing.assert_allclose(out.samples, 1.3 * sfol.samples, rtol=1e-15)


@pytest.mark.parametrize("delay", [0.0, 0.4e-6, 1.0125e-6, 3e-6])
def test_energy_bound(sfol, delay):
    out = apply_multipath(sfol, delay, 0.3)
    assert energy(out) <= (1.3**2) * energy(sfol) * (1 + 1e-12)


def test_integer_delay_is_exact_shift(sfol):
    out = apply_multipath(sfol, 40 / sfol.sample_rate, 0.5)
    expected = np.zeros(len(sfol) + 40)
    expected[: len(sfol)] += sfol.samples
    expected[40:] += 0.5 * sfol.samples
    np.testing.assert_allclose(out.samples, expected, atol=1e-15)


def test_inverted_polarity_subtracts(sfol):
    out = apply_multipath(sfol, 0.0, 0.3, "inverted")
    np.testing.assert_allclose(out.samples, 0.7 * sfol.samples, rtol=1e-15)


def test_triangle_toa():
    assert toa_estimate(triangle(4.0)) == pytest.approx(-1e-6, abs=1e-15)
    assert toa_estimate(triangle(4.0), 0.25) == pytest.approx(-1.5e-6, abs=1e-15)


def test_toa_shift_and_scale(sfol):
    base = toa_estimate(sfol)
    shifted = sfol.with_samples(np.concatenate([np.zeros(25), sfol.samples]))
    assert toa_estimate(shifted) - base == pytest.approx(25 / sfol.sample_rate, abs=1e-15)
    assert toa_estimate(sfol.with_samples(7.0 * sfol.samples)) == pytest.approx(base, abs=1e-15)


def test_toa_errors():
    w = triangle(4.0)
    with pytest.raises(TOAError, match="no positive peak"):
        toa_estimate(w.with_samples(np.zeros(len(w))))
    with pytest.raises(TOAError, match="starts above"):
        toa_estimate(w.with_samples(np.ones(len(w))))


def test_curve_zero_at_zero_delay_and_beyond_support():
    w = triangle(4.0)
    grid = np.array([0.0, 4.0e-6, 5.0e-6])
    curve = range_error_curve(w, MultipathScenario(0.3, grid))
    np.testing.assert_allclose(curve.errors_m, 0.0, atol=1e-6)


def test_triangle_error_closed_form():
    # Unit triangle peaking at t = 0 with 2 us edges, replica 0.3 at 0.5 us.
    # The sum peaks at t = 0 with 1 + 0.3 * 0.75 = 1.225. After the replica
    # onset at -1.5 us the leading edge is 1.225 + 0.65 t (t in us), so the
    # half-peak crossing sits at -0.6125 / 0.65 us instead of -1 us.
    curve = range_error_curve(triangle(4.0), MultipathScenario(0.3, [0.5e-6]))
    expected = SPEED_OF_LIGHT * (1.0 - 0.6125 / 0.65) * 1e-6
    assert curve.errors_m[0] == pytest.approx(expected, abs=1e-6)


def test_curve_scale_invariant(sfol):
    grid = np.linspace(0, 3e-6, 13)
    a = range_error_curve(sfol, MultipathScenario(0.3, grid))
    b = range_error_curve(sfol.with_samples(5.0 * sfol.samples), MultipathScenario(0.3, grid))
    np.testing.assert_allclose(a.errors_m, b.errors_m, atol=1e-6)


def test_ratio_zero_curve_is_zero(sfol):
    curve = range_error_curve(sfol, MultipathScenario(0.0))
    assert curve.errors_m.size == 241
    assert not np.any(curve.errors_m)
    assert curve.rms_m == 0.0


def test_curve_error_names_delay():
    # Ramp starting at 0.3: an inverted replica one sample later cancels the
    # ramp, so the first sample becomes the peak and no upward crossing exists.
    fs = 40e6
    w = triangle(4.0).with_samples(np.concatenate([np.linspace(0.3, 1.0, 8), np.zeros(8)]))
    scenario = MultipathScenario(0.9, [0.0, 1 / fs], polarity="inverted")
    with pytest.raises(TOAError, match="delay 0.025 us"):
        range_error_curve(w, scenario)


def test_scenario_validation():
    with pytest.raises(ValueError):
        MultipathScenario(1.0)
    with pytest.raises(ValueError):
        MultipathScenario(0.3, [-1e-6])
    with pytest.raises(ValueError):
        MultipathScenario(0.3, polarity="sideways")


def test_curve_csv(tmp_path, sfol):
    curve = range_error_curve(sfol, MultipathScenario(0.3, [0.0, 1e-6]))
    path = tmp_path / "c.csv"
    curve.save_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "delay_us,error_m"
    assert float(lines[2].split(",")[0]) == pytest.approx(1.0)
