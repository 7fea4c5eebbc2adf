import json
import math
from pathlib import Path

import numpy as np
import pytest

from dme_dpd.gain import line_fit_rms
from dme_dpd.plant import (
    REFERENCE_PLANT,
    PlantError,
    PlantModel,
    apply_plant,
    measure_operating_curve,
)
from dme_dpd.waveform import SampledWaveform

# Strongly expansive model: p = 1.6 with the peak input at 90% of s.
EXPANSIVE = PlantModel(expansion_exponent=1.6, saturation_level=1 / 0.9)


def ramp(n=1001):
    return SampledWaveform(np.linspace(0.0, 1.0, n), 40e6)


def test_expansive_curve_convex_then_compressive():
    x = np.linspace(0.0, 1.0, 1001)
    d2 = np.diff(EXPANSIVE.static_curve(x), 2)
    xi = x[1:-1]
    assert np.all(d2[xi < 0.3] > 0)
    assert np.all(d2[xi > 0.8] < 0)


def test_linear_plant_identity():
    u = SampledWaveform(np.random.default_rng(1).uniform(0, 1, 200), 40e6)
    plant = PlantModel(linear_gain=5.0)
    np.testing.assert_array_equal(apply_plant(plant, u).output.samples, 5.0 * u.samples)


def test_leading_edge_attenuation(sfol):
    # Memoryless comparison isolates the static curve.
    model = PlantModel(expansion_exponent=1.6, saturation_level=1 / 0.9)
    y = apply_plant(model, sfol).output.samples
    linear = sfol.samples * (y.max() / sfol.samples.max())
    s = sfol.samples
    lead = np.arange(len(s)) < np.argmax(s)
    low = lead & (s < 0.1) & (s > 1e-6)
    assert np.all(linear[low] >= 3.0 * y[low])


def test_negative_input_rejected():
    with pytest.raises(PlantError, match="sample 1"):
        apply_plant(PlantModel(), SampledWaveform([0.1, -0.2], 1e6, envelope=False))


def test_model_validation():
    with pytest.raises(PlantError):
        PlantModel(fir_taps=(0.5, 0.4))
    with pytest.raises(PlantError):
        PlantModel(expansion_exponent=0.5)
    with pytest.raises(PlantError):
        PlantModel(linear_gain=0.0)
    with pytest.raises(PlantError):
        PlantModel(saturation_level=-1.0)


def test_static_curve_monotone_and_zero_at_origin(reference_plant):
    x = np.linspace(0, 5, 2001)
    g = reference_plant.static_curve(x)
    assert g[0] == 0.0
    assert np.all(np.diff(g) >= 0)


def test_reference_curve_convex_low_concave_high(reference_plant):
    x = np.linspace(0.0, 1.0, 1001)
    d2 = np.diff(reference_plant.static_curve(x), 2)
    xi = x[1:-1]
    assert np.all(d2[xi < 0.5] > 0)
    assert np.all(d2[xi > 0.9] < 0)


def test_memoryless_points_lie_on_curve(sfol):
    model = PlantModel(expansion_exponent=1.3, saturation_level=1.5)
    pts = measure_operating_curve(model, sfol)
    np.testing.assert_array_equal(pts[:, 1], model.static_curve(pts[:, 0]))
    assert np.all(np.diff(pts[:, 0]) >= 0)


def test_reference_scatter_shows_memory(reference_plant, sfol):
    pts = measure_operating_curve(reference_plant, sfol)
    memoryless = PlantModel(**{**REFERENCE_PLANT, "fir_taps": (1.0,)})
    spread = np.abs(pts[:, 1] - memoryless.static_curve(pts[:, 0]))
    assert spread.max() > 1e-3


def test_linear_plant_curve_is_a_line(sfol):
    pts = measure_operating_curve(PlantModel(linear_gain=3.0), sfol)
    assert line_fit_rms(pts[:, 0], pts[:, 1]) < 1e-12


def test_noise_is_seeded(sfol):
    model = PlantModel(**{**REFERENCE_PLANT, "noise_std": 0.01, "seed": 7})
    a = apply_plant(model, sfol).output.samples
    b = apply_plant(model, sfol).output.samples
    np.testing.assert_array_equal(a, b)
    other = PlantModel(**{**REFERENCE_PLANT, "noise_std": 0.01, "seed": 8})
    assert not np.array_equal(a, apply_plant(other, sfol).output.samples)


def test_shipped_preset_file_matches_code():
    path = Path(__file__).resolve().parents[1] / "configs" / "reference_plant.json"
    data = json.loads(path.read_text())
    assert data == {k: list(v) if isinstance(v, tuple) else v for k, v in REFERENCE_PLANT.items()}


def test_to_dict_round_trip(reference_plant):
    d = reference_plant.to_dict()
    assert PlantModel(**{**d, "fir_taps": tuple(d["fir_taps"])}) == reference_plant
    assert PlantModel().to_dict()["saturation_level"] is None
    assert math.isinf(PlantModel().saturation_level)
