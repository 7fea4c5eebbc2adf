import time

import numpy as np
import pytest

from dme_dpd.dpd import (
    ModelError,
    PredistorterModel,
    apply_predistorter,
    basis_matrix,
    build_basis,
    fit_least_squares,
)
from dme_dpd.waveform import SampledWaveform

FS = 40e6


def wf(values, envelope=True):
    return SampledWaveform(values, FS, envelope=envelope)


def random_model(rng, K, M, variant):
    bias = float(rng.normal()) if variant == "mp_bias" else None
    return PredistorterModel(rng.normal(size=(K, M)), bias, variant)


def test_identity_model():
    x = wf([0.1, 0.5, 0.3])
    np.testing.assert_array_equal(apply_predistorter(PredistorterModel([[1.0]]), x).samples, x.samples)


def test_pure_bias():
    u = apply_predistorter(PredistorterModel([[0.0]], 0.5, "mp_bias"), wf([0.1, 0.9, 0.0]))
    np.testing.assert_array_equal(u.samples, [0.5, 0.5, 0.5])


def test_hand_evaluated_example():
    u = apply_predistorter(PredistorterModel(np.ones((2, 2)), 0.0, "mp_bias"), wf([1.0, 2.0]))
    np.testing.assert_array_equal(u.samples, [2.0, 8.0])


def test_basis_hand_case():
    b = build_basis(wf([1.0, 0.0, 0.0]), 2, 1)
    np.testing.assert_array_equal(b, [[1, 1], [0, 0], [0, 0]])


def test_basis_column_order_and_bias():
    x = np.array([0.2, 0.4, 0.6, 0.8, 1.0])
    b = basis_matrix(x, 2, 2, "mp_bias")
    np.testing.assert_array_equal(b[:, 0], x)
    np.testing.assert_array_equal(b[:, 1], [0.0, 0.2, 0.4, 0.6, 0.8])
    np.testing.assert_array_equal(b[:, 2], x * x)
    np.testing.assert_array_equal(b[:, 4], np.ones(5))
    assert basis_matrix(x, 2, 2, "mp").shape[1] == 4


def test_basis_apply_consistency_random_models():
    rng = np.random.default_rng(0)
    x = wf(rng.uniform(0, 1, 300))
    for _ in range(100):
        K, M = int(rng.integers(1, 4)), int(rng.integers(1, 8))
        variant = "mp_bias" if rng.random() < 0.5 else "mp"
        model = random_model(rng, K, M, variant)
        lhs = build_basis(x, K, M, variant) @ model.to_vector()
        np.testing.assert_allclose(lhs, apply_predistorter(model, x).samples, rtol=0, atol=1e-12)


def test_basis_errors():
    with pytest.raises(ModelError):
        build_basis(wf([1.0, 2.0]), 0, 1)
    with pytest.raises(ModelError):
        build_basis(wf([1.0, 2.0, 3.0]), 2, 2)


def test_replicate_padding_is_explicit():
    x = wf([0.5, 0.6, 0.7])
    zero = basis_matrix(x.samples, 1, 2)
    rep = basis_matrix(x.samples, 1, 2, pad="replicate")
    assert zero[0, 1] == 0.0 and rep[0, 1] == 0.5


def test_coefficient_recovery():
    rng = np.random.default_rng(42)
    truth = random_model(rng, 2, 3, "mp_bias")
    truth = PredistorterModel(truth.coeffs, 0.03, "mp_bias")
    x = wf(rng.uniform(0, 1, 500))
    y = apply_predistorter(truth, x)
    est = fit_least_squares(x, y, 2, 3, "mp_bias")
    np.testing.assert_allclose(est.to_vector(), truth.to_vector(), rtol=1e-9)


def test_scalar_regression():
    x = wf(np.linspace(0.1, 1.0, 50))
    est = fit_least_squares(x, wf(5 * x.samples), 1, 1, "mp")
    assert est.coeffs[0, 0] == pytest.approx(5.0, rel=1e-12)


def test_bias_term_needed_for_offset_data():
    x = wf(np.linspace(0.0, 1.0, 200))
    target = wf(x.samples + 0.2)

    def resid(variant):
        m = fit_least_squares(x, target, 2, 3, variant)
        return np.sqrt(np.mean((apply_predistorter(m, x).samples - target.samples) ** 2))

    assert resid("mp") > resid("mp_bias")
    assert resid("mp_bias") < 1e-12


def test_fit_errors():
    with pytest.raises(ModelError, match="length"):
        fit_least_squares(wf([1.0, 2.0, 3.0]), wf([1.0, 2.0]), 1, 1)
    with pytest.raises(ModelError, match="bias"):
        fit_least_squares(wf(np.zeros(10)), wf(np.ones(10)), 1, 1, "mp")
    m = fit_least_squares(wf(np.zeros(10)), wf(np.ones(10)), 1, 1, "mp_bias")
    assert m.bias == pytest.approx(1.0)


def test_model_invariants_and_serialization():
    with pytest.raises(ModelError):
        PredistorterModel([[1.0]], 0.1, "mp")
    with pytest.raises(ModelError):
        PredistorterModel([[1.0]], None, "mp_bias")
    with pytest.raises(ModelError):
        PredistorterModel(np.ones(3))
    rng = np.random.default_rng(3)
    m = random_model(rng, 2, 7, "mp_bias")
    d = m.to_dict()
    assert list(d) == ["variant", "K", "M", "coeffs", "bias"]
    back = PredistorterModel.from_dict(d)
    np.testing.assert_array_equal(back.to_vector(), m.to_vector())
    with pytest.raises(ModelError):
        PredistorterModel.from_dict({"variant": "mp", "K": 2})


def test_identity_constructor():
    m = PredistorterModel.identity(2, 7, "mp_bias")
    assert m.coeffs.shape == (2, 7) and m.coeffs[0, 0] == 1.0 and m.bias == 0.0
    assert m.coeffs.sum() == 1.0


def test_recovery_runtime():
    rng = np.random.default_rng(5)
    truth = random_model(rng, 2, 7, "mp_bias")
    x = wf(rng.uniform(0, 1, 2000))
    start = time.perf_counter()
    fit_least_squares(x, apply_predistorter(truth, x), 2, 7, "mp_bias")
    assert time.perf_counter() - start < 1.0
