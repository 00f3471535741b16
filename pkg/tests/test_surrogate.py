"""Differentiable frequency-domain detector: training, gradients, persistence.

The analytic loss gradient is checked against central finite differences,
training is checked on separable data, and the binary weights format is
parsed byte-by-byte against the documented layout.
"""

import struct

import numpy as np
import pytest
from sklearn.base import clone

from fba2d import DctLogisticDetector, load_surrogate, save_surrogate
from fba2d.spectral import build_mask, dct2
from fba2d.surrogate import FBAS_MAGIC, FBAS_VERSION


def _zero_model(shape=(8, 8, 1), low=1.0, high=0.0):
    """Hand-assembled fitted model with all-zero weights and zero bias."""
    model = DctLogisticDetector(low_fraction=low, high_fraction=high)
    mask = build_mask(shape[:2], low, high)
    model.feature_mask_ = mask
    model.image_shape_ = shape
    model.weights_ = np.zeros(mask.count * shape[2])
    model.bias_ = 0.0
    model.classes_ = np.array([0, 1])
    return model


def _random_model(seed, shape=(16, 16, 1), low=0.0, high=0.05):
    """Fitted model with random weights over a small high band."""
    rng = np.random.default_rng(seed)
    model = DctLogisticDetector(low_fraction=low, high_fraction=high)
    mask = build_mask(shape[:2], low, high)
    model.feature_mask_ = mask
    model.image_shape_ = shape
    model.weights_ = rng.normal(0.0, 2.0, mask.count * shape[2])
    model.bias_ = float(rng.normal())
    model.classes_ = np.array([0, 1])
    return model


def _separable_dataset(rng, n_per_class=30, shape=(8, 8, 1)):
    smooth = rng.uniform(0.4, 0.6, (n_per_class, *shape))
    rough = np.clip(
        smooth + rng.normal(0.0, 0.25, smooth.shape), 0.0, 1.0
    )
    images = np.concatenate([smooth, rough])
    labels = np.array([0] * n_per_class + [1] * n_per_class)
    return images, labels


# ---------------------------------------------------------------------------
# loss and gradient


def test_zero_weights_model_gives_ln2_loss_and_zero_gradient():
    model = _zero_model()
    image = np.random.default_rng(1).uniform(0.0, 1.0, (8, 8, 1))
    for label in (0, 1):
        loss, gradient = model.loss_gradient(image, label)
        assert loss == pytest.approx(np.log(2.0), rel=1e-12)
        assert np.array_equal(gradient, np.zeros((8, 8, 1)))


def test_gradient_matches_central_finite_differences():
    h = 1e-4
    rng = np.random.default_rng(42)
    worst = 0.0
    for trial in range(20):
        model = _random_model(trial)
        image = rng.uniform(0.05, 0.95, (16, 16, 1))
        label = int(trial % 2)
        _, analytic = model.loss_gradient(image, label)

        numeric = np.zeros_like(image)
        probes = rng.choice(image.size, size=40, replace=False)
        flat = image.ravel()
        for k in probes:
            bumped = flat.copy()
            bumped[k] += h
            lp, _ = model.loss_gradient(bumped.reshape(image.shape), label)
            bumped[k] -= 2 * h
            lm, _ = model.loss_gradient(bumped.reshape(image.shape), label)
            numeric.ravel()[k] = (lp - lm) / (2 * h)
        a = analytic.ravel()[probes]
        n = numeric.ravel()[probes]
        scale = max(float(np.max(np.abs(a))), 1e-12)
        rel = float(np.max(np.abs(a - n))) / scale
        worst = max(worst, rel)
    assert worst <= 1e-4


def test_confident_correct_prediction_has_negligible_loss():
    model = _zero_model()
    model.bias_ = 40.0  # score saturates the logistic for label 1
    image = np.full((8, 8, 1), 0.5)
    loss, _ = model.loss_gradient(image, 1)
    assert loss < 1e-6
    model.bias_ = -40.0
    loss, _ = model.loss_gradient(image, 0)
    assert loss < 1e-6


def test_gradient_is_zero_off_the_feature_band():
    # The score only sees masked coefficients, so the gradient's spectrum
    # must vanish off the mask.
    model = _random_model(7)
    image = np.random.default_rng(3).uniform(0.0, 1.0, (16, 16, 1))
    _, gradient = model.loss_gradient(image, 0)
    spectrum = dct2(gradient)
    off_band = ~model.feature_mask_.selected
    assert float(np.max(np.abs(spectrum[off_band, :]))) < 1e-12


def test_mismatched_image_shape_is_rejected():
    model = _zero_model(shape=(8, 8, 1))
    with pytest.raises(ValueError, match="shape"):
        model.loss_gradient(np.full((9, 9, 1), 0.5), 0)


def test_unfitted_model_refuses_to_score():
    model = DctLogisticDetector()
    with pytest.raises(RuntimeError, match="not fitted"):
        model.decision_function(np.full((8, 8, 1), 0.5))


# ---------------------------------------------------------------------------
# training


def test_fit_separates_smooth_from_rough_images():
    rng = np.random.default_rng(11)
    images, labels = _separable_dataset(rng)
    model = DctLogisticDetector(epochs=300).fit(images, labels)
    assert model.train_accuracy_ == 1.0
    assert np.array_equal(model.classes_, [0, 1])
    assert model.weights_.shape == (64,)


def test_training_is_deterministic(tmp_path):
    rng = np.random.default_rng(11)
    images, labels = _separable_dataset(rng)
    first = DctLogisticDetector(epochs=150).fit(images, labels)
    second = DctLogisticDetector(epochs=150).fit(images, labels)
    path_a = tmp_path / "a.fbas"
    path_b = tmp_path / "b.fbas"
    first.save(path_a)
    second.save(path_b)
    assert path_a.read_bytes() == path_b.read_bytes()


def test_predict_thresholds_the_decision_function():
    model = _random_model(5)
    rng = np.random.default_rng(9)
    images = rng.uniform(0.0, 1.0, (12, 16, 16, 1))
    scores = model.decision_function(images)
    assert np.array_equal(model.predict(images), (scores >= 0.0).astype(int))


def test_predict_proba_rows_sum_to_one_and_track_the_score():
    model = _random_model(6)
    rng = np.random.default_rng(10)
    images = rng.uniform(0.0, 1.0, (8, 16, 16, 1))
    proba = model.predict_proba(images)
    assert proba.shape == (8, 2)
    assert np.allclose(proba.sum(axis=1), 1.0, atol=1e-12)
    scores = model.decision_function(images)
    assert np.array_equal(proba[:, 1] > 0.5, scores > 0.0)


def test_single_image_decision_is_a_scalar():
    model = _random_model(8)
    image = np.random.default_rng(0).uniform(0.0, 1.0, (16, 16, 1))
    score = model.decision_function(image)
    assert np.isscalar(score)


# ---------------------------------------------------------------------------
# sklearn conventions


def test_get_params_round_trips_through_clone():
    model = DctLogisticDetector(
        low_fraction=0.2, high_fraction=0.05, epochs=77, learning_rate=0.3
    )
    params = model.get_params()
    assert params == {
        "low_fraction": 0.2,
        "high_fraction": 0.05,
        "epochs": 77,
        "learning_rate": 0.3,
    }
    duplicate = clone(model)
    assert duplicate.get_params() == params


# ---------------------------------------------------------------------------
# persistence format


def test_saved_file_follows_the_documented_binary_layout(tmp_path):
    model = _random_model(13, shape=(16, 16, 1), low=0.0, high=0.05)
    path = tmp_path / "weights.fbas"
    model.save(path)
    blob = path.read_bytes()

    header = struct.Struct("<4sHIII")
    magic, version, height, width, channels = header.unpack(blob[: header.size])
    assert magic == FBAS_MAGIC == b"FBAS"
    assert version == FBAS_VERSION == 1
    assert (height, width, channels) == (16, 16, 1)
    (bias,) = struct.unpack("<d", blob[header.size : header.size + 8])
    assert bias == model.bias_
    weights = np.frombuffer(blob[header.size + 8 :], dtype="<f8")
    assert weights.shape[0] == model.feature_mask_.count * channels
    assert np.array_equal(weights, model.weights_)


def test_save_load_round_trip_preserves_every_score(tmp_path):
    model = _random_model(14, shape=(16, 16, 1), low=0.0, high=0.05)
    path = tmp_path / "weights.fbas"
    save_surrogate(model, path)
    loaded = load_surrogate(path, low_fraction=0.0, high_fraction=0.05)
    rng = np.random.default_rng(15)
    for _ in range(5):
        image = rng.uniform(0.0, 1.0, (16, 16, 1))
        assert loaded.decision_function(image) == model.decision_function(image)
    assert loaded.image_shape_ == model.image_shape_


def test_loading_with_the_wrong_fractions_is_an_error(tmp_path):
    model = _random_model(16, shape=(16, 16, 1), low=0.0, high=0.05)
    path = tmp_path / "weights.fbas"
    model.save(path)
    with pytest.raises(ValueError, match="fractions"):
        load_surrogate(path, low_fraction=0.5, high_fraction=0.0)


def test_truncated_and_corrupt_files_are_rejected(tmp_path):
    model = _random_model(17, shape=(8, 8, 1), low=1.0, high=0.0)
    path = tmp_path / "weights.fbas"
    model.save(path)
    blob = path.read_bytes()

    short = tmp_path / "short.fbas"
    short.write_bytes(blob[:10])
    with pytest.raises(ValueError, match="truncated"):
        load_surrogate(short)

    wrong_magic = tmp_path / "magic.fbas"
    wrong_magic.write_bytes(b"NOPE" + blob[4:])
    with pytest.raises(ValueError, match="magic"):
        load_surrogate(wrong_magic)

    ragged = tmp_path / "ragged.fbas"
    ragged.write_bytes(blob[:-3])
    with pytest.raises(ValueError, match="corrupt"):
        load_surrogate(ragged)
