"""Differentiable stand-in detector: a logistic unit over masked DCT features.

The model scores an image as z = <weights, dct2(x)[mask]> + bias and reads
sigmoid(z) as the probability of "fake" (label 1).  It exists to give the
black-box pipeline something to differentiate: its binary cross-entropy loss
has a closed-form image-space gradient (the DCT adjoint of the logistic
residual times the weights), which drives the momentum attack in soup.py.

Weights persist to a flat little-endian binary format:

    magic "FBAS" | version u16 | H u32 | W u32 | C u32 | bias f64 | weights f64...

Weights are stored in mask scan order: selected (row, col) positions in
row-major order, channels fastest.  The mask itself is not stored; loading
takes the mask fractions (defaults: full spectrum, the training default) and
validates the weight count against them.
"""

from __future__ import annotations

import math
import struct

import numpy as np
from scipy.special import expit
from sklearn.base import BaseEstimator, ClassifierMixin

from .spectral import build_mask, dct2, idct2
from .validation import check_image, check_label

__all__ = [
    "DctLogisticDetector",
    "save_surrogate",
    "load_surrogate",
    "FBAS_MAGIC",
    "FBAS_VERSION",
]

FBAS_MAGIC = b"FBAS"
FBAS_VERSION = 1
_HEADER = struct.Struct("<4sHIII")


def _stable_bce(logits, labels):
    """Elementwise binary cross-entropy that survives saturated logits."""
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    softplus = np.maximum(logits, 0.0) + np.log1p(np.exp(-np.abs(logits)))
    return softplus - labels * logits


class DctLogisticDetector(BaseEstimator, ClassifierMixin):
    """Logistic detector on masked DCT coefficients, trained by gradient descent.

    Parameters follow sklearn conventions (stored verbatim; see get_params).
    fit() runs full-batch gradient descent for exactly ``epochs`` epochs at
    ``learning_rate`` on per-feature standardized coefficients, then folds the
    standardization back into the raw-space weights and bias, so the fitted
    model is exactly a logistic unit over raw masked DCT features.  Training
    is deterministic: zero initialization, no sampling.

    Fitted attributes: weights_ (flat, mask scan order), bias_,
    feature_mask_, image_shape_, train_accuracy_.
    """

    def __init__(self, low_fraction=1.0, high_fraction=0.0, epochs=500, learning_rate=0.1):
        self.low_fraction = low_fraction
        self.high_fraction = high_fraction
        self.epochs = epochs
        self.learning_rate = learning_rate

    # ------------------------------------------------------------------ fit

    def fit(self, images, labels):
        images = np.asarray(images, dtype=np.float64)
        if images.ndim == 3:
            images = images[:, :, :, None]
        if images.ndim != 4:
            raise ValueError(f"images must have shape (n, H, W, C), got {images.shape}")
        labels = np.asarray([check_label(v) for v in np.asarray(labels).ravel()])
        if labels.shape[0] != images.shape[0]:
            raise ValueError("images and labels disagree on the sample count")
        if images.shape[0] == 0:
            raise ValueError("cannot fit on an empty dataset")

        shape = images.shape[1:]
        mask = build_mask(shape, self.low_fraction, self.high_fraction)
        features = self._feature_matrix(images, mask)
        labels = labels.astype(np.float64)

        mean = features.mean(axis=0)
        std = features.std(axis=0)
        std = np.where(std < 1e-8, 1.0, std)
        standardized = (features - mean) / std

        n_samples, n_features = standardized.shape
        weights = np.zeros(n_features)
        bias = 0.0
        lr = float(self.learning_rate)
        for _ in range(int(self.epochs)):
            logits = standardized @ weights + bias
            residual = expit(logits) - labels
            weights -= lr * (standardized.T @ residual) / n_samples
            bias -= lr * float(residual.mean())

        self.feature_mask_ = mask
        self.image_shape_ = tuple(int(v) for v in shape)
        self.weights_ = weights / std
        self.bias_ = float(bias - float(np.dot(weights, mean / std)))
        self.classes_ = np.array([0, 1])
        self.train_accuracy_ = float(np.mean(self.predict(images) == labels))
        return self

    @staticmethod
    def _feature_matrix(images, mask):
        spectra = dct2(images.transpose(1, 2, 3, 0).reshape(images.shape[1], images.shape[2], -1))
        n = images.shape[0]
        channels = images.shape[3]
        # (H, W, C*n) -> rows: selected positions row-major, channels fastest.
        picked = spectra[mask.selected, :].reshape(-1, channels, n)
        return picked.reshape(-1, n).T.copy()

    def _features_of(self, image):
        spectrum = dct2(image)
        return spectrum[self.feature_mask_.selected, :].ravel()

    def _check_fitted(self):
        if not hasattr(self, "weights_"):
            raise RuntimeError("detector is not fitted; call fit() or load from file")

    # ------------------------------------------------------------ inference

    def decision_function(self, images):
        self._check_fitted()
        images = np.asarray(images, dtype=np.float64)
        single = images.ndim == 3 or images.ndim == 2
        if images.ndim == 2:
            images = images[:, :, None]
        if images.ndim == 3:
            images = images[None]
        scores = np.array(
            [float(np.dot(self.weights_, self._features_of(img)) + self.bias_) for img in images]
        )
        return scores[0] if single else scores

    def predict_proba(self, images):
        scores = np.atleast_1d(self.decision_function(images))
        p_fake = expit(scores)
        return np.stack([1.0 - p_fake, p_fake], axis=1)

    def predict(self, images):
        scores = self.decision_function(images)
        return (np.atleast_1d(scores) >= 0.0).astype(int)

    # ------------------------------------------------------------- gradient

    def loss_gradient(self, image, label):
        """Binary cross-entropy loss and its exact image-space gradient.

        Returns (loss, gradient) where gradient has the image's shape.  The
        score is linear in the image through the orthonormal transform, so
        the gradient is (sigmoid(z) - y) * idct2(dense weights) with no
        approximation; a model with all-zero weights yields loss ln(2) (at
        zero bias) and an identically zero gradient.
        """
        self._check_fitted()
        image = check_image(image, "image")
        if image.shape != self.image_shape_:
            raise ValueError(
                f"image shape {image.shape} does not match model shape {self.image_shape_}"
            )
        label = check_label(label)
        z = float(np.dot(self.weights_, self._features_of(image)) + self.bias_)
        loss = float(_stable_bce(z, label))
        residual = float(expit(z)) - label
        dense = np.zeros(self.image_shape_)
        channels = self.image_shape_[2]
        dense[self.feature_mask_.selected, :] = self.weights_.reshape(-1, channels)
        gradient = residual * idct2(dense)
        return loss, gradient

    # ---------------------------------------------------------- persistence

    def save(self, path):
        self._check_fitted()
        height, width, channels = self.image_shape_
        with open(path, "wb") as handle:
            handle.write(_HEADER.pack(FBAS_MAGIC, FBAS_VERSION, height, width, channels))
            handle.write(struct.pack("<d", self.bias_))
            handle.write(np.ascontiguousarray(self.weights_, dtype="<f8").tobytes())
        return path

    @classmethod
    def load(cls, path, low_fraction=1.0, high_fraction=0.0):
        with open(path, "rb") as handle:
            header = handle.read(_HEADER.size)
            if len(header) != _HEADER.size:
                raise ValueError("truncated surrogate file")
            magic, version, height, width, channels = _HEADER.unpack(header)
            if magic != FBAS_MAGIC:
                raise ValueError(f"bad magic {magic!r}; not a surrogate weights file")
            if version != FBAS_VERSION:
                raise ValueError(f"unsupported surrogate file version {version}")
            rest = handle.read()
        if len(rest) < 8 or (len(rest) - 8) % 8:
            raise ValueError("corrupt surrogate file payload")
        bias = struct.unpack("<d", rest[:8])[0]
        weights = np.frombuffer(rest[8:], dtype="<f8").astype(np.float64)

        model = cls(low_fraction=low_fraction, high_fraction=high_fraction)
        mask = build_mask((height, width), low_fraction, high_fraction)
        expected = mask.count * channels
        if weights.shape[0] != expected:
            raise ValueError(
                f"weight count {weights.shape[0]} does not match mask "
                f"({mask.count} positions x {channels} channels = {expected}); "
                "load with the fractions the model was trained with"
            )
        model.feature_mask_ = mask
        model.image_shape_ = (int(height), int(width), int(channels))
        model.weights_ = weights
        model.bias_ = float(bias)
        model.classes_ = np.array([0, 1])
        return model


def save_surrogate(model, path):
    return model.save(path)


def load_surrogate(path, low_fraction=1.0, high_fraction=0.0):
    return DctLogisticDetector.load(path, low_fraction=low_fraction, high_fraction=high_fraction)
