"""The base CNN and its transfer-learned 128-d feature extractor."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError, ParameterError
from ..spectro import INPUT_SHAPE
from .layers import Conv2D, Dense, Dropout, Flatten, MaxPool2D, softmax

DEFAULT_BLOCKS = ((16, 16), (32, 32), (16, 16))
DEFAULT_DROPOUT = (0.25, 0.25, 0.25, 0.5)


@dataclass
class LayerInfo:
    index: int
    name: str
    output_shape: tuple
    n_params: int


class CNN:
    """Sequential network: conv blocks, flatten, dense+ReLU, dropout, dense logits."""

    def __init__(self, layers, input_shape, n_classes, dtype, config):
        self.layers = layers
        self.input_shape = tuple(input_shape)
        self.n_classes = n_classes
        self.dtype = np.dtype(dtype)
        self.config = config
        self.trained = False
        self.class_labels = None
        layers[0].need_input_grad = False

    # -- structure ---------------------------------------------------------
    def summary(self) -> list:
        shape = self.input_shape
        rows = []
        for i, layer in enumerate(self.layers, start=1):
            shape = layer.output_shape(shape)
            name = layer.kind
            if layer.kind in ("conv2d", "dense"):
                name = f"{layer.kind}+{'relu' if getattr(layer, 'activation', 'relu') == 'relu' else 'softmax'}"
            rows.append(LayerInfo(i, name, shape, sum(p.size for p in layer.params())))
        return rows

    @property
    def n_params(self) -> int:
        return sum(p.size for p in self.parameters())

    def parameters(self):
        return [p for layer in self.layers for p in layer.params()]

    def gradients(self):
        return [g for layer in self.layers for g in layer.grads()]

    # -- passes ------------------------------------------------------------
    def _check(self, x):
        x = np.asarray(x)
        if x.ndim == 3:
            x = x[None]
        if x.shape[1:] != self.input_shape:
            raise ParameterError(f"expected inputs of shape {self.input_shape}, got {x.shape[1:]}")
        return x.astype(self.dtype, copy=False)

    def _run(self, x, upto, training, rng):
        for layer in self.layers[:upto]:
            x = layer.forward(x, training, rng)
        return x

    def logits(self, x, training=False, rng=None):
        return self._run(self._check(x), len(self.layers), training, rng)

    def forward(self, x, training=False, rng=None, batch_size=64):
        """Class probabilities, one row per input. Dropout only when ``training``."""
        x = self._check(x)
        if training:
            return softmax(self._run(x, len(self.layers), True, rng))
        out = [softmax(self._run(x[i:i + batch_size], len(self.layers), False, None))
               for i in range(0, len(x), batch_size)]
        return np.concatenate(out) if out else np.zeros((0, self.n_classes), self.dtype)

    def loss_and_grad(self, x, labels, rng=None, training=True):
        """Mean categorical cross-entropy; fills every layer's gradient buffers."""
        x = self._check(x)
        labels = np.asarray(labels)
        n = len(labels)
        # caches are always built; dropout is skipped when rng is None
        logits = self._run(x, len(self.layers), True, rng if training else None)
        p = softmax(logits.astype(np.float64))
        loss = -np.mean(np.log(np.clip(p[np.arange(n), labels], 1e-300, None)))
        grad = p
        grad[np.arange(n), labels] -= 1.0
        grad = (grad / n).astype(self.dtype)
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
            if grad is None:
                break
        return float(loss)

    def embed(self, x, batch_size=64):
        """Output of layer 15 (dense+ReLU after inference-mode dropout)."""
        x = self._check(x)
        out = [self._run(x[i:i + batch_size], len(self.layers) - 1, False, None)
               for i in range(0, len(x), batch_size)]
        return np.concatenate(out) if out else np.zeros((0, self.layers[-1].in_features), self.dtype)


def build_model(n_classes: int, seed: int = 0, input_shape=INPUT_SHAPE, blocks=DEFAULT_BLOCKS,
                dense_units: int = 128, dropout=DEFAULT_DROPOUT, dtype=np.float32) -> CNN:
    """Construct the base CNN with seeded Glorot-uniform weights.

    ``blocks`` lists the filter counts of each (conv, conv, pool, dropout)
    group; the defaults reproduce the 16-layer base network. ``dropout``
    gives one rate per conv block plus one for the dense layer.
    """
    if n_classes < 2:
        raise ParameterError("the base CNN needs at least 2 classes")
    if len(dropout) != len(blocks) + 1:
        raise ConfigurationError("need one dropout rate per block plus one for the dense layer")
    rng = np.random.default_rng(seed)
    layers = []
    shape = tuple(input_shape)
    channels = shape[-1]
    for rate, filters in zip(dropout, blocks):
        for f in filters:
            layer = Conv2D(channels, f, rng, dtype)
            shape = layer.output_shape(shape)
            layers.append(layer)
            channels = f
        layers.append(MaxPool2D())
        shape = layers[-1].output_shape(shape)
        if min(shape[:2]) < 1:
            raise ConfigurationError(f"input shape {tuple(input_shape)} collapses to {shape} in the conv stack")
        layers.append(Dropout(rate))
    layers.append(Flatten())
    flat = int(np.prod(shape))
    layers.append(Dense(flat, dense_units, rng, "relu", dtype))
    layers.append(Dropout(dropout[-1]))
    layers.append(Dense(dense_units, n_classes, rng, "softmax", dtype))
    config = {"blocks": [list(b) for b in blocks], "dense_units": dense_units,
              "dropout": list(dropout), "seed": seed}
    return CNN(layers, input_shape, n_classes, dtype, config)


class FeatureExtractor:
    """Trained base model with its classification layer removed."""

    def __init__(self, model: CNN):
        if not model.trained:
            warnings.warn("building a feature extractor from an untrained model", stacklevel=2)
        self.model = model
        self.untrained = not model.trained

    @property
    def dim(self) -> int:
        return self.model.layers[-1].in_features

    def __call__(self, x, batch_size=64) -> np.ndarray:
        return self.model.embed(x, batch_size).astype(np.float64)


def to_feature_extractor(model: CNN) -> FeatureExtractor:
    return FeatureExtractor(model)
