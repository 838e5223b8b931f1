"""NumPy layers with explicit backward passes. Tensors are NHWC."""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


class Layer:
    kind = "layer"
    trainable = False

    def params(self):
        return []

    def grads(self):
        return []

    def output_shape(self, shape):
        return shape

    def forward(self, x, training=False, rng=None):
        raise NotImplementedError

    def backward(self, grad):
        raise NotImplementedError

    def manifest(self):
        return {"type": self.kind}


def glorot_uniform(rng, shape, fan_in, fan_out, dtype):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


class Conv2D(Layer):
    """3x3 valid convolution, stride 1, fused ReLU."""

    kind = "conv2d"
    trainable = True

    def __init__(self, in_channels, filters, rng, dtype=np.float32, kernel=3):
        self.in_channels, self.filters, self.k = in_channels, filters, kernel
        fan_in, fan_out = kernel * kernel * in_channels, kernel * kernel * filters
        self.W = glorot_uniform(rng, (kernel, kernel, in_channels, filters), fan_in, fan_out, dtype)
        self.b = np.zeros(filters, dtype=dtype)
        self.dW = np.zeros_like(self.W)
        self.db = np.zeros_like(self.b)
        self.need_input_grad = True

    def params(self):
        return [self.W, self.b]

    def grads(self):
        return [self.dW, self.db]

    def output_shape(self, shape):
        h, w, _ = shape
        return (h - self.k + 1, w - self.k + 1, self.filters)

    def forward(self, x, training=False, rng=None):
        n, h, w, c = x.shape
        k = self.k
        ho, wo = h - k + 1, w - k + 1
        cols = sliding_window_view(x, (k, k), axis=(1, 2)).transpose(0, 1, 2, 4, 5, 3)
        cols = cols.reshape(n * ho * wo, k * k * c)
        out = cols @ self.W.reshape(k * k * c, self.filters) + self.b
        np.maximum(out, 0, out=out)
        if training:
            self._cache = (x.shape, cols, out)
        return out.reshape(n, ho, wo, self.filters)

    def backward(self, grad):
        shape, cols, out = self._cache
        n, h, w, c = shape
        k = self.k
        ho, wo = h - k + 1, w - k + 1
        g = grad.reshape(-1, self.filters) * (out > 0)
        self.dW[...] = (cols.T @ g).reshape(self.W.shape)
        self.db[...] = g.sum(axis=0)
        self._cache = None
        if not self.need_input_grad:
            return None
        dcols = (g @ self.W.reshape(k * k * c, self.filters).T).reshape(n, ho, wo, k, k, c)
        dx = np.zeros(shape, dtype=grad.dtype)
        for i in range(k):
            for j in range(k):
                dx[:, i:i + ho, j:j + wo, :] += dcols[:, :, :, i, j, :]
        return dx

    def manifest(self):
        return {"type": self.kind, "filters": self.filters, "kernel": [self.k, self.k],
                "activation": "relu"}


class MaxPool2D(Layer):
    """2x2 stride-2 max pooling; odd trailing rows/columns are dropped."""

    kind = "maxpool2d"

    def output_shape(self, shape):
        h, w, c = shape
        return (h // 2, w // 2, c)

    def forward(self, x, training=False, rng=None):
        n, h, w, c = x.shape
        ho, wo = h // 2, w // 2
        blocks = x[:, :2 * ho, :2 * wo].reshape(n, ho, 2, wo, 2, c).transpose(0, 1, 3, 5, 2, 4)
        blocks = blocks.reshape(n, ho, wo, c, 4)
        idx = blocks.argmax(axis=-1)
        if training:
            self._cache = (x.shape, idx)
        return np.take_along_axis(blocks, idx[..., None], axis=-1)[..., 0]

    def backward(self, grad):
        shape, idx = self._cache
        n, h, w, c = shape
        ho, wo = h // 2, w // 2
        spread = (np.arange(4) == idx[..., None]) * grad[..., None]
        spread = spread.reshape(n, ho, wo, c, 2, 2).transpose(0, 1, 4, 2, 5, 3).reshape(n, 2 * ho, 2 * wo, c)
        dx = np.zeros(shape, dtype=grad.dtype)
        dx[:, :2 * ho, :2 * wo] = spread
        self._cache = None
        return dx

    def manifest(self):
        return {"type": self.kind, "pool": [2, 2]}


class Dropout(Layer):
    """Inverted dropout; identity outside training or without an RNG."""

    kind = "dropout"

    def __init__(self, rate):
        self.rate = float(rate)

    def forward(self, x, training=False, rng=None):
        if not training or rng is None or self.rate == 0:
            self._mask = None
            return x
        keep = 1.0 - self.rate
        self._mask = (rng.random(x.shape) < keep).astype(x.dtype) / x.dtype.type(keep)
        return x * self._mask

    def backward(self, grad):
        return grad if self._mask is None else grad * self._mask

    def manifest(self):
        return {"type": self.kind, "rate": self.rate}


class Flatten(Layer):
    kind = "flatten"

    def output_shape(self, shape):
        return (int(np.prod(shape)),)

    def forward(self, x, training=False, rng=None):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad):
        return grad.reshape(self._shape)


class Dense(Layer):
    """Fully connected layer. ``activation`` is ``"relu"`` or ``"softmax"``.

    The softmax layer returns logits from :meth:`forward`; the model applies
    the softmax and fuses its gradient with the cross-entropy loss.
    """

    kind = "dense"
    trainable = True

    def __init__(self, in_features, units, rng, activation="relu", dtype=np.float32):
        self.in_features, self.units, self.activation = in_features, units, activation
        self.W = glorot_uniform(rng, (in_features, units), in_features, units, dtype)
        self.b = np.zeros(units, dtype=dtype)
        self.dW = np.zeros_like(self.W)
        self.db = np.zeros_like(self.b)

    def params(self):
        return [self.W, self.b]

    def grads(self):
        return [self.dW, self.db]

    def output_shape(self, shape):
        return (self.units,)

    def forward(self, x, training=False, rng=None):
        out = x @ self.W + self.b
        if self.activation == "relu":
            np.maximum(out, 0, out=out)
        if training:
            self._cache = (x, out)
        return out

    def backward(self, grad):
        x, out = self._cache
        if self.activation == "relu":
            grad = grad * (out > 0)
        self.dW[...] = x.T @ grad
        self.db[...] = grad.sum(axis=0)
        self._cache = None
        return grad @ self.W.T

    def manifest(self):
        return {"type": self.kind, "units": self.units, "activation": self.activation}


def softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)
