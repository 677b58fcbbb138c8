"""Tensor operations for CNN inference.

Tensors are ``float64`` arrays shaped ``(height, width, channels)``.
Convolution weights follow the FERW order ``(out, in, kh, kw)``; depthwise
kernels are ``(channels, kh, kw)``; pointwise weights are ``(out, in)``.
All convolutions are cross-correlations.  ``same`` padding pads
``(D - 1) / 2`` zeros on every side, so the output is
``floor((n + D - 1 - D) / stride) + 1 = ceil(n / stride)``.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ShapeMismatch

PADDINGS = ("valid", "same")


def _check_tensor(x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3:
        raise ShapeMismatch(f"expected an (h, w, c) tensor, got shape {x.shape}")
    return x


def output_size(n, kernel, stride, padding):
    pad = (kernel - 1) // 2 if padding == "same" else 0
    out = (n + 2 * pad - kernel) // stride + 1
    if out < 1:
        raise ShapeMismatch(f"kernel {kernel} does not fit input size {n}")
    return out


def _pad(x, kernel, padding, value=0.0):
    if padding not in PADDINGS:
        raise ValueError(f"padding must be one of {PADDINGS}, got {padding!r}")
    if kernel % 2 == 0:
        raise ShapeMismatch(f"kernel size must be odd, got {kernel}")
    if padding == "valid" or kernel == 1:
        return x
    p = (kernel - 1) // 2
    return np.pad(x, ((p, p), (p, p), (0, 0)), constant_values=value)


def _windows(x, kernel, stride, padding, value=0.0):
    """``(ho, wo, c, kernel, kernel)`` view of every receptive field."""
    h, w, _ = x.shape
    ho = output_size(h, kernel, stride, padding)
    wo = output_size(w, kernel, stride, padding)
    xp = _pad(x, kernel, padding, value)
    win = sliding_window_view(xp, (kernel, kernel), axis=(0, 1))
    return win[: (ho - 1) * stride + 1 : stride, : (wo - 1) * stride + 1 : stride]


def conv2d(x, weights, bias=None, stride=1, padding="valid"):
    x = _check_tensor(x)
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 4 or w.shape[2] != w.shape[3]:
        raise ShapeMismatch(f"conv weights must be (out, in, D, D), got {w.shape}")
    n, m, d, _ = w.shape
    if m != x.shape[2]:
        raise ShapeMismatch(f"conv expects {m} input channels, tensor has {x.shape[2]}")
    out = np.einsum("hwcij,ncij->hwn", _windows(x, d, stride, padding), w)
    if bias is not None:
        out = out + _bias(bias, n)
    return out


def depthwise_conv2d(x, kernels, bias=None, stride=1, padding="valid"):
    x = _check_tensor(x)
    k = np.asarray(kernels, dtype=np.float64)
    if k.ndim != 3 or k.shape[1] != k.shape[2]:
        raise ShapeMismatch(f"depthwise kernels must be (C, D, D), got {k.shape}")
    if k.shape[0] != x.shape[2]:
        raise ShapeMismatch(
            f"{k.shape[0]} depthwise kernels for a {x.shape[2]}-channel tensor"
        )
    out = np.einsum("hwcij,cij->hwc", _windows(x, k.shape[1], stride, padding), k)
    if bias is not None:
        out = out + _bias(bias, k.shape[0])
    return out


def pointwise_conv2d(x, weights, bias=None, stride=1):
    """1x1 convolution mixing channels; accepts ``(N, M)`` or ``(N, M, 1, 1)`` weights."""
    x = _check_tensor(x)
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim == 4:
        if w.shape[2:] != (1, 1):
            raise ShapeMismatch(f"pointwise weights must be 1x1, got {w.shape}")
        w = w[:, :, 0, 0]
    if w.ndim != 2 or w.shape[1] != x.shape[2]:
        raise ShapeMismatch(
            f"pointwise weights {w.shape} do not match {x.shape[2]} input channels"
        )
    out = x[::stride, ::stride] @ w.T
    if bias is not None:
        out = out + _bias(bias, w.shape[0])
    return out


def _bias(bias, n):
    b = np.asarray(bias, dtype=np.float64)
    if b.shape != (n,):
        raise ShapeMismatch(f"bias of shape {b.shape} for {n} channels")
    return b


def batch_norm(x, gamma, beta, mean, var, eps=1e-3):
    x = _check_tensor(x)
    c = x.shape[2]
    params = [np.asarray(p, dtype=np.float64) for p in (gamma, beta, mean, var)]
    for p in params:
        if p.shape != (c,):
            raise ShapeMismatch(f"batch-norm parameter of shape {p.shape} for {c} channels")
    gamma, beta, mean, var = params
    scale = gamma / np.sqrt(var + eps)
    return (x - mean) * scale + beta


def relu(x):
    return np.maximum(np.asarray(x, dtype=np.float64), 0.0)


def max_pool(x, kernel=3, stride=2, padding="same"):
    x = _check_tensor(x)
    return _windows(x, kernel, stride, padding, value=-np.inf).max(axis=(3, 4))


def global_avg_pool(x):
    x = _check_tensor(x)
    return x.mean(axis=(0, 1), keepdims=True)


def softmax(x):
    """Numerically stable softmax over the last (channel) axis."""
    x = np.asarray(x, dtype=np.float64)
    z = np.exp(x - x.max(axis=-1, keepdims=True))
    return z / z.sum(axis=-1, keepdims=True)


def residual_add(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeMismatch(f"residual shapes differ: {a.shape} vs {b.shape}")
    return a + b
