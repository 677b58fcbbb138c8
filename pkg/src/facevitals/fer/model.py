"""Layer graph, reference architecture and forward pass.

A model is a flat list of layers executed in order over two registers,
``main`` and ``skip``.  A layer flagged ``FORK`` first copies ``main`` into
``skip``; a layer flagged ``SKIP`` reads and writes ``skip`` instead of
``main``; ``ResidualAdd`` sets ``main = main + skip``.  That is enough to
express residual blocks whose shortcut carries its own projection.
"""

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .. import prng
from ..errors import ShapeCheckFailed, ShapeMismatch, WrongInputSize
from . import ops

LABELS = ("Angry", "Disgust", "Fear", "Happy", "Sad", "Surprise", "Neutral")
INPUT_SHAPE = (48, 48, 1)

FLAG_BIAS = 1
FLAG_FORK = 2
FLAG_SKIP = 4
# float32-representable so FERW round-trips are exact
DEFAULT_EPS = float(np.float32(1e-3))


class Kind(enum.IntEnum):
    CONV = 1
    DEPTHWISE = 2
    POINTWISE = 3
    BATCHNORM = 4
    RELU = 5
    GLOBAL_AVG_POOL = 6
    SOFTMAX = 7
    RESIDUAL_ADD = 8
    MAX_POOL = 9


CONV_KINDS = (Kind.CONV, Kind.DEPTHWISE, Kind.POINTWISE)


@dataclass
class LayerSpec:
    kind: Kind
    kernel: int = 1
    stride: int = 1
    padding: str = "same"
    in_channels: int = 1
    out_channels: int = 1
    flags: int = 0
    weights: Optional[np.ndarray] = None
    bias: Optional[np.ndarray] = None
    gamma: Optional[np.ndarray] = None
    beta: Optional[np.ndarray] = None
    mean: Optional[np.ndarray] = None
    var: Optional[np.ndarray] = None
    eps: float = DEFAULT_EPS

    @property
    def has_bias(self):
        return bool(self.flags & FLAG_BIAS)

    @property
    def fork(self):
        return bool(self.flags & FLAG_FORK)

    @property
    def on_skip(self):
        return bool(self.flags & FLAG_SKIP)

    def weight_shape(self):
        m, n, d = self.in_channels, self.out_channels, self.kernel
        if self.kind == Kind.CONV:
            return (n, m, d, d)
        if self.kind == Kind.DEPTHWISE:
            return (m, d, d)
        if self.kind == Kind.POINTWISE:
            return (n, m)
        return None

    def param_arrays(self):
        """Named parameter arrays in FERW payload order."""
        if self.kind in CONV_KINDS:
            out = [("weights", self.weights)]
            if self.has_bias:
                out.append(("bias", self.bias))
            return out
        if self.kind == Kind.BATCHNORM:
            return [("gamma", self.gamma), ("beta", self.beta),
                    ("mean", self.mean), ("var", self.var)]
        return []

    def expected_param_shapes(self):
        if self.kind in CONV_KINDS:
            shapes = [self.weight_shape()]
            if self.has_bias:
                shapes.append((self.out_channels,))
            return shapes
        if self.kind == Kind.BATCHNORM:
            return [(self.out_channels,)] * 4
        return []

    def learnable_count(self):
        if self.kind in CONV_KINDS:
            return sum(int(np.size(a)) for _, a in self.param_arrays())
        if self.kind == Kind.BATCHNORM:
            return int(np.size(self.gamma)) + int(np.size(self.beta))
        return 0

    def apply(self, x, skip=None):
        k = self.kind
        if k == Kind.CONV:
            return ops.conv2d(x, self.weights, self.bias if self.has_bias else None,
                              self.stride, self.padding)
        if k == Kind.DEPTHWISE:
            return ops.depthwise_conv2d(x, self.weights, self.bias if self.has_bias else None,
                                        self.stride, self.padding)
        if k == Kind.POINTWISE:
            return ops.pointwise_conv2d(x, self.weights, self.bias if self.has_bias else None,
                                        self.stride)
        if k == Kind.BATCHNORM:
            return ops.batch_norm(x, self.gamma, self.beta, self.mean, self.var, self.eps)
        if k == Kind.RELU:
            return ops.relu(x)
        if k == Kind.GLOBAL_AVG_POOL:
            return ops.global_avg_pool(x)
        if k == Kind.SOFTMAX:
            return ops.softmax(x)
        if k == Kind.RESIDUAL_ADD:
            return ops.residual_add(x, skip)
        if k == Kind.MAX_POOL:
            return ops.max_pool(x, self.kernel, self.stride, self.padding)
        raise ValueError(f"unknown layer kind {k}")


@dataclass
class Model:
    layers: list
    labels: tuple = LABELS
    input_shape: tuple = INPUT_SHAPE

    def forward(self, x):
        main = np.asarray(x, dtype=np.float64)
        skip = None
        for layer in self.layers:
            if layer.fork:
                skip = main
            if layer.on_skip:
                skip = layer.apply(skip)
            else:
                main = layer.apply(main, skip)
        return main


@dataclass
class EmotionDistribution:
    probabilities: np.ndarray
    labels: tuple = field(default=LABELS)

    @property
    def argmax(self):
        # np.argmax returns the first maximum: ties go to the lowest class index
        return int(np.argmax(self.probabilities))

    @property
    def label(self):
        return self.labels[self.argmax]

    def to_list(self):
        return [float(p) for p in self.probabilities]

    def as_dict(self):
        return dict(zip(self.labels, self.to_list()))


def _layer_shape(layer, shape, skip_shape, index):
    h, w, c = shape

    def fail(msg):
        raise ShapeCheckFailed(msg, layer=index)

    for expected, (name, arr) in zip(layer.expected_param_shapes(), layer.param_arrays()):
        if arr is None or tuple(np.shape(arr)) != tuple(expected):
            fail(f"{name} has shape {None if arr is None else np.shape(arr)}, expected {expected}")
    if layer.kind in CONV_KINDS or layer.kind == Kind.MAX_POOL:
        if layer.kernel < 1 or layer.kernel % 2 == 0:
            fail(f"kernel size {layer.kernel} must be odd and positive")
        if layer.stride < 1:
            fail("stride must be at least 1")
        if layer.padding not in ops.PADDINGS:
            fail(f"unknown padding {layer.padding!r}")
    if layer.kind == Kind.POINTWISE and layer.kernel != 1:
        fail("pointwise layers have kernel size 1")
    if layer.in_channels != c:
        fail(f"expects {layer.in_channels} input channels, receives {c}")
    if layer.kind in (Kind.DEPTHWISE, Kind.BATCHNORM, Kind.RELU, Kind.SOFTMAX,
                      Kind.GLOBAL_AVG_POOL, Kind.RESIDUAL_ADD, Kind.MAX_POOL):
        if layer.out_channels != layer.in_channels:
            fail("this layer kind cannot change the channel count")
    if layer.kind == Kind.BATCHNORM and np.any(np.asarray(layer.var) < 0):
        fail("negative running variance")
    if layer.kind in CONV_KINDS or layer.kind == Kind.MAX_POOL:
        try:
            h = ops.output_size(h, layer.kernel, layer.stride, layer.padding)
            w = ops.output_size(w, layer.kernel, layer.stride, layer.padding)
        except ShapeMismatch as exc:
            fail(str(exc))
        return (h, w, layer.out_channels)
    if layer.kind == Kind.GLOBAL_AVG_POOL:
        return (1, 1, c)
    if layer.kind == Kind.RESIDUAL_ADD:
        if skip_shape != shape:
            fail(f"residual shapes differ: main {shape}, skip {skip_shape}")
    return shape


def shape_check(model):
    """Propagate shapes through the graph; returns the output shape.

    Raises ShapeCheckFailed naming the first inconsistent layer.
    """
    main = tuple(model.input_shape)
    skip = None
    for i, layer in enumerate(model.layers):
        if layer.fork:
            skip = main
        if layer.on_skip:
            if skip is None:
                raise ShapeCheckFailed("skip path used before any fork", layer=i)
            skip = _layer_shape(layer, skip, None, i)
        else:
            if layer.kind == Kind.RESIDUAL_ADD and skip is None:
                raise ShapeCheckFailed("residual add without a fork", layer=i)
            main = _layer_shape(layer, main, skip, i)
    if model.layers:
        if main != (1, 1, len(model.labels)):
            raise ShapeCheckFailed(
                f"model output {main} is not (1, 1, {len(model.labels)})",
                layer=len(model.layers) - 1,
            )
        if model.layers[-1].kind != Kind.SOFTMAX:
            raise ShapeCheckFailed("last layer must be a softmax", layer=len(model.layers) - 1)
    return main


def param_count(model):
    return sum(layer.learnable_count() for layer in model.layers)


def normalize_face(face):
    return np.asarray(face, dtype=np.float64) / 127.5 - 1.0


def classify(model, face):
    face = np.asarray(face, dtype=np.float64)
    h, w, _ = model.input_shape
    if face.shape != (h, w):
        raise WrongInputSize(f"classifier needs a {w}x{h} face, got {face.shape[::-1]}")
    out = model.forward(normalize_face(face)[:, :, None])
    return EmotionDistribution(out.reshape(-1), tuple(model.labels))


# --- reference architecture ------------------------------------------------

STEM_WIDTHS = (8, 8)
BLOCK_WIDTHS = (16, 32, 64, 128)


def _conv(kind, d, m, n, stride=1, flags=0, padding="same"):
    return LayerSpec(kind, d, stride, padding, m, n, flags)


def _bn(c, flags=0):
    return LayerSpec(Kind.BATCHNORM, 1, 1, "same", c, c, flags)


def _simple(kind, c, **kw):
    return LayerSpec(kind, 1, 1, "same", c, c, **kw)


def reference_layers():
    """Layer table of the reference network, parameters unset."""
    layers = []
    c = 1
    for width in STEM_WIDTHS:
        layers += [_conv(Kind.CONV, 3, c, width), _bn(width), _simple(Kind.RELU, width)]
        c = width
    for width in BLOCK_WIDTHS:
        layers += [
            _conv(Kind.DEPTHWISE, 3, c, c, flags=FLAG_FORK),
            _conv(Kind.POINTWISE, 1, c, width),
            _bn(width),
            _simple(Kind.RELU, width),
            _conv(Kind.DEPTHWISE, 3, width, width),
            _conv(Kind.POINTWISE, 1, width, width),
            _bn(width),
            _simple(Kind.RELU, width),
            LayerSpec(Kind.MAX_POOL, 3, 2, "same", width, width),
            _conv(Kind.POINTWISE, 1, c, width, stride=2, flags=FLAG_SKIP),
            _bn(width, flags=FLAG_SKIP),
            _simple(Kind.RESIDUAL_ADD, width),
        ]
        c = width
    layers += [
        _conv(Kind.CONV, 3, c, len(LABELS), flags=FLAG_BIAS),
        _simple(Kind.GLOBAL_AVG_POOL, len(LABELS)),
        _simple(Kind.SOFTMAX, len(LABELS)),
    ]
    return layers


def init_weights(layers, seed):
    """Fill parameters from the portable PRNG (He-normal convs, float32)."""
    stream = prng.Stream(seed)

    def normal(shape, std):
        return (std * stream.normal(int(np.prod(shape)))).reshape(shape).astype(np.float32)

    for layer in layers:
        if layer.kind in CONV_KINDS:
            shape = layer.weight_shape()
            fan_in = layer.kernel * layer.kernel * (1 if layer.kind == Kind.DEPTHWISE else layer.in_channels)
            layer.weights = normal(shape, np.sqrt(2.0 / fan_in))
            if layer.has_bias:
                layer.bias = normal((layer.out_channels,), 0.1)
        elif layer.kind == Kind.BATCHNORM:
            c = layer.out_channels
            layer.gamma = (1.0 + normal((c,), 0.1)).astype(np.float32)
            layer.beta = normal((c,), 0.1)
            layer.mean = normal((c,), 0.1)
            layer.var = (0.5 + stream.uniform(c)).astype(np.float32)
    return layers


def reference_model(seed=0):
    model = Model(init_weights(reference_layers(), seed))
    shape_check(model)
    return model


def zero_head(model):
    """Copy of ``model`` whose final conv produces all-zero logits."""
    layers = [LayerSpec(**{**vars(l)}) for l in model.layers]
    for layer in reversed(layers):
        if layer.kind in CONV_KINDS:
            layer.weights = np.zeros_like(layer.weights)
            if layer.has_bias:
                layer.bias = np.zeros_like(layer.bias)
            break
    return Model(layers, model.labels, model.input_shape)
