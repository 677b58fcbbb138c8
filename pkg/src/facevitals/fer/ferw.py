"""FERW v1 weight files.

All integers little-endian::

    "FERW"                     4 bytes
    version                    u32 (= 1)
    layer_count                u32
    per layer:
        kind                   u8   (1 Conv, 2 DepthwiseConv, 3 PointwiseConv,
                                     4 BatchNorm, 5 ReLU, 6 GlobalAvgPool,
                                     7 Softmax, 8 ResidualAdd, 9 MaxPool)
        D, stride, padding, M, N, flags   six u32
        payload_len            u64  (bytes)
        payload                float32 values
    checksum                   u64  (sum of every payload byte, mod 2**64)

padding: 0 valid, 1 same.  flags: bit 0 bias present, bit 1 fork (copy the
main tensor to the skip register before the layer), bit 2 layer runs on the
skip register.

Payload order: Conv ``N*M*D*D`` weights (out, in, row, col); DepthwiseConv
``C*D*D``; PointwiseConv ``N*M``; each followed by ``N`` biases when bit 0
is set.  BatchNorm: gamma, beta, running mean, running variance, each of
length C, and its D slot holds the IEEE-754 float32 bit pattern of epsilon.
Other kinds carry no payload.
"""

import struct

import numpy as np

from ..errors import (
    BadMagic,
    ChecksumMismatch,
    ShapeCheckFailed,
    TruncatedFile,
    UnsupportedVersion,
)
from .model import CONV_KINDS, Kind, LayerSpec, Model, shape_check

MAGIC = b"FERW"
VERSION = 1
PREAMBLE = struct.Struct("<4sII")
LAYER_HEADER = struct.Struct("<B6IQ")
CHECKSUM = struct.Struct("<Q")
PADDING_CODES = {"valid": 0, "same": 1}
PADDING_NAMES = {v: k for k, v in PADDING_CODES.items()}


def _f32_bits(value):
    return struct.unpack("<I", struct.pack("<f", value))[0]


def _bits_f32(bits):
    return struct.unpack("<f", struct.pack("<I", bits))[0]


def _byte_sum(data):
    return int(np.frombuffer(data, dtype=np.uint8).sum(dtype=np.uint64))


def serialize(model):
    shape_check(model)
    parts = [PREAMBLE.pack(MAGIC, VERSION, len(model.layers))]
    total = 0
    for layer in model.layers:
        payload = b"".join(
            np.asarray(arr, dtype="<f4").tobytes() for _, arr in layer.param_arrays()
        )
        d = _f32_bits(layer.eps) if layer.kind == Kind.BATCHNORM else layer.kernel
        parts.append(LAYER_HEADER.pack(
            int(layer.kind), d, layer.stride, PADDING_CODES[layer.padding],
            layer.in_channels, layer.out_channels, layer.flags, len(payload),
        ))
        parts.append(payload)
        total += _byte_sum(payload)
    parts.append(CHECKSUM.pack(total % 2**64))
    return b"".join(parts)


def save_model(model, path):
    data = serialize(model)
    with open(path, "wb") as fh:
        fh.write(data)
    return len(data)


def _read(buf, offset, size, layer, what):
    if offset + size > len(buf):
        raise TruncatedFile(f"file ends inside {what}", layer=layer)
    return buf[offset:offset + size], offset + size


def load_model(data):
    buf = bytes(data)
    if len(buf) < 4 or buf[:4] != MAGIC:
        raise BadMagic(f"expected {MAGIC!r}, found {buf[:4]!r}")
    raw, off = _read(buf, 0, PREAMBLE.size, None, "the file header")
    _, version, count = PREAMBLE.unpack(raw)
    if version != VERSION:
        raise UnsupportedVersion(f"FERW version {version}, only {VERSION} is supported")
    layers = []
    total = 0
    for i in range(count):
        raw, off = _read(buf, off, LAYER_HEADER.size, i, "a layer header")
        kind, d, stride, pad, m, n, flags, plen = LAYER_HEADER.unpack(raw)
        try:
            kind = Kind(kind)
        except ValueError:
            raise ShapeCheckFailed(f"unknown layer kind {kind}", layer=i) from None
        if pad not in PADDING_NAMES:
            raise ShapeCheckFailed(f"unknown padding code {pad}", layer=i)
        layer = LayerSpec(kind, 1 if kind == Kind.BATCHNORM else d, stride,
                          PADDING_NAMES[pad], m, n, flags)
        if kind == Kind.BATCHNORM:
            layer.eps = _bits_f32(d)
        shapes = layer.expected_param_shapes()
        expected = 4 * sum(int(np.prod(s)) for s in shapes)
        if plen != expected:
            raise ShapeCheckFailed(
                f"payload is {plen} bytes, header implies {expected}", layer=i
            )
        payload, off = _read(buf, off, plen, i, "the layer payload")
        total += _byte_sum(payload)
        values = np.frombuffer(payload, dtype="<f4").astype(np.float32)
        pos = 0
        for (name, _), shape in zip(layer.param_arrays() or [], shapes):
            size = int(np.prod(shape))
            setattr(layer, name, values[pos:pos + size].reshape(shape).copy())
            pos += size
        if kind in CONV_KINDS and not layer.has_bias:
            layer.bias = None
        layers.append(layer)
    raw, off = _read(buf, off, CHECKSUM.size, None, "the checksum")
    (stored,) = CHECKSUM.unpack(raw)
    if stored != total % 2**64:
        raise ChecksumMismatch(f"checksum {stored} does not match payload sum {total % 2**64}")
    if off != len(buf):
        raise ShapeCheckFailed(f"{len(buf) - off} unexpected trailing bytes")
    model = Model(layers)
    shape_check(model)
    return model


def read_model(path):
    with open(path, "rb") as fh:
        return load_model(fh.read())
