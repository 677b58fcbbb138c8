"""Frames, planes, regions and time series.

A :class:`Frame` wraps a read-only ``(height, width, 3)`` uint8 array whose
memory layout is row-major interleaved RGB with no padding.  That byte
layout is the wire contract shared with RVID files and the stream service.

Gray planes are plain ``float64`` arrays of shape ``(height, width)``.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import EmptyRegion

MIN_FRAME_SIDE = 8
LUMA_WEIGHTS = (0.299, 0.587, 0.114)
CHANNELS = {"R": 0, "G": 1, "B": 2}


class Roi(NamedTuple):
    x: int
    y: int
    w: int
    h: int

    @property
    def area(self):
        return self.w * self.h

    def clamp(self, width, height):
        """Intersect with ``[0, width) x [0, height)``; may return zero size."""
        x0 = min(max(self.x, 0), width)
        y0 = min(max(self.y, 0), height)
        x1 = min(max(self.x + self.w, 0), width)
        y1 = min(max(self.y + self.h, 0), height)
        return Roi(x0, y0, x1 - x0, y1 - y0)

    @classmethod
    def parse(cls, text):
        """Parse ``"x,y,w,h"``."""
        parts = [int(v) for v in text.split(",")]
        if len(parts) != 4 or parts[2] <= 0 or parts[3] <= 0:
            raise ValueError(f"bad roi {text!r}, expected x,y,w,h with w,h > 0")
        return cls(*parts)

    def __str__(self):
        return f"{self.x},{self.y},{self.w},{self.h}"


@dataclass(frozen=True)
class Frame:
    width: int
    height: int
    timestamp_ms: int
    pixels: np.ndarray

    def __post_init__(self):
        if self.width < MIN_FRAME_SIDE or self.height < MIN_FRAME_SIDE:
            raise ValueError(
                f"frame must be at least {MIN_FRAME_SIDE}x{MIN_FRAME_SIDE}, "
                f"got {self.width}x{self.height}"
            )
        if self.timestamp_ms < 0:
            raise ValueError("timestamp_ms must be non-negative")
        px = np.asarray(self.pixels)
        if px.size != self.width * self.height * 3:
            raise ValueError(
                f"pixel buffer has {px.size} values, expected "
                f"{self.width * self.height * 3}"
            )
        if px.dtype != np.uint8:
            raise TypeError(f"pixels must be uint8, got {px.dtype}")
        px = px.reshape(self.height, self.width, 3)
        if px.flags.writeable:
            px = px.copy()
            px.flags.writeable = False
        object.__setattr__(self, "pixels", px)

    @classmethod
    def from_bytes(cls, data, width, height, timestamp_ms):
        buf = np.frombuffer(data, dtype=np.uint8)
        return cls(width, height, timestamp_ms, buf)

    @classmethod
    def from_array(cls, rgb, timestamp_ms=0):
        rgb = np.asarray(rgb)
        return cls(rgb.shape[1], rgb.shape[0], timestamp_ms, rgb)

    def to_bytes(self):
        return self.pixels.tobytes()

    def __eq__(self, other):
        if not isinstance(other, Frame):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and self.timestamp_ms == other.timestamp_ms
            and np.array_equal(self.pixels, other.pixels)
        )

    __hash__ = None


@dataclass(frozen=True)
class TimeSeries:
    sample_rate_hz: float
    values: np.ndarray

    def __post_init__(self):
        if not (np.isfinite(self.sample_rate_hz) and self.sample_rate_hz > 0):
            raise ValueError(f"sample rate must be positive, got {self.sample_rate_hz}")
        v = np.array(self.values, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(v)):
            raise ValueError("time series values must be finite")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def __len__(self):
        return len(self.values)

    @property
    def duration_s(self):
        return len(self.values) / self.sample_rate_hz


def _pixels(f):
    return f.pixels if isinstance(f, Frame) else np.asarray(f)


def to_grayscale(f):
    """Luma plane using the fixed 0.299/0.587/0.114 weights."""
    px = _pixels(f).astype(np.float64)
    wr, _, wb = LUMA_WEIGHTS
    g = px[..., 1]
    # anchored on G so that gray pixels map back to themselves bit-exactly
    luma = g + wr * (px[..., 0] - g) + wb * (px[..., 2] - g)
    return np.clip(luma, 0.0, 255.0)


def extract_channel(f, channel="G"):
    return _pixels(f)[..., CHANNELS[channel.upper()]].astype(np.float64)


def crop(plane, roi):
    """Copy the part of ``plane`` covered by ``roi``, clamped to the plane.

    Raises EmptyRegion when nothing of ``roi`` lies inside the plane.
    """
    h, w = plane.shape[:2]
    c = Roi(*roi).clamp(w, h)
    if c.w <= 0 or c.h <= 0:
        raise EmptyRegion(f"roi {tuple(roi)} does not overlap a {w}x{h} plane")
    return np.array(plane[c.y:c.y + c.h, c.x:c.x + c.w], dtype=np.float64)


def _bilinear_axis(n_in, n_out):
    # half-pixel centers: src = (dst + 0.5) * n_in / n_out - 0.5, clamped at the edges
    src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0.0, n_in - 1)
    lo = np.floor(src).astype(np.intp)
    hi = np.minimum(lo + 1, n_in - 1)
    frac = src - lo
    return lo, hi, frac


def resize_bilinear(plane, w, h):
    if w < 1 or h < 1:
        raise ValueError("target size must be at least 1x1")
    p = np.asarray(plane, dtype=np.float64)
    in_h, in_w = p.shape
    if (in_w, in_h) == (w, h):
        return p.copy()
    y0, y1, fy = _bilinear_axis(in_h, h)
    x0, x1, fx = _bilinear_axis(in_w, w)
    rows = p[y0] * (1.0 - fy)[:, None] + p[y1] * fy[:, None]
    return rows[:, x0] * (1.0 - fx) + rows[:, x1] * fx
