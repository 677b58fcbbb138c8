"""Gaussian and Laplacian pyramids with the 5-tap binomial kernel.

Downsampling blurs with ``[1, 4, 6, 4, 1] / 16`` along each axis using
edge-replicate padding and keeps every second sample starting at 0, so a
``w x h`` plane becomes ``ceil(w/2) x ceil(h/2)``.  Expansion is the
polyphase form of zero-interleaving followed by the same kernel scaled by
two per axis, with replicate padding applied on the coarse grid:

    out[2i]   = (c[i-1] + 6 c[i] + c[i+1]) / 8
    out[2i+1] = (c[i] + c[i+1]) / 2

Padding the coarse grid (rather than the interleaved one) is what keeps
constants exactly constant at the borders.

All operations act on the last two axes, so a ``(frames, h, w)`` stack is
processed in one call.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, TooManyLevels, TooSmall

KERNEL = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0
MAX_LEVELS = 6


def _half(n):
    return (n + 1) // 2


def _blur_axis(a, axis):
    a = np.moveaxis(a, axis, 0)
    p = np.concatenate([a[:1], a[:1], a, a[-1:], a[-1:]], axis=0)
    n = a.shape[0]
    out = (
        KERNEL[0] * p[0:n]
        + KERNEL[1] * p[1:n + 1]
        + KERNEL[2] * p[2:n + 2]
        + KERNEL[3] * p[3:n + 3]
        + KERNEL[4] * p[4:n + 4]
    )
    return np.moveaxis(out, 0, axis)


def blur(plane):
    """Separable binomial blur over the last two axes, replicate padding."""
    return _blur_axis(_blur_axis(np.asarray(plane, dtype=np.float64), -2), -1)


def blur_downsample(plane):
    p = np.asarray(plane, dtype=np.float64)
    if p.shape[-2] < 2 or p.shape[-1] < 2:
        raise TooSmall(f"cannot downsample a {p.shape[-1]}x{p.shape[-2]} plane")
    return blur(p)[..., ::2, ::2]


def _expand_axis(a, n_out, axis):
    a = np.moveaxis(a, axis, 0)
    n = a.shape[0]
    prev = np.concatenate([a[:1], a[:-1]], axis=0)
    nxt = np.concatenate([a[1:], a[-1:]], axis=0)
    out = np.empty((2 * n,) + a.shape[1:])
    out[0::2] = (prev + 6.0 * a + nxt) / 8.0
    out[1::2] = (a + nxt) / 2.0
    return np.moveaxis(out[:n_out], 0, axis)


def upsample(plane, target_w, target_h):
    p = np.asarray(plane, dtype=np.float64)
    h, w = p.shape[-2:]
    if _half(target_w) != w or _half(target_h) != h:
        raise DimensionMismatch(
            f"{w}x{h} is not the half-size of {target_w}x{target_h}"
        )
    return _expand_axis(_expand_axis(p, target_h, -2), target_w, -1)


def level_shapes(width, height, levels):
    """``(w, h)`` of gaussian levels ``0..levels`` by repeated ceiling halving."""
    shapes = [(width, height)]
    for _ in range(levels):
        w, h = shapes[-1]
        shapes.append((_half(w), _half(h)))
    return shapes


def max_levels(width, height):
    """Largest level count whose coarsest gaussian level is still >= 2x2."""
    n = 0
    w, h = width, height
    while min(_half(w), _half(h)) >= 2:
        w, h = _half(w), _half(h)
        n += 1
    return n


def gaussian_pyramid(plane, levels):
    """Levels ``0..levels`` inclusive (``levels + 1`` planes)."""
    p = np.asarray(plane, dtype=np.float64)
    h, w = p.shape[-2:]
    if levels < 0:
        raise ValueError("levels must be non-negative")
    if levels > max_levels(w, h):
        raise TooManyLevels(
            f"{levels} levels leave a level below 2x2 for a {w}x{h} plane"
        )
    out = [p]
    for _ in range(levels):
        out.append(blur_downsample(out[-1]))
    return out


@dataclass
class LaplacianPyramid:
    bands: list
    residual: np.ndarray

    @property
    def levels(self):
        return len(self.bands)

    def shapes(self):
        return [b.shape for b in self.bands] + [self.residual.shape]

    def map(self, fn):
        """Apply ``fn(array, level)`` to every band and (as level ``levels``) the residual."""
        return LaplacianPyramid(
            [fn(b, k) for k, b in enumerate(self.bands)],
            fn(self.residual, len(self.bands)),
        )


def build_laplacian(plane, levels):
    if levels < 1:
        raise ValueError("a laplacian pyramid needs at least one level")
    if levels > MAX_LEVELS:
        raise TooManyLevels(f"at most {MAX_LEVELS} levels are supported, got {levels}")
    g = gaussian_pyramid(plane, levels)
    bands = []
    for k in range(levels):
        h, w = g[k].shape[-2:]
        bands.append(g[k] - upsample(g[k + 1], w, h))
    return LaplacianPyramid(bands, g[levels])


def collapse_laplacian(pyr):
    acc = pyr.residual
    for band in reversed(pyr.bands):
        h, w = band.shape[-2:]
        acc = band + upsample(acc, w, h)
    return acc
