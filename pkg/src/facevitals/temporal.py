"""Temporal band-pass filtering and magnification of per-pixel signals."""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import LengthMismatch, LevelOutOfRange, NyquistViolation, TooShort
from .frame import CHANNELS, TimeSeries
from .pyramid import build_laplacian, collapse_laplacian

MIN_SAMPLES = 8
DEFAULT_ATTENUATION = (0.5, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0)


@dataclass(frozen=True)
class BandConfig:
    f_lo: float = 0.4
    f_hi: float = 4.0
    alpha: float = 50.0
    level_attenuation: tuple = field(default=DEFAULT_ATTENUATION)

    def __post_init__(self):
        if not 0 < self.f_lo < self.f_hi:
            raise ValueError(f"need 0 < f_lo < f_hi, got {self.f_lo}, {self.f_hi}")
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")
        att = tuple(float(a) for a in self.level_attenuation)
        if not all(0.0 <= a <= 1.0 for a in att):
            raise ValueError("level attenuation values must lie in [0, 1]")
        object.__setattr__(self, "level_attenuation", att)

    @classmethod
    def parse_band(cls, text, **kwargs):
        """Build from ``"lo:hi"`` in Hz."""
        lo, hi = (float(v) for v in text.split(":"))
        return cls(lo, hi, **kwargs)

    @property
    def band_text(self):
        return f"{self.f_lo}:{self.f_hi}"

    def check_rate(self, sample_rate_hz):
        if self.f_hi >= sample_rate_hz / 2:
            raise NyquistViolation(
                f"upper cutoff {self.f_hi} Hz is not below Nyquist "
                f"({sample_rate_hz / 2} Hz)"
            )


def bandpass_mask(n, sample_rate_hz, f_lo, f_hi):
    """Boolean mask over full-length FFT bins whose |frequency| is in [f_lo, f_hi]."""
    freqs = np.abs(np.fft.fftfreq(n, d=1.0 / sample_rate_hz))
    return (freqs >= f_lo) & (freqs <= f_hi)


def ideal_bandpass_array(values, sample_rate_hz, f_lo, f_hi, axis=0):
    """Ideal (brick-wall) band-pass of ``values`` along ``axis``."""
    values = np.asarray(values, dtype=np.float64)
    n = values.shape[axis]
    if n < MIN_SAMPLES:
        raise TooShort(f"need at least {MIN_SAMPLES} samples, got {n}")
    if f_hi >= sample_rate_hz / 2:
        raise NyquistViolation(
            f"upper cutoff {f_hi} Hz is not below Nyquist ({sample_rate_hz / 2} Hz)"
        )
    mask = bandpass_mask(n, sample_rate_hz, f_lo, f_hi)
    shape = [1] * values.ndim
    shape[axis] = n
    spectrum = np.fft.fft(values, axis=axis)
    spectrum *= mask.reshape(shape)
    return np.fft.ifft(spectrum, axis=axis).real


def ideal_bandpass(s, cfg):
    out = ideal_bandpass_array(s.values, s.sample_rate_hz, cfg.f_lo, cfg.f_hi)
    return TimeSeries(s.sample_rate_hz, out)


def smoothing_coefficient(cutoff_hz, dt):
    x = 2.0 * math.pi * cutoff_hz * dt
    return x / (x + 1.0)


class StreamingBandpass:
    """Difference of two first-order exponential low-passes.

    Works on scalars or on arrays of independent signals (one per pixel).
    One instance belongs to one signal stream; do not share across threads.
    """

    def __init__(self, f_lo, f_hi):
        self.f_lo = f_lo
        self.f_hi = f_hi
        self.low = None
        self.high = None

    @property
    def initialized(self):
        return self.low is not None

    def reset(self):
        self.low = None
        self.high = None

    def update(self, sample, dt):
        if dt <= 0:
            raise ValueError(f"dt must be positive, got {dt}")
        x = np.asarray(sample, dtype=np.float64)
        if self.low is None:
            self.low = x.copy()
            self.high = x.copy()
            return np.zeros_like(x)[()]
        self.low = self.low + smoothing_coefficient(self.f_lo, dt) * (x - self.low)
        self.high = self.high + smoothing_coefficient(self.f_hi, dt) * (x - self.high)
        return (self.high - self.low)[()]


def streaming_bandpass(state, sample, dt):
    return state.update(sample, dt)


def attenuation(cfg, level):
    if not 0 <= level < len(cfg.level_attenuation):
        raise LevelOutOfRange(
            f"level {level} outside attenuation schedule of length "
            f"{len(cfg.level_attenuation)}"
        )
    return cfg.level_attenuation[level]


def amplify(s, cfg, level):
    gain = cfg.alpha * attenuation(cfg, level)
    if isinstance(s, TimeSeries):
        return TimeSeries(s.sample_rate_hz, s.values * gain)
    return np.asarray(s, dtype=np.float64) * gain


def magnify_and_recombine(original, filtered, cfg, level):
    if len(original.values) != len(filtered.values):
        raise LengthMismatch(
            f"original has {len(original.values)} samples, filtered has "
            f"{len(filtered.values)}"
        )
    if original.sample_rate_hz != filtered.sample_rate_hz:
        raise LengthMismatch("sample rates differ")
    boosted = amplify(filtered, cfg, level)
    return TimeSeries(original.sample_rate_hz, original.values + boosted.values)


def _bandpass_chunked(stack, fps, f_lo, f_hi, rows=16):
    # FFT along time in row blocks to bound the complex temporaries
    out = np.empty_like(stack)
    for r in range(0, stack.shape[1], rows):
        out[:, r:r + rows] = ideal_bandpass_array(stack[:, r:r + rows], fps, f_lo, f_hi, axis=0)
    return out


def magnify_frames(video, fps, cfg, levels=3, channels="RGB"):
    """Eulerian color magnification of a ``(frames, h, w, 3)`` uint8 video.

    Each selected channel is decomposed into a Laplacian pyramid per frame;
    every band (and the residual, as the last level) is band-passed along
    time, scaled by ``alpha * attenuation[level]`` and added back before the
    pyramid is collapsed.  Returns a uint8 video of the same shape.
    """
    video = np.asarray(video)
    out = video.copy()
    for name in channels.upper():
        c = CHANNELS[name]
        stack = video[..., c].astype(np.float64)
        pyr = build_laplacian(stack, levels)

        def boost(band, level):
            if cfg.alpha == 0:
                return band
            return band + amplify(_bandpass_chunked(band, fps, cfg.f_lo, cfg.f_hi), cfg, level)

        result = collapse_laplacian(pyr.map(boost))
        out[..., c] = np.clip(np.rint(result), 0, 255).astype(np.uint8)
    return out
