"""Per-session heart-rate estimation.

Each accepted frame contributes one scalar: the mean of the chosen color
channel over the analysis region, taken at a coarse Gaussian pyramid level.
That scalar passes through a streaming band-pass and into a ring buffer;
once the buffer spans the calibration interval, the dominant in-band
frequency of the buffered window is reported in beats per minute.
"""

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import NoInBandPeak, NonMonotonicTimestamp, TooShort
from .facegate import Detection, GateConfig, gate
from .frame import Roi, TimeSeries, crop, extract_channel
from .pyramid import gaussian_pyramid, max_levels
from .temporal import BandConfig, StreamingBandpass

BPM_MIN = 24.0
BPM_MAX = 240.0
MIN_WINDOW_SECONDS = 2.0
# 99th percentile of peak-to-mean confidence for white-noise windows is ~7.5
# (see tests/test_pulse.py::test_noise_confidence_percentile); readings below
# this are withheld.
CONFIDENCE_THRESHOLD = 8.0


@dataclass(frozen=True)
class PulseConfig:
    band: BandConfig = field(default_factory=BandConfig)
    calibration_seconds: float = 5.0
    window_seconds: float = 10.0
    min_fps: float = 15.0
    smoothing_factor: float = 0.3
    pyramid_levels: int = 3
    analysis_level: int = 1
    channel: str = "G"
    confidence_threshold: float = CONFIDENCE_THRESHOLD
    max_gap_seconds: float = 1.0

    def __post_init__(self):
        if self.calibration_seconds <= 0:
            raise ValueError("calibration_seconds must be positive")
        if self.window_seconds < self.calibration_seconds:
            raise ValueError("window_seconds must be at least calibration_seconds")
        if not 0 < self.smoothing_factor <= 1:
            raise ValueError("smoothing_factor must be in (0, 1]")
        if not 0 <= self.analysis_level < self.pyramid_levels:
            raise ValueError("analysis_level must be below pyramid_levels")
        if self.channel.upper() not in ("R", "G", "B"):
            raise ValueError(f"unknown channel {self.channel!r}")


@dataclass(frozen=True)
class BpmReading:
    t_ms: int
    bpm: Optional[float]
    confidence: float
    window_samples: int
    calibrating: bool
    low_fps: bool = False

    def to_dict(self):
        return {
            "t_ms": self.t_ms,
            "bpm": self.bpm,
            "confidence": self.confidence,
            "window_samples": self.window_samples,
            "calibrating": self.calibrating,
            "low_fps": self.low_fps,
        }


def smooth(previous, new_bpm, factor):
    if not 0 < factor <= 1:
        raise ValueError("smoothing factor must be in (0, 1]")
    if previous is None:
        return new_bpm
    return previous + factor * (new_bpm - previous)


def power_spectrum(values, sample_rate_hz):
    """One-sided power spectrum of the mean-removed, Hann-windowed series."""
    x = np.asarray(values, dtype=np.float64)
    x = (x - x.mean()) * np.hanning(len(x))
    power = np.abs(np.fft.rfft(x)) ** 2
    return np.fft.rfftfreq(len(x), d=1.0 / sample_rate_hz), power


def _parabolic_offset(left, centre, right):
    # vertex of the parabola through three log-power samples, in bins
    floor = 1e-300
    a, b, c = (math.log(max(v, floor)) for v in (left, centre, right))
    denom = a - 2.0 * b + c
    if denom >= 0:
        return 0.0
    return max(-0.5, min(0.5, 0.5 * (a - c) / denom))


def estimate_bpm(window, band):
    """Dominant in-band frequency of ``window`` as ``(bpm, confidence)``.

    The peak must be a local maximum of the full spectrum: a maximum sitting
    on the band edge only because an out-of-band tone leaks across it is not
    a pulse and raises NoInBandPeak.
    """
    fs = window.sample_rate_hz
    n = len(window.values)
    if n < 8 or n / fs < MIN_WINDOW_SECONDS:
        raise TooShort(f"{n} samples at {fs:.3f} Hz is under {MIN_WINDOW_SECONDS} s")
    band.check_rate(fs)
    freqs, power = power_spectrum(window.values, fs)
    in_band = np.flatnonzero((freqs >= band.f_lo) & (freqs <= band.f_hi))
    if in_band.size == 0:
        raise NoInBandPeak("no spectral bin falls inside the band")
    band_power = power[in_band]
    if band_power.max() < 1e-12:
        raise NoInBandPeak("no in-band power")
    k = int(in_band[np.argmax(band_power)])
    left = power[k - 1] if k > 0 else 0.0
    right = power[k + 1] if k + 1 < power.size else 0.0
    if left > power[k] or right > power[k]:
        raise NoInBandPeak(f"in-band maximum at {freqs[k]:.3f} Hz is leakage from outside the band")
    delta = _parabolic_offset(left, power[k], right) if 0 < k < power.size - 1 else 0.0
    freq = (k + delta) * fs / n
    freq = min(max(freq, band.f_lo), band.f_hi)
    confidence = float(power[k] / band_power.mean())
    return 60.0 * freq, confidence


class PulseSession:
    """Stateful heart-rate estimator for one video stream.

    ``roi`` is the analysis region (whole frame when None).  With a ``gate``
    configured, each frame is accepted only when a detection overlaps the
    gate's analysis region enough; detections come either from the
    ``detections`` argument of :meth:`push_frame` or from ``detector``.
    """

    def __init__(self, config=None, roi=None, gate_config=None, detector=None):
        self.config = config or PulseConfig()
        self.gate = gate_config
        self.roi = Roi(*roi) if roi is not None else (
            gate_config.analysis_roi if gate_config is not None else None
        )
        self.detector = detector
        self.filter = StreamingBandpass(self.config.band.f_lo, self.config.band.f_hi)
        max_samples = int(math.ceil(self.config.window_seconds * 240)) + 1
        self.buffer = deque(maxlen=max_samples)
        self.smoothed = None
        self.last_reading = None
        self.last_detection = None
        self.frames_seen = 0
        self.frames_gated_out = 0
        self.calibration_resets = 0
        self._last_ts = None
        self._last_accepted_ts = None

    @property
    def state(self):
        return "Ready" if self._calibrated() else "Calibrating"

    @property
    def sample_rate_hz(self):
        if len(self.buffer) < 2:
            return None
        span = self.buffer[-1][0] - self.buffer[0][0]
        return 1000.0 * (len(self.buffer) - 1) / span

    def _span_ms(self):
        """Duration covered by the buffer, counting one sample period per sample."""
        n = len(self.buffer)
        if n < 2:
            return 0.0
        return (self.buffer[-1][0] - self.buffer[0][0]) * n / (n - 1)

    def _calibrated(self):
        return self._span_ms() >= self.config.calibration_seconds * 1000.0 - 1e-6

    def reset_calibration(self):
        self.buffer.clear()
        self.filter.reset()
        self.smoothed = None
        self._last_accepted_ts = None
        self.calibration_resets += 1

    def spatial_signal(self, frame):
        plane = extract_channel(frame, self.config.channel)
        if self.roi is not None:
            plane = crop(plane, self.roi)
        level = min(self.config.analysis_level, max_levels(plane.shape[1], plane.shape[0]))
        return float(gaussian_pyramid(plane, level)[-1].mean())

    def _gate(self, frame, detections):
        if self.gate is None:
            return True
        if detections is None:
            detections = self.detector.detect(frame) if self.detector is not None else []
        elif isinstance(detections, (Detection, Roi, tuple)):
            detections = [detections if isinstance(detections, Detection) else Detection(detections)]
        accepted, best = gate(self.gate, detections)
        self.last_detection = best
        return accepted

    def _check_time(self, ts):
        if self._last_ts is not None and ts <= self._last_ts:
            raise NonMonotonicTimestamp(f"timestamp {ts} ms does not follow {self._last_ts} ms")
        self._last_ts = ts
        self.frames_seen += 1

    def push_frame(self, frame, detections=None):
        """Process one frame; returns the current reading (None before any)."""
        self._check_time(frame.timestamp_ms)
        if not self._gate(frame, detections):
            self.frames_gated_out += 1
            return self.last_reading
        return self._accept(frame.timestamp_ms, self.spatial_signal(frame))

    def push_signal(self, ts, value):
        """Feed a precomputed spatial-mean sample, bypassing the gate."""
        self._check_time(ts)
        return self._accept(ts, float(value))

    def _accept(self, ts, value):
        last = self._last_accepted_ts
        if last is not None and ts - last > self.config.max_gap_seconds * 1000.0:
            self.reset_calibration()
            last = None
        dt = (ts - last) / 1000.0 if last is not None else 1.0
        filtered = self.filter.update(value, dt)
        self._last_accepted_ts = ts
        self.buffer.append((ts, float(filtered)))
        self._trim()
        self.last_reading = self._read(ts)
        return self.last_reading

    def _trim(self):
        limit = self.config.window_seconds * 1000.0 + 1e-6
        while len(self.buffer) > 2 and self._span_ms() > limit:
            self.buffer.popleft()

    def _read(self, ts):
        n = len(self.buffer)
        if not self._calibrated():
            return BpmReading(ts, None, 0.0, n, calibrating=True)
        fs = self.sample_rate_hz
        if fs < self.config.min_fps * (1 - 1e-9):
            return BpmReading(ts, None, 0.0, n, calibrating=True, low_fps=True)
        series = TimeSeries(fs, [v for _, v in self.buffer])
        try:
            bpm, confidence = estimate_bpm(series, self.config.band)
        except NoInBandPeak:
            return BpmReading(ts, None, 0.0, n, calibrating=False)
        if confidence < self.config.confidence_threshold:
            return BpmReading(ts, None, confidence, n, calibrating=False)
        self.smoothed = smooth(self.smoothed, bpm, self.config.smoothing_factor)
        return BpmReading(ts, self.smoothed, confidence, n, calibrating=False)


def push_frame(session, frame, detection=None):
    return session.push_frame(frame, detection)
