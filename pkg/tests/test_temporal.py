import math

import numpy as np
import pytest

from facevitals import temporal
from facevitals.errors import (LengthMismatch, LevelOutOfRange, NyquistViolation,
                               TooShort)
from facevitals.frame import TimeSeries
from facevitals.temporal import BandConfig


def tone(freq, fs, n, amp=1.0):
    t = np.arange(n) / fs
    return amp * np.sin(2 * math.pi * freq * t)


def test_on_bin_in_band_tone_passes():
    fs, n = 20.0, 200
    x = tone(1.2, fs, n)  # bin 12
    y = temporal.ideal_bandpass_array(x, fs, 0.4, 4.0)
    assert np.max(np.abs(y - x)) < 1e-9


def test_out_of_band_tone_removed():
    fs, n = 20.0, 200
    y = temporal.ideal_bandpass_array(tone(6.0, fs, n) + 5.0, fs, 0.4, 4.0)
    assert np.max(np.abs(y)) < 1e-9


def test_idempotent(rng):
    x = rng.standard_normal(300)
    once = temporal.ideal_bandpass_array(x, 30.0, 0.4, 4.0)
    twice = temporal.ideal_bandpass_array(once, 30.0, 0.4, 4.0)
    assert np.max(np.abs(twice - once)) < 1e-9


def test_band_edges_inclusive():
    mask = temporal.bandpass_mask(100, 10.0, 0.4, 4.0)
    freqs = np.fft.fftfreq(100, 0.1)
    assert mask[np.isclose(np.abs(freqs), 0.4)].all()
    assert mask[np.isclose(np.abs(freqs), 4.0)].all()


def test_errors():
    with pytest.raises(TooShort):
        temporal.ideal_bandpass_array(np.zeros(7), 20.0, 0.4, 4.0)
    with pytest.raises(NyquistViolation):
        temporal.ideal_bandpass_array(np.zeros(64), 6.0, 0.4, 4.0)
    with pytest.raises(ValueError):
        BandConfig(2.0, 1.0)


def test_parse_band():
    cfg = BandConfig.parse_band("0.5:3.0", alpha=10)
    assert (cfg.f_lo, cfg.f_hi, cfg.alpha) == (0.5, 3.0, 10)
    assert cfg.band_text == "0.5:3.0"


def test_streaming_tracks_in_band_and_rejects_dc():
    fs = 30.0
    bp = temporal.StreamingBandpass(0.4, 4.0)
    x = tone(1.2, fs, 900) + 100.0
    y = np.array([bp.update(v, 1 / fs) for v in x])
    tail = y[300:]
    assert abs(tail.mean()) < 0.05
    assert 0.5 < tail.std() * math.sqrt(2) < 1.1


def test_streaming_first_sample_is_zero_and_reset():
    bp = temporal.StreamingBandpass(0.4, 4.0)
    assert bp.update(50.0, 0.05) == 0.0 and bp.initialized
    bp.reset()
    assert not bp.initialized


def test_attenuation_and_amplify():
    cfg = BandConfig(alpha=50.0)
    assert temporal.attenuation(cfg, 0) == 0.5
    with pytest.raises(LevelOutOfRange):
        temporal.attenuation(cfg, 7)
    s = TimeSeries(20.0, np.ones(10))
    assert np.allclose(temporal.amplify(s, cfg, 1).values, 50.0)


def test_alpha_zero_is_identity(rng):
    cfg = BandConfig(alpha=0.0)
    orig = TimeSeries(20.0, rng.random(20))
    out = temporal.magnify_and_recombine(orig, TimeSeries(20.0, rng.random(20)), cfg, 1)
    assert np.array_equal(out.values, orig.values)
    with pytest.raises(LengthMismatch):
        temporal.magnify_and_recombine(orig, TimeSeries(20.0, orig.values[:5]), cfg, 1)


def _flat_video(t_count, fps, bpm, amp, h=72, w=96, noise=0.5, seed=0):
    rng = np.random.default_rng(seed)
    t = np.arange(t_count) / fps
    video = np.full((t_count, h, w, 3), 128.0)
    face = (slice(18, 54), slice(24, 72))
    video[:, face[0], face[1], 1] += amp * np.sin(2 * math.pi * bpm / 60 * t)[:, None, None]
    video += noise * rng.standard_normal(video.shape)
    return np.clip(np.rint(video), 0, 255).astype(np.uint8)


def _green_band_power(video, fps, bpm):
    g = video[:, 18:54, 24:72, 1].astype(float).mean(axis=(1, 2))
    g -= g.mean()
    power = np.abs(np.fft.rfft(g)) ** 2
    k = int(round(bpm / 60 * len(g) / fps))
    return power[k]


def test_magnify_boosts_in_band_pulse():
    fps = 20.0
    video = _flat_video(200, fps, 72.0, 0.6)
    out = temporal.magnify_frames(video, fps, BandConfig(alpha=10.0), levels=2)
    ratio = _green_band_power(out, fps, 72.0) / _green_band_power(video, fps, 72.0)
    assert ratio > 20.0


def test_magnify_leaves_out_of_band_alone():
    fps = 20.0
    video = _flat_video(200, fps, 12.0, 20.0)
    out = temporal.magnify_frames(video, fps, BandConfig(alpha=50.0), levels=2)
    ratio = _green_band_power(out, fps, 12.0) / _green_band_power(video, fps, 12.0)
    assert ratio <= 1.1
