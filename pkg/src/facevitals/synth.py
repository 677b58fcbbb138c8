"""Deterministic synthetic scenes with known ground truth.

Pulse videos place a flat skin-colored rectangle on a background.  The
rectangle's green channel carries ``amplitude * sin(2 pi (bpm / 60) t)``;
the background may carry its own sinusoidal brightness flicker.  Per-pixel,
per-channel Gaussian noise comes from :mod:`facevitals.prng` (normal index
``frame * S + pixel * 3 + channel`` where ``S`` is ``width * height * 3``
rounded up to even), and values are
rounded half-to-even and clipped to 0..255.
"""

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import prng
from .frame import Frame, Roi
from .rvid import fps_to_mhz, frame_timestamp_ms

DEFAULT_SIZE = (320, 240)



def centered_roi(width, height, w, h):
    return Roi((width - w) // 2, (height - h) // 2, w, h)


@dataclass(frozen=True)
class PulseScene:
    fps: float = 20.0
    duration: float = 15.0
    width: int = DEFAULT_SIZE[0]
    height: int = DEFAULT_SIZE[1]
    face_rect: Roi = field(default_factory=lambda: centered_roi(*DEFAULT_SIZE, 100, 120))
    skin_base: tuple = (180, 120, 100)
    pulse_bpm: float = 72.0
    pulse_amplitude: float = 1.0
    noise_sigma: float = 2.0
    background: tuple = (70, 80, 90)
    bg_flicker_bpm: Optional[float] = None
    bg_flicker_amplitude: float = 0.0
    seed: int = 0
    # region a pulse pipeline should analyse; the face rect when unset
    analysis_roi: Optional[Roi] = None

    def __post_init__(self):
        object.__setattr__(self, "face_rect", Roi(*self.face_rect))
        if self.analysis_roi is not None:
            object.__setattr__(self, "analysis_roi", Roi(*self.analysis_roi))
        if self.fps <= 0 or self.duration <= 0:
            raise ValueError("fps and duration must be positive")
        if not 0 < self.pulse_bpm < self.fps * 30:
            raise ValueError(f"pulse_bpm must be in (0, {self.fps * 30}), got {self.pulse_bpm}")
        if self.pulse_amplitude < 0 or self.noise_sigma < 0 or self.bg_flicker_amplitude < 0:
            raise ValueError("amplitudes and noise must be non-negative")
        r = self.face_rect
        if r.w <= 0 or r.h <= 0 or r.x < 0 or r.y < 0 or r.x + r.w > self.width or r.y + r.h > self.height:
            raise ValueError(f"face rect {tuple(r)} must lie inside {self.width}x{self.height}")

    @property
    def frame_count(self):
        return int(round(self.duration * self.fps))

    @property
    def roi(self):
        return self.analysis_roi if self.analysis_roi is not None else self.face_rect

    def timestamp_ms(self, index):
        return frame_timestamp_ms(index, fps_to_mhz(self.fps))


def _base_image(scene):
    img = np.empty((scene.height, scene.width, 3))
    img[:] = scene.background
    r = scene.face_rect
    img[r.y:r.y + r.h, r.x:r.x + r.w] = scene.skin_base
    return img


def render_frame(scene, index, base=None):
    """Frame ``index`` of the scene; ``base`` caches the static image."""
    if base is None:
        base = _base_image(scene)
    t = scene.timestamp_ms(index) / 1000.0
    img = base.copy()
    if scene.bg_flicker_bpm and scene.bg_flicker_amplitude:
        flicker = scene.bg_flicker_amplitude * math.sin(2 * math.pi * scene.bg_flicker_bpm / 60.0 * t)
        img += flicker
        r = scene.face_rect
        img[r.y:r.y + r.h, r.x:r.x + r.w] -= flicker
    if scene.pulse_amplitude:
        r = scene.face_rect
        pulse = scene.pulse_amplitude * math.sin(2 * math.pi * scene.pulse_bpm / 60.0 * t)
        img[r.y:r.y + r.h, r.x:r.x + r.w, 1] += pulse
    if scene.noise_sigma:
        n = scene.width * scene.height * 3
        stride = n + n % 2
        img += scene.noise_sigma * prng.normal(scene.seed, index * stride, n).reshape(img.shape)
    pixels = np.clip(np.rint(img), 0, 255).astype(np.uint8)
    return Frame(scene.width, scene.height, scene.timestamp_ms(index), pixels)


def generate_pulse_video(scene):
    """Lazily yield every frame of the scene."""
    base = _base_image(scene)
    for i in range(scene.frame_count):
        yield render_frame(scene, i, base)


def distance_scene(face_area_ratio, face_bpm=72.0, bg_flicker_bpm=40.0,
                   face_amplitude=1.0, bg_amplitude=3.0, analysis_roi=None, **kwargs):
    """Scene where the face covers ``face_area_ratio`` of the analysis region.

    The analysis region defaults to the central half-width, half-height box.
    Pass ``bg_flicker_bpm=None`` (or amplitude 0) for a static background.
    """
    if not 0 < face_area_ratio <= 1:
        raise ValueError("face_area_ratio must be in (0, 1]")
    width = kwargs.get("width", DEFAULT_SIZE[0])
    height = kwargs.get("height", DEFAULT_SIZE[1])
    roi = Roi(*analysis_roi) if analysis_roi is not None else centered_roi(
        width, height, width // 2, height // 2
    )
    fw, fh = _face_size(roi.w, roi.h, face_area_ratio)
    face = Roi(roi.x + (roi.w - fw) // 2, roi.y + (roi.h - fh) // 2, fw, fh)
    return PulseScene(
        face_rect=face,
        pulse_bpm=face_bpm,
        pulse_amplitude=face_amplitude,
        bg_flicker_bpm=bg_flicker_bpm,
        bg_flicker_amplitude=bg_amplitude if bg_flicker_bpm else 0.0,
        analysis_roi=roi,
        **kwargs,
    )


def _face_size(w, h, ratio):
    # keep the region's aspect ratio, then pick the height that best matches the area
    target = ratio * w * h
    fw = max(1, min(w, int(round(w * math.sqrt(ratio)))))
    fh = max(1, min(h, int(round(target / fw))))
    return fw, fh


def generate_distance_scene(face_area_ratio, face_bpm=72.0, bg_flicker_bpm=40.0,
                            face_amplitude=1.0, bg_amplitude=3.0, **kwargs):
    scene = distance_scene(face_area_ratio, face_bpm, bg_flicker_bpm,
                           face_amplitude, bg_amplitude, **kwargs)
    return generate_pulse_video(scene)


@dataclass
class SyntheticFaceSet:
    faces: list
    labels: list

    def __len__(self):
        return len(self.labels)

    def __iter__(self):
        return iter(zip(self.faces, self.labels))


def class_pattern(label, size=48, phase=0.0):
    """Oriented grating for one class: angle ``label * pi / 7``."""
    theta = label * math.pi / 7.0
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    u = (xx - size / 2) * math.cos(theta) + (yy - size / 2) * math.sin(theta)
    return 128.0 + 70.0 * np.sin(2 * math.pi * u / 12.0 + phase)


def generate_face_set(n, seed=0, noise_sigma=20.0):
    """``n`` 48x48 planes, labels cycling 0..6 so classes stay balanced."""
    if n < 7:
        raise ValueError("need at least one face per class (n >= 7)")
    stream = prng.Stream(seed)
    faces, labels = [], []
    for i in range(n):
        label = i % 7
        phase = (stream.uniform(1)[0] - 0.5) * math.pi / 4
        plane = class_pattern(label, phase=phase) + noise_sigma * stream.normal(48 * 48).reshape(48, 48)
        faces.append(np.clip(plane, 0.0, 255.0))
        labels.append(label)
    return SyntheticFaceSet(faces, labels)


def with_seed(scene, seed):
    return replace(scene, seed=seed)
