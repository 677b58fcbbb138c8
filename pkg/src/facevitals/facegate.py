"""Face-presence gating by intersection-over-union.

The analysis region acts as ground truth and a detector's box as the
prediction; a frame is used for pulse estimation only when their overlap
ratio is strictly greater than the configured threshold.
"""

import math
from collections import deque
from dataclasses import dataclass
from typing import Optional, Protocol

import numpy as np

from .errors import DegenerateRoi
from .frame import Roi, to_grayscale


@dataclass(frozen=True)
class Detection:
    roi: Roi
    score: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "roi", Roi(*self.roi))
        if self.roi.w <= 0 or self.roi.h <= 0:
            raise DegenerateRoi(f"detection {tuple(self.roi)} has no area")
        if not math.isfinite(self.score):
            raise ValueError("detection score must be finite")

    def to_dict(self):
        return {"x": self.roi.x, "y": self.roi.y, "w": self.roi.w,
                "h": self.roi.h, "score": self.score}


@dataclass(frozen=True)
class GateConfig:
    analysis_roi: Roi
    iou_threshold: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "analysis_roi", Roi(*self.analysis_roi))
        if not 0.0 <= self.iou_threshold <= 1.0:
            raise ValueError(f"iou threshold must be in [0, 1], got {self.iou_threshold}")


def iou(a, b):
    a, b = Roi(*a), Roi(*b)
    if a.w <= 0 or a.h <= 0 or b.w <= 0 or b.h <= 0:
        raise DegenerateRoi(f"iou of zero-area rectangle: {tuple(a)}, {tuple(b)}")
    iw = min(a.x + a.w, b.x + b.w) - max(a.x, b.x)
    ih = min(a.y + a.h, b.y + b.h) - max(a.y, b.y)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (a.w * a.h + b.w * b.h - inter)


def gate(cfg, detections):
    """Return ``(accepted, best)`` for a list of detections.

    ``best`` is the highest-overlap detection (ties: higher score, then lower
    x, then lower y) and is reported even when the frame is rejected.
    """
    if not detections:
        return False, None
    scored = [(iou(cfg.analysis_roi, d.roi), d) for d in detections]
    best_iou, best = min(
        scored, key=lambda t: (-t[0], -t[1].score, t[1].roi.x, t[1].roi.y)
    )
    return best_iou > cfg.iou_threshold, best


class Detector(Protocol):
    def detect(self, frame) -> list:
        ...


class StaticDetector:
    """Always reports one fixed box (clamped to the frame) with score 1."""

    def __init__(self, roi):
        self.roi = Roi(*roi)

    def detect(self, frame):
        r = self.roi.clamp(frame.width, frame.height)
        if r.w <= 0 or r.h <= 0:
            return []
        return [Detection(r, 1.0)]


def static_detector(roi):
    return StaticDetector(roi)


class MotionDetector:
    """Bounding box of pixels that changed over a short history of frames.

    A pixel is active when its luma differs from any of the last ``history``
    frames by more than ``noise_floor`` gray levels.  Isolated active pixels
    (fewer than 5 active in their 3x3 neighbourhood) are discarded as sensor
    noise.  The surviving box is grown by ``expand`` (10 % of each side by
    default, split evenly) and clamped to the frame.
    """

    def __init__(self, history=8, noise_floor=8.0, expand=0.10):
        if history < 1:
            raise ValueError("history must hold at least one frame")
        self.history = history
        self.noise_floor = noise_floor
        self.expand = expand
        self._past = deque(maxlen=history)

    def reset(self):
        self._past.clear()

    def detect(self, frame):
        gray = to_grayscale(frame)
        past = list(self._past)
        self._past.append(gray)
        if not past or past[-1].shape != gray.shape:
            if past:
                self._past.clear()
                self._past.append(gray)
            return []
        diff = np.max(np.abs(np.stack(past) - gray), axis=0)
        active = diff > self.noise_floor
        mask = _neighbour_count(active) >= 5
        if not mask.any():
            return []
        rows = np.flatnonzero(mask.any(axis=1))
        cols = np.flatnonzero(mask.any(axis=0))
        x0, x1 = cols[0], cols[-1] + 1
        y0, y1 = rows[0], rows[-1] + 1
        gx = (x1 - x0) * self.expand / 2.0
        gy = (y1 - y0) * self.expand / 2.0
        box = Roi(
            math.floor(x0 - gx),
            math.floor(y0 - gy),
            math.ceil(x1 + gx) - math.floor(x0 - gx),
            math.ceil(y1 + gy) - math.floor(y0 - gy),
        ).clamp(frame.width, frame.height)
        return [Detection(box, float(mask.mean()))]


def motion_detector(history=8, noise_floor=8.0):
    return MotionDetector(history=history, noise_floor=noise_floor)


def _neighbour_count(mask):
    m = np.pad(mask.astype(np.int16), 1)
    h, w = mask.shape
    return sum(m[dy:dy + h, dx:dx + w] for dy in range(3) for dx in range(3))


def make_detector(kind, roi: Optional[Roi] = None):
    """Detector by CLI/service name: ``none``, ``static`` or ``motion``."""
    if kind in (None, "none"):
        return None
    if kind == "static":
        if roi is None:
            raise ValueError("static detector needs a roi")
        return StaticDetector(roi)
    if kind == "motion":
        return MotionDetector()
    raise ValueError(f"unknown detector {kind!r}")
