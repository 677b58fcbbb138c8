"""Session management and the frame-batch consumer.

Ingestion (``submit_batch``) validates a batch and publishes it to the
session's topic.  Consumers take batches from the broker, run every frame
through the session's pulse estimator (and every ``fer_every``-th frame
through the expression classifier), then publish an immutable result
snapshot.  ``poll_results`` only reads that snapshot and a few counters, so
it never waits on pipeline work.
"""

import base64
import binascii
import logging
import secrets
import threading
import time
from dataclasses import dataclass, field
from typing import Optional

from ..errors import MalformedBatch, TooManySessions, UnknownSession
from ..facegate import GateConfig, make_detector
from ..fer.model import classify
from ..frame import Frame, Roi, crop, resize_bilinear, to_grayscale
from ..pulse import PulseConfig, PulseSession
from ..temporal import BandConfig
from .broker import Broker

log = logging.getLogger(__name__)

MAX_BATCH_FRAMES = 120
DEFAULT_MAX_SESSIONS = 64
DEFAULT_QUEUE_CAPACITY = 8
DEFAULT_FER_EVERY = 10


@dataclass(frozen=True)
class FrameBatch:
    session_id: str
    width: int
    height: int
    fps_hint: float
    frame_count: int
    timestamps_ms: tuple
    payload: bytes

    @classmethod
    def from_json(cls, body, session_id=None):
        """Validate a decoded request body; raises MalformedBatch naming the field."""
        if not isinstance(body, dict):
            raise MalformedBatch("body", "expected a JSON object")
        sid = body.get("session_id", session_id)
        if session_id is not None and sid != session_id:
            raise MalformedBatch("session_id", "does not match the request path")
        width = _int_field(body, "width", 8)
        height = _int_field(body, "height", 8)
        fps_hint = body.get("fps_hint", 0)
        if not isinstance(fps_hint, (int, float)) or isinstance(fps_hint, bool) or fps_hint < 0:
            raise MalformedBatch("fps_hint", "must be a non-negative number")
        count = _int_field(body, "frame_count", 1)
        if count > MAX_BATCH_FRAMES:
            raise MalformedBatch("frame_count", f"at most {MAX_BATCH_FRAMES} frames per batch")
        ts = body.get("timestamps_ms")
        if not isinstance(ts, list) or len(ts) != count:
            raise MalformedBatch("timestamps_ms", f"expected a list of {count} timestamps")
        if not all(isinstance(t, int) and not isinstance(t, bool) and t >= 0 for t in ts):
            raise MalformedBatch("timestamps_ms", "timestamps must be non-negative integers")
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise MalformedBatch("timestamps_ms", "timestamps must strictly increase")
        raw = body.get("payload_b64")
        if not isinstance(raw, str):
            raise MalformedBatch("payload_b64", "missing base64 payload")
        try:
            payload = base64.b64decode(raw, validate=True)
        except (binascii.Error, ValueError):
            raise MalformedBatch("payload_b64", "not valid base64") from None
        expected = count * width * height * 3
        if len(payload) != expected:
            raise MalformedBatch(
                "payload", f"{len(payload)} bytes, expected {expected} "
                f"({count} frames of {width}x{height} RGB)"
            )
        return cls(sid, width, height, float(fps_hint), count, tuple(ts), payload)

    def to_json(self):
        return {
            "session_id": self.session_id,
            "width": self.width,
            "height": self.height,
            "fps_hint": self.fps_hint,
            "frame_count": self.frame_count,
            "timestamps_ms": list(self.timestamps_ms),
            "payload_b64": base64.b64encode(self.payload).decode("ascii"),
        }

    @classmethod
    def from_frames(cls, session_id, frames, fps_hint=0.0):
        frames = list(frames)
        f0 = frames[0]
        return cls(session_id, f0.width, f0.height, float(fps_hint), len(frames),
                   tuple(f.timestamp_ms for f in frames),
                   b"".join(f.to_bytes() for f in frames))

    def frames(self):
        size = self.width * self.height * 3
        for i, ts in enumerate(self.timestamps_ms):
            yield Frame.from_bytes(self.payload[i * size:(i + 1) * size],
                                   self.width, self.height, ts)


def _int_field(body, name, minimum):
    value = body.get(name)
    if not isinstance(value, int) or isinstance(value, bool) or value < minimum:
        raise MalformedBatch(name, f"must be an integer >= {minimum}")
    return value


@dataclass
class SessionOptions:
    pulse: PulseConfig = field(default_factory=PulseConfig)
    roi: Optional[Roi] = None
    detector: str = "none"
    iou_threshold: float = 0.5
    fer_every: int = DEFAULT_FER_EVERY

    @classmethod
    def from_overrides(cls, overrides):
        """Build from the optional JSON body of a create request."""
        o = dict(overrides or {})
        pulse_keys = ("calibration_seconds", "window_seconds", "min_fps",
                      "smoothing_factor", "pyramid_levels", "analysis_level", "channel")
        pulse_kw = {k: o.pop(k) for k in pulse_keys if k in o}
        band = o.pop("band", None)
        alpha = o.pop("alpha", None)
        if band is not None or alpha is not None:
            lo, hi = (float(v) for v in (band or "0.4:4.0").split(":"))
            pulse_kw["band"] = BandConfig(lo, hi, **({"alpha": float(alpha)} if alpha is not None else {}))
        roi = o.pop("roi", None)
        if isinstance(roi, str):
            roi = Roi.parse(roi)
        elif roi is not None:
            roi = Roi(*roi)
        opts = cls(
            pulse=PulseConfig(**pulse_kw),
            roi=roi,
            detector=o.pop("detector", "none"),
            iou_threshold=float(o.pop("iou_threshold", 0.5)),
            fer_every=int(o.pop("fer_every", DEFAULT_FER_EVERY)),
        )
        if o:
            raise ValueError(f"unknown session options: {sorted(o)}")
        if opts.detector not in ("none", "static", "motion"):
            raise ValueError(f"unknown detector {opts.detector!r}")
        if opts.detector != "none" and opts.roi is None:
            raise ValueError("gating needs an analysis roi")
        if opts.fer_every < 1:
            raise ValueError("fer_every must be at least 1")
        return opts

    def make_pulse_session(self):
        gate_cfg = None
        detector = None
        if self.detector != "none":
            gate_cfg = GateConfig(self.roi, self.iou_threshold)
            detector = make_detector(self.detector, self.roi)
        return PulseSession(self.pulse, roi=self.roi, gate_config=gate_cfg, detector=detector)


@dataclass
class SessionRecord:
    session_id: str
    created_at: float
    options: SessionOptions
    pulse: PulseSession
    frames_received: int = 0
    frames_dropped: int = 0
    frames_consumed: int = 0
    frames_queued: int = 0
    last_submitted_ts: Optional[int] = None
    bpm_sum: float = 0.0
    bpm_count: int = 0
    closed: bool = False
    snapshot: dict = field(default_factory=dict)
    lock: threading.Lock = field(default_factory=threading.Lock)


def empty_snapshot():
    return {
        "calibrating": True,
        "bpm": None,
        "confidence": 0.0,
        "emotions": None,
        "detection": None,
        "last_error": None,
    }


class StreamService:
    """Frame-batch ingestion, per-session pipelines and result polling.

    Call :meth:`start` to run consumer threads, or :meth:`drain` to process
    everything queued on the calling thread (deterministic, for tests and
    offline use).  Nothing is persisted: a new instance starts empty.
    """

    def __init__(self, model=None, max_sessions=DEFAULT_MAX_SESSIONS,
                 queue_capacity=DEFAULT_QUEUE_CAPACITY, max_queued=None,
                 default_options=None):
        self.model = model
        self.max_sessions = max_sessions
        self.broker = Broker(queue_capacity, max_total=max_queued)
        self.default_options = default_options or {}
        self._sessions = {}
        self._lock = threading.Lock()
        self._threads = []

    # --- session lifecycle -------------------------------------------------

    def create_session(self, overrides=None):
        merged = {**self.default_options, **(overrides or {})}
        options = SessionOptions.from_overrides(merged)
        with self._lock:
            if len(self._sessions) >= self.max_sessions:
                raise TooManySessions(f"server is at its cap of {self.max_sessions} sessions")
            sid = secrets.token_hex(8)
            while sid in self._sessions:
                sid = secrets.token_hex(8)
            record = SessionRecord(sid, time.time(), options, options.make_pulse_session(),
                                   snapshot=empty_snapshot())
            self._sessions[sid] = record
        self.broker.create_topic(sid)
        return sid

    def _record(self, sid):
        try:
            return self._sessions[sid]
        except KeyError:
            raise UnknownSession(f"unknown session {sid!r}") from None

    @property
    def session_count(self):
        return len(self._sessions)

    def close_session(self, sid):
        with self._lock:
            record = self._record(sid)
            del self._sessions[sid]
        record.closed = True
        self.broker.remove_topic(sid)
        with record.lock:
            mean = record.bpm_sum / record.bpm_count if record.bpm_count else None
            return {"session_id": sid, "mean_bpm": mean, "readings": record.bpm_count,
                    "frames_received": record.frames_received,
                    "frames_dropped": record.frames_dropped}

    # --- ingestion ---------------------------------------------------------

    def submit_batch(self, batch):
        if isinstance(batch, dict):
            batch = FrameBatch.from_json(batch)
        record = self._record(batch.session_id)
        with record.lock:
            if record.last_submitted_ts is not None and batch.timestamps_ms[0] <= record.last_submitted_ts:
                raise MalformedBatch(
                    "timestamps_ms",
                    f"first timestamp {batch.timestamps_ms[0]} does not follow "
                    f"previous batch ending at {record.last_submitted_ts}",
                )
            evicted, depth = self.broker.publish(batch.session_id, batch)
            dropped = sum(b.frame_count for b in evicted)
            record.last_submitted_ts = batch.timestamps_ms[-1]
            record.frames_received += batch.frame_count
            record.frames_dropped += dropped
            record.frames_queued += batch.frame_count - dropped
        return {"accepted": batch.frame_count, "dropped": dropped, "queue_depth": depth}

    # --- results -----------------------------------------------------------

    def poll_results(self, sid):
        record = self._record(sid)
        snap = dict(record.snapshot)
        with record.lock:
            snap.update(
                session_id=sid,
                frames_received=record.frames_received,
                frames_dropped=record.frames_dropped,
                frames_consumed=record.frames_consumed,
                frames_queued=record.frames_queued,
                queue_depth=self.broker.depth(sid),
            )
        return snap

    # --- consumption -------------------------------------------------------

    def process_batch(self, record, batch):
        """Run one batch through the session's pipelines and publish a snapshot."""
        pulse = record.pulse
        snap = dict(record.snapshot)
        consumed = 0
        for frame in batch.frames():
            consumed += 1
            try:
                reading = pulse.push_frame(frame)
                if reading is not None:
                    snap["calibrating"] = reading.calibrating
                    snap["bpm"] = reading.bpm
                    snap["confidence"] = reading.confidence
                    if reading.bpm is not None and not reading.calibrating:
                        with record.lock:
                            record.bpm_sum += reading.bpm
                            record.bpm_count += 1
                best = pulse.last_detection
                snap["detection"] = best.to_dict() if best is not None else None
                if self.model is not None and pulse.frames_seen % record.options.fer_every == 0:
                    snap["emotions"] = self.classify_face(frame, record).to_list()
            except Exception as exc:  # recorded on the session, never fatal to the loop
                log.exception("session %s: frame %d failed", record.session_id, frame.timestamp_ms)
                snap["last_error"] = f"{type(exc).__name__}: {exc}"
        with record.lock:
            record.frames_consumed += consumed
        record.snapshot = snap

    def classify_face(self, frame, record):
        region = record.pulse.last_detection.roi if record.pulse.last_detection else (
            record.options.roi or Roi(0, 0, frame.width, frame.height)
        )
        face = resize_bilinear(crop(to_grayscale(frame), region), 48, 48)
        return classify(self.model, face)

    def _handle(self, topic, batch):
        try:
            record = self._sessions.get(topic)
            if record is None or record.closed:
                return
            with record.lock:
                record.frames_queued -= batch.frame_count
            self.process_batch(record, batch)
        finally:
            self.broker.release(topic)

    def drain(self):
        """Process every queued batch on the calling thread; returns batches handled."""
        handled = 0
        while True:
            item = self.broker.take(timeout=0)
            if item is None:
                return handled
            self._handle(*item)
            handled += 1

    def _worker(self):
        while True:
            item = self.broker.take()
            if item is None:
                return
            self._handle(*item)

    def start(self, workers=1):
        for i in range(workers):
            t = threading.Thread(target=self._worker, name=f"consumer-{i}", daemon=True)
            t.start()
            self._threads.append(t)

    def stop(self, timeout=5.0):
        self.broker.close()
        for t in self._threads:
            t.join(timeout)
        self._threads = []


def encode_frames(frames):
    """Base64 payload for a list of frames (client-side helper)."""
    return base64.b64encode(b"".join(f.to_bytes() for f in frames)).decode("ascii")

