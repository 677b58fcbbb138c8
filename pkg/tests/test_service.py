import threading
import time

import numpy as np
import pytest

from facevitals import synth
from facevitals.errors import (MalformedBatch, QueueFull, TooManySessions,
                               UnknownSession)
from facevitals.frame import Roi
from facevitals.service import Broker, FrameBatch, SessionOptions, StreamService
from facevitals.service.core import encode_frames

SMALL = dict(width=64, height=48, face_rect=Roi(16, 12, 32, 24), duration=12.0)
ROI = "16,12,32,24"


def batches(frames, size=30):
    return [frames[i:i + size] for i in range(0, len(frames), size)]


@pytest.fixture(scope="module")
def small_frames():
    return list(synth.generate_pulse_video(synth.PulseScene(pulse_bpm=72.0, seed=7, **SMALL)))


@pytest.fixture(scope="module")
def other_frames():
    return list(synth.generate_pulse_video(synth.PulseScene(pulse_bpm=110.0, seed=8, **SMALL)))


# --- broker ----------------------------------------------------------------

def test_broker_drop_oldest():
    b = Broker(capacity=2)
    b.create_topic("a")
    assert b.publish("a", 1) == ([], 1)
    b.publish("a", 2)
    evicted, depth = b.publish("a", 3)
    assert evicted == [1] and depth == 2
    assert b.take(timeout=0) == ("a", 2)


def test_broker_leases_one_message_per_topic():
    b = Broker(capacity=4)
    for t in ("a", "b"):
        b.create_topic(t)
        b.publish(t, t + "1")
        b.publish(t, t + "2")
    first = b.take(timeout=0)
    second = b.take(timeout=0)
    assert {first[0], second[0]} == {"a", "b"}
    assert b.take(timeout=0) is None  # both leased
    b.release(first[0])
    assert b.take(timeout=0) == (first[0], first[0] + "2")


def test_broker_global_cap():
    b = Broker(capacity=4, max_total=2)
    for t in "abc":
        b.create_topic(t)
    b.publish("a", 1)
    b.publish("b", 1)
    with pytest.raises(QueueFull):
        b.publish("c", 1)
    assert b.publish("a", 2)[0] == [1]


def test_broker_close_wakes_consumers():
    b = Broker()
    out = []
    t = threading.Thread(target=lambda: out.append(b.take()))
    t.start()
    time.sleep(0.05)
    b.close()
    t.join(1.0)
    assert out == [None]


# --- batches ---------------------------------------------------------------

def test_batch_json_round_trip(small_frames):
    batch = FrameBatch.from_frames("s", small_frames[:3], 20.0)
    again = FrameBatch.from_json(batch.to_json())
    assert again == batch
    assert list(again.frames()) == small_frames[:3]


@pytest.mark.parametrize("field,value", [
    ("width", 0), ("height", "x"), ("frame_count", 121), ("fps_hint", -1),
    ("timestamps_ms", [0, 0, 1]), ("payload_b64", "!!notbase64"),
])
def test_malformed_batch_names_field(small_frames, field, value):
    body = FrameBatch.from_frames("s", small_frames[:3]).to_json()
    body[field] = value
    with pytest.raises(MalformedBatch) as exc:
        FrameBatch.from_json(body)
    assert exc.value.field in (field, "payload", "timestamps_ms")


def test_payload_size_checked(small_frames):
    body = FrameBatch.from_frames("s", small_frames[:2]).to_json()
    body["payload_b64"] = encode_frames(small_frames[:1])
    with pytest.raises(MalformedBatch) as exc:
        FrameBatch.from_json(body)
    assert exc.value.field == "payload"


def test_session_options():
    o = SessionOptions.from_overrides({"roi": ROI, "window_seconds": 8, "band": "0.5:3"})
    assert o.roi == Roi(16, 12, 32, 24) and o.pulse.window_seconds == 8
    assert o.pulse.band.f_lo == 0.5
    with pytest.raises(ValueError):
        SessionOptions.from_overrides({"bogus": 1})
    with pytest.raises(ValueError):
        SessionOptions.from_overrides({"detector": "static"})


# --- service ---------------------------------------------------------------

def feed(service, sid, frames, drain=True):
    acks = []
    for chunk in batches(frames):
        acks.append(service.submit_batch(FrameBatch.from_frames(sid, chunk, 20.0)))
        if drain:
            service.drain()
    return acks


def test_single_session_recovers_bpm(small_frames):
    svc = StreamService()
    sid = svc.create_session({"roi": ROI})
    feed(svc, sid, small_frames)
    res = svc.poll_results(sid)
    assert abs(res["bpm"] - 72.0) <= 3.0 and res["calibrating"] is False
    summary = svc.close_session(sid)
    assert summary["frames_received"] == len(small_frames) and summary["readings"] > 0
    with pytest.raises(UnknownSession):
        svc.poll_results(sid)


def test_interleaved_sessions_match_isolated(small_frames, other_frames):
    def isolated(frames):
        svc = StreamService()
        sid = svc.create_session({"roi": ROI})
        feed(svc, sid, frames)
        r = svc.poll_results(sid)
        return r["bpm"], r["confidence"]

    svc = StreamService()
    a, b = svc.create_session({"roi": ROI}), svc.create_session({"roi": ROI})
    for ca, cb in zip(batches(small_frames), batches(other_frames)):
        svc.submit_batch(FrameBatch.from_frames(a, ca))
        svc.submit_batch(FrameBatch.from_frames(b, cb))
        svc.drain()
    ra, rb = svc.poll_results(a), svc.poll_results(b)
    assert (ra["bpm"], ra["confidence"]) == isolated(small_frames)
    assert (rb["bpm"], rb["confidence"]) == isolated(other_frames)


def test_overflow_drops_oldest_and_counts(small_frames):
    svc = StreamService(queue_capacity=2)
    sid = svc.create_session({"roi": ROI})
    acks = feed(svc, sid, small_frames[:150], drain=False)  # five batches, no consumer
    assert [a["dropped"] for a in acks] == [0, 0, 30, 30, 30]
    assert [a["queue_depth"] for a in acks] == [1, 2, 2, 2, 2]
    res = svc.poll_results(sid)
    assert res["frames_received"] - res["frames_dropped"] == res["frames_queued"] == 60
    svc.drain()
    res = svc.poll_results(sid)
    assert res["frames_consumed"] == res["frames_received"] - res["frames_dropped"]
    assert res["frames_queued"] == 0


def test_cross_batch_timestamps_must_increase(small_frames):
    svc = StreamService()
    sid = svc.create_session()
    svc.submit_batch(FrameBatch.from_frames(sid, small_frames[10:20]))
    with pytest.raises(MalformedBatch):
        svc.submit_batch(FrameBatch.from_frames(sid, small_frames[:10]))


def test_session_cap():
    svc = StreamService(max_sessions=1)
    svc.create_session()
    with pytest.raises(TooManySessions):
        svc.create_session()


def test_unknown_session(small_frames):
    with pytest.raises(UnknownSession):
        StreamService().submit_batch(FrameBatch.from_frames("nope", small_frames[:1]))


def test_emotions_with_model(small_frames):
    from facevitals.fer.model import reference_model
    svc = StreamService(model=reference_model(0))
    sid = svc.create_session({"fer_every": 5})
    feed(svc, sid, small_frames[:10])
    emo = svc.poll_results(sid)["emotions"]
    assert len(emo) == 7 and sum(emo) == pytest.approx(1.0)


def test_threaded_consumers_match_drain(small_frames):
    svc = StreamService(queue_capacity=64)
    svc.start(workers=3)
    try:
        sid = svc.create_session({"roi": ROI})
        feed(svc, sid, small_frames, drain=False)
        deadline = time.time() + 20
        while svc.poll_results(sid)["frames_consumed"] < len(small_frames) and time.time() < deadline:
            time.sleep(0.02)
        threaded = svc.poll_results(sid)["bpm"]
    finally:
        svc.stop()
    ref = StreamService()
    rid = ref.create_session({"roi": ROI})
    feed(ref, rid, small_frames)
    assert threaded == ref.poll_results(rid)["bpm"]


def test_default_cap_is_64():
    svc = StreamService()
    for _ in range(64):
        svc.create_session()
    with pytest.raises(TooManySessions):
        svc.create_session()
