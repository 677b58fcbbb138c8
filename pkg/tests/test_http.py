import json
import urllib.error
import urllib.request

import pytest

from facevitals import synth
from facevitals.frame import Roi
from facevitals.service import FrameBatch, StreamService, serve, shutdown_server


@pytest.fixture
def server():
    srv = serve(StreamService(max_sessions=2), port=0)
    yield f"http://127.0.0.1:{srv.server_address[1]}"
    shutdown_server(srv)


def call(method, url, body=None):
    data = None if body is None else json.dumps(body).encode()
    req = urllib.request.Request(url, data=data, method=method,
                                 headers={"Content-Type": "application/json"})
    try:
        with urllib.request.urlopen(req, timeout=10) as resp:
            return resp.status, json.loads(resp.read())
    except urllib.error.HTTPError as err:
        return err.code, json.loads(err.read())


def test_lifecycle(server):
    frames = list(synth.generate_pulse_video(synth.PulseScene(
        width=32, height=24, face_rect=Roi(8, 6, 16, 12), duration=1.0)))
    status, body = call("POST", server + "/v1/sessions", {"roi": "8,6,16,12"})
    assert status == 201
    sid = body["session_id"]
    batch = FrameBatch.from_frames(sid, frames).to_json()
    status, ack = call("POST", f"{server}/v1/sessions/{sid}/frames", batch)
    assert status == 200 and ack["accepted"] == 20
    status, res = call("GET", f"{server}/v1/sessions/{sid}/results")
    assert status == 200 and res["frames_received"] == 20
    status, summary = call("DELETE", f"{server}/v1/sessions/{sid}")
    assert status == 200 and summary["session_id"] == sid
    assert call("GET", f"{server}/v1/sessions/{sid}/results")[0] == 404


def test_errors(server):
    sid = call("POST", server + "/v1/sessions")[1]["session_id"]
    status, body = call("POST", f"{server}/v1/sessions/{sid}/frames", {"width": 0})
    assert status == 400 and body["field"] == "width"
    assert call("POST", server + "/v1/sessions/zzz/frames", {})[0] == 404
    assert call("POST", server + "/v1/sessions", {"bogus": 1})[0] == 400
    call("POST", server + "/v1/sessions")
    assert call("POST", server + "/v1/sessions")[0] == 503
    assert call("GET", server + "/nowhere")[0] == 404
