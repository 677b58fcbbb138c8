import json
import os
import signal
import subprocess
import sys
import time

import numpy as np
import pytest

from facevitals.cli import main
from facevitals.rvid import read_rvid

SMALL = ["--size", "64x48", "--face", "16,12,32,24"]


def lines(capsys):
    return [json.loads(l) for l in capsys.readouterr().out.splitlines()]


@pytest.fixture(scope="module")
def video(tmp_path_factory):
    p = tmp_path_factory.mktemp("cli") / "v.rvid"
    assert main(["synth", "--duration", "10", "-o", str(p)] + SMALL) == 0
    return p


def test_synth_deterministic(tmp_path, video):
    other = tmp_path / "w.rvid"
    main(["synth", "--duration", "10", "-o", str(other)] + SMALL)
    assert other.read_bytes() == video.read_bytes()


def test_synth_usage_errors(tmp_path, capsys):
    assert main(["synth", "--bpm", "0", "-o", str(tmp_path / "x.rvid")]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["synth", "--size", "big", "-o", "x"])
    assert exc.value.code == 2


def test_analyze_trace(video, capsys, tmp_path):
    fig = tmp_path / "trace.png"
    assert main(["analyze", str(video), "--roi", "16,12,32,24", "--band", "0.4:4.0",
                 "--alpha", "50", "--levels", "3", "--iou", "0.5",
                 "--figure", str(fig)]) == 0
    out = lines(capsys)
    header, summary = out[0], out[-1]
    assert header["config"]["band"] == "0.4:4.0"
    assert header["config"]["alpha"] == 50 and header["config"]["levels"] == 3
    assert header["config"]["iou"] == 0.5
    readings = [r for r in out if r["type"] == "reading"]
    assert len(readings) == 200
    assert set(readings[0]) == {"type", "t_ms", "bpm", "confidence", "calibrating", "gated", "emotion"}
    assert abs(summary["mean_bpm"] - 72) <= 3
    assert fig.stat().st_size > 1000


def test_header_argv_round_trips(video, capsys):
    main(["analyze", str(video), "--window", "8", "--smoothing", "0.5"])
    first = lines(capsys)
    main(["analyze", str(video)] + first[0]["argv"])
    second = lines(capsys)
    assert first[0]["config"] == second[0]["config"]
    assert first[1:] == second[1:]


def test_analyze_report_every(video, capsys):
    main(["analyze", str(video), "--report-every", "2"])
    t = [r["t_ms"] for r in lines(capsys) if r["type"] == "reading"]
    assert t == [0, 2000, 4000, 6000, 8000]


def test_analyze_gating(video, capsys):
    main(["analyze", str(video), "--roi", "0,0,10,10", "--detector", "static", "--iou", "0.5"])
    out = lines(capsys)
    assert out[-1]["gated"] == 0  # the static detector reports the roi itself
    assert main(["analyze", str(video), "--detector", "static"]) == 2


def test_analyze_with_model(video, tmp_path, capsys):
    model = tmp_path / "m.ferw"
    assert main(["fer", "gen-weights", "-o", str(model)]) == 0
    main(["analyze", str(video), "--model", str(model), "--fer-every", "50"])
    emotions = [r["emotion"] for r in lines(capsys) if r["type"] == "reading" and r["emotion"]]
    assert len(emotions) == 4


def test_missing_input_is_runtime_error(tmp_path, capsys):
    assert main(["analyze", str(tmp_path / "none.rvid")]) == 1


def test_amplify(video, tmp_path):
    out = tmp_path / "amp.rvid"
    assert main(["amplify", str(video), str(out), "--alpha", "10", "--levels", "2"]) == 0
    h_in, f_in = read_rvid(video)
    h_out, f_out = read_rvid(out)
    assert h_in == h_out and len(f_in) == len(f_out)
    face = lambda fs: np.array([f.pixels[12:36, 16:48, 1].mean() for f in fs])
    assert face(f_out).std() > 3 * face(f_in).std()


def test_fer_commands(tmp_path, capsys):
    model = tmp_path / "m.ferw"
    main(["fer", "gen-weights", "--seed", "3", "-o", str(model)])
    capsys.readouterr()
    face = tmp_path / "face.npy"
    np.save(face, np.full((48, 48), 100.0))
    assert main(["fer", "classify", "--model", str(model), str(face)]) == 0
    out = lines(capsys)[0]
    assert len(out["probabilities"]) == 7 and out["label"] in out["probabilities"]
    assert main(["fer", "eval", "--oracle", "--count", "70"]) == 0
    text = capsys.readouterr().out
    assert "accuracy 1.000000" in text
    assert main(["fer", "eval", "--count", "70"]) == 2


def test_serve_sigterm(tmp_path):
    proc = subprocess.Popen([sys.executable, "-m", "facevitals", "serve", "--port", "0"],
                            stderr=subprocess.PIPE, text=True)
    try:
        line = proc.stderr.readline()
        assert "listening" in line
        proc.send_signal(signal.SIGTERM)
        assert proc.wait(timeout=10) == 0
    finally:
        if proc.poll() is None:
            proc.kill()
