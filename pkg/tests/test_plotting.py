import numpy as np

from facevitals.fer.evaluate import ConfusionMatrix
from facevitals.plotting import plot_bpm_trace, plot_confusion


def test_trace_png(tmp_path):
    recs = [{"t_ms": i * 50, "bpm": None if i < 10 else 72.0, "confidence": float(i),
             "gated": i % 7 == 0} for i in range(40)]
    p = tmp_path / "t.png"
    plot_bpm_trace(recs, p, title="x")
    assert p.read_bytes()[:4] == b"\x89PNG"


def test_confusion_svg(tmp_path):
    p = tmp_path / "c.svg"
    plot_confusion(ConfusionMatrix(np.eye(7, dtype=int) * 3), p)
    assert b"<svg" in p.read_bytes()[:400]
