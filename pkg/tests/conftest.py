import numpy as np
import pytest

from facevitals import synth
from facevitals.frame import Frame


@pytest.fixture(scope="session")
def pulse_scene():
    return synth.PulseScene(fps=20.0, duration=15.0, pulse_bpm=72.0,
                            pulse_amplitude=1.0, noise_sigma=2.0, seed=0)


@pytest.fixture(scope="session")
def pulse_frames(pulse_scene):
    return list(synth.generate_pulse_video(pulse_scene))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def solid_frame(value=(10, 20, 30), w=16, h=12, ts=0):
    px = np.empty((h, w, 3), np.uint8)
    px[...] = value
    return Frame.from_array(px, ts)


ACCEPTANCE_LINES = []


@pytest.fixture
def criterion(request):
    """Record a criterion's verdict; the summary hook prints one line each."""
    def record(number, title, ok, detail=""):
        line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}  {detail}".rstrip()
        print(line)
        ACCEPTANCE_LINES.append((number, line))
        assert ok, line
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
