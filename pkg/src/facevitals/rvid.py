"""RVID raw video streams.

Layout (little-endian)::

    offset 0   4 bytes  magic b"RVID"
    offset 4   u32      width in pixels
    offset 8   u32      height in pixels
    offset 12  u32      frame rate in millihertz
    offset 16  frames   width*height*3 bytes each, row-major interleaved RGB

Frame ``i`` carries timestamp ``round(i * 1e6 / fps_mhz)`` milliseconds
(integer half-up rounding).
"""

import struct
from dataclasses import dataclass

from .errors import CorruptStream
from .frame import MIN_FRAME_SIDE, Frame

MAGIC = b"RVID"
HEADER = struct.Struct("<4sIII")


@dataclass(frozen=True)
class RvidHeader:
    width: int
    height: int
    fps_mhz: int

    @property
    def fps(self):
        return self.fps_mhz / 1000.0

    @property
    def frame_bytes(self):
        return self.width * self.height * 3


def fps_to_mhz(fps):
    return int(round(fps * 1000))


def frame_timestamp_ms(index, fps_mhz):
    return (2 * index * 1_000_000 + fps_mhz) // (2 * fps_mhz)


def write_header(fh, width, height, fps):
    fh.write(HEADER.pack(MAGIC, width, height, fps_to_mhz(fps)))


def write_rvid(path, frames, fps):
    """Write an iterable of frames; returns the number written."""
    count = 0
    with open(path, "wb") as fh:
        header = None
        for frame in frames:
            if header is None:
                header = (frame.width, frame.height)
                write_header(fh, frame.width, frame.height, fps)
            elif (frame.width, frame.height) != header:
                raise CorruptStream("frame size changed mid-stream")
            fh.write(frame.to_bytes())
            count += 1
    return count


def read_header(fh):
    raw = fh.read(HEADER.size)
    if len(raw) < HEADER.size:
        raise CorruptStream("file shorter than the 16-byte RVID header")
    magic, width, height, fps_mhz = HEADER.unpack(raw)
    if magic != MAGIC:
        raise CorruptStream(f"bad magic {magic!r}, expected {MAGIC!r}")
    if width < MIN_FRAME_SIDE or height < MIN_FRAME_SIDE:
        raise CorruptStream(f"frame size {width}x{height} below {MIN_FRAME_SIDE}x{MIN_FRAME_SIDE}")
    if fps_mhz == 0:
        raise CorruptStream("frame rate is zero")
    return RvidHeader(width, height, fps_mhz)


def iter_frames(fh, header):
    i = 0
    while True:
        raw = fh.read(header.frame_bytes)
        if not raw:
            return
        if len(raw) != header.frame_bytes:
            raise CorruptStream(
                f"frame {i} truncated: {len(raw)} of {header.frame_bytes} bytes"
            )
        yield Frame.from_bytes(raw, header.width, header.height,
                               frame_timestamp_ms(i, header.fps_mhz))
        i += 1


class RvidReader:
    """Context manager yielding frames from an RVID file."""

    def __init__(self, path):
        self.path = path
        self._fh = None
        self.header = None

    def __enter__(self):
        self._fh = open(self.path, "rb")
        try:
            self.header = read_header(self._fh)
        except Exception:
            self._fh.close()
            raise
        return self

    def __exit__(self, *exc):
        self._fh.close()

    def __iter__(self):
        return iter_frames(self._fh, self.header)


def read_rvid(path):
    """Load a whole file: ``(header, list_of_frames)``."""
    with RvidReader(path) as reader:
        return reader.header, list(reader)
