"""Heart rate from facial video by Eulerian color magnification, and a
compact depthwise-separable CNN for facial expression classification."""

from .errors import FaceVitalsError
from .frame import Frame, Roi, TimeSeries
from .pulse import BpmReading, PulseConfig, PulseSession, estimate_bpm
from .temporal import BandConfig

__version__ = "0.1.0"

__all__ = ["BandConfig", "BpmReading", "FaceVitalsError", "Frame", "PulseConfig",
           "PulseSession", "Roi", "TimeSeries", "estimate_bpm"]
