"""Frame-batch streaming service: broker, session pipelines and HTTP API."""

from .broker import Broker
from .core import FrameBatch, SessionOptions, StreamService, encode_frames
from .http import serve, shutdown_server

__all__ = ["Broker", "FrameBatch", "SessionOptions", "StreamService",
           "encode_frames", "serve", "shutdown_server"]
