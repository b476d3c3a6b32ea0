"""Adapter side of the video-restoration exchange protocol.

Watches an exchange directory for requests, restores the frames with a
built-in baseline (or a plugged-in model hook), and answers over the
same directory.  The requester and this adapter share only the on-disk
wire format; neither imports the other.
"""

from .backends import BACKENDS, identity, pushpull
from .protocol import (
    DONE_MARKER,
    ERROR_MARKER,
    REQUEST_MARKER,
    RESULT_MARKER,
    SCHEMA_VERSION,
    LoadedRequest,
    RequestError,
    load_request,
)
from .service import (
    AdapterConfig,
    discover_requests,
    serve_forever,
    serve_once,
    serve_request,
)

__version__ = "0.1.0"

__all__ = [
    "AdapterConfig",
    "BACKENDS",
    "DONE_MARKER",
    "ERROR_MARKER",
    "LoadedRequest",
    "REQUEST_MARKER",
    "RESULT_MARKER",
    "RequestError",
    "SCHEMA_VERSION",
    "discover_requests",
    "identity",
    "load_request",
    "pushpull",
    "serve_forever",
    "serve_once",
    "serve_request",
]
