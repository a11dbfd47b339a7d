"""Reference client for external navigator/guide policies.

Speaks the newline-delimited JSON envelope protocol over a plain TCP
socket; no dependency on the server package.
"""

from .client import (
    ClientCallbacks,
    ProtocolViolation,
    SessionResult,
    connect_and_register,
)

__all__ = [
    "ClientCallbacks",
    "ProtocolViolation",
    "SessionResult",
    "connect_and_register",
]

__version__ = "0.1.0"
