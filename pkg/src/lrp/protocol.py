"""Wire format for the snapshot/command connection.

Each frame is a UTF-8 JSON object `{"type": ..., "payload": ...}`
preceded by its byte length as a 4-byte big-endian unsigned integer.
The runtime pushes `hello`, `snapshot`, `outcome`, `ack` and `error`
frames; clients send `command` frames. Command payloads carry an
optional `id` that the matching reply echoes back.
"""

from __future__ import annotations

import json
import socket
import struct

__all__ = ["encode_frame", "FrameDecoder", "read_frame", "MAX_FRAME_BYTES"]

_HEADER = struct.Struct(">I")
MAX_FRAME_BYTES = 16 * 1024 * 1024


def encode_frame(frame_type: str, payload: object) -> bytes:
    body = json.dumps({"type": frame_type, "payload": payload}, separators=(",", ":")).encode("utf-8")
    return _HEADER.pack(len(body)) + body


class FrameDecoder:
    """Incremental decoder: feed chunks, collect complete frames."""

    def __init__(self):
        self._buffer = bytearray()

    def push(self, chunk: bytes) -> list[dict]:
        self._buffer.extend(chunk)
        frames: list[dict] = []
        while True:
            if len(self._buffer) < _HEADER.size:
                return frames
            (length,) = _HEADER.unpack_from(self._buffer)
            if length > MAX_FRAME_BYTES:
                raise ValueError(f"frame of {length} bytes exceeds limit")
            if len(self._buffer) < _HEADER.size + length:
                return frames
            body = bytes(self._buffer[_HEADER.size:_HEADER.size + length])
            del self._buffer[:_HEADER.size + length]
            frames.append(json.loads(body))


def read_frame(sock: socket.socket) -> dict | None:
    """Blocking read of one frame; None on orderly EOF."""
    header = _read_exact(sock, _HEADER.size)
    if header is None:
        return None
    (length,) = _HEADER.unpack(header)
    if length > MAX_FRAME_BYTES:
        raise ValueError(f"frame of {length} bytes exceeds limit")
    body = _read_exact(sock, length)
    if body is None:
        return None
    return json.loads(body)


def _read_exact(sock: socket.socket, count: int) -> bytes | None:
    data = bytearray()
    while len(data) < count:
        chunk = sock.recv(count - len(data))
        if not chunk:
            return None
        data.extend(chunk)
    return bytes(data)
