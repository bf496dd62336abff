"""Length-prefixed binary frames for the networked harness.

Layout (all integers big-endian)::

    u32 length | u8 type | body[length - 1]

``length`` counts the type byte plus the body and may not exceed 4096.

==========  ====  =========================================================
type        code  body
==========  ====  =========================================================
HELLO       0x01  u8 version, u8 variant, u16 K, u32 n
PHOTON      0x02  16-byte session id, u32 position, u8 pass,
                  f64 h.re, f64 h.im, f64 v.re, f64 v.im
DONE        0x03  (empty)
ABORT       0x04  u8 reason
==========  ====  =========================================================

The wire carries raw amplitudes because this is a simulation.  Only the
adversary interface (measure/rotate) may look at them; nothing else in an
eavesdropper reads a photon's state.
"""

from __future__ import annotations

import socket
import struct
from dataclasses import dataclass

from qtp.protocol import PhotonMessage
from qtp.statekit import PureState

PROTOCOL_VERSION = 1
MAX_FRAME = 4096

HELLO, PHOTON, DONE, ABORT = 0x01, 0x02, 0x03, 0x04

ABORT_PARAMETER_MISMATCH = 0x01
ABORT_VERSION_MISMATCH = 0x02
ABORT_PROTOCOL_ERROR = 0x03
ABORT_TIMEOUT = 0x04

_HEADER = struct.Struct(">IB")
_HELLO = struct.Struct(">BBHI")
_PHOTON = struct.Struct(">16sIBdddd")
_ABORT = struct.Struct(">B")

WIRE_NORM_TOL = 1e-9


class FramingError(Exception):
    """Base class for malformed byte streams."""


class ShortReadError(FramingError):
    """The stream ended inside a frame."""


class BadLengthError(FramingError):
    """The length field disagrees with the frame type."""


class UnknownTypeError(FramingError):
    """The type byte is not one of HELLO, PHOTON, DONE, ABORT."""


class OversizeFrameError(FramingError):
    """The length field exceeds MAX_FRAME."""


@dataclass(frozen=True)
class Hello:
    version: int
    variant: int
    k: int
    n: int


@dataclass(frozen=True)
class WirePhoton:
    session_id: bytes
    position: int
    pass_no: int
    amp_h_re: float
    amp_h_im: float
    amp_v_re: float
    amp_v_im: float

    @classmethod
    def from_message(cls, m: PhotonMessage) -> WirePhoton:
        s = m.state
        return cls(m.session_id, m.position, m.pass_no, s.amp_h.real, s.amp_h.imag, s.amp_v.real, s.amp_v.imag)

    def to_message(self) -> PhotonMessage:
        h = complex(self.amp_h_re, self.amp_h_im)
        v = complex(self.amp_v_re, self.amp_v_im)
        norm = abs(h) ** 2 + abs(v) ** 2
        if not abs(norm - 1.0) <= WIRE_NORM_TOL:
            raise FramingError(f"photon state is not normalized (|h|^2+|v|^2 = {norm!r})")
        if abs(norm - 1.0) > 1e-12:
            state = PureState.normalized(h, v)
        else:
            state = PureState(h, v)
        return PhotonMessage(self.session_id, self.position, self.pass_no, state)


@dataclass(frozen=True)
class Done:
    pass


@dataclass(frozen=True)
class Abort:
    reason: int


Frame = Hello | WirePhoton | Done | Abort


def encode_frame(f: Frame) -> bytes:
    if isinstance(f, Hello):
        typ, body = HELLO, _HELLO.pack(f.version, f.variant, f.k, f.n)
    elif isinstance(f, WirePhoton):
        if len(f.session_id) != 16:
            raise BadLengthError("session id must be 16 bytes")
        body = _PHOTON.pack(
            f.session_id, f.position, f.pass_no, f.amp_h_re, f.amp_h_im, f.amp_v_re, f.amp_v_im
        )
        typ = PHOTON
    elif isinstance(f, Done):
        typ, body = DONE, b""
    elif isinstance(f, Abort):
        typ, body = ABORT, _ABORT.pack(f.reason)
    else:
        raise TypeError(f"not a frame: {f!r}")
    return _HEADER.pack(1 + len(body), typ) + body


_BODY_SIZE = {HELLO: _HELLO.size, PHOTON: _PHOTON.size, DONE: 0, ABORT: _ABORT.size}


def _parse(typ: int, body: bytes) -> Frame:
    if typ not in _BODY_SIZE:
        raise UnknownTypeError(f"unknown frame type 0x{typ:02x}")
    if len(body) != _BODY_SIZE[typ]:
        raise BadLengthError(f"frame type 0x{typ:02x} needs a {_BODY_SIZE[typ]}-byte body, got {len(body)}")
    if typ == HELLO:
        return Hello(*_HELLO.unpack(body))
    if typ == PHOTON:
        return WirePhoton(*_PHOTON.unpack(body))
    if typ == DONE:
        return Done()
    return Abort(*_ABORT.unpack(body))


def _check_length(length: int) -> None:
    if length > MAX_FRAME:
        raise OversizeFrameError(f"frame length {length} exceeds {MAX_FRAME}")
    if length < 1:
        raise BadLengthError("frame length must include the type byte")


def decode_frame(data: bytes) -> Frame:
    """Decode exactly one frame; trailing or missing bytes are errors."""
    if len(data) < 4:
        raise ShortReadError(f"need a 4-byte length prefix, got {len(data)} bytes")
    (length,) = struct.unpack_from(">I", data)
    _check_length(length)
    typ = data[4] if len(data) > 4 else None
    if typ is None or len(data) < 4 + length:
        raise ShortReadError(f"frame declares {length} bytes, only {len(data) - 4} present")
    if len(data) > 4 + length:
        raise BadLengthError(f"{len(data) - 4 - length} trailing bytes after frame")
    if typ not in _BODY_SIZE:
        raise UnknownTypeError(f"unknown frame type 0x{typ:02x}")
    return _parse(typ, data[_HEADER.size:])


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            raise ShortReadError(f"connection closed with {n - len(buf)} bytes outstanding")
        buf += chunk
    return bytes(buf)


def read_raw_frame(sock: socket.socket) -> bytes:
    """Read one complete frame's bytes without interpreting the body."""
    head = _recv_exact(sock, 4)
    (length,) = struct.unpack(">I", head)
    _check_length(length)
    return head + _recv_exact(sock, length)


def read_frame(sock: socket.socket) -> Frame:
    return decode_frame(read_raw_frame(sock))


def send_frame(sock: socket.socket, f: Frame) -> bytes:
    data = encode_frame(f)
    sock.sendall(data)
    return data
