"""Wire format for the exchange protocol.

Every frame is one datagram:

    byte 0        command code in the high nibble, low nibble zero
    bytes 1-4     frame id, big-endian unsigned 32-bit
    payload       fixed width per command (see the payload dataclasses)
    last 4 bytes  CRC-32 over everything before it (polynomial 0x04C11DB7,
                  reflected, init/final-xor 0xFFFFFFFF), big-endian

tau values travel as a single byte: 0x01 for +1, 0x00 for -1.

Decode order matters: frames shorter than header+CRC are a framing error,
then the CRC is verified (so any single-bit corruption is an integrity
error), and only then are command and length validated.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass
from typing import Union

SEED_LEN = 16
CODE_LEN = 16

# Command codes, high nibble of byte 0.
CMD_SYN = 0x0
CMD_FIN_SYN = 0x1
CMD_ACK_SYN = 0x2
CMD_NAK_SYN = 0x3
CMD_AUTH = 0x4

MAX_FRAME_ID = (1 << 32) - 1
_HEADER_LEN = 5
_CRC_LEN = 4


class FrameError(Exception):
    """Base class for frame decode failures."""


class FrameIntegrityError(FrameError):
    """Checksum mismatch: the frame was altered in transit."""


class FrameProtocolError(FrameError):
    """Reserved or unknown command code."""


class FrameTruncatedError(FrameError):
    """Frame too short or its length does not match its command."""


@dataclass(frozen=True)
class Syn:
    """Synchronization round: input seed, sender output, encrypted probe."""

    seed: bytes
    tau: int
    ek_st: bytes


@dataclass(frozen=True)
class FinSyn:
    """Synchronization confirmed; iv selects the key group."""

    iv: int


@dataclass(frozen=True)
class AckSyn:
    """Outputs matched; the replier updated its weights."""

    tau: int


@dataclass(frozen=True)
class NakSyn:
    """Outputs differed (or certification was rejected); no update."""

    tau: int


@dataclass(frozen=True)
class Auth:
    """Certification: a secret code encrypted under the session key."""

    ek_code: bytes


Payload = Union[Syn, FinSyn, AckSyn, NakSyn, Auth]

_COMMAND_OF_PAYLOAD = {
    Syn: CMD_SYN,
    FinSyn: CMD_FIN_SYN,
    AckSyn: CMD_ACK_SYN,
    NakSyn: CMD_NAK_SYN,
    Auth: CMD_AUTH,
}

# payload byte width per command
_PAYLOAD_LEN = {
    CMD_SYN: SEED_LEN + 1 + CODE_LEN,
    CMD_FIN_SYN: 1,
    CMD_ACK_SYN: 1,
    CMD_NAK_SYN: 1,
    CMD_AUTH: CODE_LEN,
}


@dataclass(frozen=True)
class Frame:
    """A protocol message: monotone id plus one typed payload."""

    frame_id: int
    payload: Payload

    def __post_init__(self) -> None:
        if not 0 <= self.frame_id <= MAX_FRAME_ID:
            raise ValueError("frame id must fit 32 bits")

    @property
    def command(self) -> int:
        return _COMMAND_OF_PAYLOAD[type(self.payload)]


def crc32(data: bytes) -> int:
    """The frame checksum (standard reflected CRC-32)."""
    return zlib.crc32(data) & 0xFFFFFFFF


def _encode_tau(tau: int) -> bytes:
    if tau == 1:
        return b"\x01"
    if tau == -1:
        return b"\x00"
    raise ValueError("tau must be +1 or -1")


def _decode_tau(b: int) -> int:
    if b == 0x01:
        return 1
    if b == 0x00:
        return -1
    raise FrameTruncatedError(f"malformed tau byte 0x{b:02x}")


def encode_frame(frame: Frame) -> bytes:
    """Serialize a frame, appending its CRC."""
    p = frame.payload
    if isinstance(p, Syn):
        if len(p.seed) != SEED_LEN or len(p.ek_st) != CODE_LEN:
            raise ValueError("SYN seed and probe must be 16 bytes each")
        body = p.seed + _encode_tau(p.tau) + p.ek_st
    elif isinstance(p, FinSyn):
        if not 0 <= p.iv <= 0xFF:
            raise ValueError("iv must fit one byte")
        body = bytes([p.iv])
    elif isinstance(p, (AckSyn, NakSyn)):
        body = _encode_tau(p.tau)
    elif isinstance(p, Auth):
        if len(p.ek_code) != CODE_LEN:
            raise ValueError("AUTH code must be 16 bytes")
        body = p.ek_code
    else:
        raise ValueError(f"unknown payload type: {type(p).__name__}")

    head = bytes([frame.command << 4]) + frame.frame_id.to_bytes(4, "big") + body
    return head + crc32(head).to_bytes(4, "big")


def decode_frame(data: bytes) -> Frame:
    """Parse and validate one datagram.

    Raises FrameTruncatedError when too short or malformed,
    FrameIntegrityError on checksum mismatch, FrameProtocolError on a
    reserved command code.
    """
    if len(data) < _HEADER_LEN + _CRC_LEN:
        raise FrameTruncatedError(f"frame of {len(data)} bytes is too short")
    body, tail = data[:-_CRC_LEN], data[-_CRC_LEN:]
    if crc32(body) != int.from_bytes(tail, "big"):
        raise FrameIntegrityError("checksum mismatch")

    if data[0] & 0x0F:
        raise FrameTruncatedError("low nibble of the command byte must be zero")
    command = data[0] >> 4
    if command not in _PAYLOAD_LEN:
        raise FrameProtocolError(f"reserved command code {command:04b}")
    expected = _HEADER_LEN + _PAYLOAD_LEN[command] + _CRC_LEN
    if len(data) != expected:
        raise FrameTruncatedError(
            f"command {command:04b} frame must be {expected} bytes, got {len(data)}"
        )

    frame_id = int.from_bytes(data[1:5], "big")
    raw = data[_HEADER_LEN:-_CRC_LEN]
    payload: Payload
    if command == CMD_SYN:
        payload = Syn(
            seed=raw[:SEED_LEN],
            tau=_decode_tau(raw[SEED_LEN]),
            ek_st=raw[SEED_LEN + 1 :],
        )
    elif command == CMD_FIN_SYN:
        payload = FinSyn(iv=raw[0])
    elif command == CMD_ACK_SYN:
        payload = AckSyn(tau=_decode_tau(raw[0]))
    elif command == CMD_NAK_SYN:
        payload = NakSyn(tau=_decode_tau(raw[0]))
    else:
        payload = Auth(ek_code=raw)
    return Frame(frame_id=frame_id, payload=payload)
