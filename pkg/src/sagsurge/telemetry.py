"""Framed, CRC-protected telemetry for raw ADC codes and detector events.

Wire layout (all multi-byte integers little-endian except the CRC)::

    0   2   sync        A5 5A
    2   1   version     01
    3   1   type        01 sample | 02 event
    4   4   sequence    u32
    8   4   start_index u32 (sample ordinal)
    -- sample frame --
    12  1   count       1..240
    13  2n  codes       u16 each
    -- event frame --
    12  1   kind        01 trip | 02 reconnect
    13  1   class       00 n/a | 01 sag | 02 surge
    14  4   half_cycle  u32
    18  4   rms_mV      u32
    end 2   CRC-16/CCITT-FALSE over [2, end), big-endian
"""

from __future__ import annotations

import binascii
import enum
import struct
from dataclasses import dataclass
from typing import Iterable, Union

SYNC = b"\xA5\x5A"
VERSION = 0x01
TYPE_SAMPLE = 0x01
TYPE_EVENT = 0x02
MAX_CODES = 240

_HEADER = struct.Struct("<2sBBII")
_EVENT_PAYLOAD = struct.Struct("<BBII")
SAMPLE_OVERHEAD = _HEADER.size + 1 + 2
EVENT_FRAME_SIZE = _HEADER.size + _EVENT_PAYLOAD.size + 2


class FrameError(ValueError):
    pass


class EventKind(enum.IntEnum):
    TRIP = 0x01
    RECONNECT = 0x02


class EventClass(enum.IntEnum):
    NOT_APPLICABLE = 0x00
    SAG = 0x01
    SURGE = 0x02


@dataclass(frozen=True)
class SampleFrame:
    sequence: int
    start_index: int
    codes: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "codes", tuple(int(c) for c in self.codes))


@dataclass(frozen=True)
class EventFrame:
    sequence: int
    kind: EventKind
    cls: EventClass
    half_cycle_index: int
    rms_millivolts: int
    # sample ordinal at the end of the triggering measurement window
    start_index: int = 0


Frame = Union[SampleFrame, EventFrame]


class DiagnosticKind(enum.Enum):
    CRC = "crc"
    JUNK = "junk"
    BAD_HEADER = "bad_header"
    TRUNCATED = "truncated"
    SEQUENCE_GAP = "sequence_gap"


@dataclass(frozen=True)
class Diagnostic:
    offset: int
    kind: DiagnosticKind
    reason: str


def crc16(data: bytes, crc: int = 0xFFFF) -> int:
    """CRC-16/CCITT-FALSE: poly 0x1021, init 0xFFFF, no reflection, no final xor."""
    # binascii.crc_hqx is exactly this CRC when seeded with 0xFFFF
    return binascii.crc_hqx(bytes(data), crc)


def _u32(name: str, value: int) -> None:
    if not 0 <= value <= 0xFFFFFFFF:
        raise FrameError(f"{name} {value} does not fit in u32")


def _finish(body: bytes) -> bytes:
    return body + crc16(body[2:]).to_bytes(2, "big")


def encode_sample_frame(f: SampleFrame) -> bytes:
    n = len(f.codes)
    if n == 0:
        raise FrameError("sample frame needs at least one code")
    if n > MAX_CODES:
        raise FrameError(f"{n} codes exceed the {MAX_CODES}-code frame limit")
    _u32("sequence", f.sequence)
    _u32("start_index", f.start_index)
    if any(not 0 <= c <= 0xFFFF for c in f.codes):
        raise FrameError("codes must fit in u16")
    body = (_HEADER.pack(SYNC, VERSION, TYPE_SAMPLE, f.sequence, f.start_index)
            + bytes([n]) + struct.pack(f"<{n}H", *f.codes))
    return _finish(body)


def encode_event_frame(f: EventFrame) -> bytes:
    if f.kind is EventKind.RECONNECT and f.cls is not EventClass.NOT_APPLICABLE:
        raise FrameError("reconnect frames carry class NOT_APPLICABLE")
    if f.kind is EventKind.TRIP and f.cls is EventClass.NOT_APPLICABLE:
        raise FrameError("trip frames need a sag or surge class")
    for name in ("sequence", "half_cycle_index", "rms_millivolts", "start_index"):
        _u32(name, getattr(f, name))
    body = (_HEADER.pack(SYNC, VERSION, TYPE_EVENT, f.sequence, f.start_index)
            + _EVENT_PAYLOAD.pack(f.kind, f.cls, f.half_cycle_index, f.rms_millivolts))
    return _finish(body)


def encode(f: Frame) -> bytes:
    if isinstance(f, SampleFrame):
        return encode_sample_frame(f)
    return encode_event_frame(f)


def decode_stream(data: bytes) -> tuple[list[Frame], list[Diagnostic]]:
    """Decode every valid frame in ``data``.

    Never raises on content.  Bytes that cannot belong to a valid frame are
    reported as diagnostics and scanning resumes at the next sync pattern.
    """
    data = bytes(data)
    frames: list[Frame] = []
    diags: list[Diagnostic] = []
    pos = 0
    junk_from = None
    last_seq = None

    def reject(at: int, kind: DiagnosticKind, reason: str) -> int:
        diags.append(Diagnostic(at, kind, reason))
        return at + 1

    while pos < len(data):
        at = data.find(SYNC, pos)
        if at < 0:
            junk_from = pos if junk_from is None else junk_from
            break
        if at > pos and junk_from is None:
            junk_from = pos
        if len(data) - at < _HEADER.size + 1:
            junk_from = at if junk_from is None else junk_from
            diags.append(Diagnostic(at, DiagnosticKind.TRUNCATED, "stream ends inside a frame header"))
            pos = len(data)
            break
        _, version, ftype, seq, start = _HEADER.unpack_from(data, at)
        if version != VERSION:
            pos = reject(at, DiagnosticKind.BAD_HEADER, f"unsupported version 0x{version:02X}")
            junk_from = at if junk_from is None else junk_from
            continue
        if ftype == TYPE_SAMPLE:
            count = data[at + _HEADER.size]
            if not 1 <= count <= MAX_CODES:
                pos = reject(at, DiagnosticKind.BAD_HEADER, f"invalid code count {count}")
                junk_from = at if junk_from is None else junk_from
                continue
            size = SAMPLE_OVERHEAD + 2 * count
        elif ftype == TYPE_EVENT:
            size = EVENT_FRAME_SIZE
        else:
            pos = reject(at, DiagnosticKind.BAD_HEADER, f"unknown frame type 0x{ftype:02X}")
            junk_from = at if junk_from is None else junk_from
            continue
        if at + size > len(data):
            pos = reject(at, DiagnosticKind.TRUNCATED, f"frame of {size} bytes runs past end of stream")
            junk_from = at if junk_from is None else junk_from
            continue
        expected = int.from_bytes(data[at + size - 2:at + size], "big")
        actual = crc16(data[at + 2:at + size - 2])
        if expected != actual:
            pos = reject(at, DiagnosticKind.CRC, f"CRC mismatch: stored 0x{expected:04X}, computed 0x{actual:04X}")
            junk_from = at if junk_from is None else junk_from
            continue

        frame: Frame
        if ftype == TYPE_SAMPLE:
            codes = struct.unpack_from(f"<{count}H", data, at + _HEADER.size + 1)
            frame = SampleFrame(seq, start, codes)
        else:
            kind, cls, hci, mv = _EVENT_PAYLOAD.unpack_from(data, at + _HEADER.size)
            try:
                frame = EventFrame(seq, EventKind(kind), EventClass(cls), hci, mv, start)
            except ValueError:
                pos = reject(at, DiagnosticKind.BAD_HEADER, f"unknown event kind/class {kind}/{cls}")
                junk_from = at if junk_from is None else junk_from
                continue

        if junk_from is not None:
            diags.append(Diagnostic(junk_from, DiagnosticKind.JUNK, f"skipped {at - junk_from} bytes"))
            junk_from = None
        if last_seq is not None and seq != (last_seq + 1) & 0xFFFFFFFF:
            diags.append(Diagnostic(at, DiagnosticKind.SEQUENCE_GAP,
                                    f"sequence jumped from {last_seq} to {seq}"))
        last_seq = seq
        frames.append(frame)
        pos = at + size

    if junk_from is not None and junk_from < len(data):
        diags.append(Diagnostic(junk_from, DiagnosticKind.JUNK, f"skipped {len(data) - junk_from} trailing bytes"))
    return frames, diags


class FrameEncoder:
    """Assigns consecutive sequence numbers to frames of one stream."""

    def __init__(self, first_sequence: int = 0):
        self.sequence = first_sequence

    def _next(self) -> int:
        seq = self.sequence
        self.sequence = (self.sequence + 1) & 0xFFFFFFFF
        return seq

    def samples(self, codes: Iterable[int], start_index: int = 0) -> bytes:
        codes = list(codes)
        out = bytearray()
        for k in range(0, len(codes), MAX_CODES):
            chunk = codes[k:k + MAX_CODES]
            out += encode_sample_frame(SampleFrame(self._next(), start_index + k, chunk))
        return bytes(out)

    def event(self, kind: EventKind, cls: EventClass, half_cycle_index: int,
              rms_volts: float, sample_index: int = 0) -> bytes:
        mv = max(0, round(rms_volts * 1000))
        return encode_event_frame(EventFrame(self._next(), kind, cls, half_cycle_index, mv, sample_index))
