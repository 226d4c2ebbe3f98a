"""Delta-encoded multi-channel command frames.

Frame layout (all multi-byte fields big-endian)::

    A5 | seq | count | count x (channel, value_hi, value_lo) | crc

``value`` is the current fraction scaled to 0..65535. ``crc`` is CRC-8/ATM
(polynomial 0x07, init 0x00, no reflection, no final xor) over every byte
from ``seq`` to the last entry. A frame with ``count = 0`` is a heartbeat.

Worked example: channel 2 set to 0.5 with sequence number 0 encodes as
``A5 00 01 02 7F FF 52``.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BadCrc, BadSync, ChannelOutOfRange, DuplicateChannel, LinkError, TruncatedFrame

SYNC = 0xA5
MAX_CHANNELS = 9
FULL_SCALE = 65535
HEADER_LEN = 3
ENTRY_LEN = 3


def _crc_table() -> list:
    table = []
    for byte in range(256):
        crc = byte
        for _ in range(8):
            crc = ((crc << 1) ^ 0x07) & 0xFF if crc & 0x80 else (crc << 1) & 0xFF
        table.append(crc)
    return table


_CRC_TABLE = _crc_table()


def crc8(data: bytes) -> int:
    crc = 0
    for b in data:
        crc = _CRC_TABLE[crc ^ b]
    return crc


def quantize(x: float) -> int:
    """Fraction to raw units, nearest value with ties rounded down."""
    if not 0.0 <= x <= 1.0:
        raise LinkError(f"value {x} outside [0, 1]")
    return int(math.ceil(x * FULL_SCALE - 0.5))


def dequantize(raw: int) -> float:
    return raw / FULL_SCALE


def frame_length(count: int) -> int:
    return HEADER_LEN + ENTRY_LEN * count + 1


@dataclass
class ChannelShadow:
    """Sender-side copy of what the receiver last got, per channel.

    ``None`` means never transmitted, so the first request for a channel is
    always sent.
    """

    values: list = field(default_factory=lambda: [None] * MAX_CHANNELS)
    threshold: int = 0
    seq: int = 0

    def copy(self) -> "ChannelShadow":
        return ChannelShadow(list(self.values), self.threshold, self.seq)


def _check_channels(channels) -> None:
    channels = list(channels)
    if len(set(channels)) > MAX_CHANNELS:
        raise ChannelOutOfRange(f"{len(set(channels))} channels requested, at most {MAX_CHANNELS}")
    for ch in channels:
        if not 0 <= ch < MAX_CHANNELS:
            raise ChannelOutOfRange(f"channel {ch} outside 0..{MAX_CHANNELS - 1}")


def build_frame(seq: int, entries) -> bytes:
    """Serialise ``entries`` (``(channel, raw)`` pairs) with a given seq."""
    body = bytearray([seq & 0xFF, len(entries)])
    for ch, raw in entries:
        body += bytes([ch]) + struct.pack(">H", raw)
    return bytes([SYNC]) + bytes(body) + bytes([crc8(body)])


def encode_frame(updates: dict, shadow: ChannelShadow) -> tuple[bytes, ChannelShadow]:
    """Encode the channels in ``updates`` that moved past the threshold."""
    _check_channels(updates)
    new = shadow.copy()
    entries = []
    for ch in sorted(updates):
        raw = quantize(float(updates[ch]))
        last = new.values[ch]
        if last is None or abs(raw - last) > new.threshold:
            entries.append((ch, raw))
            new.values[ch] = raw
    frame = build_frame(new.seq, entries)
    new.seq = (new.seq + 1) & 0xFF
    return frame, new


@dataclass(frozen=True)
class Frame:
    seq: int
    raw: dict  # channel -> raw 16-bit value

    @property
    def updates(self) -> dict:
        return {ch: dequantize(v) for ch, v in self.raw.items()}

    @property
    def is_heartbeat(self) -> bool:
        return not self.raw


def _parse_at(data: bytes, pos: int) -> tuple[Frame, int]:
    """Parse one frame starting at ``pos``; returns the frame and its length."""
    if data[pos] != SYNC:
        raise BadSync(f"expected 0xA5 at offset {pos}, found 0x{data[pos]:02X}")
    if len(data) - pos < HEADER_LEN:
        raise TruncatedFrame(f"frame header at offset {pos} is cut short")
    count = data[pos + 2]
    if count > MAX_CHANNELS:
        raise ChannelOutOfRange(f"frame at offset {pos} declares {count} entries")
    length = frame_length(count)
    if len(data) - pos < length:
        raise TruncatedFrame(f"frame at offset {pos} needs {length} bytes, {len(data) - pos} available")
    body = data[pos + 1:pos + length - 1]
    if crc8(body) != data[pos + length - 1]:
        raise BadCrc(f"crc mismatch in frame at offset {pos}")
    raw = {}
    for k in range(count):
        off = 2 + ENTRY_LEN * k
        ch = body[off]
        if ch >= MAX_CHANNELS:
            raise ChannelOutOfRange(f"channel {ch} outside 0..{MAX_CHANNELS - 1}")
        if ch in raw:
            raise DuplicateChannel(f"channel {ch} repeated in frame at offset {pos}")
        raw[ch] = struct.unpack(">H", body[off + 1:off + 3])[0]
    return Frame(body[0], raw), length


def decode_frame(data: bytes) -> Frame:
    """Decode exactly one frame; trailing bytes are an error."""
    data = bytes(data)
    if not data:
        raise TruncatedFrame("empty input")
    frame, length = _parse_at(data, 0)
    if length != len(data):
        raise LinkError(f"{len(data) - length} trailing bytes after frame")
    return frame


def decode_stream(data: bytes) -> list:
    """Decode a byte stream into frames, resynchronising after errors.

    Returns a list whose items are :class:`Frame` or :class:`LinkError`
    instances in stream order. After an error, decoding restarts at the next
    0xA5 byte after the failed position.
    """
    data = bytes(data)
    out = []
    pos = 0
    while pos < len(data):
        try:
            frame, length = _parse_at(data, pos)
        except LinkError as exc:
            out.append(exc)
            nxt = data.find(bytes([SYNC]), pos + 1)
            pos = len(data) if nxt < 0 else nxt
            continue
        out.append(frame)
        pos += length
    return out


@dataclass
class StreamEncoder:
    """Encoder for a clocked stream: sends deltas, or a heartbeat when the
    link has been quiet for ``rate / heartbeat_hz`` ticks."""

    rate: float = 2000.0
    heartbeat_hz: float = 10.0
    shadow: ChannelShadow = field(default_factory=ChannelShadow)
    _quiet: int = 0

    def tick(self, updates: dict) -> bytes:
        frame, shadow = encode_frame(updates, self.shadow)
        if frame[2] == 0:
            self._quiet += 1
            if self._quiet < round(self.rate / self.heartbeat_hz):
                return b""
        self.shadow = shadow
        self._quiet = 0
        return frame


@dataclass(frozen=True)
class GapWarning:
    """``count`` frames went missing, starting at sequence number ``missing``."""

    missing: int  # first missing sequence number
    count: int = 1


@dataclass
class Capture:
    """Frames stamped with the synth tick at which they were sent."""

    rate: float
    n_ticks: int
    records: list = field(default_factory=list)  # (tick, bytes)

    CAPTURE_MAGIC = b"HSCAP1"

    def to_bytes(self) -> bytes:
        out = bytearray(self.CAPTURE_MAGIC)
        out += struct.pack(">dI", float(self.rate), self.n_ticks)
        for tick, frame in self.records:
            out += struct.pack(">IH", tick, len(frame)) + frame
        return bytes(out)

    @classmethod
    def from_bytes(cls, data: bytes) -> "Capture":
        m = len(cls.CAPTURE_MAGIC)
        if data[:m] != cls.CAPTURE_MAGIC:
            raise LinkError("not a frame capture file")
        try:
            rate, n_ticks = struct.unpack_from(">dI", data, m)
        except struct.error:
            raise TruncatedFrame("capture header cut short") from None
        pos = m + 12
        records = []
        while pos < len(data):
            if len(data) - pos < 6:
                raise TruncatedFrame(f"capture record header at offset {pos} cut short")
            tick, length = struct.unpack_from(">IH", data, pos)
            pos += 6
            if len(data) - pos < length:
                raise TruncatedFrame(f"capture record at offset {pos} cut short")
            records.append((tick, bytes(data[pos:pos + length])))
            pos += length
        return cls(rate, n_ticks, records)

    def write(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def read(cls, path) -> "Capture":
        return cls.from_bytes(Path(path).read_bytes())


@dataclass
class Reconstruction:
    values: dict  # channel -> array over ticks
    gaps: list
    errors: list


def reconstruct(frames, n_ticks: int, channels=range(MAX_CHANNELS)) -> Reconstruction:
    """Staircase per channel from ``(tick, Frame)`` pairs in send order.

    Every channel starts at zero and holds its last received value. Missing
    sequence numbers produce :class:`GapWarning` entries.
    """
    channels = list(channels)
    current = {ch: 0.0 for ch in channels}
    values = {ch: np.zeros(n_ticks) for ch in channels}
    gaps = []
    expected = None
    pending = sorted(frames, key=lambda p: p[0]) if frames else []
    idx = 0
    for t in range(n_ticks):
        while idx < len(pending) and pending[idx][0] <= t:
            frame = pending[idx][1]
            if expected is not None and frame.seq != expected:
                gaps.append(GapWarning(expected, (frame.seq - expected) & 0xFF))
            expected = (frame.seq + 1) & 0xFF
            for ch, v in frame.updates.items():
                if ch in current:
                    current[ch] = v
            idx += 1
        for ch in channels:
            values[ch][t] = current[ch]
    return Reconstruction(values, gaps, [])


def reconstruct_capture(capture: Capture, channels=range(MAX_CHANNELS), strict: bool = False):
    """Decode and reconstruct a capture.

    With ``strict`` the first decode error is raised and a plain channel map
    is returned; otherwise a :class:`Reconstruction` carrying the errors.
    """
    frames, errors = [], []
    for tick, data in capture.records:
        for item in decode_stream(data):
            if isinstance(item, LinkError):
                if strict:
                    raise item
                errors.append((tick, item))
            else:
                frames.append((tick, item))
    rec = reconstruct(frames, capture.n_ticks, channels)
    if strict:
        return rec.values
    rec.errors = errors
    return rec
