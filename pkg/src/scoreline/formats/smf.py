"""Minimal Standard MIDI File (type 0/1) codec and tempo map.

Events are plain tuples ``(kind, tick, ...)``; only the channel and meta
events the package consumes are decoded, everything else is skipped at the
byte level.  SMPTE divisions and type 2 files are rejected.
"""

from __future__ import annotations

import struct
from typing import Iterable

from ..exceptions import ParseError, RangeError

DEFAULT_TEMPO = 500000  # microseconds per quarter

META_TEMPO = 0x51
META_TIME_SIGNATURE = 0x58
META_KEY_SIGNATURE = 0x59
META_END_OF_TRACK = 0x2F


class SmfData:
    def __init__(self, fmt: int, ppq: int, tracks: list[list[tuple]]):
        self.format = fmt
        self.ppq = ppq
        self.tracks = tracks


def _read_varlen(data: bytes, pos: int) -> tuple[int, int]:
    value = 0
    while True:
        if pos >= len(data):
            raise ParseError("truncated variable-length quantity")
        byte = data[pos]
        pos += 1
        value = (value << 7) | (byte & 0x7F)
        if not byte & 0x80:
            return value, pos


def _write_varlen(value: int) -> bytes:
    if value < 0:
        raise RangeError("negative delta time")
    chunks = [value & 0x7F]
    value >>= 7
    while value:
        chunks.append(0x80 | (value & 0x7F))
        value >>= 7
    return bytes(reversed(chunks))


def parse_smf(data: bytes, source_name: str = "") -> SmfData:
    if data[:4] != b"MThd":
        raise ParseError("missing MThd header", source=source_name)
    if len(data) < 14:
        raise ParseError("truncated MIDI header", source=source_name)
    header_len, fmt, ntrks, division = struct.unpack(">IHHH", data[4:14])
    if header_len < 6:
        raise ParseError(f"bad header length {header_len}", source=source_name)
    if fmt not in (0, 1):
        raise ParseError(f"unsupported SMF type {fmt}", source=source_name)
    if division & 0x8000:
        raise ParseError("SMPTE time division is not supported", source=source_name)
    if division == 0:
        raise ParseError("zero ticks per quarter", source=source_name)

    pos = 8 + header_len
    tracks = []
    for _track_index in range(ntrks):
        if data[pos:pos + 4] != b"MTrk":
            raise ParseError("missing MTrk chunk", source=source_name)
        (length,) = struct.unpack(">I", data[pos + 4:pos + 8])
        chunk = data[pos + 8:pos + 8 + length]
        pos += 8 + length
        tracks.append(_parse_track(chunk, source_name))
    return SmfData(fmt, division, tracks)


def _parse_track(chunk: bytes, source_name: str) -> list[tuple]:
    events = []
    tick = 0
    pos = 0
    status = None
    while pos < len(chunk):
        delta, pos = _read_varlen(chunk, pos)
        tick += delta
        byte = chunk[pos]
        if byte >= 0x80:
            status = byte
            pos += 1
        elif status is None:
            raise ParseError("data byte without running status", source=source_name)

        if status == 0xFF:
            meta_type = chunk[pos]
            length, pos = _read_varlen(chunk, pos + 1)
            payload = chunk[pos:pos + length]
            pos += length
            if meta_type == META_TEMPO and length >= 3:
                events.append(("tempo", tick, int.from_bytes(payload[:3], "big")))
            elif meta_type == META_TIME_SIGNATURE and length >= 2:
                events.append(("time_signature", tick, payload[0], 1 << payload[1]))
            elif meta_type == META_KEY_SIGNATURE and length >= 2:
                sf = payload[0] - 256 if payload[0] > 127 else payload[0]
                events.append(("key_signature", tick, sf, payload[1]))
            elif meta_type == META_END_OF_TRACK:
                events.append(("end_of_track", tick))
                break
            status = None  # meta events cancel running status
        elif status in (0xF0, 0xF7):
            length, pos = _read_varlen(chunk, pos)
            pos += length
            status = None
        else:
            kind = status & 0xF0
            channel = status & 0x0F
            if kind in (0xC0, 0xD0):
                pos += 1
            elif kind == 0x90:
                pitch, velocity = chunk[pos], chunk[pos + 1]
                pos += 2
                if velocity == 0:
                    events.append(("note_off", tick, channel, pitch, 0))
                else:
                    events.append(("note_on", tick, channel, pitch, velocity))
            elif kind == 0x80:
                events.append(("note_off", tick, channel, chunk[pos], chunk[pos + 1]))
                pos += 2
            elif kind == 0xB0:
                events.append(("control", tick, channel, chunk[pos], chunk[pos + 1]))
                pos += 2
            else:  # polyphonic pressure, pitch bend: skip payload
                pos += 2
    else:
        events.append(("end_of_track", tick))
    return events


_EVENT_PRIORITY = {"tempo": 0, "time_signature": 0, "key_signature": 0,
                   "note_off": 1, "control": 2, "note_on": 3,
                   "end_of_track": 9}


def build_smf(tracks: Iterable[Iterable[tuple]], ppq: int, fmt: int = 1) -> bytes:
    """Serialize event-tuple tracks; events are sorted by (tick, priority)."""
    track_blobs = []
    for events in tracks:
        ordered = sorted(events, key=lambda e: (e[1], _EVENT_PRIORITY[e[0]]))
        blob = bytearray()
        tick = 0
        for event in ordered:
            kind = event[0]
            if kind == "end_of_track":
                continue
            blob += _write_varlen(event[1] - tick)
            tick = event[1]
            if kind == "tempo":
                blob += bytes((0xFF, META_TEMPO, 3))
                blob += int(event[2]).to_bytes(3, "big")
            elif kind == "time_signature":
                numerator, denominator = event[2], event[3]
                log2 = max(denominator.bit_length() - 1, 0)
                blob += bytes((0xFF, META_TIME_SIGNATURE, 4, numerator, log2, 24, 8))
            elif kind == "key_signature":
                sf = event[2] & 0xFF
                blob += bytes((0xFF, META_KEY_SIGNATURE, 2, sf, event[3]))
            elif kind == "note_on":
                _check_7bit(event[3], "pitch")
                blob += bytes((0x90 | event[2], event[3], event[4]))
            elif kind == "note_off":
                _check_7bit(event[3], "pitch")
                blob += bytes((0x80 | event[2], event[3], event[4]))
            elif kind == "control":
                blob += bytes((0xB0 | event[2], event[3], event[4]))
            else:
                raise RangeError(f"unknown event kind {kind!r}")
        end = ordered[-1][1] if ordered else 0
        blob += _write_varlen(max(end - tick, 0))
        blob += bytes((0xFF, META_END_OF_TRACK, 0))
        track_blobs.append(bytes(blob))

    out = bytearray()
    out += b"MThd" + struct.pack(">IHHH", 6, fmt, len(track_blobs), ppq)
    for blob in track_blobs:
        out += b"MTrk" + struct.pack(">I", len(blob)) + blob
    return bytes(out)


def _check_7bit(value: int, what: str):
    if not 0 <= value <= 127:
        from ..exceptions import EncodeError

        raise EncodeError(f"{what} {value} out of 0..127")


class TempoMap:
    """Piecewise tick<->seconds mapping from tempo meta events."""

    def __init__(self, entries: Iterable[tuple[int, int]], ppq: int):
        self.ppq = ppq
        cleaned: dict[int, int] = {}
        for tick, tempo in sorted(entries):
            cleaned[tick] = tempo  # later events at the same tick win
        if 0 not in cleaned:
            cleaned[0] = DEFAULT_TEMPO
        self.entries = sorted(cleaned.items())
        self._seconds = [0.0]
        for (t0, tempo), (t1, _next) in zip(self.entries, self.entries[1:]):
            self._seconds.append(self._seconds[-1]
                                 + (t1 - t0) * tempo / (ppq * 1_000_000))

    def seconds_at(self, tick: int) -> float:
        i = self._segment_for_tick(tick)
        t0, tempo = self.entries[i]
        return self._seconds[i] + (tick - t0) * tempo / (self.ppq * 1_000_000)

    def tick_at(self, seconds: float) -> float:
        i = len(self._seconds) - 1
        while i > 0 and self._seconds[i] > seconds:
            i -= 1
        t0, tempo = self.entries[i]
        return t0 + (seconds - self._seconds[i]) * self.ppq * 1_000_000 / tempo

    def _segment_for_tick(self, tick: int) -> int:
        i = len(self.entries) - 1
        while i > 0 and self.entries[i][0] > tick:
            i -= 1
        return i
