"""File format codecs and automatic format detection.

``load_score`` sniffs the input signature and dispatches to the specific
loader; ``load_performance`` reads MIDI performances.
"""

from __future__ import annotations

import os
from typing import Union

from ..document import ScoreDocument
from ..exceptions import FormatDetectionError
from ..model import PerformedPart

PathOrBytes = Union[str, os.PathLike, bytes]


def read_bytes(source: PathOrBytes) -> tuple[bytes, str]:
    """Return (data, name) for a path, or pass bytes through."""
    if isinstance(source, bytes):
        return source, "<bytes>"
    with open(source, "rb") as handle:
        return handle.read(), os.fspath(source)


def _xml_root_name(data: bytes) -> str:
    """Local name of the XML root element, or '' if not XML-like."""
    head = data.lstrip()
    if not head.startswith(b"<"):
        return ""
    pos = 0
    while True:
        start = head.find(b"<", pos)
        if start < 0:
            return ""
        if head.startswith((b"<?", b"<!--", b"<!"), start):
            pos = head.find(b">", start)
            if pos < 0:
                return ""
            pos += 1
            continue
        end = start + 1
        while end < len(head) and head[end:end + 1] not in (b" ", b"\t", b"\r", b"\n", b">", b"/"):
            end += 1
        name = head[start + 1:end].decode("latin-1")
        return name.rsplit(":", 1)[-1]


def sniff_format(data: bytes) -> str:
    """Identify the symbolic format of raw bytes by its signature."""
    if data[:4] == b"MThd":
        return "midi"
    root = _xml_root_name(data)
    if root == "score-partwise":
        return "musicxml"
    if root == "mei":
        return "mei"
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError:
        text = ""
    for line in text.splitlines():
        if line.startswith(("!!", "!")):
            continue
        if "**kern" in line.split("\t"):
            return "kern"
        break
    stripped = text.lstrip()
    if stripped.startswith(("info(", "snote(", "insertion-note(")):
        return "match"
    first_line = stripped.splitlines()[0] if stripped else ""
    if stripped.startswith("//") or first_line.count("\t") >= 9:
        return "corresp"
    raise FormatDetectionError(
        "unrecognized format; tried signatures: MThd (MIDI), "
        "score-partwise (MusicXML), mei (MEI), **kern spine (Humdrum), "
        "info(...) clauses (match)")


def load_score(source: PathOrBytes, strict: bool = False) -> ScoreDocument:
    """Load any supported score format, inferring the format automatically."""
    from . import kern, mei, midi, musicxml

    data, name = read_bytes(source)
    fmt = sniff_format(data)
    if fmt == "musicxml":
        return musicxml.load_musicxml(data, strict=strict, source_name=name)
    if fmt == "mei":
        return mei.load_mei(data, strict=strict, source_name=name)
    if fmt == "kern":
        return kern.load_kern(data, strict=strict, source_name=name)
    if fmt == "midi":
        return midi.load_score_midi(data, strict=strict, source_name=name)
    raise FormatDetectionError(f"{fmt} input is not a score format", source=name)


def load_performance(source: PathOrBytes, strict: bool = False) -> PerformedPart:
    """Load a MIDI file as a performance."""
    from . import midi

    data, name = read_bytes(source)
    if sniff_format(data) != "midi":
        raise FormatDetectionError("performances must be MIDI files", source=name)
    return midi.load_performance_midi(data, strict=strict, source_name=name)
