"""Alignment file codecs: match files (read/write) and corresp (read).

The match grammar is a fixed, versioned subset, one clause per line:

    info(<key>,<value>).
    snote(<id>,[<step>,<alter>],<octave>,<measure>:<beat>,<offset>,
          <dur_beats>,<onset_beats>,<offset_beats>,[<attr>*])
        -note(<id>,<midipitch>,<onset_tick>,<offset_tick>,
              <velocity>,<channel>,<track>).
    snote(...)-deletion.
    insertion-note(...).

Ticks are integers at the declared info(midiClockUnits,...) resolution and
info(midiClockRate,...) microseconds per quarter.  Beat values are slow
beats (rationals).  Score reconstruction is best-effort: a Part is built
only when the info header carries a time signature.
"""

from __future__ import annotations

import re
from fractions import Fraction
from math import lcm
from typing import Optional

from ..document import ScoreDocument, WarningSink
from ..exceptions import IdentityError, ParseError
from ..model import (
    Alignment,
    AlignmentPair,
    GraceNote,
    Measure,
    Note,
    Part,
    PartGroup,
    PerformedNote,
    PerformedPart,
    TimeSignature,
)
from ..notearray import merged_note_spans
from ..timeunits import beat_map, quarter_map, slow_beat_unit

MATCH_VERSION = "1.0"
DEFAULT_CLOCK_UNITS = 480
DEFAULT_CLOCK_RATE = 500000

_SNOTE = re.compile(
    r"snote\(([^,()\[\]]+),\[([A-G]),(-?\d+)\],(-?\d+),(-?\d+):(-?\d+),"
    r"([^,]+),([^,]+),([^,]+),([^,]+),\[([^\]]*)\]\)")
_NOTE = re.compile(
    r"note\(([^,()]+),(\d+),(-?\d+),(-?\d+),(\d+),(\d+),(\d+)\)")
_INFO = re.compile(r"info\(([^,]+),(.*)\)\.\s*$")


def _rational(text: str, where: str) -> Fraction:
    text = text.strip()
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise ParseError(f"bad rational {text!r} in {where}") from exc


def _format_rational(value: Fraction) -> str:
    value = Fraction(value)
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


class _SnoteRecord:
    __slots__ = ("id", "step", "alter", "octave", "measure", "beat", "offset",
                 "dur_beats", "onset_beats", "offset_beats", "attrs")

    def __init__(self, match: re.Match, where: str):
        (self.id, self.step, alter, octave, measure, beat, offset,
         dur, onset, offs, attrs) = match.groups()
        self.alter = int(alter)
        self.octave = int(octave)
        self.measure = int(measure)
        self.beat = int(beat)
        self.offset = _rational(offset, where)
        self.dur_beats = _rational(dur, where)
        self.onset_beats = _rational(onset, where)
        self.offset_beats = _rational(offs, where)
        self.attrs = [a for a in attrs.split(",") if a]


def load_match(source, strict: bool = False, source_name: str = ""
               ) -> tuple[PerformedPart, Alignment, Optional[ScoreDocument]]:
    """Parse a match file into its alignment triple."""
    from . import read_bytes

    data, name = read_bytes(source)
    source_name = source_name or name
    sink = WarningSink(strict=strict, source=source_name)
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"not UTF-8 text: {exc}", source=source_name) from exc

    info: dict[str, str] = {}
    pairs = []
    snotes: list[_SnoteRecord] = []
    perf_specs = []  # (id, pitch, on_tick, off_tick, velocity, channel, track)
    perf_ids = set()

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("%"):
            continue
        where = f"line {line_no}"
        info_match = _INFO.match(line)
        if info_match:
            info[info_match.group(1).strip()] = info_match.group(2).strip()
            continue
        if not line.endswith("."):
            raise ParseError("clause must end with '.'", source=source_name,
                             line=line_no)
        body = line[:-1]
        if body.startswith("snote("):
            snote_match = _SNOTE.match(body)
            if not snote_match:
                raise ParseError("malformed snote(...)", source=source_name,
                                 line=line_no)
            record = _SnoteRecord(snote_match, where)
            rest = body[snote_match.end():]
            if rest.startswith("-note("):
                note_match = _NOTE.fullmatch(rest[1:])
                if not note_match:
                    raise ParseError("malformed note(...)", source=source_name,
                                     line=line_no)
                perf_id = _register_note(note_match, perf_specs, perf_ids,
                                         source_name, line_no)
                pairs.append(AlignmentPair("match", record.id, perf_id))
                snotes.append(record)
            elif rest == "-deletion":
                pairs.append(AlignmentPair("deletion", score_id=record.id))
                snotes.append(record)
            else:
                raise ParseError(f"unrecognized clause tail {rest!r}",
                                 source=source_name, line=line_no)
        elif body.startswith("insertion-"):
            note_match = _NOTE.fullmatch(body[len("insertion-"):])
            if not note_match:
                raise ParseError("malformed insertion-note(...)",
                                 source=source_name, line=line_no)
            perf_id = _register_note(note_match, perf_specs, perf_ids,
                                     source_name, line_no)
            pairs.append(AlignmentPair("insertion", perf_id=perf_id))
        else:
            raise ParseError(f"unrecognized clause {line!r}",
                             source=source_name, line=line_no)

    seen_score = set()
    for record in snotes:
        if record.id in seen_score:
            raise IdentityError(f"duplicate score note id {record.id!r}")
        seen_score.add(record.id)

    ppq = int(info.get("midiClockUnits", DEFAULT_CLOCK_UNITS))
    rate = int(info.get("midiClockRate", DEFAULT_CLOCK_RATE))
    performance = PerformedPart(ppq=ppq)
    factor = rate / (ppq * 1_000_000)
    for note_id, pitch, on_tick, off_tick, velocity, channel, track in perf_specs:
        duration = max(off_tick - on_tick, 1) * factor
        performance.add_note(PerformedNote(
            note_id, on_tick * factor, duration, pitch, velocity, channel, track))
    performance.freeze()

    try:
        alignment = Alignment(pairs)
    except IdentityError:
        raise
    score = _reconstruct_score(snotes, info, sink)
    return performance, alignment, score


def _register_note(match: re.Match, specs, ids, source_name, line_no) -> str:
    note_id, pitch, on_tick, off_tick, velocity, channel, track = match.groups()
    if note_id in ids:
        raise IdentityError(f"duplicate performance note id {note_id!r}")
    ids.add(note_id)
    specs.append((note_id, int(pitch), int(on_tick), int(off_tick),
                  int(velocity), int(channel), int(track)))
    return note_id


def _reconstruct_score(snotes, info, sink) -> Optional[ScoreDocument]:
    ts_text = info.get("timeSignature", "")
    match = re.fullmatch(r"(\d+)/(\d+)", ts_text)
    if not match or not snotes:
        if snotes:
            sink.warn("header", "no timeSignature info; score not reconstructed")
        return None
    beats, beat_type = int(match.group(1)), int(match.group(2))
    unit = slow_beat_unit(beats, beat_type)  # quarters per slow beat

    base = min(record.onset_beats for record in snotes)
    quarters = [((record.onset_beats - base) * unit,
                 record.dur_beats * unit) for record in snotes]
    denominators = [q.denominator for pair in quarters for q in pair]
    dpq = lcm(*denominators) if denominators else 1

    part = Part("P1", divs_per_quarter=dpq)
    part.add(TimeSignature(beats, beat_type), 0)
    end_div = 0
    for record, (onset_q, dur_q) in zip(snotes, quarters):
        start = int(onset_q * dpq)
        end = start + int(dur_q * dpq)
        cls = GraceNote if "grace" in record.attrs else Note
        if cls is Note and end == start:
            cls = GraceNote
        part.add(cls(record.id, record.step, record.alter, record.octave),
                 start, end)
        end_div = max(end_div, end)

    # measures: an anacrusis span before the first downbeat, then tiling
    anchor_scaled = (0 - base) * unit * dpq
    anchor = int(anchor_scaled) if anchor_scaled.denominator == 1 else 0
    measure_span = int(beats * unit * dpq)
    number = min(record.measure for record in snotes)
    cursor = 0
    if anchor > 0:
        part.add(Measure(number), 0, min(anchor, max(end_div, anchor)))
        cursor = anchor
        number += 1
    while cursor < end_div:
        part.add(Measure(number), cursor, min(cursor + measure_span, end_div))
        cursor += measure_span
        number += 1
    part.freeze()
    return ScoreDocument(PartGroup("root", [part]), "match", sink.items)


def save_match(part: Optional[Part], performance: PerformedPart,
               alignment: Alignment, sink) -> None:
    """Serialize the alignment triple; reloading round-trips exactly."""
    performance.require_frozen()
    lines = [f"info(matchFileVersion,{MATCH_VERSION})."]
    ppq = performance.ppq
    rate = DEFAULT_CLOCK_RATE
    lines.append(f"info(midiClockUnits,{ppq}).")
    lines.append(f"info(midiClockRate,{rate}).")

    snote_text = {}
    if part is not None:
        signatures = part.time_signatures
        if signatures:
            first = signatures[0]
            lines.append(f"info(timeSignature,{first.beats}/{first.beat_type}).")
        snote_text = _score_clauses(part)

    perf_text = {}
    factor = ppq * 1_000_000 / rate  # seconds -> ticks
    for note in performance.notes:
        on_tick = round(note.onset_sec * factor)
        off_tick = round((note.onset_sec + note.duration_sec) * factor)
        perf_text[note.id] = (
            f"note({note.id},{note.midi_pitch},{on_tick},{off_tick},"
            f"{note.velocity},{note.channel},{note.track})")

    for pair in alignment:
        if pair.label in ("match", "ornament"):
            snote = snote_text.get(pair.score_id)
            note = perf_text.get(pair.perf_id)
            if snote is None or note is None:
                raise IdentityError(
                    f"unresolved ids in {pair.label} pair "
                    f"({pair.score_id!r}, {pair.perf_id!r})")
            lines.append(f"{snote}-{note}.")
        elif pair.label == "deletion":
            snote = snote_text.get(pair.score_id)
            if snote is None:
                raise IdentityError(f"unresolved score id {pair.score_id!r}")
            lines.append(f"{snote}-deletion.")
        else:
            note = perf_text.get(pair.perf_id)
            if note is None:
                raise IdentityError(f"unresolved performance id {pair.perf_id!r}")
            lines.append(f"insertion-{note}.")

    text = "\n".join(lines) + "\n"
    if hasattr(sink, "write"):
        try:
            sink.write(text)
        except TypeError:
            sink.write(text.encode("utf-8"))
    else:
        with open(sink, "w", encoding="utf-8") as handle:
            handle.write(text)


def _score_clauses(part: Part) -> dict[str, str]:
    """snote(...) text per note id (tied notes merged to one clause)."""
    bmap = beat_map(part, "slow")
    qmap = quarter_map(part)
    measures = part.measures
    clauses = {}
    for note, start, end in merged_note_spans(part):
        onset_b = bmap(qmap(start))
        offset_b = bmap(qmap(end))
        measure, beat, offset = _measure_beat(part, measures, start, bmap, qmap)
        attrs = ["grace"] if isinstance(note, GraceNote) else []
        clauses[note.id] = (
            f"snote({note.id},[{note.step},{note.alter}],{note.octave},"
            f"{measure}:{beat},{_format_rational(offset)},"
            f"{_format_rational(offset_b - onset_b)},"
            f"{_format_rational(onset_b)},{_format_rational(offset_b)},"
            f"[{','.join(attrs)}])")
    return clauses


def _measure_beat(part, measures, div, bmap, qmap):
    """1-based (measure number, beat in measure, fractional beat offset)."""
    measure = None
    for candidate in measures:
        if candidate.start.t <= div < max(candidate.end.t, candidate.start.t + 1):
            measure = candidate
            break
    if measure is None:
        return 1, 1, Fraction(0)
    beats_in = bmap(qmap(div)) - bmap(qmap(measure.start.t))
    whole = int(beats_in)
    return measure.number, whole + 1, beats_in - whole


# ---------------------------------------------------------------------------
# corresp files


def load_corresp(source, strict: bool = False, source_name: str = "") -> Alignment:
    """Parse a tab-separated corresp file into an Alignment.

    Column layout (10 columns): aligned note id, onset, sitch, pitch,
    onset velocity, then the same five for the reference note; '*' marks
    absence.  The aligned side is the performance, the reference side the
    score.
    """
    from . import read_bytes

    data, name = read_bytes(source)
    source_name = source_name or name
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"not UTF-8 text: {exc}", source=source_name) from exc

    alignment = Alignment()
    for row_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip()
        if not line or line.startswith("//"):
            continue
        cells = line.split("\t")
        while cells and cells[-1] == "":
            cells.pop()
        if len(cells) != 10:
            raise ParseError(f"expected 10 columns, got {len(cells)}",
                             source=source_name, line=row_no)
        align_id, ref_id = cells[0], cells[5]
        if align_id != "*" and ref_id != "*":
            alignment.append(AlignmentPair("match", score_id=ref_id,
                                           perf_id=align_id))
        elif ref_id == "*" and align_id != "*":
            alignment.append(AlignmentPair("insertion", perf_id=align_id))
        elif align_id == "*" and ref_id != "*":
            alignment.append(AlignmentPair("deletion", score_id=ref_id))
        else:
            raise ParseError("row with neither id", source=source_name,
                             line=row_no)
    return alignment
