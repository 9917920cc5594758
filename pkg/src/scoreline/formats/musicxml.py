"""MusicXML (partwise, uncompressed) import and export.

Supported element subset: part-list with nested part-groups, divisions,
notes (pitch, duration, chord, grace, voice, staff, tie), rests,
backup/forward, time and key signatures, barline repeats and endings,
slurs, words/metronome/dynamics directions, segno/coda/da-capo markers.
Everything else is skipped; in lenient mode each skip is recorded as a
warning, in strict mode it raises.
"""

from __future__ import annotations

import math
import re
import xml.etree.ElementTree as ET
from io import BytesIO
from typing import Optional

from ..document import ScoreDocument, WarningSink
from ..exceptions import EncodeError, ParseError
from ..model import (
    Directive,
    GraceNote,
    KeySignature,
    Measure,
    NavigationMark,
    Note,
    Part,
    PartGroup,
    Rest,
    Slur,
    TimeSignature,
)

DOCTYPE = ('<!DOCTYPE score-partwise PUBLIC "-//Recordare//DTD MusicXML 3.1 '
           'Partwise//EN" "http://www.musicxml.org/dtds/partwise.dtd">')

# elements that are pure layout/metadata noise: ignored without a warning
SILENT_ELEMENTS = {
    "print", "sound", "defaults", "credit", "identification", "work",
    "movement-title", "movement-number", "appearance", "attributes",
    "barline", "direction", "grouping", "bookmark", "link", "listening",
}

# dynamics vocabulary used to classify <words> as loudness directives
DYNAMIC_WORDS = {
    "p", "pp", "ppp", "pppp", "f", "ff", "fff", "ffff", "mp", "mf", "sf",
    "sfz", "fp", "fz", "rf", "rfz", "cresc.", "cresc", "crescendo",
    "dim.", "dim", "diminuendo", "decresc.", "decrescendo",
}

_DA_CAPO_RE = re.compile(r"\bd\.?\s*c\.?(\b|$)|da\s+capo", re.IGNORECASE)
_DAL_SEGNO_RE = re.compile(r"\bd\.?\s*s\.?(\b|$)|dal\s+segno", re.IGNORECASE)
_FINE_RE = re.compile(r"^\s*fine\s*$", re.IGNORECASE)
_TO_CODA_RE = re.compile(r"\bto\s+coda\b", re.IGNORECASE)
_CODA_RE = re.compile(r"^\s*coda\s*$", re.IGNORECASE)
_SEGNO_RE = re.compile(r"^\s*segno\s*$", re.IGNORECASE)


def _local(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def _text(elem: Optional[ET.Element], default: str = "") -> str:
    if elem is None or elem.text is None:
        return default
    return elem.text.strip()


def _int_text(parent: ET.Element, name: str, default: Optional[int] = None,
              location: str = "", sink: Optional[WarningSink] = None) -> Optional[int]:
    child = parent.find(name)
    if child is None or child.text is None:
        return default
    try:
        return int(child.text.strip())
    except ValueError:
        if sink is not None:
            sink.warn(location, f"non-integer <{name}> {child.text!r}")
        return default


def classify_words(text: str) -> Optional[str]:
    """Map a <words> text to a navigation kind, or None for a directive."""
    if _DA_CAPO_RE.search(text):
        return "da_capo"
    if _DAL_SEGNO_RE.search(text):
        return "dal_segno"
    if _FINE_RE.match(text):
        return "fine"
    if _TO_CODA_RE.search(text):
        return "to_coda"
    if _CODA_RE.match(text):
        return "coda"
    if _SEGNO_RE.match(text):
        return "segno"
    return None


def directive_kind(text: str) -> str:
    lowered = text.strip().lower()
    if lowered in DYNAMIC_WORDS:
        return "loudness"
    return "tempo"


# ---------------------------------------------------------------------------
# import


def _collect_divisions(root: ET.Element) -> int:
    values = []
    for elem in root.iter():
        if _local(elem.tag) == "divisions" and elem.text:
            try:
                values.append(int(elem.text.strip()))
            except ValueError:
                pass
    if not values:
        return 1
    return math.lcm(*values)


def _parse_part_list(root: ET.Element, sink: WarningSink) -> tuple[PartGroup, dict]:
    """Build the (possibly nested) group tree; parts are placeholders to be
    filled from the matching <part> elements."""
    part_list = root.find("part-list")
    order: dict[str, Part] = {}
    roots = PartGroup("root")
    stack = [roots]
    if part_list is None:
        sink.warn("part-list", "missing part-list; using <part> order")
        return roots, order
    for child in part_list:
        tag = _local(child.tag)
        if tag == "score-part":
            pid = child.get("id", f"P{len(order) + 1}")
            name = _text(child.find("part-name"))
            part = Part(pid, name=name)
            order[pid] = part
            stack[-1].append(part)
        elif tag == "part-group":
            if child.get("type") == "start":
                group = PartGroup(child.get("number", f"G{len(stack)}"))
                stack[-1].append(group)
                stack.append(group)
            elif len(stack) > 1:
                stack.pop()
        else:
            sink.warn("part-list", f"skipped element <{tag}>")
    return roots, order


class _PartReader:
    """Streams one <part> element into a Part."""

    def __init__(self, part: Part, dpq: int, sink: WarningSink):
        self.part = part
        self.dpq = dpq
        self.sink = sink
        self.factor = 1  # dpq // current source divisions
        self.cursor = 0
        self.measure_start = 0
        self.max_pos = 0
        self.measure_label = "?"
        self.prev_note_onset = 0
        self.prev_note_duration = 0
        self.staff_count = 1
        # deferred content, registered once ids/measure ends are known
        self.notes = []        # (onset, dur, Note-kwargs dict, explicit_id)
        self.rests = []        # (onset, dur, voice, staff, explicit_id)
        self.pending_barlines = []   # (kind, 'start'/'end', numbers) per measure
        self.open_endings = []       # (numbers, start_pos)
        self.open_slurs = {}         # number -> note index
        self.slur_pairs = []         # (start_idx, end_idx)
        self.open_ties = {}          # (pitch, voice) -> note index
        self.events = []             # (pos, TimedObject) point objects

    def loc(self) -> str:
        return f"part {self.part.id} measure {self.measure_label}"

    def scaled(self, raw: int) -> int:
        return raw * self.factor

    def read_measure(self, measure: ET.Element, number_fallback: int) -> None:
        self.measure_label = measure.get("number", str(number_fallback))
        self.measure_start = self.cursor
        self.max_pos = max(self.max_pos, self.cursor)
        barline_marks = []
        for child in measure:
            tag = _local(child.tag)
            if tag == "attributes":
                self._read_attributes(child)
            elif tag == "note":
                self._read_note(child)
            elif tag == "backup":
                self.cursor -= self.scaled(_int_text(child, "duration", 0))
                self.cursor = max(self.cursor, 0)
            elif tag == "forward":
                self._advance(self.scaled(_int_text(child, "duration", 0)))
            elif tag == "direction":
                self._read_direction(child)
            elif tag == "barline":
                barline_marks.append(child)
            elif tag in SILENT_ELEMENTS:
                pass
            else:
                self.sink.warn(self.loc(), f"skipped element <{tag}>")
        measure_end = max(self.max_pos, self.cursor, self.measure_start)
        self._read_barlines(barline_marks, measure_end)
        try:
            number = int(self.measure_label)
        except ValueError:
            number = number_fallback
        self.events.append((self.measure_start, Measure(number), measure_end))
        self.cursor = measure_end
        self.max_pos = measure_end

    def _advance(self, amount: int):
        self.cursor += amount
        self.max_pos = max(self.max_pos, self.cursor)

    def _read_attributes(self, attributes: ET.Element):
        for child in attributes:
            tag = _local(child.tag)
            if tag == "divisions":
                divisions = int(child.text.strip())
                self.factor = self.dpq // divisions
            elif tag == "time":
                beats = _int_text(child, "beats", None, self.loc(), self.sink)
                beat_type = _int_text(child, "beat-type", None, self.loc(), self.sink)
                if beats and beat_type:
                    self.events.append((self.cursor, TimeSignature(beats, beat_type), None))
                else:
                    self.sink.warn(self.loc(), "unreadable time signature")
            elif tag == "key":
                fifths = _int_text(child, "fifths", 0, self.loc(), self.sink)
                mode = _text(child.find("mode"), "major") or "major"
                if mode not in ("major", "minor"):
                    self.sink.warn(self.loc(), f"key mode {mode!r} read as major")
                    mode = "major"
                self.events.append((self.cursor, KeySignature(fifths, mode), None))
            elif tag == "staves":
                self.staff_count = int(child.text.strip())
            elif tag in ("clef", "transpose", "measure-style", "part-symbol",
                         "instruments", "staff-details"):
                pass
            else:
                self.sink.warn(self.loc(), f"skipped attribute <{tag}>")

    def _read_note(self, note: ET.Element):
        is_chord = note.find("chord") is not None
        is_grace = note.find("grace") is not None
        is_rest = note.find("rest") is not None
        if note.find("cue") is not None:
            self.sink.warn(self.loc(), "skipped cue note")
            return
        raw_duration = _int_text(note, "duration", 0)
        duration = self.scaled(raw_duration)
        voice = _int_text(note, "voice", 1)
        staff = _int_text(note, "staff", 1)
        explicit_id = note.get("id") or note.get("{http://www.w3.org/XML/1998/namespace}id")

        if is_chord:
            onset = self.prev_note_onset
        else:
            onset = self.cursor

        if is_rest:
            self.rests.append((onset, duration, voice, staff, explicit_id))
            if not is_chord:
                self._advance(duration)
                self.prev_note_onset = onset
                self.prev_note_duration = duration
            return

        pitch = note.find("pitch")
        if pitch is None:
            self.sink.warn(self.loc(), "skipped unpitched note")
            if not is_chord and not is_grace:
                self._advance(duration)
            return
        step = _text(pitch.find("step"), "C")
        alter = _int_text(pitch, "alter", 0)
        octave = _int_text(pitch, "octave", 4)

        tie = "none"
        tie_types = {t.get("type") for t in note.findall("tie")}
        if {"start", "stop"} <= tie_types:
            tie = "continue"
        elif "start" in tie_types:
            tie = "start"
        elif "stop" in tie_types:
            tie = "stop"

        index = len(self.notes)
        if is_grace:
            duration = 0
        self.notes.append({
            "onset": onset,
            "duration": duration,
            "step": step,
            "alter": alter,
            "octave": octave,
            "voice": voice,
            "staff": staff,
            "tie": tie,
            "grace": is_grace,
            "id": explicit_id,
        })

        notations = note.find("notations")
        if notations is not None:
            for item in notations:
                tag = _local(item.tag)
                if tag == "slur":
                    number = item.get("number", "1")
                    if item.get("type") == "start":
                        self.open_slurs[number] = index
                    elif item.get("type") == "stop":
                        start = self.open_slurs.pop(number, None)
                        if start is None:
                            self.sink.warn(self.loc(), "slur stop without start")
                        else:
                            self.slur_pairs.append((start, index))
                elif tag in ("tied", "articulations", "ornaments", "technical",
                             "fermata", "arpeggiate", "tuplet", "dynamics"):
                    pass
                else:
                    self.sink.warn(self.loc(), f"skipped notation <{tag}>")

        if not is_chord and not is_grace:
            self._advance(duration)
            self.prev_note_onset = onset
            self.prev_note_duration = duration
        elif is_grace and not is_chord:
            self.prev_note_onset = onset
            self.prev_note_duration = 0

    def _read_direction(self, direction: ET.Element):
        sound = direction.find("sound")
        if sound is not None:
            for attr, kind in (("dacapo", "da_capo"), ("dalsegno", "dal_segno"),
                               ("fine", "fine"), ("segno", "segno"),
                               ("coda", "coda"), ("tocoda", "to_coda")):
                if sound.get(attr) is not None:
                    self.events.append((self.cursor, NavigationMark(kind), None))
                    return
            if sound.get("tempo"):
                self.events.append(
                    (self.cursor, Directive("tempo", f"tempo={sound.get('tempo')}"), None))
                return
        for dtype in direction.findall("direction-type"):
            for item in dtype:
                tag = _local(item.tag)
                if tag == "words":
                    text = (item.text or "").strip()
                    if not text:
                        continue
                    nav = classify_words(text)
                    if nav is not None:
                        self.events.append((self.cursor, NavigationMark(nav), None))
                    else:
                        self.events.append(
                            (self.cursor, Directive(directive_kind(text), text), None))
                elif tag == "metronome":
                    unit = _text(item.find("beat-unit"), "quarter")
                    per_minute = _text(item.find("per-minute"), "")
                    if per_minute:
                        self.events.append(
                            (self.cursor, Directive("tempo", f"{unit}={per_minute}"), None))
                elif tag == "segno":
                    self.events.append((self.cursor, NavigationMark("segno"), None))
                elif tag == "coda":
                    self.events.append((self.cursor, NavigationMark("coda"), None))
                elif tag == "dynamics":
                    marks = [_local(d.tag) for d in item]
                    if marks:
                        self.events.append(
                            (self.cursor, Directive("loudness", marks[0]), None))
                else:
                    self.sink.warn(self.loc(), f"skipped direction <{tag}>")

    def _read_barlines(self, barlines: list[ET.Element], measure_end: int):
        for barline in barlines:
            location = barline.get("location", "right")
            pos = self.measure_start if location == "left" else measure_end
            repeat = barline.find("repeat")
            if repeat is not None:
                if repeat.get("direction") == "forward":
                    self.events.append((pos, NavigationMark("repeat_start"), None))
                elif repeat.get("direction") == "backward":
                    self.events.append((pos, NavigationMark("repeat_end"), None))
            ending = barline.find("ending")
            if ending is not None:
                numbers = _parse_ending_numbers(ending.get("number", "1"))
                etype = ending.get("type")
                if etype == "start":
                    self.open_endings.append((numbers, self.measure_start))
                elif etype in ("stop", "discontinue"):
                    if self.open_endings:
                        nums, start_pos = self.open_endings.pop()
                        self.events.append(
                            (start_pos, NavigationMark("volta", nums), measure_end))
                    else:
                        self.sink.warn(self.loc(), "ending stop without start")

    def finish(self):
        """Register all deferred content on the part."""
        part = self.part
        part.staff_count = max(part.staff_count, self.staff_count)
        used = {spec["id"] for spec in self.notes if spec["id"]}
        used.update(r[4] for r in self.rests if r[4])

        order = sorted(
            range(len(self.notes)),
            key=lambda i: (self.notes[i]["onset"],
                           _spec_pitch(self.notes[i]), i))
        counter = 1
        for i in order:
            spec = self.notes[i]
            if spec["id"] is None:
                while f"n{counter}" in used:
                    counter += 1
                spec["id"] = f"n{counter}"
                used.add(spec["id"])
                counter += 1

        note_objs = []
        for spec in self.notes:
            cls = GraceNote if spec["grace"] else Note
            note = cls(spec["id"], spec["step"], spec["alter"], spec["octave"],
                       voice=spec["voice"], staff=spec["staff"], tie=spec["tie"])
            part.add(note, spec["onset"], spec["onset"] + spec["duration"])
            note_objs.append(note)

        rest_counter = 1
        for onset, duration, voice, staff, explicit in self.rests:
            if explicit is None:
                while f"r{rest_counter}" in used:
                    rest_counter += 1
                explicit = f"r{rest_counter}"
                used.add(explicit)
                rest_counter += 1
            part.add(Rest(explicit, voice=voice, staff=staff), onset, onset + duration)

        for pos, obj, end in self.events:
            part.add(obj, pos, end if end is not None else pos)

        for start_idx, end_idx in self.slur_pairs:
            a, b = note_objs[start_idx], note_objs[end_idx]
            part.add(Slur(a.id, b.id), a.start.t, b.end.t)
        for number in self.open_slurs:
            self.sink.warn(self.loc(), f"unterminated slur {number}")
        for nums, _pos in self.open_endings:
            self.sink.warn(self.loc(), f"unterminated ending {sorted(nums)}")


def _spec_pitch(spec: dict) -> int:
    from ..model import midi_pitch_of

    return midi_pitch_of(spec["step"], spec["alter"], spec["octave"])


def _parse_ending_numbers(text: str) -> frozenset[int]:
    numbers = set()
    for token in re.split(r"[,\s]+", text.strip()):
        if token:
            try:
                numbers.add(int(token))
            except ValueError:
                pass
    return frozenset(numbers or {1})


def load_musicxml(source, strict: bool = False, source_name: str = "") -> ScoreDocument:
    """Parse a partwise MusicXML document into a ScoreDocument."""
    from . import read_bytes

    data, name = read_bytes(source)
    source_name = source_name or name
    sink = WarningSink(strict=strict, source=source_name)
    try:
        root = ET.parse(BytesIO(data)).getroot()
    except ET.ParseError as exc:
        line, column = exc.position
        raise ParseError(f"malformed XML: {exc.msg if hasattr(exc, 'msg') else exc}",
                         source=source_name, line=line, column=column) from exc
    if _local(root.tag) != "score-partwise":
        raise ParseError(f"expected score-partwise root, got <{_local(root.tag)}>",
                         source=source_name)

    dpq = _collect_divisions(root)
    group_root, placeholders = _parse_part_list(root, sink)

    for part_elem in root.findall("part"):
        pid = part_elem.get("id", "")
        part = placeholders.get(pid)
        if part is None:
            part = Part(pid or f"P{len(placeholders) + 1}")
            group_root.append(part)
            placeholders[part.id] = part
        part.set_quarter_divisions(0, dpq)
        reader = _PartReader(part, dpq, sink)
        for index, measure in enumerate(part_elem.findall("measure"), start=1):
            reader.read_measure(measure, index)
        reader.finish()
        part.freeze()

    return ScoreDocument(group_root, "musicxml", sink.items)


# ---------------------------------------------------------------------------
# export


def _duration_type(duration_div: int, dpq: int) -> Optional[str]:
    names = {4: "whole", 2: "half", 1: "quarter"}
    quarters = duration_div / dpq
    if quarters in names:
        return names[quarters]
    for denom, name in ((2, "eighth"), (4, "16th"), (8, "32nd"), (16, "64th")):
        if quarters == 1 / denom:
            return name
    return None


def _pitch_element(note: Note) -> ET.Element:
    pitch = ET.Element("pitch")
    ET.SubElement(pitch, "step").text = note.step
    if note.alter:
        ET.SubElement(pitch, "alter").text = str(note.alter)
    ET.SubElement(pitch, "octave").text = str(note.octave)
    return pitch


def save_musicxml(doc, sink) -> None:
    """Serialize a ScoreDocument (or single Part) as partwise MusicXML.

    Reloading the emission reproduces the note array and the measure and
    signature lists.
    """
    if isinstance(doc, Part):
        doc = ScoreDocument(PartGroup("root", [doc]), "musicxml")

    root = ET.Element("score-partwise", version="3.1")
    part_list = ET.SubElement(root, "part-list")
    _write_group(part_list, doc.parts, top=True)
    for part in doc.iter_parts():
        _write_part(root, part)

    ET.indent(root)
    payload = ET.tostring(root, encoding="unicode")
    text = f'<?xml version="1.0" encoding="UTF-8"?>\n{DOCTYPE}\n{payload}\n'
    if hasattr(sink, "write"):
        data = text.encode("utf-8") if "b" in getattr(sink, "mode", "b") else text
        try:
            sink.write(data)
        except TypeError:
            sink.write(text)
    else:
        with open(sink, "w", encoding="utf-8") as handle:
            handle.write(text)


def _write_group(parent: ET.Element, group: PartGroup, top: bool = False):
    for child in group.children:
        if isinstance(child, Part):
            score_part = ET.SubElement(parent, "score-part", id=child.id)
            ET.SubElement(score_part, "part-name").text = child.name or child.id
        else:
            ET.SubElement(parent, "part-group",
                          {"type": "start", "number": str(child.id)})
            _write_group(parent, child)
            ET.SubElement(parent, "part-group",
                          {"type": "stop", "number": str(child.id)})


class _Span:
    """Stand-in measure for parts built without Measure objects."""

    class _Point:
        def __init__(self, t):
            self.t = t

    def __init__(self, start, end, number=1):
        self.start = self._Point(start)
        self.end = self._Point(end)
        self.number = number


def _write_part(root: ET.Element, part: Part):
    for note in part.iter_all(Note):
        if not 0 <= note.midi_pitch <= 127:
            raise EncodeError(f"note {note.id} pitch outside MIDI range")
    part_elem = ET.SubElement(root, "part", id=part.id)
    dpq = part.divs_per_quarter
    measures = part.measures
    if not measures:
        measures = [_Span(0, part.last_div)]

    notes = sorted(part.iter_all(Note), key=lambda n: (n.start.t, n.voice, n.midi_pitch, n.id))
    rests = sorted(part.iter_all(Rest), key=lambda r: (r.start.t, r.voice, r.id))
    signatures = part.time_signatures
    keys = part.key_signatures
    directives = part.directives
    marks = [m for m in part.navigation_marks]
    slur_starts = {}
    slur_stops = {}
    for number, slur in enumerate(part.slurs, start=1):
        slur_starts.setdefault(slur.start_note_id, []).append(number)
        slur_stops.setdefault(slur.end_note_id, []).append(number)

    for index, measure in enumerate(measures):
        m_start, m_end = measure.start.t, measure.end.t
        measure_elem = ET.SubElement(part_elem, "measure", number=str(measure.number))

        attributes = ET.Element("attributes")
        if index == 0:
            ET.SubElement(attributes, "divisions").text = str(dpq)
        for key in keys:
            if m_start <= key.start.t < m_end or (key.start.t == m_start == m_end):
                key_elem = ET.SubElement(attributes, "key")
                ET.SubElement(key_elem, "fifths").text = str(key.fifths)
                ET.SubElement(key_elem, "mode").text = key.mode
        for sig in signatures:
            if m_start <= sig.start.t < m_end or sig.start.t == m_start:
                if any(_local(c.tag) == "time" for c in attributes):
                    continue
                time_elem = ET.SubElement(attributes, "time")
                ET.SubElement(time_elem, "beats").text = str(sig.beats)
                ET.SubElement(time_elem, "beat-type").text = str(sig.beat_type)
        if index == 0 and part.staff_count > 1:
            ET.SubElement(attributes, "staves").text = str(part.staff_count)
        if len(attributes):
            measure_elem.append(attributes)

        for mark in marks:
            if mark.kind == "repeat_start" and mark.start.t == m_start:
                barline = ET.SubElement(measure_elem, "barline", location="left")
                ET.SubElement(barline, "repeat", direction="forward")
            if mark.kind == "volta" and mark.start.t == m_start:
                barline = ET.SubElement(measure_elem, "barline", location="left")
                ET.SubElement(barline, "ending", {
                    "number": ",".join(str(n) for n in sorted(mark.volta_numbers)),
                    "type": "start"})

        last = index == len(measures) - 1
        point_events = []
        for directive in directives:
            if m_start <= directive.start.t < m_end or (last and directive.start.t == m_end):
                point_events.append((directive.start.t, _direction_element(directive)))
        for mark in marks:
            if mark.kind in ("segno", "coda", "fine", "da_capo", "dal_segno", "to_coda"):
                if m_start <= mark.start.t < m_end or (last and mark.start.t == m_end):
                    point_events.append((mark.start.t, _navigation_element(mark)))
        point_events.sort(key=lambda item: item[0])

        _write_measure_content(measure_elem, part, notes, rests, m_start, m_end,
                               slur_starts, slur_stops, dpq, last, point_events)

        for mark in marks:
            if mark.kind == "repeat_end" and mark.end.t == m_end:
                barline = ET.SubElement(measure_elem, "barline", location="right")
                ET.SubElement(barline, "repeat", direction="backward")
            if mark.kind == "volta" and mark.end.t == m_end:
                barline = ET.SubElement(measure_elem, "barline", location="right")
                ET.SubElement(barline, "ending", {
                    "number": ",".join(str(n) for n in sorted(mark.volta_numbers)),
                    "type": "stop"})


def _direction_element(directive: Directive) -> ET.Element:
    direction = ET.Element("direction")
    dtype = ET.SubElement(direction, "direction-type")
    ET.SubElement(dtype, "words").text = directive.text
    return direction


_NAV_WORDS = {
    "fine": "Fine",
    "da_capo": "D.C.",
    "dal_segno": "D.S.",
    "to_coda": "To Coda",
}


def _navigation_element(mark: NavigationMark) -> ET.Element:
    direction = ET.Element("direction")
    dtype = ET.SubElement(direction, "direction-type")
    if mark.kind == "segno":
        ET.SubElement(dtype, "segno")
    elif mark.kind == "coda":
        ET.SubElement(dtype, "coda")
    else:
        ET.SubElement(dtype, "words").text = _NAV_WORDS[mark.kind]
    return direction


def _write_measure_content(measure_elem, part, notes, rests, m_start, m_end,
                           slur_starts, slur_stops, dpq, last=False,
                           point_events=()):
    events = [n for n in notes if m_start <= n.start.t < m_end
              or (last and n.start.t == m_end)]
    rest_events = [r for r in rests if m_start <= r.start.t < m_end]
    voices = sorted({e.voice for e in events} | {e.voice for e in rest_events})
    pending = list(point_events)

    def flush(upto, cursor):
        """Emit pending directions up to position ``upto``, repositioning the
        cursor with forward/backup so they re-import at the same div."""
        while pending and pending[0][0] <= upto:
            pos, element = pending.pop(0)
            if pos > cursor:
                forward = ET.SubElement(measure_elem, "forward")
                ET.SubElement(forward, "duration").text = str(pos - cursor)
                cursor = pos
            elif pos < cursor:
                backup = ET.SubElement(measure_elem, "backup")
                ET.SubElement(backup, "duration").text = str(cursor - pos)
                cursor = pos
            measure_elem.append(element)
        return cursor

    if not voices:
        cursor = flush(m_end, m_start)
        if m_end > cursor:
            forward = ET.SubElement(measure_elem, "forward")
            ET.SubElement(forward, "duration").text = str(m_end - cursor)
        return
    cursor = m_start
    for vi, voice in enumerate(voices):
        if vi > 0 and cursor > m_start:
            backup = ET.SubElement(measure_elem, "backup")
            ET.SubElement(backup, "duration").text = str(cursor - m_start)
            cursor = m_start
        items = sorted([e for e in events if e.voice == voice]
                       + [r for r in rest_events if r.voice == voice],
                       key=lambda e: (e.start.t,
                                      not isinstance(e, GraceNote),
                                      getattr(e, "midi_pitch", -1), e.id))
        prev_onset = None
        for item in items:
            onset = item.start.t
            is_grace = isinstance(item, GraceNote)
            chord = (isinstance(item, Note) and not is_grace and prev_onset == onset)
            if vi == 0 and not chord:
                cursor = flush(onset, cursor)
            if not chord:
                if onset > cursor:
                    forward = ET.SubElement(measure_elem, "forward")
                    ET.SubElement(forward, "duration").text = str(onset - cursor)
                    cursor = onset
                elif onset < cursor:
                    backup = ET.SubElement(measure_elem, "backup")
                    ET.SubElement(backup, "duration").text = str(cursor - onset)
                    cursor = onset
            note_elem = ET.SubElement(measure_elem, "note", id=str(item.id))
            if chord:
                ET.SubElement(note_elem, "chord")
            if is_grace:
                ET.SubElement(note_elem, "grace")
            if isinstance(item, Note):
                note_elem.append(_pitch_element(item))
                if not is_grace:
                    ET.SubElement(note_elem, "duration").text = str(item.duration_div)
                if item.tie in ("stop", "continue"):
                    ET.SubElement(note_elem, "tie", type="stop")
                if item.tie in ("start", "continue"):
                    ET.SubElement(note_elem, "tie", type="start")
            else:
                ET.SubElement(note_elem, "rest")
                ET.SubElement(note_elem, "duration").text = str(item.duration_div)
            ET.SubElement(note_elem, "voice").text = str(item.voice)
            if isinstance(item, Note) and not is_grace:
                type_name = _duration_type(item.duration_div, dpq)
                if type_name:
                    ET.SubElement(note_elem, "type").text = type_name
            if part.staff_count > 1:
                ET.SubElement(note_elem, "staff").text = str(item.staff)
            if isinstance(item, Note):
                numbers_start = slur_starts.get(item.id, [])
                numbers_stop = slur_stops.get(item.id, [])
                if numbers_start or numbers_stop:
                    notations = ET.SubElement(note_elem, "notations")
                    for number in numbers_stop:
                        ET.SubElement(notations, "slur",
                                      {"number": str(number), "type": "stop"})
                    for number in numbers_start:
                        ET.SubElement(notations, "slur",
                                      {"number": str(number), "type": "start"})
            if not chord and not is_grace:
                cursor = onset + item.duration_div
                prev_onset = onset if isinstance(item, Note) else None
        if vi == 0:
            cursor = flush(m_end, cursor)
    if cursor < m_end:
        forward = ET.SubElement(measure_elem, "forward")
        ET.SubElement(forward, "duration").text = str(m_end - cursor)
