"""MEI (common music notation subset) import.

Supported subset: scoreDef/staffDef (labels, meter, key), section, measure
with staff/layer content, note/rest/chord/space/mRest with
@dur/@dots/@oct/@pname/@accid, grace notes, beams (transparent), simple
tuplets, @tie attributes and tie elements, slurs by startid/endid, repeat
barlines (@left/@right) and ending elements (voltas), tempo/dynam
directives.  xml:id values become note ids.  Everything else warns.
"""

from __future__ import annotations

import math
import xml.etree.ElementTree as ET
from fractions import Fraction
from io import BytesIO

from ..document import ScoreDocument, WarningSink
from ..exceptions import ParseError
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
    generate_note_ids,
    midi_pitch_of,
)

XML_ID = "{http://www.w3.org/XML/1998/namespace}id"

DUR_QUARTERS = {"long": Fraction(16), "breve": Fraction(8), "1": Fraction(4),
                "2": Fraction(2), "4": Fraction(1), "8": Fraction(1, 2),
                "16": Fraction(1, 4), "32": Fraction(1, 8),
                "64": Fraction(1, 16), "128": Fraction(1, 32)}

ACCID_ALTER = {"s": 1, "f": -1, "ss": 2, "x": 2, "ff": -2, "n": 0}

SHARP_ORDER = "FCGDAEB"
FLAT_ORDER = "BEADGCF"


def _local(tag) -> str:
    return tag.rsplit("}", 1)[-1] if isinstance(tag, str) else ""


def _key_sig_fifths(text: str):
    """@key.sig / @keysig value like '2s', '3f', or '0'."""
    text = text.strip()
    if text in ("0", ""):
        return 0
    try:
        count = int(text[:-1])
    except ValueError:
        return None
    if text.endswith("s"):
        return count
    if text.endswith("f"):
        return -count
    return None


def _signature_alter(step: str, fifths: int) -> int:
    if fifths > 0 and step in SHARP_ORDER[:fifths]:
        return 1
    if fifths < 0 and step in FLAT_ORDER[:-fifths]:
        return -1
    return 0


def _dots_factor(base: Fraction, dots: int) -> Fraction:
    value = base
    increment = base
    for _ in range(dots):
        increment /= 2
        value += increment
    return value


class _MeiReader:
    def __init__(self, sink: WarningSink):
        self.sink = sink
        self.staves: dict[str, dict] = {}  # staff n -> accumulators
        self.staff_order: list[str] = []
        self.position = Fraction(0)      # current measure start, quarters
        self.measures = []               # (start, end, number)
        self.repeats = []                # (pos, kind)
        self.voltas = []                 # (start, end, numbers)
        self.signatures = []             # (pos, beats, beat_type)
        self.key_signatures = []         # (pos, fifths, mode)
        self.directives = []             # (pos, kind, text)
        self.slur_refs = []              # (startid, endid)
        self.tie_refs = []               # (startid, endid)
        self.meter = None                # (beats, beat_type)
        self.fifths = 0
        self.measure_count = 0

    def staff_bucket(self, n: str) -> dict:
        if n not in self.staves:
            self.staves[n] = {"label": "", "notes": [], "rests": []}
            self.staff_order.append(n)
        return self.staves[n]

    # -- scoreDef ----------------------------------------------------

    def read_scoredef(self, elem: ET.Element):
        beats = elem.get("meter.count")
        unit = elem.get("meter.unit")
        if beats and unit:
            try:
                self.meter = (int(beats), int(unit))
                self.signatures.append((self.position, *self.meter))
            except ValueError:
                self.sink.warn("scoreDef", "unreadable meter attributes")
        sig = elem.get("key.sig") or elem.get("keysig")
        if sig is not None:
            fifths = _key_sig_fifths(sig)
            if fifths is None or not -7 <= fifths <= 7:
                self.sink.warn("scoreDef", f"unreadable key signature {sig!r}")
            else:
                mode = elem.get("key.mode") or elem.get("keymode") or "major"
                if mode not in ("major", "minor"):
                    mode = "major"
                self.fifths = fifths
                self.key_signatures.append((self.position, fifths, mode))
        for staffdef in elem.iter():
            if _local(staffdef.tag) != "staffDef":
                continue
            n = staffdef.get("n", str(len(self.staff_order) + 1))
            bucket = self.staff_bucket(n)
            label = staffdef.get("label", "")
            if not label:
                label_elem = next((c for c in staffdef if _local(c.tag) == "label"), None)
                if label_elem is not None:
                    label = "".join(label_elem.itertext()).strip()
            if label:
                bucket["label"] = label
            sig = staffdef.get("key.sig") or staffdef.get("keysig")
            if sig is not None:
                fifths = _key_sig_fifths(sig)
                if fifths is not None:
                    self.fifths = fifths

    # -- measures ----------------------------------------------------

    def read_measure(self, elem: ET.Element, volta_numbers=None):
        self.measure_count += 1
        start = self.position
        nominal = None
        if self.meter:
            beats, beat_type = self.meter
            nominal = beats * Fraction(4, beat_type)
        spans = []
        for child in elem:
            tag = _local(child.tag)
            if tag == "staff":
                n = child.get("n", "1")
                bucket = self.staff_bucket(n)
                for voice, layer in enumerate(
                        (c for c in child if _local(c.tag) == "layer"), start=1):
                    cursor = self._read_layer(layer, bucket, start, voice, nominal)
                    spans.append(cursor - start)
            elif tag == "slur":
                self._ref_pair(child, self.slur_refs)
            elif tag == "tie":
                self._ref_pair(child, self.tie_refs)
            elif tag == "tempo":
                text = "".join(child.itertext()).strip()
                if text:
                    self.directives.append((start, "tempo", text))
            elif tag == "dynam":
                text = "".join(child.itertext()).strip()
                if text:
                    self.directives.append((start, "loudness", text))
            elif tag in ("dir", "fermata", "harm", "pedal", "breath", "mordent",
                         "trill", "turn", "arpeg", "hairpin"):
                self.sink.warn(f"measure {self.measure_count}",
                               f"skipped element <{tag}>")
        span = max(spans, default=None)
        if span is None or span == 0:
            span = nominal if nominal is not None else Fraction(0)
        end = start + span
        number = elem.get("n", str(self.measure_count))
        try:
            number = int(number)
        except ValueError:
            number = self.measure_count
        self.measures.append((start, end, number))

        left = elem.get("left")
        right = elem.get("right")
        if left in ("rptstart", "rptboth"):
            self.repeats.append((start, "repeat_start"))
        if right in ("rptend", "rptboth"):
            self.repeats.append((end, "repeat_end"))
        if right == "rptstart":
            self.repeats.append((end, "repeat_start"))
        if volta_numbers:
            self.voltas.append((start, end, volta_numbers))
        self.position = end

    def _ref_pair(self, elem, bucket):
        startid = (elem.get("startid") or "").lstrip("#")
        endid = (elem.get("endid") or "").lstrip("#")
        if startid and endid:
            bucket.append((startid, endid))
        else:
            self.sink.warn(f"measure {self.measure_count}",
                           f"<{_local(elem.tag)}> without startid/endid skipped")

    def _read_layer(self, layer, bucket, cursor, voice, nominal,
                    tuplet_factor=Fraction(1)) -> Fraction:
        for child in layer:
            tag = _local(child.tag)
            if tag == "note":
                cursor = self._read_note(child, bucket, cursor, voice,
                                         tuplet_factor, None)
            elif tag == "chord":
                cursor = self._read_chord(child, bucket, cursor, voice, tuplet_factor)
            elif tag == "rest":
                duration = self._duration(child, tuplet_factor)
                if duration is not None:
                    bucket["rests"].append((cursor, duration, voice,
                                            child.get(XML_ID)))
                    cursor += duration
            elif tag == "space":
                duration = self._duration(child, tuplet_factor)
                if duration is not None:
                    cursor += duration
            elif tag == "mRest":
                if nominal is None:
                    self.sink.warn(f"measure {self.measure_count}",
                                   "mRest without a meter; skipped")
                else:
                    bucket["rests"].append((cursor, nominal, voice,
                                            child.get(XML_ID)))
                    cursor += nominal
            elif tag == "beam":
                cursor = self._read_layer(child, bucket, cursor, voice, nominal,
                                          tuplet_factor)
            elif tag == "tuplet":
                cursor = self._read_tuplet(child, bucket, cursor, voice, nominal,
                                           tuplet_factor)
            elif tag in ("clef", "accid", "artic", "barLine"):
                pass
            else:
                self.sink.warn(f"measure {self.measure_count}",
                               f"skipped layer element <{tag}>")
        return cursor

    def _read_tuplet(self, elem, bucket, cursor, voice, nominal, outer_factor):
        if outer_factor != 1:
            self.sink.warn(f"measure {self.measure_count}",
                           "nested tuplet; inner ratio ignored")
            return self._read_layer(elem, bucket, cursor, voice, nominal,
                                    outer_factor)
        try:
            num = int(elem.get("num", "3"))
            numbase = int(elem.get("numbase", "2"))
            factor = Fraction(numbase, num)
        except (ValueError, ZeroDivisionError):
            self.sink.warn(f"measure {self.measure_count}", "unreadable tuplet ratio")
            factor = Fraction(1)
        return self._read_layer(elem, bucket, cursor, voice, nominal, factor)

    def _duration(self, elem, tuplet_factor, inherit=None):
        dur = elem.get("dur")
        if dur is None:
            if inherit is not None:
                return inherit
            self.sink.warn(f"measure {self.measure_count}",
                           f"<{_local(elem.tag)}> without @dur skipped")
            return None
        base = DUR_QUARTERS.get(dur)
        if base is None:
            self.sink.warn(f"measure {self.measure_count}",
                           f"unsupported @dur {dur!r}; element skipped")
            return None
        dots = int(elem.get("dots", "0") or 0)
        return _dots_factor(base, dots) * tuplet_factor

    def _read_note(self, elem, bucket, cursor, voice, tuplet_factor,
                   chord_duration, advance=True):
        duration = self._duration(elem, tuplet_factor, inherit=chord_duration)
        if duration is None:
            return cursor
        grace = elem.get("grace") is not None
        step = (elem.get("pname") or "c").upper()
        if step not in "ABCDEFG":
            self.sink.warn(f"measure {self.measure_count}",
                           f"bad pname {elem.get('pname')!r}; note skipped")
            return cursor
        octave = int(elem.get("oct", "4"))
        accid = elem.get("accid")
        if accid is None:
            accid_child = next((c for c in elem if _local(c.tag) == "accid"), None)
            if accid_child is not None:
                accid = accid_child.get("accid") or accid_child.get("accid.ges")
        if accid is None:
            accid = elem.get("accid.ges")
        if accid is not None:
            alter = ACCID_ALTER.get(accid)
            if alter is None:
                self.sink.warn(f"measure {self.measure_count}",
                               f"unsupported accidental {accid!r} read as natural")
                alter = 0
        else:
            alter = _signature_alter(step, self.fifths)
        tie = {"i": "start", "m": "continue", "t": "stop"}.get(elem.get("tie"), "none")
        if grace:
            duration = Fraction(0)
        bucket["notes"].append((cursor, duration, step, alter, octave, tie,
                                grace, voice, elem.get(XML_ID)))
        if advance and not grace:
            return cursor + duration
        return cursor

    def _read_chord(self, elem, bucket, cursor, voice, tuplet_factor):
        duration = self._duration(elem, tuplet_factor)
        if duration is None:
            return cursor
        grace = elem.get("grace") is not None
        for child in elem:
            if _local(child.tag) == "note":
                if grace and child.get("grace") is None:
                    child.set("grace", "unacc")
                self._read_note(child, bucket, cursor, voice, tuplet_factor,
                                duration, advance=False)
        return cursor if grace else cursor + duration


def load_mei(source, strict: bool = False, source_name: str = "") -> ScoreDocument:
    """Parse an MEI document (CMN subset) into a ScoreDocument."""
    from . import read_bytes

    data, name = read_bytes(source)
    source_name = source_name or name
    sink = WarningSink(strict=strict, source=source_name)
    try:
        root = ET.parse(BytesIO(data)).getroot()
    except ET.ParseError as exc:
        line, column = exc.position
        raise ParseError(f"malformed XML: {exc}", source=source_name,
                         line=line, column=column) from exc
    if _local(root.tag) != "mei":
        raise ParseError(f"expected mei root, got <{_local(root.tag)}>",
                         source=source_name)

    score = None
    for elem in root.iter():
        if _local(elem.tag) == "score":
            score = elem
            break
    if score is None:
        raise ParseError("no <score> element", source=source_name)

    reader = _MeiReader(sink)
    _walk_score(score, reader, sink)

    return _finalize(reader, sink)


def _walk_score(elem, reader: _MeiReader, sink: WarningSink, volta=None):
    for child in elem:
        tag = _local(child.tag)
        if tag == "scoreDef":
            reader.read_scoredef(child)
        elif tag == "section":
            _walk_score(child, reader, sink, volta)
        elif tag == "ending":
            numbers = _ending_numbers(child.get("n", "1"))
            _walk_score(child, reader, sink, numbers)
        elif tag == "measure":
            reader.read_measure(child, volta)
        elif tag in ("pb", "sb", "pgHead", "pgFoot"):
            pass
        else:
            sink.warn("score", f"skipped element <{tag}>")


def _ending_numbers(text: str) -> frozenset[int]:
    numbers = set()
    for token in text.replace(",", " ").split():
        if "-" in token:
            try:
                lo, hi = token.split("-", 1)
                numbers.update(range(int(lo), int(hi) + 1))
            except ValueError:
                pass
        else:
            try:
                numbers.add(int(token))
            except ValueError:
                pass
    return frozenset(numbers or {1})


def _finalize(reader: _MeiReader, sink: WarningSink) -> ScoreDocument:
    denominators = []
    for bucket in reader.staves.values():
        for onset, dur, *_rest in bucket["notes"]:
            denominators.extend((onset.denominator, dur.denominator))
        for onset, dur, _voice, _id in bucket["rests"]:
            denominators.extend((onset.denominator, dur.denominator))
    for start, end, _n in reader.measures:
        denominators.extend((start.denominator, end.denominator))
    dpq = math.lcm(*denominators) if denominators else 1

    def to_div(q: Fraction) -> int:
        return int(q * dpq)

    # voltas merge adjacent measures under the same ending
    merged_voltas = []
    for start, end, numbers in sorted(reader.voltas):
        if merged_voltas and merged_voltas[-1][1] == start \
                and merged_voltas[-1][2] == numbers:
            merged_voltas[-1] = (merged_voltas[-1][0], end, numbers)
        else:
            merged_voltas.append((start, end, numbers))

    root = PartGroup("root")
    note_lookup = {}
    for index, n in enumerate(reader.staff_order, start=1):
        bucket = reader.staves[n]
        part = Part(f"P{index}", name=bucket["label"], divs_per_quarter=dpq)
        specs = bucket["notes"]
        generated = generate_note_ids([
            (to_div(spec[0]), midi_pitch_of(spec[2], spec[3], spec[4]))
            for spec in specs])
        used = {spec[8] for spec in specs if spec[8]}
        note_objs = []
        for auto_id, (onset, dur, step, alter, octave, tie, grace, voice,
                      explicit) in zip(generated, specs):
            note_id = explicit
            if note_id is None:
                note_id = auto_id
                while note_id in used:
                    note_id += "x"
                used.add(note_id)
            cls = GraceNote if grace else Note
            note = cls(note_id, step, alter, octave, voice=voice, tie=tie)
            part.add(note, to_div(onset), to_div(onset + dur))
            note_objs.append(note)
            note_lookup[note_id] = (part, note)
        for k, (onset, dur, voice, explicit) in enumerate(bucket["rests"], start=1):
            rest_id = explicit or f"r{k}"
            part.add(Rest(rest_id, voice=voice), to_div(onset), to_div(onset + dur))
        for pos, beats, beat_type in reader.signatures:
            part.add(TimeSignature(beats, beat_type), to_div(pos))
        for pos, fifths, mode in reader.key_signatures:
            part.add(KeySignature(fifths, mode), to_div(pos))
        for pos, kind, text in reader.directives:
            part.add(Directive(kind, text), to_div(pos))
        for pos, kind in reader.repeats:
            part.add(NavigationMark(kind), to_div(pos))
        for start, end, numbers in merged_voltas:
            part.add(NavigationMark("volta", numbers), to_div(start), to_div(end))
        for start, end, number in reader.measures:
            if end > start:
                part.add(Measure(number), to_div(start), to_div(end))
        root.append(part)

    for startid, endid in reader.tie_refs:
        if startid in note_lookup and endid in note_lookup:
            _part, start_note = note_lookup[startid]
            _part2, end_note = note_lookup[endid]
            start_note.tie = "continue" if start_note.tie == "stop" else "start"
            end_note.tie = "continue" if end_note.tie == "start" else "stop"
        else:
            sink.warn("tie", f"unresolved tie reference {startid!r}/{endid!r}")
    for startid, endid in reader.slur_refs:
        if startid in note_lookup and endid in note_lookup:
            part, start_note = note_lookup[startid]
            part2, end_note = note_lookup[endid]
            if part is part2:
                part.add(Slur(startid, endid), start_note.start.t, end_note.end.t)
            else:
                sink.warn("slur", "cross-part slur skipped")
        else:
            sink.warn("slur", f"unresolved slur reference {startid!r}/{endid!r}")

    for part in root.iter_parts():
        part.freeze()
    return ScoreDocument(root, "mei", sink.items)
